#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sinkdiff/errors.hpp"

namespace sinkdiff {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One entropic transport problem at a fixed parameter value.
struct TransportInstance {
  MatrixXd cost;             // C, n x m
  VectorXd source_marginal;  // a > 0, length n
  VectorXd target_marginal;  // b > 0, length m
  double epsilon = 1.0;

  // Optional point clouds the cost was built from (rows() == 0 if absent).
  MatrixXd points_x;
  MatrixXd points_y;

  Eigen::Index rows() const { return cost.rows(); }
  Eigen::Index cols() const { return cost.cols(); }

  // Throws ValidationError naming the offending field.
  void validate() const;
};

// Directional derivative of (C, a, b, epsilon) along one parameter direction.
// d_source and d_target must sum to zero: admissible perturbations stay on
// the mass-balance constraint.
struct InstanceTangent {
  MatrixXd d_cost;
  VectorXd d_source;
  VectorXd d_target;
  double d_epsilon = 0.0;

  static InstanceTangent zero(Eigen::Index n, Eigen::Index m);
  void validate() const;
};

enum class MarginalSide { source, target };

// theta |-> (C, a, b, epsilon) together with analytic directional tangents.
// Evaluators are pure; all outputs satisfy TransportInstance invariants
// wherever evaluation succeeds.
struct Parametrization {
  int dim_theta = 0;
  std::function<TransportInstance(const VectorXd& theta)> evaluate;
  std::function<InstanceTangent(const VectorXd& theta, int direction)> tangent;
};

// p = 1; theta[0] is the regularization level. Rejects theta[0] <= 0.
Parametrization make_epsilon_parametrization(TransportInstance base);

// p = n (or m); the chosen marginal becomes softmax(theta). Requires unit
// total mass so the other marginal stays balanced.
Parametrization make_softmax_marginal_parametrization(TransportInstance base,
                                                      MarginalSide side);

// p = directions.size(); moves the chosen marginal along theta . directions.
// Each direction must sum to zero; evaluation rejects theta that drives any
// marginal entry to <= 0.
Parametrization make_direct_marginal_parametrization(
    TransportInstance base, MarginalSide side, std::vector<VectorXd> directions);

// Source cloud uniform in the square [-1/2,1/2]^2, target cloud uniform on
// the inscribed circle; Euclidean cost, uniform marginals. Deterministic in
// the seed (mt19937_64).
TransportInstance generate_point_cloud_instance(int n, int m, std::uint64_t seed,
                                                double epsilon = 0.1);

// JSON round trip: { "cost": [[..]], "a": [..], "b": [..], "epsilon": x }
// plus optional "points_x"/"points_y". Loading validates invariants.
TransportInstance load_instance(const std::string& path);
void save_instance(const TransportInstance& instance, const std::string& path);

}  // namespace sinkdiff
