#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sinkdiff/problem.hpp"

namespace sinkdiff::testsupport {

// Random dense instance with unit-mass marginals bounded away from zero.
inline TransportInstance random_instance(int n, int m, double epsilon,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TransportInstance inst;
  inst.cost.resize(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) inst.cost(i, j) = unit(rng);
  inst.source_marginal.resize(n);
  for (int i = 0; i < n; ++i) inst.source_marginal[i] = 0.2 + unit(rng);
  inst.source_marginal /= inst.source_marginal.sum();
  inst.target_marginal.resize(m);
  for (int j = 0; j < m; ++j) inst.target_marginal[j] = 0.2 + unit(rng);
  inst.target_marginal /= inst.target_marginal.sum();
  inst.epsilon = epsilon;
  inst.validate();
  return inst;
}

inline TransportInstance constant_cost_instance(int n, int m, double cost_value,
                                                double epsilon, std::uint64_t seed) {
  TransportInstance inst = random_instance(n, m, epsilon, seed);
  inst.cost.setConstant(cost_value);
  return inst;
}

inline VectorXd random_vector(int n, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sym(-scale, scale);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = sym(rng);
  return v;
}

// n-1 pairwise difference directions, each summing to zero.
inline std::vector<VectorXd> difference_directions(Eigen::Index n) {
  std::vector<VectorXd> directions;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    VectorXd d = VectorXd::Zero(n);
    d[i] = 1.0 / std::sqrt(2.0);
    d[i + 1] = -1.0 / std::sqrt(2.0);
    directions.push_back(d);
  }
  return directions;
}

}  // namespace sinkdiff::testsupport
