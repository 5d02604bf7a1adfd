#pragma once

#include <vector>

#include "sinkdiff/problem.hpp"

namespace sinkdiff {

// dP/dtheta stored as p slices of n x m matrices.
struct PlanDerivative {
  std::vector<MatrixXd> slices;

  static PlanDerivative zero(Eigen::Index n, Eigen::Index m, int p);
  double frobenius_norm() const;
};

double frobenius_distance(const PlanDerivative& lhs, const PlanDerivative& rhs);

}  // namespace sinkdiff
