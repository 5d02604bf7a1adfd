#pragma once

#include "sinkdiff/plan_derivative.hpp"
#include "sinkdiff/problem.hpp"

namespace sinkdiff {

// Finite differences always run in lse mode so oracle failures stay
// decoupled from kernel underflow.
struct FdConfig {
  double step = 1e-6;        // scaled by 1 + |theta_j| per direction
  double inner_tol = 1e-13;  // Sinkhorn tolerance for limit - derivative oracles
  int inner_max_iter = 400000;
};

// Central differences of F in x, column by column.
MatrixXd fd_jacobian_F_x(const VectorXd& x, const TransportInstance& instance,
                         const FdConfig& config = {});

// Solves the fixed point at theta +- h e_j and differences the plans.
// Throws NumericError if either inner solve fails to converge.
MatrixXd fd_limit_derivative(const Parametrization& parametrization,
                             const VectorXd& theta, int direction,
                             const FdConfig& config = {});

// Runs exactly k iterations from the same x0 at theta +- h e_j and
// differences P_k; differentiates the truncated algorithm itself.
MatrixXd fd_iterate_derivative(const Parametrization& parametrization,
                               const VectorXd& theta, int direction, int k,
                               const VectorXd& x0, const FdConfig& config = {});

}  // namespace sinkdiff
