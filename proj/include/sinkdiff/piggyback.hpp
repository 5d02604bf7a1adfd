#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sinkdiff/jacobians.hpp"
#include "sinkdiff/plan_derivative.hpp"
#include "sinkdiff/sinkhorn.hpp"

namespace sinkdiff {

// Per-iteration distances to the chosen reference, filled after the run.
struct DerivativeTrace {
  std::vector<int> iter;
  std::vector<double> plan_err;            // ||P_k - P_ref||_F
  std::vector<double> deriv_err;           // ||dP_k - dP_ref||_F over all slices
  std::vector<double> marginal_violation;
};

// One raw piggyback update: x <- F(x), column j of xdot <- A xdot_j + B_j,
// with A and B evaluated at the pre-update iterate.
std::pair<VectorXd, MatrixXd> piggyback_step(const VectorXd& x,
                                             const MatrixXd& xdot,
                                             const TransportInstance& instance,
                                             const Parametrization& parametrization,
                                             const VectorXd& theta);

// Same update through the reduced Jacobian G = A - 1 v^T; contractive, so
// the derivative state itself converges.
std::pair<VectorXd, MatrixXd> reduced_piggyback_step(
    const VectorXd& x, const MatrixXd& dmatrix, const TransportInstance& instance,
    const Parametrization& parametrization, const VectorXd& theta);

// dP_k/dtheta slice j = dP/dx D_j + dP/dtheta_j at the current iterate.
PlanDerivative plan_derivative_at(const VectorXd& x, const MatrixXd& dmatrix,
                                  const TransportInstance& instance,
                                  const Parametrization& parametrization,
                                  const VectorXd& theta);

enum class TraceReference { final_iterate, closed_form };

struct PiggybackOptions {
  double tol = 1e-10;
  int max_iter = 100000;
  bool record = false;
  TraceReference reference = TraceReference::final_iterate;
  MatrixXd d0;  // dx0/dtheta; empty means zero (constant initializer)
};

struct PiggybackResult {
  SolveReport report;
  PlanDerivative derivative;
  DerivativeTrace trace;
};

// Runs the reduced recursion D_{k+1} = G_k D_k + B_k alongside the primal
// iteration until both the marginal violation and the derivative Cauchy
// increment drop below tol. Non-convergence is flagged in the report with
// the partial trace returned.
PiggybackResult run_with_derivatives(const Parametrization& parametrization,
                                     const VectorXd& theta, const VectorXd& x0,
                                     const PiggybackOptions& options = {});

// Writes "iter,plan_err,deriv_err,marginal_violation" rows.
void write_study_csv(const std::string& path, const DerivativeTrace& trace);

}  // namespace sinkdiff
