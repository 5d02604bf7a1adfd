#include "sinkdiff/oracle.hpp"

#include <cmath>
#include <sstream>

#include "sinkdiff/sinkhorn.hpp"

namespace sinkdiff {

namespace {

void check_config(const FdConfig& config) {
  if (!(config.step > 0.0)) throw ValidationError("fd step: must be positive");
  if (!(config.inner_tol > 0.0)) throw ValidationError("inner_tol: must be positive");
}

VectorXd solved_x(const TransportInstance& instance, const FdConfig& config) {
  SolveOptions options;
  options.tol = config.inner_tol;
  options.max_iter = config.inner_max_iter;
  options.mode = KernelMode::lse;
  const auto report = solve(instance, VectorXd::Zero(instance.rows()), options);
  if (!report.converged) {
    std::ostringstream msg;
    msg << "finite-difference oracle: inner solve did not reach tolerance "
        << config.inner_tol << " within " << config.inner_max_iter
        << " iterations (violation " << report.final_state.marginal_violation << ")";
    throw NumericError(msg.str());
  }
  return report.final_state.x;
}

}  // namespace

MatrixXd fd_jacobian_F_x(const VectorXd& x, const TransportInstance& instance,
                         const FdConfig& config) {
  check_config(config);
  const auto n = x.size();
  MatrixXd jac(n, n);
  const double h = config.step;
  for (Eigen::Index j = 0; j < n; ++j) {
    VectorXd xp = x;
    VectorXd xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (step_lse(xp, instance) - step_lse(xm, instance)) / (2.0 * h);
  }
  return jac;
}

MatrixXd fd_limit_derivative(const Parametrization& parametrization,
                             const VectorXd& theta, int direction,
                             const FdConfig& config) {
  check_config(config);
  if (direction < 0 || direction >= parametrization.dim_theta)
    throw ValidationError("fd_limit_derivative: direction out of range");
  const double h = config.step * (1.0 + std::abs(theta[direction]));
  VectorXd theta_p = theta;
  VectorXd theta_m = theta;
  theta_p[direction] += h;
  theta_m[direction] -= h;

  const TransportInstance inst_p = parametrization.evaluate(theta_p);
  const TransportInstance inst_m = parametrization.evaluate(theta_m);
  const MatrixXd plan_p = plan(solved_x(inst_p, config), inst_p, KernelMode::lse);
  const MatrixXd plan_m = plan(solved_x(inst_m, config), inst_m, KernelMode::lse);
  return (plan_p - plan_m) / (2.0 * h);
}

MatrixXd fd_iterate_derivative(const Parametrization& parametrization,
                               const VectorXd& theta, int direction, int k,
                               const VectorXd& x0, const FdConfig& config) {
  check_config(config);
  if (direction < 0 || direction >= parametrization.dim_theta)
    throw ValidationError("fd_iterate_derivative: direction out of range");
  if (k < 0) throw ValidationError("fd_iterate_derivative: k must be >= 0");
  const double h = config.step * (1.0 + std::abs(theta[direction]));
  VectorXd theta_p = theta;
  VectorXd theta_m = theta;
  theta_p[direction] += h;
  theta_m[direction] -= h;

  auto truncated_plan = [&](const VectorXd& shifted_theta) {
    const TransportInstance instance = parametrization.evaluate(shifted_theta);
    VectorXd x = x0;
    for (int i = 0; i < k; ++i) x = step_lse(x, instance);
    return plan(x, instance, KernelMode::lse);
  };
  return (truncated_plan(theta_p) - truncated_plan(theta_m)) / (2.0 * h);
}

}  // namespace sinkdiff
