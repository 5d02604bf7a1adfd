#include "sinkdiff/piggyback.hpp"

#include <fstream>
#include <vector>

#include "sinkdiff/limit.hpp"

namespace sinkdiff {

namespace {

MatrixXd tangent_matrix(const VectorXd& x, const TransportInstance& instance,
                        const std::vector<InstanceTangent>& tangents) {
  MatrixXd B(x.size(), static_cast<Eigen::Index>(tangents.size()));
  for (std::size_t j = 0; j < tangents.size(); ++j)
    B.col(static_cast<Eigen::Index>(j)) = f_theta_jvp(x, instance, tangents[j]);
  return B;
}

std::vector<InstanceTangent> all_tangents(const Parametrization& parametrization,
                                          const VectorXd& theta) {
  std::vector<InstanceTangent> tangents;
  tangents.reserve(static_cast<std::size_t>(parametrization.dim_theta));
  for (int j = 0; j < parametrization.dim_theta; ++j)
    tangents.push_back(parametrization.tangent(theta, j));
  return tangents;
}

}  // namespace

std::pair<VectorXd, MatrixXd> piggyback_step(const VectorXd& x,
                                             const MatrixXd& xdot,
                                             const TransportInstance& instance,
                                             const Parametrization& parametrization,
                                             const VectorXd& theta) {
  if (xdot.rows() != x.size() || xdot.cols() != parametrization.dim_theta)
    throw ValidationError("piggyback_step: derivative state has wrong shape");
  const MatrixXd A = jacobian_F_x(x, instance);
  const MatrixXd B = tangent_matrix(x, instance, all_tangents(parametrization, theta));
  return {step(x, instance), A * xdot + B};
}

std::pair<VectorXd, MatrixXd> reduced_piggyback_step(
    const VectorXd& x, const MatrixXd& dmatrix, const TransportInstance& instance,
    const Parametrization& parametrization, const VectorXd& theta) {
  if (dmatrix.rows() != x.size() || dmatrix.cols() != parametrization.dim_theta)
    throw ValidationError("reduced_piggyback_step: derivative state has wrong shape");
  const auto bundle = reduced_jacobian(x, instance);
  const MatrixXd B = tangent_matrix(x, instance, all_tangents(parametrization, theta));
  return {step(x, instance), bundle.G * dmatrix + B};
}

PlanDerivative plan_derivative_at(const VectorXd& x, const MatrixXd& dmatrix,
                                  const TransportInstance& instance,
                                  const Parametrization& parametrization,
                                  const VectorXd& theta) {
  const int p = parametrization.dim_theta;
  if (dmatrix.rows() != x.size() || dmatrix.cols() != p)
    throw ValidationError("plan_derivative_at: derivative state has wrong shape");
  PlanDerivative out;
  out.slices.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    out.slices.push_back(
        plan_x_jvp(x, instance, dmatrix.col(j)) +
        plan_theta_jvp(x, instance, parametrization.tangent(theta, j)));
  }
  return out;
}

PiggybackResult run_with_derivatives(const Parametrization& parametrization,
                                     const VectorXd& theta, const VectorXd& x0,
                                     const PiggybackOptions& options) {
  if (!(options.tol > 0.0)) throw ValidationError("tol: must be positive");
  const TransportInstance instance = parametrization.evaluate(theta);
  instance.validate();
  const auto tangents = all_tangents(parametrization, theta);
  const int p = parametrization.dim_theta;
  const auto n = instance.rows();

  MatrixXd D = options.d0.size() > 0 ? options.d0 : MatrixXd::Zero(n, p);
  if (D.rows() != n || D.cols() != p)
    throw ValidationError("d0: shape must be n x dim_theta");

  PiggybackResult result;
  VectorXd x = x0;
  auto derivative_at = [&](const VectorXd& xx, const MatrixXd& dd) {
    PlanDerivative d;
    d.slices.reserve(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j)
      d.slices.push_back(plan_x_jvp(xx, instance, dd.col(j)) +
                         plan_theta_jvp(xx, instance, tangents[j]));
    return d;
  };

  PlanDerivative dP = derivative_at(x, D);
  double viol = marginal_violation(x, instance, KernelMode::naive);

  std::vector<MatrixXd> plans;
  std::vector<PlanDerivative> derivs;
  auto record = [&](int iter) {
    if (!options.record) return;
    plans.push_back(plan(x, instance));
    derivs.push_back(dP);
    result.trace.iter.push_back(iter);
    result.trace.marginal_violation.push_back(viol);
  };
  record(0);
  if (options.record) {
    result.report.iterates.push_back(x);
    result.report.history.push_back({0, viol, 0.0, 0.0});
  }

  int iter = 0;
  bool derivative_settled = false;
  while (iter < options.max_iter && !(viol <= options.tol && derivative_settled)) {
    const auto bundle = reduced_jacobian(x, instance);
    const MatrixXd B = tangent_matrix(x, instance, tangents);
    const VectorXd x_next = step(x, instance);
    D = bundle.G * D + B;
    ++iter;

    const PlanDerivative dP_next = derivative_at(x_next, D);
    derivative_settled = frobenius_distance(dP_next, dP) <=
                         options.tol * (1.0 + dP_next.frobenius_norm());
    dP = dP_next;
    viol = marginal_violation(x_next, instance, KernelMode::naive);
    if (options.record) {
      result.report.iterates.push_back(x_next);
      result.report.history.push_back(
          {iter, viol, variation_seminorm(x_next - x),
           (center(x_next) - center(x)).lpNorm<Eigen::Infinity>()});
    }
    x = x_next;
    record(iter);
  }

  result.report.final_state = {x, iter, viol};
  result.report.converged = viol <= options.tol && derivative_settled;
  result.derivative = dP;

  if (options.record && !plans.empty()) {
    MatrixXd plan_ref = plans.back();
    PlanDerivative deriv_ref = derivs.back();
    if (options.reference == TraceReference::closed_form) {
      plan_ref = plan(x, instance);
      deriv_ref = limit_plan_derivative(x, instance, parametrization, theta);
    }
    result.trace.plan_err.reserve(plans.size());
    result.trace.deriv_err.reserve(derivs.size());
    for (std::size_t k = 0; k < plans.size(); ++k) {
      result.trace.plan_err.push_back((plans[k] - plan_ref).norm());
      result.trace.deriv_err.push_back(frobenius_distance(derivs[k], deriv_ref));
    }
  }
  return result;
}

void write_study_csv(const std::string& path, const DerivativeTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write CSV file: " + path);
  out << "iter,plan_err,deriv_err,marginal_violation\n";
  out.precision(17);
  for (std::size_t k = 0; k < trace.iter.size(); ++k) {
    out << trace.iter[k] << ',' << trace.plan_err[k] << ',' << trace.deriv_err[k]
        << ',' << trace.marginal_violation[k] << '\n';
  }
}

}  // namespace sinkdiff
