#include "sinkdiff/sinkhorn.hpp"

#include <cmath>
#include <limits>

#include "kernel_terms.hpp"

namespace sinkdiff {

namespace detail {

KernelTerms KernelTerms::at(const VectorXd& x, const TransportInstance& instance) {
  if (!x.allFinite()) throw ValidationError("x: entries must be finite");
  if (x.size() != instance.rows())
    throw ValidationError("x: length must match cost rows");
  KernelTerms terms;
  terms.K = gibbs_kernel(instance);
  terms.ex = x.array().exp();
  terms.t = terms.K.transpose() * terms.ex;
  terms.w = instance.target_marginal.cwiseQuotient(terms.t);
  terms.s = terms.K * terms.w;
  terms.instance_a = instance.source_marginal;
  if (!terms.ex.allFinite() || !terms.t.allFinite() || !terms.w.allFinite() ||
      !terms.s.allFinite() || (terms.t.array() <= 0.0).any() ||
      (terms.s.array() <= 0.0).any()) {
    throw NumericError(
        "naive kernel evaluation overflowed or underflowed; use lse mode");
  }
  return terms;
}

}  // namespace detail

MatrixXd gibbs_kernel(const TransportInstance& instance) {
  instance.validate();
  MatrixXd K = (-instance.cost.array() / instance.epsilon).exp();
  // Vectorized exp saturates to a subnormal instead of flushing to zero, so
  // treat anything below the smallest normal double as underflow.
  if ((K.array() < std::numeric_limits<double>::min()).any())
    throw NumericError(
        "Gibbs kernel underflowed to zero (cost/epsilon too large); "
        "use lse mode");
  return K;
}

VectorXd step(const VectorXd& x, const TransportInstance& instance) {
  return detail::KernelTerms::at(x, instance).f();
}

namespace {

// log sum_i exp(v_i), shift-stabilized.
double log_sum_exp(const VectorXd& v) {
  const double shift = v.maxCoeff();
  return shift + std::log((v.array() - shift).exp().sum());
}

}  // namespace

VectorXd step_lse(const VectorXd& x, const TransportInstance& instance) {
  instance.validate();
  if (!x.allFinite()) throw ValidationError("x: entries must be finite");
  if (x.size() != instance.rows())
    throw ValidationError("x: length must match cost rows");
  const auto n = instance.rows();
  const auto m = instance.cols();
  const MatrixXd log_kernel = -instance.cost / instance.epsilon;

  // inner reduction: lse_l( logK_lj + x_l ) per column j
  VectorXd col_lse(m);
  for (Eigen::Index j = 0; j < m; ++j)
    col_lse[j] = log_sum_exp(log_kernel.col(j) + x);

  const VectorXd log_b = instance.target_marginal.array().log();
  VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd terms =
        log_kernel.row(i).transpose() + log_b - col_lse;
    out[i] = std::log(instance.source_marginal[i]) - log_sum_exp(terms);
  }
  return out;
}

VectorXd step(const VectorXd& x, const TransportInstance& instance, KernelMode mode) {
  return mode == KernelMode::naive ? step(x, instance) : step_lse(x, instance);
}

MatrixXd plan(const VectorXd& x, const TransportInstance& instance, KernelMode mode) {
  if (mode == KernelMode::naive)
    return detail::KernelTerms::at(x, instance).plan();

  instance.validate();
  if (!x.allFinite()) throw ValidationError("x: entries must be finite");
  const auto n = instance.rows();
  const auto m = instance.cols();
  const MatrixXd log_kernel = -instance.cost / instance.epsilon;
  VectorXd col_lse(m);
  for (Eigen::Index j = 0; j < m; ++j)
    col_lse[j] = log_sum_exp(log_kernel.col(j) + x);
  const VectorXd log_b = instance.target_marginal.array().log();
  MatrixXd P(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      P(i, j) = std::exp(x[i] + log_kernel(i, j) + log_b[j] - col_lse[j]);
  return P;
}

double marginal_violation(const VectorXd& x, const TransportInstance& instance,
                          KernelMode mode) {
  // P(x) 1_m = a . e^{x - F(x)}, so the violation only needs F.
  const VectorXd fx = step(x, instance, mode);
  const VectorXd row_sums =
      instance.source_marginal.array() * (x - fx).array().exp();
  return (row_sums - instance.source_marginal).lpNorm<Eigen::Infinity>();
}

SolveReport solve(const TransportInstance& instance, const VectorXd& x0,
                  const SolveOptions& options) {
  if (!(options.tol > 0.0)) throw ValidationError("tol: must be positive");
  instance.validate();

  SolveReport report;
  VectorXd x = x0;
  VectorXd fx = step(x, instance, options.mode);
  auto violation = [&](const VectorXd& xx, const VectorXd& fxx) {
    const VectorXd row_sums =
        instance.source_marginal.array() * (xx - fxx).array().exp();
    return (row_sums - instance.source_marginal).lpNorm<Eigen::Infinity>();
  };
  double viol = violation(x, fx);
  if (options.record) {
    report.iterates.push_back(x);
    report.history.push_back({0, viol, 0.0, 0.0});
  }

  int iter = 0;
  while (viol > options.tol && iter < options.max_iter) {
    const VectorXd x_next = fx;
    fx = step(x_next, instance, options.mode);
    ++iter;
    viol = violation(x_next, fx);
    if (options.record) {
      report.iterates.push_back(x_next);
      report.history.push_back(
          {iter, viol, variation_seminorm(x_next - x),
           (center(x_next) - center(x)).lpNorm<Eigen::Infinity>()});
    }
    x = x_next;
  }

  report.final_state = {x, iter, viol};
  report.converged = viol <= options.tol;
  return report;
}

VectorXd center(const VectorXd& x) {
  return x.array() - x.mean();
}

double variation_seminorm(const VectorXd& x) {
  return x.maxCoeff() - x.minCoeff();
}

double hilbert_distance(const VectorXd& u, const VectorXd& v) {
  if (u.size() != v.size())
    throw ValidationError("hilbert_distance: size mismatch");
  if (!(u.array() > 0.0).all() || !(v.array() > 0.0).all())
    throw ValidationError("hilbert_distance: vectors must be positive");
  return variation_seminorm(u.array().log().matrix() - v.array().log().matrix());
}

ContractionRatio contraction_ratio(const MatrixXd& kernel) {
  const auto n = kernel.rows();
  const auto m = kernel.cols();
  if (n * m > 10000)
    throw ValidationError(
        "contraction_ratio: exhaustive O(n^2 m^2) scan rejected for n*m > 1e4");
  if (!(kernel.array() > 0.0).all())
    throw ValidationError("contraction_ratio: kernel must be strictly positive");

  // Scan in the log domain; the ratio is scale invariant.
  const MatrixXd logK = kernel.array().log();
  double best = 0.0;  // log theta >= 0 (take i=j, k=l)
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < m; ++k)
        for (Eigen::Index l = 0; l < m; ++l) {
          const double value = logK(i, k) + logK(j, l) - logK(j, k) - logK(i, l);
          if (value > best) best = value;
        }
  ContractionRatio out;
  out.theta = std::exp(best);
  const double root = std::exp(0.5 * best);
  out.kappa = (root - 1.0) / (root + 1.0);
  return out;
}

}  // namespace sinkdiff
