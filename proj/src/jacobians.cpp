#include "sinkdiff/jacobians.hpp"

#include <cassert>
#include <cmath>

#include "kernel_terms.hpp"

namespace sinkdiff {

MatrixXd jacobian_F_x(const VectorXd& x, const TransportInstance& instance) {
  const auto terms = detail::KernelTerms::at(x, instance);
  // A = diag(1/s) K diag(b/t^2) K^T diag(e^x)
  const VectorXd b_over_t2 =
      instance.target_marginal.array() / terms.t.array().square();
  MatrixXd A = terms.s.cwiseInverse().asDiagonal() *
               (terms.K * b_over_t2.asDiagonal() * terms.K.transpose()) *
               terms.ex.asDiagonal();
#ifndef NDEBUG
  {
    // Equivalent plan-based form: diag(1/(P 1_m)) P diag(1/b) P^T.
    const MatrixXd P = terms.plan();
    const VectorXd row_sums = P.rowwise().sum();
    const MatrixXd A2 = row_sums.cwiseInverse().asDiagonal() * P *
                        instance.target_marginal.cwiseInverse().asDiagonal() *
                        P.transpose();
    assert((A - A2).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + A.cwiseAbs().maxCoeff()));
  }
#endif
  return A;
}

std::pair<double, VectorXd> left_eigenvector(const VectorXd& x,
                                             const TransportInstance& instance) {
  const auto terms = detail::KernelTerms::at(x, instance);
  // a . e^x / e^F(x) = e^x . s = P(x) 1_m
  const VectorXd w = terms.ex.cwiseProduct(terms.s);
  const double alpha = w.sum();
  return {alpha, w / alpha};
}

JacobianBundle reduced_jacobian(const VectorXd& x, const TransportInstance& instance) {
  JacobianBundle bundle;
  bundle.A = jacobian_F_x(x, instance);
  auto [alpha, v] = left_eigenvector(x, instance);
  bundle.alpha = alpha;
  bundle.v = std::move(v);
  bundle.G = bundle.A - VectorXd::Ones(bundle.A.rows()) * bundle.v.transpose();
  return bundle;
}

VectorXd f_theta_jvp(const VectorXd& x, const TransportInstance& instance,
                     const InstanceTangent& tangent) {
  const auto terms = detail::KernelTerms::at(x, instance);
  tangent.validate();
  const double eps = instance.epsilon;

  // dK_ij = K_ij (-dC_ij/eps + C_ij deps/eps^2)
  const MatrixXd dK =
      terms.K.array() * (-tangent.d_cost.array() / eps +
                         instance.cost.array() * (tangent.d_epsilon / (eps * eps)));

  const VectorXd dt = dK.transpose() * terms.ex;
  const VectorXd dw = tangent.d_target.cwiseQuotient(terms.t) -
                      instance.target_marginal.cwiseProduct(dt).cwiseQuotient(
                          terms.t.cwiseProduct(terms.t));
  const VectorXd ds = dK * terms.w + terms.K * dw;

  return tangent.d_source.cwiseQuotient(instance.source_marginal) -
         ds.cwiseQuotient(terms.s);
}

MatrixXd plan_x_jvp(const VectorXd& x, const TransportInstance& instance,
                    const VectorXd& xdot) {
  const auto terms = detail::KernelTerms::at(x, instance);
  if (xdot.size() != x.size())
    throw ValidationError("xdot: length must match x");
  // dP = P . (xdot 1^T - 1 (dt/t)^T) with dt = K^T (e^x . xdot)
  const MatrixXd P = terms.plan();
  const VectorXd dt = terms.K.transpose() * terms.ex.cwiseProduct(xdot);
  const VectorXd dt_over_t = dt.cwiseQuotient(terms.t);
  return P.array() * (xdot.replicate(1, P.cols()).array() -
                      dt_over_t.transpose().replicate(P.rows(), 1).array());
}

MatrixXd plan_theta_jvp(const VectorXd& x, const TransportInstance& instance,
                        const InstanceTangent& tangent) {
  const auto terms = detail::KernelTerms::at(x, instance);
  tangent.validate();
  const double eps = instance.epsilon;

  const MatrixXd dK =
      terms.K.array() * (-tangent.d_cost.array() / eps +
                         instance.cost.array() * (tangent.d_epsilon / (eps * eps)));
  const VectorXd dt = dK.transpose() * terms.ex;
  const VectorXd dw = tangent.d_target.cwiseQuotient(terms.t) -
                      instance.target_marginal.cwiseProduct(dt).cwiseQuotient(
                          terms.t.cwiseProduct(terms.t));
  // dP = diag(e^x) (dK diag(w) + K diag(dw))
  return terms.ex.asDiagonal() *
         (dK * terms.w.asDiagonal() + terms.K * dw.asDiagonal());
}

}  // namespace sinkdiff
