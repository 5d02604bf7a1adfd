#pragma once

#include <utility>

#include "sinkdiff/problem.hpp"

namespace sinkdiff {

// Derivative data of F at one point x. A is row-stochastic with a simple
// eigenvalue 1; v is the matching normalized left eigenvector; G = A - 1 v^T
// has the same spectrum with the 1 replaced by 0, hence spectral radius < 1.
struct JacobianBundle {
  MatrixXd A;    // dF/dx, n x n
  VectorXd v;    // positive, sums to 1, A^T v = v
  double alpha;  // normalizer 1^T (a . e^x / e^F(x))
  MatrixXd G;    // A - 1_n v^T
};

// dF/dx = diag(1/(K(b/K^T e^x))) K diag(b/(K^T e^x)^2) K^T diag(e^x).
// Debug builds assert agreement with the equivalent plan-based form.
MatrixXd jacobian_F_x(const VectorXd& x, const TransportInstance& instance);

// (alpha, v) with v = (a . e^x / e^F(x)) / alpha; v equals the normalized
// row-sum vector of the plan at x.
std::pair<double, VectorXd> left_eigenvector(const VectorXd& x,
                                             const TransportInstance& instance);

JacobianBundle reduced_jacobian(const VectorXd& x, const TransportInstance& instance);

// dF/dtheta applied to one tangent direction: (1/a) . da plus the b- and
// kernel-route terms of d log(K (b / K^T e^x)), with
// dK_ij = K_ij (-dC_ij/eps + C_ij deps/eps^2).
VectorXd f_theta_jvp(const VectorXd& x, const TransportInstance& instance,
                     const InstanceTangent& tangent);

// Directional derivative of P(x) in x; annihilates xdot = 1_n.
MatrixXd plan_x_jvp(const VectorXd& x, const TransportInstance& instance,
                    const VectorXd& xdot);

// Directional derivative of P(x, theta) in theta at fixed x; column sums of
// the result equal d_target.
MatrixXd plan_theta_jvp(const VectorXd& x, const TransportInstance& instance,
                        const InstanceTangent& tangent);

}  // namespace sinkdiff
