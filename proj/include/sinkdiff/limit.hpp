#pragma once

#include "sinkdiff/jacobians.hpp"
#include "sinkdiff/plan_derivative.hpp"

namespace sinkdiff {

// Eigendecomposition of A = dF/dx at a fixed point, obtained through the
// symmetrization S^-1 A S with S = diag(1/sqrt(a)). A = Q diag(eigenvalues) Q^-1
// with Q = S U and Q^-1 = U^T S^-1 for an orthogonal U.
struct FixedPointSpectrum {
  VectorXd eigenvalues;    // sorted descending, real, in [-1, 1]
  MatrixXd basis;          // Q, columns are eigenvectors of A
  MatrixXd basis_inverse;  // Q^-1 (explicit, no general inversion)
  VectorXd scaling;        // diagonal of S = 1/sqrt(a)
  int unit_index = 0;      // position of the eigenvalue equal to 1
  double second_eigenvalue = 0.0;  // largest |.| among the others
};

// Tolerance for detecting the simple unit eigenvalue.
inline constexpr double kTolEigenvalueOne = 1e-8;

// Requires marginal_violation(xbar) <= 1e-8. Throws NumericError if zero or
// several eigenvalues sit within kTolEigenvalueOne of 1.
FixedPointSpectrum fixed_point_spectrum(const VectorXd& xbar,
                                        const TransportInstance& instance);

// (I - A)^# rhs = Q (I - E)^+ Q^-1 rhs: inverse on the eigenspaces with
// eigenvalue != 1, zero on the span of 1_n.
MatrixXd spectral_pseudo_inverse_apply(const FixedPointSpectrum& spectrum,
                                       const MatrixXd& rhs);

// Solves (I - G) X = rhs; I - G is invertible since the spectral radius of
// G is < 1. Throws NumericError with the condition estimate on failure.
MatrixXd resolvent_apply(const VectorXd& xbar, const TransportInstance& instance,
                         const MatrixXd& rhs);

enum class DerivativeRoute { spectral, resolvent };

// Closed-form limit derivative
//   dPhat/dtheta = dP/dx (I - A)^# B + dP/dtheta,
// with B assembled column-wise from the parametrization tangents. Requires
// xbar to satisfy marginal_violation(xbar) <= 1e-10.
PlanDerivative limit_plan_derivative(const VectorXd& xbar,
                                     const TransportInstance& instance,
                                     const Parametrization& parametrization,
                                     const VectorXd& theta,
                                     DerivativeRoute route = DerivativeRoute::resolvent);

}  // namespace sinkdiff
