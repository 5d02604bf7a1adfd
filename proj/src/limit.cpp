#include "sinkdiff/limit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sinkdiff/sinkhorn.hpp"

namespace sinkdiff {

PlanDerivative PlanDerivative::zero(Eigen::Index n, Eigen::Index m, int p) {
  PlanDerivative d;
  d.slices.assign(static_cast<std::size_t>(p), MatrixXd::Zero(n, m));
  return d;
}

double PlanDerivative::frobenius_norm() const {
  double sum = 0.0;
  for (const auto& slice : slices) sum += slice.squaredNorm();
  return std::sqrt(sum);
}

double frobenius_distance(const PlanDerivative& lhs, const PlanDerivative& rhs) {
  if (lhs.slices.size() != rhs.slices.size())
    throw ValidationError("PlanDerivative: slice count mismatch");
  double sum = 0.0;
  for (std::size_t j = 0; j < lhs.slices.size(); ++j)
    sum += (lhs.slices[j] - rhs.slices[j]).squaredNorm();
  return std::sqrt(sum);
}

FixedPointSpectrum fixed_point_spectrum(const VectorXd& xbar,
                                        const TransportInstance& instance) {
  const double viol = marginal_violation(xbar, instance);
  if (viol > 1e-8) {
    std::ostringstream msg;
    msg << "fixed_point_spectrum: xbar is not a fixed point "
        << "(marginal violation " << viol << " > 1e-8)";
    throw ValidationError(msg.str());
  }

  const MatrixXd A = jacobian_F_x(xbar, instance);
  const VectorXd inv_sqrt_a = instance.source_marginal.array().rsqrt();
  const VectorXd sqrt_a = instance.source_marginal.array().sqrt();
  // S^-1 A S with S = diag(1/sqrt(a)) is symmetric at a fixed point.
  MatrixXd sym = sqrt_a.asDiagonal() * A * inv_sqrt_a.asDiagonal();
  sym = 0.5 * (sym + sym.transpose());  // strip rounding asymmetry

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success)
    throw NumericError("fixed_point_spectrum: eigendecomposition failed");

  const auto n = A.rows();
  FixedPointSpectrum out;
  out.scaling = inv_sqrt_a;
  out.eigenvalues.resize(n);
  out.basis.resize(n, n);
  out.basis_inverse.resize(n, n);
  // SelfAdjointEigenSolver sorts ascending; flip to descending.
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = n - 1 - i;
    out.eigenvalues[i] = eig.eigenvalues()[src];
    out.basis.col(i) = inv_sqrt_a.cwiseProduct(eig.eigenvectors().col(src));
    out.basis_inverse.row(i) =
        eig.eigenvectors().col(src).cwiseProduct(sqrt_a).transpose();
  }

  int unit_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(out.eigenvalues[i] - 1.0) <= kTolEigenvalueOne) {
      out.unit_index = static_cast<int>(i);
      ++unit_count;
    }
  }
  if (unit_count != 1) {
    std::ostringstream msg;
    msg << "fixed_point_spectrum: expected exactly one eigenvalue within "
        << kTolEigenvalueOne << " of 1, found " << unit_count
        << " (non-converged fixed point or degenerate instance)";
    throw NumericError(msg.str());
  }
  out.second_eigenvalue = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<int>(i) == out.unit_index) continue;
    out.second_eigenvalue =
        std::max(out.second_eigenvalue, std::abs(out.eigenvalues[i]));
  }
  return out;
}

MatrixXd spectral_pseudo_inverse_apply(const FixedPointSpectrum& spectrum,
                                       const MatrixXd& rhs) {
  if (rhs.rows() != spectrum.basis.rows())
    throw ValidationError("spectral_pseudo_inverse_apply: row count mismatch");
  const auto n = spectrum.eigenvalues.size();
  VectorXd gains(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double shifted = 1.0 - spectrum.eigenvalues[i];
    gains[i] = std::abs(shifted) > kTolEigenvalueOne ? 1.0 / shifted : 0.0;
  }
  return spectrum.basis * gains.asDiagonal() * (spectrum.basis_inverse * rhs);
}

MatrixXd resolvent_apply(const VectorXd& xbar, const TransportInstance& instance,
                         const MatrixXd& rhs) {
  const auto bundle = reduced_jacobian(xbar, instance);
  const auto n = bundle.G.rows();
  const MatrixXd system = MatrixXd::Identity(n, n) - bundle.G;
  Eigen::PartialPivLU<MatrixXd> lu(system);
  const double rcond = lu.rcond();
  if (!std::isfinite(rcond) || rcond < 1e-14) {
    std::ostringstream msg;
    msg << "resolvent_apply: I - G is numerically singular "
        << "(reciprocal condition estimate " << rcond << ")";
    throw NumericError(msg.str());
  }
  return lu.solve(rhs);
}

PlanDerivative limit_plan_derivative(const VectorXd& xbar,
                                     const TransportInstance& instance,
                                     const Parametrization& parametrization,
                                     const VectorXd& theta, DerivativeRoute route) {
  const double viol = marginal_violation(xbar, instance);
  if (viol > 1e-10) {
    std::ostringstream msg;
    msg << "limit_plan_derivative: xbar is not a fixed point "
        << "(marginal violation " << viol << " > 1e-10)";
    throw ValidationError(msg.str());
  }

  const int p = parametrization.dim_theta;
  const auto n = instance.rows();
  std::vector<InstanceTangent> tangents;
  tangents.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) tangents.push_back(parametrization.tangent(theta, j));

  MatrixXd B(n, p);
  for (int j = 0; j < p; ++j) B.col(j) = f_theta_jvp(xbar, instance, tangents[j]);

  MatrixXd limit_tangent;  // (I - A)^# B or (I - G)^-1 B
  if (route == DerivativeRoute::spectral) {
    const auto spectrum = fixed_point_spectrum(xbar, instance);
    limit_tangent = spectral_pseudo_inverse_apply(spectrum, B);
  } else {
    limit_tangent = resolvent_apply(xbar, instance, B);
  }

  PlanDerivative out;
  out.slices.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    out.slices.push_back(plan_x_jvp(xbar, instance, limit_tangent.col(j)) +
                         plan_theta_jvp(xbar, instance, tangents[j]));
  }
  return out;
}

}  // namespace sinkdiff
