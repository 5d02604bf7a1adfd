#pragma once

#include <vector>

#include "sinkdiff/problem.hpp"

namespace sinkdiff {

// naive: explicit Gibbs kernel, fails loudly on under/overflow.
// lse: nested log-sum-exp evaluation, safe for any finite input.
enum class KernelMode { naive, lse };

struct SinkhornState {
  VectorXd x;                      // log scaling, x = log u
  int iteration = 0;
  double marginal_violation = 0.0;  // || plan(x) 1_m - a ||_inf
};

struct IterationRecord {
  int iter = 0;
  double marginal_violation = 0.0;
  double hilbert_step = 0.0;    // d_H(u_{k+1}, u_k) = ||x_{k+1} - x_k||_var
  double variation_step = 0.0;  // ||center(x_{k+1}) - center(x_k)||_inf
};

struct SolveReport {
  SinkhornState final_state;
  bool converged = false;
  std::vector<IterationRecord> history;  // filled when record = true
  std::vector<VectorXd> iterates;        // x_0 .. x_N when record = true
};

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 100000;
  bool record = false;
  KernelMode mode = KernelMode::lse;
};

// K_ij = exp(-C_ij / epsilon); throws NumericError if any entry underflows
// to exact zero (use lse mode instead).
MatrixXd gibbs_kernel(const TransportInstance& instance);

// One log-domain update F(x) = log a - log(K (b / K^T e^x)).
VectorXd step(const VectorXd& x, const TransportInstance& instance);
VectorXd step_lse(const VectorXd& x, const TransportInstance& instance);
VectorXd step(const VectorXd& x, const TransportInstance& instance, KernelMode mode);

// P(x) = diag(e^x) K diag(b / K^T e^x); column sums equal b by construction.
MatrixXd plan(const VectorXd& x, const TransportInstance& instance,
              KernelMode mode = KernelMode::naive);

double marginal_violation(const VectorXd& x, const TransportInstance& instance,
                          KernelMode mode = KernelMode::lse);

// Iterates x <- F(x) until the source marginal violation drops below tol.
// Non-convergence is reported through converged = false, never thrown.
SolveReport solve(const TransportInstance& instance, const VectorXd& x0,
                  const SolveOptions& options = {});

VectorXd center(const VectorXd& x);
double variation_seminorm(const VectorXd& x);

// d_H(u, u') = || log u - log u' ||_var on positive vectors.
double hilbert_distance(const VectorXd& u, const VectorXd& v);

struct ContractionRatio {
  double theta = 1.0;  // max_{i,j,k,l} K_ik K_jl / (K_jk K_il)
  double kappa = 0.0;  // (sqrt(theta) - 1) / (sqrt(theta) + 1)
};

// Exhaustive O(n^2 m^2) scan over index quadruples; rejects n*m > 10^4.
ContractionRatio contraction_ratio(const MatrixXd& kernel);

}  // namespace sinkdiff
