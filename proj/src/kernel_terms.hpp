#pragma once

#include "sinkdiff/problem.hpp"
#include "sinkdiff/sinkhorn.hpp"

namespace sinkdiff::detail {

// Intermediates of F and P at one x in naive (explicit kernel) mode:
//   t = K^T e^x,  w = b / t,  s = K w,  F = log a - log s.
struct KernelTerms {
  MatrixXd K;
  VectorXd ex;  // e^x
  VectorXd t;
  VectorXd w;
  VectorXd s;

  static KernelTerms at(const VectorXd& x, const TransportInstance& instance);

  VectorXd f() const {  // F(x)
    return (instance_a.array().log() - s.array().log()).matrix();
  }

  MatrixXd plan() const {  // diag(e^x) K diag(w)
    return ex.asDiagonal() * K * w.asDiagonal();
  }

  VectorXd instance_a;
};

}  // namespace sinkdiff::detail
