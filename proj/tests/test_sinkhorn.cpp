#include <doctest.h>

#include <cmath>

#include "sinkdiff/sinkhorn.hpp"
#include "support.hpp"

using namespace sinkdiff;
using testsupport::constant_cost_instance;
using testsupport::random_instance;
using testsupport::random_vector;

TEST_CASE("gibbs kernel") {
  auto inst = random_instance(3, 2, 0.7, 1);
  inst.cost.setZero();
  CHECK(gibbs_kernel(inst).isOnes(0.0));

  auto half = random_instance(1, 1, 0.7, 2);
  half.cost(0, 0) = half.epsilon * std::log(2.0);
  CHECK(gibbs_kernel(half)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  auto hard = random_instance(2, 2, 0.01, 3);
  hard.cost(1, 1) = 1000.0;
  CHECK_THROWS_AS(gibbs_kernel(hard), NumericError);
  CHECK_NOTHROW(step_lse(VectorXd::Zero(2), hard));
}

TEST_CASE("step on constant cost") {
  // K = e^{-c/eps} ones, so F(x) = log a + log(sum_l e^{x_l}) (Sb = 1).
  auto inst = constant_cost_instance(5, 3, 2.0, 0.8, 4);
  const VectorXd x = random_vector(5, 1.0, 5);
  const VectorXd expected =
      (inst.source_marginal.array().log() + std::log(x.array().exp().sum()))
          .matrix();
  CHECK((step(x, inst) - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("step translation invariance") {
  auto inst = random_instance(6, 4, 0.5, 6);
  const VectorXd x = random_vector(6, 2.0, 7);
  const double lambda = 1.37;
  const VectorXd shifted = step((x.array() + lambda).matrix(), inst);
  const VectorXd base = step(x, inst);
  CHECK(((shifted - base).array() - lambda).abs().maxCoeff() <= 1e-12);

  const VectorXd shifted_lse = step_lse((x.array() + lambda).matrix(), inst);
  const VectorXd base_lse = step_lse(x, inst);
  CHECK(((shifted_lse - base_lse).array() - lambda).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("step and step_lse agree") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto inst = random_instance(5, 4, 0.1 + 0.3 * static_cast<double>(seed), seed + 10);
    const VectorXd x = random_vector(5, 2.0, seed + 20);
    CHECK((step(x, inst) - step_lse(x, inst)).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("plan properties") {
  auto inst = random_instance(6, 4, 0.4, 30);
  const VectorXd x = random_vector(6, 1.5, 31);
  const MatrixXd P = plan(x, inst);
  CHECK((P.array() > 0.0).all());

  // column sums equal b by construction
  const VectorXd col_sums = P.colwise().sum();
  CHECK((col_sums - inst.target_marginal)
            .cwiseQuotient(inst.target_marginal)
            .lpNorm<Eigen::Infinity>() <= 1e-14);

  // P(x + lambda 1) = P(x)
  const MatrixXd shifted = plan((x.array() + 0.83).matrix(), inst);
  CHECK((shifted - P).cwiseAbs().maxCoeff() <= 1e-12 * P.maxCoeff());

  // lse-mode plan matches
  CHECK((plan(x, inst, KernelMode::lse) - P).cwiseAbs().maxCoeff() <=
        1e-12 * P.maxCoeff());

  // constant cost at x = log a gives the product coupling
  auto cc = constant_cost_instance(5, 3, 1.0, 0.6, 32);
  const MatrixXd product = cc.source_marginal * cc.target_marginal.transpose();
  CHECK((plan(cc.source_marginal.array().log().matrix(), cc) - product)
            .cwiseAbs()
            .maxCoeff() <= 1e-14);
}

TEST_CASE("solve") {
  SUBCASE("constant cost converges immediately") {
    auto inst = constant_cost_instance(5, 3, 1.5, 0.7, 40);
    const auto report = solve(inst, VectorXd::Zero(5), {.tol = 1e-12});
    CHECK(report.converged);
    CHECK(report.final_state.iteration <= 2);
    const MatrixXd P = plan(report.final_state.x, inst);
    const MatrixXd product = inst.source_marginal * inst.target_marginal.transpose();
    CHECK((P - product).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("1x1 instance") {
    auto inst = random_instance(1, 1, 0.5, 41);
    const auto report = solve(inst, VectorXd::Zero(1), {.tol = 1e-12});
    CHECK(report.converged);
    CHECK(report.final_state.iteration <= 1);
    CHECK(plan(report.final_state.x, inst)(0, 0) == doctest::Approx(1.0));
  }

  SUBCASE("random instance with history") {
    auto inst = random_instance(20, 10, 0.5, 42);
    SolveOptions options;
    options.tol = 1e-12;
    options.record = true;
    const auto report = solve(inst, VectorXd::Zero(20), options);
    CHECK(report.converged);
    CHECK(report.final_state.marginal_violation <= 1e-12);
    REQUIRE(report.history.size() ==
            static_cast<std::size_t>(report.final_state.iteration + 1));
    // non-increasing violations after burn-in
    const std::size_t burn = report.history.size() / 4;
    for (std::size_t k = burn; k + 1 < report.history.size(); ++k)
      CHECK(report.history[k + 1].marginal_violation <=
            report.history[k].marginal_violation * (1.0 + 1e-9));
  }

  SUBCASE("non-convergence is flagged, not thrown") {
    auto inst = random_instance(8, 6, 0.05, 43);
    const auto report = solve(inst, VectorXd::Zero(8), {.tol = 1e-13, .max_iter = 3});
    CHECK_FALSE(report.converged);
  }
}

TEST_CASE("center and variation seminorm") {
  VectorXd x(2);
  x << 1.0, 1.0;
  CHECK(center(x).isZero(0.0));
  x << 2.0, 0.0;
  CHECK(center(x)[0] == doctest::Approx(1.0));
  CHECK(center(x)[1] == doctest::Approx(-1.0));

  const VectorXd y = random_vector(9, 3.0, 50);
  CHECK((center(center(y)) - center(y)).lpNorm<Eigen::Infinity>() <=
        1e-13 * 9 * y.cwiseAbs().maxCoeff());

  CHECK(variation_seminorm(VectorXd::Constant(4, 2.7)) == 0.0);
  VectorXd z(3);
  z << 3.0, 1.0, 2.0;
  CHECK(variation_seminorm(z) == 2.0);
  CHECK(variation_seminorm((z.array() + 10.0).matrix()) ==
        doctest::Approx(variation_seminorm(z)));
}

TEST_CASE("centering is nonexpansive from the variation seminorm") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const VectorXd x = random_vector(7, 5.0, 2 * seed);
    const VectorXd y = random_vector(7, 5.0, 2 * seed + 1);
    CHECK((center(x) - center(y)).lpNorm<Eigen::Infinity>() <=
          variation_seminorm(x - y));
  }
}

TEST_CASE("hilbert distance") {
  const VectorXd u = random_vector(5, 1.0, 60).array().exp();
  CHECK(hilbert_distance(u, u) == 0.0);
  CHECK(hilbert_distance(u, 3.7 * u) <= 1e-14);
  VectorXd e1(2), ones(2);
  e1 << std::exp(1.0), 1.0;
  ones << 1.0, 1.0;
  CHECK(hilbert_distance(e1, ones) == doctest::Approx(1.0));
}

TEST_CASE("contraction ratio") {
  SUBCASE("rank-one kernel") {
    const MatrixXd K = MatrixXd::Ones(4, 3);
    const auto cr = contraction_ratio(K);
    CHECK(cr.theta == doctest::Approx(1.0));
    CHECK(cr.kappa == doctest::Approx(0.0));
  }
  SUBCASE("hand-checked 2x2") {
    MatrixXd K(2, 2);
    K << 1.0, 2.0, 2.0, 1.0;
    const auto cr = contraction_ratio(K);
    CHECK(cr.theta == doctest::Approx(4.0));
    CHECK(cr.kappa == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("scale invariance") {
    auto inst = random_instance(4, 5, 0.5, 70);
    const MatrixXd K = gibbs_kernel(inst);
    const auto a = contraction_ratio(K);
    const auto b = contraction_ratio(5.5 * K);
    CHECK(a.theta == doctest::Approx(b.theta).epsilon(1e-12));
  }
  SUBCASE("size guard") {
    CHECK_THROWS_AS(contraction_ratio(MatrixXd::Ones(101, 101)), ValidationError);
  }
}

TEST_CASE("two-iteration Hilbert contraction past burn-in") {
  auto inst = random_instance(6, 5, 0.3, 80);
  SolveOptions options;
  options.tol = 1e-14;
  options.record = true;
  const auto report = solve(inst, VectorXd::Zero(6), options);
  REQUIRE(report.converged);
  const auto kappa = contraction_ratio(gibbs_kernel(inst)).kappa;
  const VectorXd& x_final = report.iterates.back();
  const std::size_t last = report.iterates.size() - 1;
  int checked = 0;
  for (std::size_t k = 5; k + 2 < last; ++k) {
    const double d_k = variation_seminorm(report.iterates[k] - x_final);
    const double d_k2 = variation_seminorm(report.iterates[k + 2] - x_final);
    if (d_k < 1e-9) break;
    CHECK(d_k2 <= kappa * kappa * d_k * 1.1);
    ++checked;
  }
  CHECK(checked > 0);
}
