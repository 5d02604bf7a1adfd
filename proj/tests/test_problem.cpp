#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "sinkdiff/problem.hpp"
#include "support.hpp"

using namespace sinkdiff;
using testsupport::random_instance;

namespace {

// Central finite difference of the evaluator along direction j, applied to
// every instance field; independent check of the analytic tangents.
InstanceTangent fd_tangent(const Parametrization& par, const VectorXd& theta, int j) {
  const double h = 1e-6 * (1.0 + std::abs(theta[j]));
  VectorXd tp = theta, tm = theta;
  tp[j] += h;
  tm[j] -= h;
  const auto ip = par.evaluate(tp);
  const auto im = par.evaluate(tm);
  InstanceTangent t;
  t.d_cost = (ip.cost - im.cost) / (2 * h);
  t.d_source = (ip.source_marginal - im.source_marginal) / (2 * h);
  t.d_target = (ip.target_marginal - im.target_marginal) / (2 * h);
  t.d_epsilon = (ip.epsilon - im.epsilon) / (2 * h);
  return t;
}

void check_tangent_against_fd(const Parametrization& par, const VectorXd& theta) {
  for (int j = 0; j < par.dim_theta; ++j) {
    const auto analytic = par.tangent(theta, j);
    analytic.validate();
    const auto fd = fd_tangent(par, theta, j);
    const double scale = 1.0 + std::abs(analytic.d_epsilon) +
                         analytic.d_source.cwiseAbs().maxCoeff() +
                         analytic.d_target.cwiseAbs().maxCoeff();
    CHECK((analytic.d_cost - fd.d_cost).cwiseAbs().maxCoeff() <= 1e-6 * scale);
    CHECK((analytic.d_source - fd.d_source).cwiseAbs().maxCoeff() <= 1e-6 * scale);
    CHECK((analytic.d_target - fd.d_target).cwiseAbs().maxCoeff() <= 1e-6 * scale);
    CHECK(std::abs(analytic.d_epsilon - fd.d_epsilon) <= 1e-6 * scale);
  }
}

}  // namespace

TEST_CASE("instance invariants") {
  auto inst = random_instance(4, 3, 0.5, 11);
  CHECK_NOTHROW(inst.validate());

  auto bad = inst;
  bad.source_marginal[0] = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = inst;
  bad.target_marginal *= 0.9;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = inst;
  bad.epsilon = -1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("epsilon parametrization") {
  auto base = random_instance(4, 3, 0.01, 7);
  auto par = make_epsilon_parametrization(base);
  CHECK(par.dim_theta == 1);

  VectorXd theta(1);
  theta << 0.01;
  const auto at_base = par.evaluate(theta);
  CHECK(at_base.epsilon == base.epsilon);
  CHECK(at_base.cost == base.cost);

  const auto t = par.tangent(theta, 0);
  CHECK(t.d_epsilon == 1.0);
  CHECK(t.d_cost.isZero(0.0));
  CHECK(t.d_source.isZero(0.0));
  CHECK(t.d_target.isZero(0.0));

  theta << -1.0;
  CHECK_THROWS_AS(par.evaluate(theta), DomainError);

  theta << 0.37;
  check_tangent_against_fd(par, theta);
}

TEST_CASE("softmax marginal parametrization") {
  auto base = random_instance(2, 2, 0.5, 5);
  auto par = make_softmax_marginal_parametrization(base, MarginalSide::source);
  CHECK(par.dim_theta == 2);

  const VectorXd zero = VectorXd::Zero(2);
  const auto uniform = par.evaluate(zero);
  CHECK(uniform.source_marginal[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(uniform.source_marginal[1] == doctest::Approx(0.5).epsilon(1e-15));

  const auto t = par.tangent(zero, 0);
  CHECK(t.d_source[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(t.d_source[1] == doctest::Approx(-0.25).epsilon(1e-9));
  CHECK(std::abs(t.d_source.sum()) <= 1e-15);

  auto big = random_instance(6, 4, 0.5, 19);
  for (auto side : {MarginalSide::source, MarginalSide::target}) {
    auto p = make_softmax_marginal_parametrization(big, side);
    const VectorXd theta = testsupport::random_vector(p.dim_theta, 2.0, 31);
    const auto inst = p.evaluate(theta);
    CHECK_NOTHROW(inst.validate());
    const VectorXd& marg =
        side == MarginalSide::source ? inst.source_marginal : inst.target_marginal;
    CHECK(std::abs(marg.sum() - 1.0) <= 1e-14);
    check_tangent_against_fd(p, theta);
  }
}

TEST_CASE("direct marginal parametrization") {
  auto base = random_instance(4, 3, 0.5, 23);
  auto directions = testsupport::difference_directions(4);
  auto par = make_direct_marginal_parametrization(base, MarginalSide::source,
                                                  directions);
  CHECK(par.dim_theta == 3);

  const VectorXd zero = VectorXd::Zero(3);
  const auto at_zero = par.evaluate(zero);
  CHECK(at_zero.source_marginal == base.source_marginal);

  // tangent check at an interior theta
  VectorXd theta = 0.01 * testsupport::random_vector(3, 1.0, 41);
  check_tangent_against_fd(par, theta);

  // non-zero-sum direction rejected
  VectorXd bad_dir = VectorXd::Zero(4);
  bad_dir[0] = 0.1;
  CHECK_THROWS_AS(make_direct_marginal_parametrization(base, MarginalSide::source,
                                                       {bad_dir}),
                  ValidationError);

  // theta driving an entry nonpositive
  VectorXd huge = VectorXd::Zero(3);
  huge[0] = -10.0;
  CHECK_THROWS_AS(par.evaluate(huge), DomainError);
}

TEST_CASE("point cloud generator") {
  const auto inst = generate_point_cloud_instance(100, 50, 17, 0.1);
  CHECK(inst.rows() == 100);
  CHECK(inst.cols() == 50);
  CHECK(inst.source_marginal[0] == doctest::Approx(0.01));
  CHECK(inst.target_marginal[0] == doctest::Approx(0.02));
  CHECK((inst.points_x.array().abs() <= 0.5).all());
  for (int j = 0; j < 50; ++j)
    CHECK(inst.points_y.row(j).norm() == doctest::Approx(0.5).epsilon(1e-12));

  const auto again = generate_point_cloud_instance(100, 50, 17, 0.1);
  CHECK(inst.cost == again.cost);

  const auto tiny = generate_point_cloud_instance(1, 1, 3, 0.1);
  CHECK(tiny.rows() == 1);
  CHECK(tiny.source_marginal[0] == 1.0);
  CHECK(tiny.target_marginal[0] == 1.0);
}

TEST_CASE("instance JSON round trip") {
  const auto inst = generate_point_cloud_instance(5, 4, 99, 0.3);
  const std::string path = "round_trip_instance.json";
  save_instance(inst, path);
  const auto loaded = load_instance(path);
  CHECK(loaded.cost == inst.cost);
  CHECK(loaded.source_marginal == inst.source_marginal);
  CHECK(loaded.target_marginal == inst.target_marginal);
  CHECK(loaded.epsilon == inst.epsilon);
  CHECK(loaded.points_x == inst.points_x);
  std::remove(path.c_str());
}

TEST_CASE("instance JSON validation errors") {
  const std::string path = "bad_instance.json";
  {
    std::ofstream out(path);
    out << R"({"cost": [[0.1]], "a": [0.0], "b": [1.0], "epsilon": 0.5})";
  }
  CHECK_THROWS_WITH_AS(load_instance(path),
                       doctest::Contains("source_marginal"), ValidationError);
  {
    std::ofstream out(path);
    out << R"({"cost": [[0.1, 0.2]], "a": [1.0], "b": [0.5, 0.4], "epsilon": 0.5})";
  }
  CHECK_THROWS_WITH_AS(load_instance(path), doctest::Contains("mass balance"),
                       ValidationError);
  {
    std::ofstream out(path);
    out << R"({"cost": [[0.1]], "a": [1.0], "b": [1.0]})";
  }
  CHECK_THROWS_AS(load_instance(path), ValidationError);
  std::remove(path.c_str());
}
