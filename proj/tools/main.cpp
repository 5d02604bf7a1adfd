// Command-line front end: instance generation, solving, differentiation,
// convergence studies, and a self-check property suite.
//
// Exit codes: 0 ok, 1 check failure, 2 input validation, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "sinkdiff/jacobians.hpp"
#include "sinkdiff/limit.hpp"
#include "sinkdiff/oracle.hpp"
#include "sinkdiff/piggyback.hpp"
#include "sinkdiff/problem.hpp"
#include "sinkdiff/sinkhorn.hpp"

namespace {

using namespace sinkdiff;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

void write_json(const std::string& path, const json& payload) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open output file: " + path);
  out << payload.dump(2) << "\n";
}

// Shared instance-source options: either an instance file or a generator
// spec "n,m,seed"; --epsilon overrides the regularization either way.
struct InstanceSource {
  std::string instance_path;
  std::vector<std::int64_t> generate_spec;  // n, m, seed
  double epsilon = 0.0;                     // 0 means "keep the instance's"

  void attach(CLI::App& cmd) {
    auto* file = cmd.add_option("--instance", instance_path,
                                "instance JSON file");
    auto* gen = cmd.add_option("--generate", generate_spec,
                               "generate a point-cloud instance: n,m,seed")
                    ->delimiter(',')
                    ->expected(3);
    cmd.add_option("--epsilon", epsilon, "regularization level (> 0)");
    file->excludes(gen);
  }

  TransportInstance resolve() const {
    TransportInstance instance;
    if (!generate_spec.empty()) {
      if (generate_spec[0] <= 0 || generate_spec[1] <= 0 || generate_spec[2] < 0)
        throw ValidationError("--generate: n, m must be positive and seed >= 0");
      instance = generate_point_cloud_instance(
          static_cast<int>(generate_spec[0]), static_cast<int>(generate_spec[1]),
          static_cast<std::uint64_t>(generate_spec[2]),
          epsilon > 0.0 ? epsilon : 0.1);
    } else if (!instance_path.empty()) {
      instance = load_instance(instance_path);
      if (epsilon > 0.0) instance.epsilon = epsilon;
    } else {
      throw ValidationError("one of --instance or --generate is required");
    }
    instance.validate();
    return instance;
  }
};

std::vector<VectorXd> difference_directions(Eigen::Index n) {
  std::vector<VectorXd> directions;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    VectorXd d = VectorXd::Zero(n);
    d[i] = 1.0 / std::sqrt(2.0);
    d[i + 1] = -1.0 / std::sqrt(2.0);
    directions.push_back(std::move(d));
  }
  return directions;
}

// Builds the named parametrization around the instance together with the
// theta value at which it reproduces the instance exactly.
struct ParametrizedProblem {
  Parametrization parametrization;
  VectorXd theta;
};

ParametrizedProblem make_parametrized(const TransportInstance& instance,
                                      const std::string& kind) {
  ParametrizedProblem out;
  if (kind == "eps") {
    out.parametrization = make_epsilon_parametrization(instance);
    out.theta = VectorXd::Constant(1, instance.epsilon);
  } else if (kind == "softmax-a" || kind == "softmax-b") {
    const MarginalSide side =
        kind == "softmax-a" ? MarginalSide::source : MarginalSide::target;
    const VectorXd& marginal = side == MarginalSide::source
                                   ? instance.source_marginal
                                   : instance.target_marginal;
    out.parametrization = make_softmax_marginal_parametrization(instance, side);
    out.theta = marginal.array().log();
  } else if (kind == "direct-a" || kind == "direct-b") {
    const MarginalSide side =
        kind == "direct-a" ? MarginalSide::source : MarginalSide::target;
    const Eigen::Index dim = side == MarginalSide::source ? instance.rows()
                                                          : instance.cols();
    out.parametrization = make_direct_marginal_parametrization(
        instance, side, difference_directions(dim));
    out.theta = VectorXd::Zero(out.parametrization.dim_theta);
  } else {
    throw ValidationError("--param: unknown kind '" + kind + "'");
  }
  return out;
}

json derivative_to_json(const PlanDerivative& derivative) {
  json slices = json::array();
  for (const MatrixXd& slice : derivative.slices)
    slices.push_back(matrix_to_json(slice));
  return slices;
}

int cmd_generate(const InstanceSource& source, const std::string& out_path) {
  const TransportInstance instance = source.resolve();
  save_instance(instance, out_path);
  std::cout << "wrote " << instance.rows() << "x" << instance.cols()
            << " instance (epsilon=" << instance.epsilon << ") to " << out_path
            << "\n";
  return kExitOk;
}

int cmd_solve(const InstanceSource& source, const SolveOptions& options,
              const std::string& out_path, const std::string& history_path) {
  const TransportInstance instance = source.resolve();
  SolveOptions run = options;
  run.record = !history_path.empty();
  const SolveReport report = solve(instance, VectorXd::Zero(instance.rows()), run);

  json payload;
  payload["converged"] = report.converged;
  payload["iterations"] = report.final_state.iteration;
  payload["marginal_violation"] = report.final_state.marginal_violation;
  payload["epsilon"] = instance.epsilon;
  payload["x"] = vector_to_json(report.final_state.x);
  payload["plan"] = matrix_to_json(plan(report.final_state.x, instance, run.mode));
  if (!out_path.empty()) write_json(out_path, payload);

  if (!history_path.empty()) {
    std::ofstream csv(history_path);
    if (!csv) throw ValidationError("cannot open output file: " + history_path);
    csv << "iter,marginal_violation,d_var_to_final\n";
    const VectorXd final_centered = center(report.final_state.x);
    for (std::size_t k = 0; k < report.history.size(); ++k) {
      const double d_var =
          (center(report.iterates[k]) - final_centered)
              .lpNorm<Eigen::Infinity>();
      csv << report.history[k].iter << ","
          << report.history[k].marginal_violation << "," << d_var << "\n";
    }
  }

  std::cout << (report.converged ? "converged" : "did not converge") << " in "
            << report.final_state.iteration
            << " iterations, marginal violation "
            << report.final_state.marginal_violation << "\n";
  if (!report.converged) return kExitNumeric;
  return kExitOk;
}

int cmd_differentiate(const InstanceSource& source, const std::string& param,
                      DerivativeRoute route, bool with_oracle, double tol,
                      int max_iter, const std::string& out_path) {
  const TransportInstance instance = source.resolve();
  const auto [parametrization, theta] = make_parametrized(instance, param);

  SolveOptions solve_options;
  solve_options.tol = 1e-13;
  solve_options.max_iter = max_iter;
  const SolveReport report =
      solve(instance, VectorXd::Zero(instance.rows()), solve_options);
  if (!report.converged)
    throw NumericError("fixed-point solve did not converge; raise --max-iter");
  const VectorXd xbar = report.final_state.x;

  const PlanDerivative closed =
      limit_plan_derivative(xbar, instance, parametrization, theta, route);

  PiggybackOptions pb;
  pb.tol = tol;
  pb.max_iter = max_iter;
  const PiggybackResult piggyback =
      run_with_derivatives(parametrization, theta, VectorXd::Zero(instance.rows()), pb);
  if (!piggyback.report.converged)
    throw NumericError("piggyback recursion did not converge; raise --max-iter");

  const double agreement = frobenius_distance(closed, piggyback.derivative);
  std::cout << "closed-form vs piggyback agreement (Frobenius): " << agreement
            << "\n";

  json payload;
  payload["theta"] = vector_to_json(theta);
  payload["param"] = param;
  payload["route"] = route == DerivativeRoute::spectral ? "spectral" : "resolvent";
  payload["plan"] = matrix_to_json(plan(xbar, instance, KernelMode::lse));
  payload["plan_derivative"] = derivative_to_json(closed);
  payload["piggyback_derivative"] = derivative_to_json(piggyback.derivative);
  payload["agreement_frobenius"] = agreement;

  if (with_oracle) {
    double max_abs = 0.0;
    for (int j = 0; j < parametrization.dim_theta; ++j) {
      const MatrixXd fd = fd_limit_derivative(parametrization, theta, j);
      max_abs = std::max(max_abs,
                         (closed.slices[j] - fd).cwiseAbs().maxCoeff());
    }
    std::cout << "closed-form vs finite-difference oracle (max-abs): "
              << max_abs << "\n";
    payload["oracle_max_abs"] = max_abs;
  }

  if (!out_path.empty()) write_json(out_path, payload);
  return kExitOk;
}

int cmd_study(const InstanceSource& source, const std::string& param,
              TraceReference reference, double tol, int max_iter,
              const std::string& out_path) {
  const TransportInstance instance = source.resolve();
  const auto [parametrization, theta] = make_parametrized(instance, param);

  PiggybackOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  options.record = true;
  options.reference = reference;
  const PiggybackResult result =
      run_with_derivatives(parametrization, theta, VectorXd::Zero(instance.rows()), options);

  write_study_csv(out_path, result.trace);
  std::cout << "wrote " << result.trace.iter.size() << " rows to " << out_path
            << (result.report.converged ? "" : " (run did not converge)")
            << "\n";
  if (!result.report.converged) return kExitNumeric;
  return kExitOk;
}

// --- check: property suite on a generated instance ------------------------

struct CheckReport {
  bool all_passed = true;

  void record(const std::string& name, double measured, double allowed) {
    const bool ok = measured <= allowed;
    all_passed = all_passed && ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "  measured "
              << measured << "  allowed " << allowed << "\n";
  }
};

int cmd_check(int n, int m, double epsilon, std::uint64_t seed,
              const std::string& break_mode) {
  if (n <= 0 || m <= 0) throw ValidationError("--n/--m: must be positive");
  if (epsilon <= 0.0) throw ValidationError("--epsilon: must be positive");
  const TransportInstance instance =
      generate_point_cloud_instance(n, m, seed, epsilon);
  CheckReport report;

  SolveOptions options;
  options.tol = 1e-12;
  const SolveReport solved = solve(instance, VectorXd::Zero(n), options);
  report.record("sinkhorn converged (violation)",
                solved.final_state.marginal_violation, 1e-12);
  const VectorXd xbar = solved.final_state.x;

  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = sym(rng);

  MatrixXd A = jacobian_F_x(x, instance);
  if (break_mode == "jacobian") A(0, 0) += 1e-3;  // negative-control hook
  report.record("jacobian vs finite differences",
                (A - fd_jacobian_F_x(x, instance)).cwiseAbs().maxCoeff(), 1e-6);
  report.record("jacobian rows sum to one",
                (A * VectorXd::Ones(n) - VectorXd::Ones(n))
                    .lpNorm<Eigen::Infinity>(),
                1e-12);

  const auto bundle = reduced_jacobian(xbar, instance);
  report.record("left eigenvector A^T v = v",
                (bundle.A.transpose() * bundle.v - bundle.v)
                    .lpNorm<Eigen::Infinity>(),
                1e-10);
  report.record("reduced jacobian kills constants",
                (bundle.G * VectorXd::Ones(n)).lpNorm<Eigen::Infinity>(), 1e-12);

  const auto spectrum = fixed_point_spectrum(xbar, instance);
  report.record("second eigenvalue below one",
                std::abs(spectrum.second_eigenvalue), 1.0 - 1e-12);

  const auto [parametrization, theta] = make_parametrized(instance, "eps");
  const PlanDerivative closed =
      limit_plan_derivative(xbar, instance, parametrization, theta);
  const PlanDerivative spectral = limit_plan_derivative(
      xbar, instance, parametrization, theta, DerivativeRoute::spectral);
  report.record("spectral vs resolvent route",
                frobenius_distance(closed, spectral), 1e-9);
  report.record("limit derivative vs oracle",
                (closed.slices[0] - fd_limit_derivative(parametrization, theta, 0))
                    .cwiseAbs()
                    .maxCoeff(),
                1e-5);

  PiggybackOptions pb;
  pb.tol = 1e-12;
  const PiggybackResult piggyback =
      run_with_derivatives(parametrization, theta, VectorXd::Zero(n), pb);
  report.record("piggyback vs closed form",
                frobenius_distance(piggyback.derivative, closed), 1e-8);

  // dPhat/deps row sums vanish: the marginals do not move with epsilon.
  report.record("derivative row sums vanish",
                closed.slices[0].rowwise().sum().lpNorm<Eigen::Infinity>(), 1e-8);

  return report.all_passed ? kExitOk : kExitCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entropic optimal transport with exact plan derivatives"};
  app.require_subcommand(1);

  InstanceSource source;
  SolveOptions solve_options;
  std::string out_path;
  std::string history_path;
  std::string param = "eps";
  std::string route_name = "resolvent";
  std::string reference_name = "final-iterate";
  std::string break_mode;
  bool with_oracle = false;
  double tol = 1e-10;
  int max_iter = 100000;
  std::uint64_t seed = 0;

  auto* generate = app.add_subcommand("generate", "write a point-cloud instance");
  source.attach(*generate);
  generate->add_option("--out", out_path, "output JSON path")->required();

  auto* solve_cmd = app.add_subcommand("solve", "solve one instance");
  source.attach(*solve_cmd);
  solve_cmd->add_option("--tol", solve_options.tol, "marginal violation tolerance");
  solve_cmd->add_option("--max-iter", solve_options.max_iter, "iteration cap");
  solve_cmd->add_option("--mode", solve_options.mode, "kernel evaluation mode")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, KernelMode>{{"naive", KernelMode::naive},
                                            {"lse", KernelMode::lse}}));
  solve_cmd->add_option("--out", out_path, "plan + report JSON path");
  solve_cmd->add_option("--history", history_path, "iteration history CSV path");

  auto* diff = app.add_subcommand("differentiate",
                                  "closed-form and piggyback plan derivatives");
  source.attach(*diff);
  diff->add_option("--param", param,
                   "parametrization: eps, softmax-a, softmax-b, direct-a, direct-b");
  diff->add_option("--route", route_name, "limit formula route")
      ->check(CLI::IsMember({"spectral", "resolvent"}));
  diff->add_flag("--oracle", with_oracle, "compare against finite differences");
  diff->add_option("--tol", tol, "piggyback tolerance");
  diff->add_option("--max-iter", max_iter, "iteration cap");
  diff->add_option("--out", out_path, "derivative JSON path");

  auto* study = app.add_subcommand("study", "per-iteration convergence CSV");
  source.attach(*study);
  study->add_option("--param", param,
                    "parametrization: eps, softmax-a, softmax-b, direct-a, direct-b");
  study->add_option("--reference", reference_name, "error reference")
      ->check(CLI::IsMember({"final-iterate", "closed-form"}));
  study->add_option("--tol", tol, "stopping tolerance");
  study->add_option("--max-iter", max_iter, "iteration cap");
  study->add_option("--out", out_path, "CSV output path")->required();

  int check_n = 8;
  int check_m = 6;
  double check_epsilon = 0.3;
  auto* check = app.add_subcommand("check", "run the property suite");
  check->add_option("--n", check_n, "source points");
  check->add_option("--m", check_m, "target points");
  check->add_option("--epsilon", check_epsilon, "regularization level");
  check->add_option("--seed", seed, "instance seed");
  check->add_option("--break", break_mode, "negative-control hook")
      ->check(CLI::IsMember({"jacobian"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(source, out_path);
    if (solve_cmd->parsed())
      return cmd_solve(source, solve_options, out_path, history_path);
    if (diff->parsed())
      return cmd_differentiate(source, param,
                               route_name == "spectral"
                                   ? DerivativeRoute::spectral
                                   : DerivativeRoute::resolvent,
                               with_oracle, tol, max_iter, out_path);
    if (study->parsed())
      return cmd_study(source, param,
                       reference_name == "closed-form"
                           ? TraceReference::closed_form
                           : TraceReference::final_iterate,
                       tol, max_iter, out_path);
    if (check->parsed())
      return cmd_check(check_n, check_m, check_epsilon, seed, break_mode);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
