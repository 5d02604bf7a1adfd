#include "sinkdiff/problem.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <utility>

#include <json.hpp>

namespace sinkdiff {

namespace {

constexpr double kMassBalanceRelTol = 1e-12;
constexpr double kZeroSumAbsTol = 1e-12;

void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

VectorXd softmax(const VectorXd& theta) {
  const double shift = theta.maxCoeff();
  VectorXd e = (theta.array() - shift).exp();
  return e / e.sum();
}

}  // namespace

void TransportInstance::validate() const {
  const auto n = cost.rows();
  const auto m = cost.cols();
  require(n >= 1 && m >= 1, "cost: matrix must be nonempty");
  require(cost.allFinite(), "cost: entries must be finite");
  require(source_marginal.size() == n,
          "source_marginal: length must match cost rows");
  require(target_marginal.size() == m,
          "target_marginal: length must match cost columns");
  require(source_marginal.allFinite() && (source_marginal.array() > 0.0).all(),
          "source_marginal: all entries must be strictly positive");
  require(target_marginal.allFinite() && (target_marginal.array() > 0.0).all(),
          "target_marginal: all entries must be strictly positive");
  require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon: must be positive");
  const double sa = source_marginal.sum();
  const double sb = target_marginal.sum();
  require(std::abs(sa - sb) <= kMassBalanceRelTol * std::max(sa, sb),
          "mass balance: sum(source_marginal) must equal sum(target_marginal)");
}

InstanceTangent InstanceTangent::zero(Eigen::Index n, Eigen::Index m) {
  InstanceTangent t;
  t.d_cost = MatrixXd::Zero(n, m);
  t.d_source = VectorXd::Zero(n);
  t.d_target = VectorXd::Zero(m);
  t.d_epsilon = 0.0;
  return t;
}

void InstanceTangent::validate() const {
  require(d_cost.allFinite() && d_source.allFinite() && d_target.allFinite() &&
              std::isfinite(d_epsilon),
          "tangent: entries must be finite");
  require(std::abs(d_source.sum()) <= kZeroSumAbsTol,
          "d_source: must sum to zero (mass-balance tangency)");
  require(std::abs(d_target.sum()) <= kZeroSumAbsTol,
          "d_target: must sum to zero (mass-balance tangency)");
}

Parametrization make_epsilon_parametrization(TransportInstance base) {
  base.validate();
  Parametrization par;
  par.dim_theta = 1;
  par.evaluate = [base](const VectorXd& theta) {
    if (theta.size() != 1) throw ValidationError("theta: expected dimension 1");
    if (!(theta[0] > 0.0))
      throw DomainError("epsilon parametrization: theta must be positive");
    TransportInstance out = base;
    out.epsilon = theta[0];
    return out;
  };
  const auto n = base.rows();
  const auto m = base.cols();
  par.tangent = [n, m](const VectorXd& theta, int direction) {
    if (theta.size() != 1 || direction != 0)
      throw ValidationError("epsilon parametrization: direction out of range");
    InstanceTangent t = InstanceTangent::zero(n, m);
    t.d_epsilon = 1.0;
    return t;
  };
  return par;
}

Parametrization make_softmax_marginal_parametrization(TransportInstance base,
                                                      MarginalSide side) {
  base.validate();
  require(std::abs(base.source_marginal.sum() - 1.0) <= 1e-10,
          "softmax parametrization: marginals must have unit total mass");
  const auto n = base.rows();
  const auto m = base.cols();
  const auto p = side == MarginalSide::source ? n : m;

  Parametrization par;
  par.dim_theta = static_cast<int>(p);
  par.evaluate = [base, side, p](const VectorXd& theta) {
    if (theta.size() != p)
      throw ValidationError("theta: dimension must match the marginal length");
    TransportInstance out = base;
    (side == MarginalSide::source ? out.source_marginal : out.target_marginal) =
        softmax(theta);
    return out;
  };
  par.tangent = [side, n, m, p](const VectorXd& theta, int direction) {
    if (theta.size() != p || direction < 0 || direction >= p)
      throw ValidationError("softmax parametrization: direction out of range");
    const VectorXd s = softmax(theta);
    // d softmax(theta)_i / d theta_j = s_i (delta_ij - s_j)
    VectorXd d = -s[direction] * s;
    d[direction] += s[direction];
    InstanceTangent t = InstanceTangent::zero(n, m);
    (side == MarginalSide::source ? t.d_source : t.d_target) = d;
    return t;
  };
  return par;
}

Parametrization make_direct_marginal_parametrization(
    TransportInstance base, MarginalSide side, std::vector<VectorXd> directions) {
  base.validate();
  const auto len = side == MarginalSide::source ? base.rows() : base.cols();
  for (const auto& d : directions) {
    require(d.size() == len, "direction: length must match the marginal");
    require(std::abs(d.sum()) <= kZeroSumAbsTol, "direction: must sum to zero");
  }
  const int p = static_cast<int>(directions.size());
  const auto n = base.rows();
  const auto m = base.cols();

  Parametrization par;
  par.dim_theta = p;
  par.evaluate = [base, side, directions, p](const VectorXd& theta) {
    if (theta.size() != p) throw ValidationError("theta: wrong dimension");
    TransportInstance out = base;
    VectorXd& marginal = side == MarginalSide::source ? out.source_marginal
                                                      : out.target_marginal;
    for (int j = 0; j < p; ++j) marginal += theta[j] * directions[j];
    if (!(marginal.array() > 0.0).all())
      throw DomainError("direct marginal parametrization: marginal entry <= 0");
    return out;
  };
  par.tangent = [side, directions, n, m, p](const VectorXd& theta, int direction) {
    if (theta.size() != p || direction < 0 || direction >= p)
      throw ValidationError("direct marginal parametrization: direction out of range");
    InstanceTangent t = InstanceTangent::zero(n, m);
    (side == MarginalSide::source ? t.d_source : t.d_target) = directions[direction];
    return t;
  };
  return par;
}

TransportInstance generate_point_cloud_instance(int n, int m, std::uint64_t seed,
                                                double epsilon) {
  if (n < 1 || m < 1) throw ValidationError("point cloud sizes must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TransportInstance inst;
  inst.points_x.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    inst.points_x(i, 0) = unit(rng) - 0.5;
    inst.points_x(i, 1) = unit(rng) - 0.5;
  }
  inst.points_y.resize(m, 2);
  const double two_pi = 2.0 * std::acos(-1.0);
  for (int j = 0; j < m; ++j) {
    const double angle = two_pi * unit(rng);
    inst.points_y(j, 0) = 0.5 * std::cos(angle);
    inst.points_y(j, 1) = 0.5 * std::sin(angle);
  }
  inst.cost.resize(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      inst.cost(i, j) = (inst.points_x.row(i) - inst.points_y.row(j)).norm();
  inst.source_marginal = VectorXd::Constant(n, 1.0 / n);
  inst.target_marginal = VectorXd::Constant(m, 1.0 / m);
  inst.epsilon = epsilon;
  inst.validate();
  return inst;
}

namespace {

using nlohmann::json;

json matrix_to_json(const MatrixXd& mat) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < mat.cols(); ++j) row.push_back(mat(i, j));
    rows.push_back(row);
  }
  return rows;
}

MatrixXd matrix_from_json(const json& rows, const std::string& field) {
  if (!rows.is_array() || rows.empty() || !rows[0].is_array())
    throw ValidationError(field + ": expected an array of arrays");
  const auto n = rows.size();
  const auto m = rows[0].size();
  MatrixXd mat(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i].is_array() || rows[i].size() != m)
      throw ValidationError(field + ": ragged rows");
    for (std::size_t j = 0; j < m; ++j) {
      if (!rows[i][j].is_number())
        throw ValidationError(field + ": non-numeric entry");
      mat(i, j) = rows[i][j].get<double>();
    }
  }
  return mat;
}

VectorXd vector_from_json(const json& arr, const std::string& field) {
  if (!arr.is_array()) throw ValidationError(field + ": expected an array");
  VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ValidationError(field + ": non-numeric entry");
    v(i) = arr[i].get<double>();
  }
  return v;
}

}  // namespace

TransportInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open instance file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& err) {
    throw ValidationError("instance file is not valid JSON: " + std::string(err.what()));
  }
  for (const char* field : {"cost", "a", "b", "epsilon"})
    if (!doc.contains(field))
      throw ValidationError(std::string("missing field: ") + field);

  TransportInstance inst;
  inst.cost = matrix_from_json(doc["cost"], "cost");
  inst.source_marginal = vector_from_json(doc["a"], "a");
  inst.target_marginal = vector_from_json(doc["b"], "b");
  if (!doc["epsilon"].is_number()) throw ValidationError("epsilon: must be a number");
  inst.epsilon = doc["epsilon"].get<double>();
  if (doc.contains("points_x")) inst.points_x = matrix_from_json(doc["points_x"], "points_x");
  if (doc.contains("points_y")) inst.points_y = matrix_from_json(doc["points_y"], "points_y");
  inst.validate();
  return inst;
}

void save_instance(const TransportInstance& instance, const std::string& path) {
  instance.validate();
  json doc;
  doc["cost"] = matrix_to_json(instance.cost);
  doc["a"] = json::array();
  for (Eigen::Index i = 0; i < instance.source_marginal.size(); ++i)
    doc["a"].push_back(instance.source_marginal[i]);
  doc["b"] = json::array();
  for (Eigen::Index j = 0; j < instance.target_marginal.size(); ++j)
    doc["b"].push_back(instance.target_marginal[j]);
  doc["epsilon"] = instance.epsilon;
  if (instance.points_x.size() > 0) doc["points_x"] = matrix_to_json(instance.points_x);
  if (instance.points_y.size() > 0) doc["points_y"] = matrix_to_json(instance.points_y);

  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write instance file: " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace sinkdiff
