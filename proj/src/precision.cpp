#include "structinfer/precision.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "structinfer/parallel.hpp"

namespace structinfer {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd gather_columns(const MatrixXd& X, const IndexSet& J) {
  MatrixXd out(X.rows(), J.size());
  for (int k = 0; k < J.size(); ++k)
    out.col(k) = X.col(J.indices[static_cast<std::size_t>(k)]);
  return out;
}

MatrixXd inv_sqrt_floor(const MatrixXd& A, const char* name) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(A);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error(std::string("eigendecomposition of ") + name + " failed");
  const VectorXd& ev = eig.eigenvalues();
  double max_ev = ev.maxCoeff();
  if (max_ev <= 0.0 || ev.minCoeff() <= 1e-12 * max_ev)
    throw std::runtime_error(std::string(name) + " is numerically singular");
  VectorXd inv_sqrt = ev.array().sqrt().inverse();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

nlohmann::json matrix_to_json(const MatrixXd& A) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < A.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
    rows.push_back(row);
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return MatrixXd(0, 0);
  const int cols = static_cast<int>(j[0].size());
  MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) out(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
  return out;
}

std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t h) {
  const unsigned char* b = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= b[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

PrecisionFit build_precision(const Dataset& data, const MultivariateFit& mv) {
  data.validate();
  mv.J.validate(data.p());
  const double n = static_cast<double>(data.n());
  MatrixXd XJ = gather_columns(data.X, mv.J);
  MatrixXd Xjc = gather_columns(data.X, mv.J.complement(data.p()));

  PrecisionFit fit;
  fit.J = mv.J;
  fit.gamma = mv.Gamma;
  fit.framework = mv.framework;
  fit.lambda_J = mv.lambda_J;
  fit.kkt_gap = mv.kkt_gap;
  fit.kkt_exact = mv.kkt_exact;
  fit.converged = mv.converged;

  fit.residual = XJ - Xjc * mv.Gamma;
  fit.t_cross = fit.residual.transpose() * XJ / n;
  fit.sigma_res = fit.residual.transpose() * fit.residual / n;
  fit.normalizer = std::sqrt(n) * inv_sqrt_floor(fit.sigma_res, "Sigma_J") * fit.t_cross;
  return fit;
}

nlohmann::json precision_to_json(const PrecisionFit& fit) {
  nlohmann::json j;
  std::vector<int> one_based;
  for (int i : fit.J.indices) one_based.push_back(i + 1);
  j["J"] = one_based;
  j["gamma"] = matrix_to_json(fit.gamma);
  j["t"] = matrix_to_json(fit.t_cross);
  j["sigma"] = matrix_to_json(fit.sigma_res);
  j["m"] = matrix_to_json(fit.normalizer);
  j["residual"] = matrix_to_json(fit.residual);
  j["framework"] = to_string(fit.framework);
  j["lambda_j"] = fit.lambda_J;
  j["kkt_gap"] = fit.kkt_gap;
  j["kkt_exact"] = fit.kkt_exact;
  j["converged"] = fit.converged;
  j["set_allowed"] = fit.set_allowed;
  return j;
}

PrecisionFit precision_from_json(const nlohmann::json& j) {
  PrecisionFit fit;
  std::vector<int> idx;
  for (int i : j.at("J").get<std::vector<int>>()) idx.push_back(i - 1);
  fit.J = IndexSet(idx);
  fit.gamma = matrix_from_json(j.at("gamma"));
  fit.t_cross = matrix_from_json(j.at("t"));
  fit.sigma_res = matrix_from_json(j.at("sigma"));
  fit.normalizer = matrix_from_json(j.at("m"));
  fit.residual = matrix_from_json(j.at("residual"));
  fit.framework = framework_from_string(j.at("framework").get<std::string>());
  fit.lambda_J = j.at("lambda_j").get<double>();
  fit.kkt_gap = j.value("kkt_gap", 0.0);
  fit.kkt_exact = j.value("kkt_exact", true);
  fit.converged = j.value("converged", true);
  fit.set_allowed = j.value("set_allowed", true);
  return fit;
}

std::uint64_t NodewiseCache::design_key(const Eigen::MatrixXd& X, const NormSpec& norm,
                                        Framework fw, double lambda_J) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  h = fnv1a(X.data(), sizeof(double) * static_cast<std::size_t>(X.size()), h);
  std::string desc = norm_to_json(norm).dump() + "|" + to_string(fw);
  h = fnv1a(desc.data(), desc.size(), h);
  h = fnv1a(&lambda_J, sizeof(lambda_J), h);
  return h;
}

const PrecisionFit* NodewiseCache::find(std::uint64_t key, int node) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = entries_.find({key, node});
  return it == entries_.end() ? nullptr : &it->second;
}

void NodewiseCache::store(std::uint64_t key, int node, PrecisionFit fit) {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_.emplace(std::make_pair(key, node), std::move(fit));
}

std::vector<PrecisionFit> nodewise_sweep(const Dataset& data, const NormSpec& omega,
                                         Framework fw, double lambda_J,
                                         const SolverOptions& opts, int threads,
                                         NodewiseCache* cache, const std::vector<int>& nodes) {
  data.validate();
  if (omega.dimension != data.p())
    throw std::invalid_argument("norm dimension does not match design columns");

  std::vector<int> targets = nodes;
  if (targets.empty()) {
    targets.resize(static_cast<std::size_t>(data.p()));
    for (int j = 0; j < data.p(); ++j) targets[static_cast<std::size_t>(j)] = j;
  }

  const std::uint64_t key =
      cache ? NodewiseCache::design_key(data.X, omega, fw, lambda_J) : 0;
  std::vector<PrecisionFit> out(targets.size());
  std::vector<std::string> errors(targets.size());

  parallel_for(static_cast<int>(targets.size()), threads, [&](int k) {
    int j = targets[static_cast<std::size_t>(k)];
    if (cache) {
      if (const PrecisionFit* hit = cache->find(key, j)) {
        out[static_cast<std::size_t>(k)] = *hit;
        return;
      }
    }
    try {
      IndexSet J = IndexSet::single(j);
      MultivariateFit mv = fit_sqrt_node(data, j, column_norm_for(omega, J, fw), lambda_J, opts);
      mv.framework = fw;
      PrecisionFit fit = build_precision(data, mv);
      fit.set_allowed = is_allowed(omega, J);
      if (cache) cache->store(key, j, fit);
      out[static_cast<std::size_t>(k)] = std::move(fit);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(k)] = e.what();
    }
  });

  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (!errors[k].empty())
      throw std::runtime_error("nodewise fit for coordinate " +
                               std::to_string(targets[k] + 1) + " failed: " + errors[k]);
  }
  return out;
}

}  // namespace structinfer
