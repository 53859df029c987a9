#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <mutex>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "structinfer/solvers.hpp"

namespace structinfer {

/// Per-target-set surrogate of the precision matrix built from a nodewise
/// fit: the coefficient block, the cross moment with the target columns,
/// the residual second moment, and the pivot normalizer.
struct PrecisionFit {
  IndexSet J;
  Eigen::MatrixXd gamma;       // |J^c| x |J| nodewise coefficients
  Eigen::MatrixXd t_cross;     // R^T X_J / n
  Eigen::MatrixXd sigma_res;   // R^T R / n, symmetric positive definite
  Eigen::MatrixXd normalizer;  // sqrt(n) * sigma_res^{-1/2} * t_cross
  Eigen::MatrixXd residual;    // R = X_J - X_{J^c} gamma, cached for reuse
  Framework framework = Framework::Gauge;
  double lambda_J = 0.0;
  double kkt_gap = 0.0;
  bool kkt_exact = true;
  bool converged = true;
  /// Advisory: whether J is an allowed set of the driving norm. Pointwise
  /// sweeps run regardless and surface this flag.
  bool set_allowed = true;
};

/// Computes R, T_J = R^T X_J / n, Sigma_J = R^T R / n and the normalizer
/// M = sqrt(n) Sigma_J^{-1/2} T_J from a fitted nodewise regression.
/// Throws when Sigma_J is numerically singular.
PrecisionFit build_precision(const Dataset& data, const MultivariateFit& mv);

nlohmann::json precision_to_json(const PrecisionFit& fit);
PrecisionFit precision_from_json(const nlohmann::json& j);

/// Cache of nodewise results keyed by (design content, norm, framework,
/// lambda). Completed entries are immutable; lookups after insertion are
/// safe from many readers.
class NodewiseCache {
 public:
  static std::uint64_t design_key(const Eigen::MatrixXd& X, const NormSpec& norm,
                                  Framework fw, double lambda_J);

  const PrecisionFit* find(std::uint64_t key, int node) const;
  void store(std::uint64_t key, int node, PrecisionFit fit);

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<std::uint64_t, int>, PrecisionFit> entries_;
};

/// Nodewise fits for the pointwise sets {j}, j in nodes (all coordinates
/// when nodes is empty). Gauge uses the gauge norm of omega as column norm,
/// Omega uses omega itself. Results depend only on X, never on Y.
std::vector<PrecisionFit> nodewise_sweep(const Dataset& data, const NormSpec& omega,
                                         Framework fw, double lambda_J,
                                         const SolverOptions& opts = {}, int threads = 0,
                                         NodewiseCache* cache = nullptr,
                                         const std::vector<int>& nodes = {});

}  // namespace structinfer
