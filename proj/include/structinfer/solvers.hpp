#pragma once

#include <Eigen/Dense>
#include <vector>

#include "structinfer/dataset.hpp"
#include "structinfer/norms.hpp"

namespace structinfer {

enum class Framework { Gauge, Omega };

std::string to_string(Framework fw);
Framework framework_from_string(const std::string& name);

struct SolverOptions {
  int max_iter = 50000;
  double tol = 1e-9;        // relative objective change
  int stall_iters = 5;      // consecutive small changes before stopping
  bool restart = true;      // function-value restart of the momentum
  double kkt_tol = 1e-4;    // certificate gap accepted as converged
};

/// Solution of min ||Y - X beta||_n^2 + lambda * Omega(beta) with
/// ||v||_n^2 = sum v_i^2 / n.
struct PenalizedFit {
  Eigen::VectorXd beta;
  double lambda = 0.0;
  std::vector<double> objective_trace;  // non-increasing
  double objective = 0.0;
  /// Certificate slack. With a closed-form dual this is
  /// max(0, Omega*(2 X^T resid / (n lambda)) - 1); otherwise a scaled
  /// prox-residual surrogate (kkt_exact is false then).
  double kkt_gap = 0.0;
  bool kkt_exact = true;
  int iterations = 0;
  bool converged = false;
};

PenalizedFit fit_penalized(const Dataset& data, const NormSpec& norm, double lambda,
                           const SolverOptions& opts = {});

/// Column norm used by the nodewise regressions: the full-dimension norm
/// applied to vectors that vanish on J, exposed on packed J^c coordinates.
struct ColumnNorm {
  NormOps ops;
  /// Omega applied to penalty columns zero-embedded on J.
  static ColumnNorm masked(const NormSpec& full_norm, const IndexSet& J);
  /// A norm given directly on the packed coordinates (for gauge norms the
  /// two constructions coincide).
  static ColumnNorm packed(const NormSpec& packed_norm);
};

/// Column norm selected by the framework: the gauge of omega for Gauge, and
/// omega itself for Omega, both zero-embedded on J.
ColumnNorm column_norm_for(const NormSpec& omega, const IndexSet& J, Framework fw);

/// Fit of min ||X_J - X_{J^c} B||_nuc + lambda_J * sum_j colnorm(B_j).
struct MultivariateFit {
  IndexSet J;
  Eigen::MatrixXd Gamma;  // |J^c| x |J|, packed rows in increasing J^c order
  double lambda_J = 0.0;
  Framework framework = Framework::Gauge;
  double nuclear_residual = 0.0;
  double objective = 0.0;
  /// max(0, max_j colnorm*(W_j)/lambda_J - 1) at the exact subdifferential
  /// scaling W = X_{J^c}^T R Sigma_J^{-1/2} / sqrt(n).
  double kkt_gap = 0.0;
  bool kkt_exact = true;
  int iterations = 0;
  bool converged = false;
};

/// Single-node square-root regression (|J| = 1): the nuclear norm of an
/// n-vector is its Euclidean norm, solved by concomitant-scale alternation.
MultivariateFit fit_sqrt_node(const Dataset& data, int node, const ColumnNorm& colnorm,
                              double lambda_J, const SolverOptions& opts = {});
MultivariateFit fit_sqrt_node(const Dataset& data, int node, const NormSpec& packed_norm,
                              double lambda_J, const SolverOptions& opts = {});

/// General |J| >= 1 fit via the concomitant identity
/// ||R||_nuc = min_{V > 0} (tr(R^T R V^{-1}) + tr(V)) / 2.
MultivariateFit fit_multivariate(const Dataset& data, const IndexSet& J,
                                 const NormSpec& omega, double lambda_J, Framework fw,
                                 const SolverOptions& opts = {});
MultivariateFit fit_multivariate(const Dataset& data, const IndexSet& J,
                                 const ColumnNorm& colnorm, double lambda_J, Framework fw,
                                 const SolverOptions& opts = {});

/// Largest eigenvalue of X^T X by power iteration (deterministic start).
double design_spectral_bound(const Eigen::MatrixXd& X);

namespace detail {

/// FISTA with function-value restart on ||y - X beta||^2/n + lambda*norm.
struct EngineResult {
  Eigen::VectorXd beta;
  std::vector<double> trace;
  int iterations = 0;
  bool stalled = false;  // stopped by tolerance rather than iteration cap
};

EngineResult fista(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const NormOps& norm,
                   double lambda, const SolverOptions& opts,
                   const Eigen::VectorXd* warm_start = nullptr, double spectral_bound = -1.0);

}  // namespace detail

}  // namespace structinfer
