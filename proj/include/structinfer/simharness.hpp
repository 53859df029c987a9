#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "structinfer/inference.hpp"
#include "structinfer/rng.hpp"

namespace structinfer {

/// Scenario description for the Toeplitz coverage study. Reproducible:
/// config plus seed fully determines every output byte.
struct SimulationConfig {
  int n = 100;
  int p = 150;
  double rho = 0.9;      // Toeplitz base, Sigma_ij = rho^|i-j|
  int s0 = 5;            // active coordinates
  int r = 100;           // noise repetitions
  double alpha = 0.05;
  double lambda_main = 0.0;  // <= 0 requests the built-in sweep
  double lambda_node = 0.0;  // <= 0 requests the built-in sweep
  NormSpec norm;             // main penalty; drives both frameworks
  Framework framework = Framework::Gauge;
  SigmaMode sigma_mode = SigmaMode::Known;
  double sigma0 = 1.0;       // true noise level
  double sigma_known = 1.0;  // value used when sigma_mode == Known
  bool fixed_design = true;
  std::uint64_t seed = 1;
  int threads = 0;
  SolverOptions solver;

  void validate() const;
};

nlohmann::json config_to_json(const SimulationConfig& cfg);
SimulationConfig config_from_json(const nlohmann::json& j);

struct CoordinateStats {
  int coordinate = 0;      // 0-based
  double coverage = 0.0;   // mean of cover indicators over included reps
  double avg_length = 0.0;
  int failures = 0;        // excluded repetitions for this coordinate
  bool set_allowed = true;
};

struct RepRecord {
  int rep = 0;
  bool main_converged = true;
  double sigma_hat = 0.0;
  double lambda_m_value = 0.0;     // theoretical penalty level for this draw
  double max_remainder = 0.0;      // max over coordinates of |rem|
  double min_gauge_margin = 0.0;   // min over coords of inflated bound - |rem|
  double max_identity_error = 0.0;
  std::vector<std::uint8_t> cover;  // per coordinate
  std::vector<double> length;       // per coordinate
  std::vector<double> estimate;     // de-sparsified estimates
};

struct SimulationResult {
  SimulationConfig config;
  std::vector<CoordinateStats> per_coordinate;
  double mean_cov_active = 0.0;
  double mean_len_active = 0.0;
  double mean_cov_inactive = 0.0;
  double mean_len_inactive = 0.0;
  int failed_reps = 0;
  int bound_violations = 0;  // reps where |rem| exceeded the inflated bound
  double wall_seconds = 0.0;
  std::vector<RepRecord> raw;
};

/// Rows i.i.d. N(0, Sigma) with Sigma_ij = rho^|i-j|, via dense Cholesky.
Eigen::MatrixXd toeplitz_design(int n, int p, double rho, CounterRng& rng);

/// (4, 4 - 2/(s0-1), ..., 2, 0, ..., 0).
Eigen::VectorXd make_beta0(int p, int s0);

SimulationResult run_scenario(const SimulationConfig& cfg, NodewiseCache* cache = nullptr);

struct ComparisonResult {
  SimulationResult gauge;
  SimulationResult omega;
  double mean_length_ratio = 0.0;         // omega / gauge over all coordinates
  double mean_length_ratio_active = 0.0;  // over the active set
};

/// Runs the two frameworks on configs that are identical except for the
/// framework tag and lambda_node.
ComparisonResult compare_frameworks(const SimulationConfig& cfg_gauge,
                                    const SimulationConfig& cfg_omega,
                                    NodewiseCache* cache = nullptr);

struct SweepGrid {
  std::vector<double> lambda_main;
  std::vector<double> lambda_node;
  int pilot_reps = 8;
  std::vector<int> pilot_coords;  // 0-based; empty = active set plus a sample
};

/// Grid factors applied to a caption-scale anchor value.
std::vector<double> default_sweep_factors();

struct LambdaChoice {
  double lambda_main = 0.0;
  double lambda_node = 0.0;
  double pilot_coverage = 0.0;
};

/// Pilot-run sweep: picks (lambda_main, lambda_node) whose pilot coverage on
/// the active coordinates is closest to the target level. Deterministic in
/// the config seed.
LambdaChoice sweep_lambdas(const SimulationConfig& cfg, const SweepGrid& grid,
                           NodewiseCache* cache = nullptr);

// CSV writers. Numbers use 15 significant digits so reruns are
// byte-comparable.
void write_results_csv(const SimulationResult& res, const std::string& path);
void write_raw_log_csv(const SimulationResult& res, const std::string& path);
void write_diagnostics_csv(const SimulationResult& res, const std::string& path);
void write_compare_csv(const ComparisonResult& cmp, const std::string& path);

std::string format_number(double value);

}  // namespace structinfer
