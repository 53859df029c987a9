#include "structinfer/simharness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "structinfer/parallel.hpp"

namespace structinfer {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr std::uint64_t kDesignStream = 0;
constexpr std::uint64_t kRepStreamBase = 1000;
constexpr std::uint64_t kPilotStreamBase = 500000;
constexpr std::uint64_t kFreshDesignBase = 2000000;

struct NodeScalars {
  double t = 0.0;          // t_cross
  double m = 0.0;          // normalizer
  double s = 0.0;          // sqrt(sigma_res)
  double gap = 0.0;        // certificate slack
  double lambda_J = 0.0;
  bool usable = true;
  bool allowed = true;
};

NodeScalars node_scalars(const PrecisionFit& prec) {
  NodeScalars ns;
  ns.t = prec.t_cross(0, 0);
  ns.m = prec.normalizer(0, 0);
  ns.s = std::sqrt(prec.sigma_res(0, 0));
  ns.gap = prec.kkt_gap;
  ns.lambda_J = prec.lambda_J;
  ns.allowed = prec.set_allowed;
  ns.usable = prec.converged && std::abs(ns.t) > 1e-14 && std::abs(ns.m) > 1e-14;
  return ns;
}

// Per-repetition work shared by the full runs and the pilot sweep.
struct RepOutcome {
  bool ok = false;
  RepRecord record;
};

RepOutcome run_repetition(const SimulationConfig& cfg, const MatrixXd& X,
                          const VectorXd& beta0, const IndexSet& S0,
                          const std::vector<PrecisionFit>& precs,
                          const std::vector<int>& coords, const NormSpec& gauge,
                          int rep, std::uint64_t stream_base, bool diagnostics) {
  RepOutcome out;
  RepRecord& rec = out.record;
  rec.rep = rep;

  CounterRng rng = CounterRng::stream(cfg.seed, stream_base + static_cast<std::uint64_t>(rep));
  const int n = cfg.n;
  VectorXd eps(n);
  for (int i = 0; i < n; ++i) eps[i] = cfg.sigma0 * rng.gaussian();
  Dataset data{X, X * beta0 + eps};

  PenalizedFit fit;
  try {
    fit = fit_penalized(data, cfg.norm, cfg.lambda_main, cfg.solver);
  } catch (const std::exception&) {
    return out;
  }
  rec.main_converged = fit.converged;
  if (!fit.converged) return out;

  try {
    rec.sigma_hat = cfg.sigma_mode == SigmaMode::Known
                        ? cfg.sigma_known
                        : sigma_estimate(data, fit, SigmaMode::PlugIn);
  } catch (const std::exception&) {
    return out;
  }

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double z_crit = normal_quantile(1.0 - cfg.alpha / 2.0);
  VectorXd resid = data.Y - X * fit.beta;
  VectorXd diff = fit.beta - beta0;
  VectorXd x_diff = X * diff;

  rec.cover.assign(coords.size(), 0);
  rec.length.assign(coords.size(), 0.0);
  rec.estimate.assign(coords.size(), 0.0);
  rec.max_remainder = 0.0;
  rec.min_gauge_margin = std::numeric_limits<double>::infinity();
  rec.max_identity_error = 0.0;

  const bool gauge_bound = cfg.framework == Framework::Gauge;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    int j = coords[k];
    const PrecisionFit& prec = precs[k];
    NodeScalars ns = node_scalars(prec);
    if (!ns.usable) continue;

    double score = prec.residual.col(0).dot(resid) / n;
    double b = fit.beta[j] + score / ns.t;
    double halfwidth = z_crit * rec.sigma_hat / std::abs(ns.m);
    rec.estimate[k] = b;
    rec.length[k] = 2.0 * halfwidth;
    rec.cover[k] = std::abs(b - beta0[j]) <= halfwidth ? 1 : 0;

    if (diagnostics && cfg.sigma0 > 0.0) {
      // Pivot decomposition: M(b - beta0_j) = R^T eps/(sqrt(n) s) + rem.
      double gaussian = prec.residual.col(0).dot(eps) / (sqrt_n * ns.s);
      double rem = (ns.m * (b - beta0[j]) - gaussian) / cfg.sigma0;
      // Independent route through the score matrix, bypassing T_J.
      double rxd = prec.residual.col(0).dot(x_diff) - n * ns.t * diff[j];
      double rem_indep = -rxd / (sqrt_n * ns.s * cfg.sigma0);
      rec.max_identity_error =
          std::max(rec.max_identity_error, std::abs(rem - rem_indep));
      rec.max_remainder = std::max(rec.max_remainder, std::abs(rem));

      double diff_j = diff[j];
      double bound;
      if (gauge_bound) {
        // gauge column norm: certificate controls g*, bound uses g
        VectorXd diff_jc = diff;
        diff_jc[j] = 0.0;
        bound = sqrt_n * ns.lambda_J * evaluate(gauge, diff_jc) / cfg.sigma0;
      } else {
        VectorXd diff_jc = diff;
        diff_jc[j] = 0.0;
        bound = sqrt_n * ns.lambda_J * evaluate(cfg.norm, diff_jc) / cfg.sigma0;
      }
      (void)diff_j;
      double margin = bound * (1.0 + ns.gap) - std::abs(rem);
      rec.min_gauge_margin = std::min(rec.min_gauge_margin, margin);
    }
  }

  if (diagnostics && cfg.sigma0 > 0.0) {
    NumericDualOptions fast{6, 150, 1e-9};
    NormOps full = ops_full(cfg.norm);
    VectorXd sc = X.transpose() * eps;
    double on_s = 0.0;
    if (!S0.empty()) {
      VectorXd masked = mask_to(sc, S0);
      on_s = full.has_closed_dual() ? full.dual_closed(masked)
                                    : numeric_dual(full, masked, fast);
    }
    double on_sc = 0.0;
    if (S0.size() < cfg.p) {
      NormOps res = ops_residual(cfg.norm, S0);
      VectorXd packed = pack_complement(sc, S0);
      on_sc = res.has_closed_dual() ? res.dual_closed(packed)
                                    : numeric_dual(res, packed, fast);
    }
    rec.lambda_m_value = std::max(on_s, on_sc) / n;
  }
  if (!std::isfinite(rec.min_gauge_margin)) rec.min_gauge_margin = 0.0;
  out.ok = true;
  return out;
}

void aggregate(const SimulationConfig& cfg, const std::vector<int>& coords,
               const std::vector<char>& usable, const std::vector<char>& allowed,
               SimulationResult* res) {
  res->per_coordinate.assign(coords.size(), CoordinateStats{});
  for (std::size_t k = 0; k < coords.size(); ++k) {
    CoordinateStats& st = res->per_coordinate[k];
    st.coordinate = coords[k];
    st.set_allowed = allowed[k] != 0;
    int included = 0;
    double cov = 0.0, len = 0.0;
    for (const RepRecord& rec : res->raw) {
      if (!rec.main_converged || rec.cover.empty() || !usable[k]) {
        ++st.failures;
        continue;
      }
      cov += rec.cover[k];
      len += rec.length[k];
      ++included;
    }
    if (included > 0) {
      st.coverage = cov / included;
      st.avg_length = len / included;
    }
  }

  double ca = 0.0, la = 0.0, ci = 0.0, li = 0.0;
  int na = 0, ni = 0;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const CoordinateStats& st = res->per_coordinate[k];
    if (st.failures >= cfg.r) continue;
    if (coords[k] < cfg.s0) {
      ca += st.coverage;
      la += st.avg_length;
      ++na;
    } else {
      ci += st.coverage;
      li += st.avg_length;
      ++ni;
    }
  }
  res->mean_cov_active = na > 0 ? ca / na : 0.0;
  res->mean_len_active = na > 0 ? la / na : 0.0;
  res->mean_cov_inactive = ni > 0 ? ci / ni : 0.0;
  res->mean_len_inactive = ni > 0 ? li / ni : 0.0;
}

}  // namespace

void SimulationConfig::validate() const {
  if (n < 2) throw std::invalid_argument("config: n >= 2 required");
  if (p < s0 || s0 < 2) throw std::invalid_argument("config: p >= s0 >= 2 required");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("config: rho in (0,1) required");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("config: alpha in (0,1) required");
  if (r < 1) throw std::invalid_argument("config: r >= 1 required");
  if (sigma0 < 0.0) throw std::invalid_argument("config: sigma0 >= 0 required");
  if (sigma_mode == SigmaMode::Known && sigma_known <= 0.0)
    throw std::invalid_argument("config: sigma_known must be positive");
  NormSpec check = norm;
  check.validate();
  if (norm.dimension != p) throw std::invalid_argument("config: norm dimension must equal p");
}

nlohmann::json config_to_json(const SimulationConfig& cfg) {
  nlohmann::json j;
  j["n"] = cfg.n;
  j["p"] = cfg.p;
  j["rho"] = cfg.rho;
  j["s0"] = cfg.s0;
  j["r"] = cfg.r;
  j["alpha"] = cfg.alpha;
  j["lambda_main"] = cfg.lambda_main;
  j["lambda_node"] = cfg.lambda_node;
  j["norm"] = norm_to_json(cfg.norm);
  j["framework"] = to_string(cfg.framework);
  j["sigma_mode"] = to_string(cfg.sigma_mode);
  j["sigma0"] = cfg.sigma0;
  j["sigma_known"] = cfg.sigma_known;
  j["fixed_design"] = cfg.fixed_design;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["solver"] = {{"max_iter", cfg.solver.max_iter},
                 {"tol", cfg.solver.tol},
                 {"restart", cfg.solver.restart}};
  return j;
}

SimulationConfig config_from_json(const nlohmann::json& j) {
  SimulationConfig cfg;
  cfg.n = j.value("n", cfg.n);
  cfg.p = j.value("p", cfg.p);
  cfg.rho = j.value("rho", cfg.rho);
  cfg.s0 = j.value("s0", cfg.s0);
  cfg.r = j.value("r", cfg.r);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.lambda_main = j.value("lambda_main", 0.0);
  cfg.lambda_node = j.value("lambda_node", 0.0);
  if (j.contains("norm"))
    cfg.norm = norm_from_json(j["norm"]);
  else
    cfg.norm = NormSpec::wedge(cfg.p);
  if (j.contains("framework"))
    cfg.framework = framework_from_string(j["framework"].get<std::string>());
  if (j.contains("sigma_mode"))
    cfg.sigma_mode = sigma_mode_from_string(j["sigma_mode"].get<std::string>());
  cfg.sigma0 = j.value("sigma0", cfg.sigma0);
  cfg.sigma_known = j.value("sigma_known", cfg.sigma0 > 0.0 ? cfg.sigma0 : 1.0);
  cfg.fixed_design = j.value("fixed_design", true);
  cfg.seed = j.value("seed", static_cast<std::uint64_t>(1));
  cfg.threads = j.value("threads", 0);
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    cfg.solver.max_iter = s.value("max_iter", cfg.solver.max_iter);
    cfg.solver.tol = s.value("tol", cfg.solver.tol);
    cfg.solver.restart = s.value("restart", cfg.solver.restart);
  }
  cfg.validate();
  return cfg;
}

Eigen::MatrixXd toeplitz_design(int n, int p, double rho, CounterRng& rng) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("toeplitz rho must be in (0,1)");
  MatrixXd sigma(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) sigma(i, j) = std::pow(rho, std::abs(i - j));
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("Cholesky of the Toeplitz covariance failed");
  MatrixXd Z(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) Z(i, j) = rng.gaussian();
  return Z * MatrixXd(llt.matrixL()).transpose();
}

Eigen::VectorXd make_beta0(int p, int s0) {
  if (s0 < 2 || s0 > p) throw std::invalid_argument("make_beta0 needs 2 <= s0 <= p");
  VectorXd beta = VectorXd::Zero(p);
  const double step = 2.0 / (s0 - 1);
  for (int i = 0; i < s0; ++i) beta[i] = 4.0 - i * step;
  return beta;
}

SimulationResult run_scenario(const SimulationConfig& cfg, NodewiseCache* cache) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();

  SimulationResult res;
  res.config = cfg;

  CounterRng design_rng = CounterRng::stream(cfg.seed, kDesignStream);
  MatrixXd X = cfg.fixed_design
                   ? toeplitz_design(cfg.n, cfg.p, cfg.rho, design_rng)
                   : MatrixXd();
  VectorXd beta0 = make_beta0(cfg.p, cfg.s0);
  IndexSet S0 = IndexSet::range(cfg.s0);
  NormSpec gauge = gauge_of(cfg.norm);

  std::vector<int> coords(static_cast<std::size_t>(cfg.p));
  for (int j = 0; j < cfg.p; ++j) coords[static_cast<std::size_t>(j)] = j;

  std::vector<PrecisionFit> precs;
  if (cfg.fixed_design) {
    Dataset design_only{X, VectorXd::Zero(cfg.n)};
    precs = nodewise_sweep(design_only, cfg.norm, cfg.framework, cfg.lambda_node,
                           cfg.solver, cfg.threads, cache, coords);
  }

  res.raw.assign(static_cast<std::size_t>(cfg.r), RepRecord{});
  std::vector<char> ok(static_cast<std::size_t>(cfg.r), 0);
  parallel_for(cfg.r, cfg.threads, [&](int rep) {
    if (cfg.fixed_design) {
      RepOutcome out = run_repetition(cfg, X, beta0, S0, precs, coords, gauge, rep,
                                      kRepStreamBase, true);
      res.raw[static_cast<std::size_t>(rep)] = std::move(out.record);
      ok[static_cast<std::size_t>(rep)] = out.ok ? 1 : 0;
    } else {
      CounterRng rng = CounterRng::stream(cfg.seed, kFreshDesignBase + static_cast<std::uint64_t>(rep));
      MatrixXd Xr = toeplitz_design(cfg.n, cfg.p, cfg.rho, rng);
      Dataset design_only{Xr, VectorXd::Zero(cfg.n)};
      std::vector<PrecisionFit> local =
          nodewise_sweep(design_only, cfg.norm, cfg.framework, cfg.lambda_node,
                         cfg.solver, 1, nullptr, coords);
      RepOutcome out = run_repetition(cfg, Xr, beta0, S0, local, coords, gauge, rep,
                                      kRepStreamBase, true);
      res.raw[static_cast<std::size_t>(rep)] = std::move(out.record);
      ok[static_cast<std::size_t>(rep)] = out.ok ? 1 : 0;
    }
  });

  for (int rep = 0; rep < cfg.r; ++rep) {
    if (!ok[static_cast<std::size_t>(rep)]) {
      ++res.failed_reps;
      res.raw[static_cast<std::size_t>(rep)].cover.clear();
      res.raw[static_cast<std::size_t>(rep)].length.clear();
    } else if (res.raw[static_cast<std::size_t>(rep)].min_gauge_margin < 0.0) {
      ++res.bound_violations;
    }
  }

  std::vector<char> usable(coords.size(), 1);
  std::vector<char> allowed(coords.size(), 1);
  if (cfg.fixed_design) {
    for (std::size_t k = 0; k < coords.size(); ++k) {
      usable[k] = node_scalars(precs[k]).usable ? 1 : 0;
      allowed[k] = precs[k].set_allowed ? 1 : 0;
    }
  } else {
    for (std::size_t k = 0; k < coords.size(); ++k)
      allowed[k] = is_allowed(cfg.norm, IndexSet::single(coords[k])) ? 1 : 0;
  }
  aggregate(cfg, coords, usable, allowed, &res);

  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

ComparisonResult compare_frameworks(const SimulationConfig& cfg_gauge,
                                    const SimulationConfig& cfg_omega,
                                    NodewiseCache* cache) {
  nlohmann::json a = config_to_json(cfg_gauge);
  nlohmann::json b = config_to_json(cfg_omega);
  for (auto* j : {&a, &b}) {
    j->erase("framework");
    j->erase("lambda_node");
  }
  if (a.dump() != b.dump())
    throw std::invalid_argument(
        "compare_frameworks: configs must match except framework and lambda_node");
  if (cfg_gauge.framework != Framework::Gauge || cfg_omega.framework != Framework::Omega)
    throw std::invalid_argument("compare_frameworks: pass (gauge, omega) configs");

  ComparisonResult cmp;
  cmp.gauge = run_scenario(cfg_gauge, cache);
  cmp.omega = run_scenario(cfg_omega, cache);

  double lg_all = 0.0, lo_all = 0.0, lg_act = 0.0, lo_act = 0.0;
  int n_all = 0, n_act = 0;
  for (std::size_t k = 0; k < cmp.gauge.per_coordinate.size(); ++k) {
    double g = cmp.gauge.per_coordinate[k].avg_length;
    double o = cmp.omega.per_coordinate[k].avg_length;
    if (g <= 0.0 || o <= 0.0) continue;
    lg_all += g;
    lo_all += o;
    ++n_all;
    if (cmp.gauge.per_coordinate[k].coordinate < cfg_gauge.s0) {
      lg_act += g;
      lo_act += o;
      ++n_act;
    }
  }
  cmp.mean_length_ratio = n_all > 0 && lg_all > 0.0 ? lo_all / lg_all : 0.0;
  cmp.mean_length_ratio_active = n_act > 0 && lg_act > 0.0 ? lo_act / lg_act : 0.0;
  return cmp;
}

std::vector<double> default_sweep_factors() {
  return {0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.5, 1.0};
}

LambdaChoice sweep_lambdas(const SimulationConfig& cfg, const SweepGrid& grid,
                           NodewiseCache* cache) {
  SimulationConfig base = cfg;
  base.validate();
  if (grid.lambda_main.empty() || grid.lambda_node.empty())
    throw std::invalid_argument("sweep grids must be nonempty");

  CounterRng design_rng = CounterRng::stream(base.seed, kDesignStream);
  MatrixXd X = toeplitz_design(base.n, base.p, base.rho, design_rng);
  VectorXd beta0 = make_beta0(base.p, base.s0);
  IndexSet S0 = IndexSet::range(base.s0);
  NormSpec gauge = gauge_of(base.norm);

  std::vector<int> coords = grid.pilot_coords;
  if (coords.empty()) {
    for (int j = 0; j < base.s0; ++j) coords.push_back(j);
    for (int extra : {base.s0, base.s0 + 1, (base.s0 + base.p) / 2, base.p - 2, base.p - 1})
      if (extra >= 0 && extra < base.p) coords.push_back(extra);
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  }

  Dataset design_only{X, VectorXd::Zero(base.n)};
  const double target = 1.0 - base.alpha;

  LambdaChoice best;
  double best_score = std::numeric_limits<double>::infinity();
  for (double lam_node : grid.lambda_node) {
    std::vector<PrecisionFit> precs =
        nodewise_sweep(design_only, base.norm, base.framework, lam_node, base.solver,
                       base.threads, cache, coords);
    for (double lam_main : grid.lambda_main) {
      SimulationConfig pilot = base;
      pilot.lambda_main = lam_main;
      pilot.lambda_node = lam_node;
      double cov = 0.0;
      int cells = 0;
      int failures = 0;
      for (int rep = 0; rep < grid.pilot_reps; ++rep) {
        RepOutcome out = run_repetition(pilot, X, beta0, S0, precs, coords, gauge, rep,
                                        kPilotStreamBase, false);
        if (!out.ok) {
          ++failures;
          continue;
        }
        for (std::size_t k = 0; k < coords.size(); ++k) {
          if (coords[k] >= base.s0) continue;
          cov += out.record.cover[k];
          ++cells;
        }
      }
      if (cells == 0) continue;
      double coverage = cov / cells;
      double score = std::abs(coverage - target) + failures;
      if (score < best_score - 1e-12) {
        best_score = score;
        best = {lam_main, lam_node, coverage};
      }
    }
  }
  if (!std::isfinite(best_score))
    throw std::runtime_error("lambda sweep failed: no pilot cell succeeded");
  return best;
}

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", value);
  return std::string(buf);
}

void write_results_csv(const SimulationResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "coordinate,coverage,avg_length,framework,norm,lambda_main,lambda_node,s0,seed\n";
  for (const CoordinateStats& st : res.per_coordinate) {
    out << (st.coordinate + 1) << ',' << format_number(st.coverage) << ','
        << format_number(st.avg_length) << ',' << to_string(res.config.framework) << ','
        << to_string(res.config.norm.kind) << ',' << format_number(res.config.lambda_main)
        << ',' << format_number(res.config.lambda_node) << ',' << res.config.s0 << ','
        << res.config.seed << "\n";
  }
}

void write_raw_log_csv(const SimulationResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "rep,coordinate,estimate,cover,length,sigma_hat,main_converged\n";
  for (const RepRecord& rec : res.raw) {
    if (rec.cover.empty()) {
      out << (rec.rep + 1) << ",,,,," << format_number(rec.sigma_hat) << ','
          << (rec.main_converged ? 1 : 0) << "\n";
      continue;
    }
    for (std::size_t k = 0; k < rec.cover.size(); ++k) {
      out << (rec.rep + 1) << ',' << (res.per_coordinate[k].coordinate + 1) << ','
          << format_number(rec.estimate[k]) << ',' << static_cast<int>(rec.cover[k]) << ','
          << format_number(rec.length[k]) << ',' << format_number(rec.sigma_hat) << ','
          << (rec.main_converged ? 1 : 0) << "\n";
    }
  }
}

void write_diagnostics_csv(const SimulationResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "rep,lambda_m,max_remainder,min_bound_margin,max_identity_error,main_converged\n";
  for (const RepRecord& rec : res.raw) {
    out << (rec.rep + 1) << ',' << format_number(rec.lambda_m_value) << ','
        << format_number(rec.max_remainder) << ',' << format_number(rec.min_gauge_margin)
        << ',' << format_number(rec.max_identity_error) << ','
        << (rec.main_converged ? 1 : 0) << "\n";
  }
}

void write_compare_csv(const ComparisonResult& cmp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "coordinate,coverage_gauge,avg_length_gauge,coverage_omega,avg_length_omega,"
         "length_ratio\n";
  for (std::size_t k = 0; k < cmp.gauge.per_coordinate.size(); ++k) {
    const CoordinateStats& g = cmp.gauge.per_coordinate[k];
    const CoordinateStats& o = cmp.omega.per_coordinate[k];
    double ratio = g.avg_length > 0.0 ? o.avg_length / g.avg_length : 0.0;
    out << (g.coordinate + 1) << ',' << format_number(g.coverage) << ','
        << format_number(g.avg_length) << ',' << format_number(o.coverage) << ','
        << format_number(o.avg_length) << ',' << format_number(ratio) << "\n";
  }
}

}  // namespace structinfer
