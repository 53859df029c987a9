#include "structinfer/norms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "structinfer/rng.hpp"

namespace structinfer {

namespace {

using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_vector(const NormSpec& norm, const VectorXd& v, const char* what) {
  require(static_cast<int>(v.size()) == norm.dimension,
          std::string(what) + ": length does not match norm dimension");
  require(v.allFinite(), std::string(what) + ": non-finite input");
}

// ---------------------------------------------------------------------------
// Wedge kernel: pool-adjacent-violators on squared entries.
// ---------------------------------------------------------------------------

struct PavBlock {
  double sum;  // sum of squared entries
  int count;
};

// Maximal blocks with non-increasing means of sq over each block.
std::vector<PavBlock> pav_decreasing_blocks(const VectorXd& sq) {
  std::vector<PavBlock> blocks;
  blocks.reserve(static_cast<std::size_t>(sq.size()));
  for (int i = 0; i < sq.size(); ++i) {
    PavBlock b{sq[i], 1};
    while (!blocks.empty() &&
           b.sum * blocks.back().count > blocks.back().sum * b.count) {
      b.sum += blocks.back().sum;
      b.count += blocks.back().count;
      blocks.pop_back();
    }
    blocks.push_back(b);
  }
  return blocks;
}

// min over decreasing positive a of 0.5*sum(beta_j^2/a_j + a_j):
// value sum_B sqrt(|B| * sum_B beta^2), attained at a_j = block RMS.
double wedge_value(const VectorXd& beta) {
  double total = 0.0;
  for (const PavBlock& b : pav_decreasing_blocks(beta.cwiseAbs2()))
    total += std::sqrt(static_cast<double>(b.count) * std::max(b.sum, 0.0));
  return total;
}

VectorXd wedge_cone_argmin(const VectorXd& beta) {
  VectorXd a(beta.size());
  int pos = 0;
  for (const PavBlock& b : pav_decreasing_blocks(beta.cwiseAbs2())) {
    double v = std::sqrt(std::max(b.sum, 0.0) / b.count);
    for (int k = 0; k < b.count; ++k) a[pos++] = v;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Lorentz kernel: projected gradient over the cone.
// ---------------------------------------------------------------------------

// Euclidean projection onto the closure of the cone
// {a >= 0 : a_j >= ||a restricted to non-protected coords||_2 for all
// protected j}. Non-protected coordinates are clamped to the nonnegative
// orthant first; the remainder reduces to a piecewise-quadratic line search
// in the common radius r = ||x||_2.
void project_lorentz_cone(VectorXd& v, const std::vector<char>& is_protected) {
  const int m = static_cast<int>(v.size());
  double r0_sq = 0.0;
  std::vector<double> ts;
  for (int i = 0; i < m; ++i) {
    if (is_protected[i]) {
      ts.push_back(v[i]);
    } else {
      if (v[i] < 0.0) v[i] = 0.0;
      r0_sq += v[i] * v[i];
    }
  }
  const double r0 = std::sqrt(r0_sq);
  if (ts.empty()) return;  // plain orthant

  std::sort(ts.begin(), ts.end());
  auto objective = [&](double r) {
    double f = (r - r0) * (r - r0);
    for (double t : ts) {
      double d = std::max(t, r) - t;
      f += d * d;
    }
    return f;
  };
  // Candidate radii: per-active-set stationary points plus the breakpoints.
  double best_r = 0.0;
  double best_f = objective(0.0);
  double prefix = 0.0;
  for (std::size_t k = 0; k <= ts.size(); ++k) {
    if (k > 0) prefix += ts[k - 1];
    double cand = std::max(0.0, (r0 + prefix) / (1.0 + static_cast<double>(k)));
    double f = objective(cand);
    if (f < best_f) {
      best_f = f;
      best_r = cand;
    }
    if (k < ts.size()) {
      double bp = std::max(0.0, ts[k]);
      f = objective(bp);
      if (f < best_f) {
        best_f = f;
        best_r = bp;
      }
    }
  }
  const double scale = r0 > 0.0 ? best_r / r0 : 0.0;
  for (int i = 0; i < m; ++i) {
    if (is_protected[i])
      v[i] = std::max(v[i], best_r);
    else
      v[i] *= scale;
  }
}

struct LorentzMin {
  double value;
  VectorXd cone_point;  // full-dimension argmin (zeros on excluded coords)
};

// Variational objective 0.5*sum(beta_i^2/a_i + a_i) minimized over the cone.
// Coordinates outside the protected set with beta_i = 0 contribute 0 under
// the 0/0 = 0 convention and are excluded up front.
LorentzMin lorentz_minimize(const VectorXd& beta, const std::vector<int>& protected_set,
                            double grad_tol = 1e-9, int max_iter = 10000) {
  const int p = static_cast<int>(beta.size());
  std::vector<char> prot_full(static_cast<std::size_t>(p), 0);
  for (int j : protected_set) prot_full[static_cast<std::size_t>(j)] = 1;

  std::vector<int> keep;
  keep.reserve(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i)
    if (prot_full[static_cast<std::size_t>(i)] || beta[i] != 0.0) keep.push_back(i);

  LorentzMin out{0.0, VectorXd::Zero(p)};
  if (keep.empty()) return out;

  const int m = static_cast<int>(keep.size());
  VectorXd b(m);
  std::vector<char> prot(static_cast<std::size_t>(m), 0);
  for (int i = 0; i < m; ++i) {
    b[i] = beta[keep[static_cast<std::size_t>(i)]];
    prot[static_cast<std::size_t>(i)] = prot_full[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])];
  }
  const double scale = b.cwiseAbs().maxCoeff();
  if (scale == 0.0) return out;  // only protected coords, all zero
  b /= scale;

  auto value_at = [&](const VectorXd& a) {
    double f = 0.0;
    for (int i = 0; i < m; ++i) {
      if (b[i] != 0.0) {
        if (a[i] <= 0.0) return kInf;
        f += b[i] * b[i] / a[i];
      }
      f += a[i];
    }
    return 0.5 * f;
  };

  VectorXd a = b.cwiseAbs();
  project_lorentz_cone(a, prot);
  double f = value_at(a);
  if (!std::isfinite(f)) {
    a = a.array() + 1.0;
    project_lorentz_cone(a, prot);
    f = value_at(a);
  }

  double step = 1.0;
  VectorXd grad(m), trial(m);
  for (int iter = 0; iter < max_iter; ++iter) {
    for (int i = 0; i < m; ++i) {
      double ratio = b[i] != 0.0 ? b[i] * b[i] / (a[i] * a[i]) : 0.0;
      grad[i] = 0.5 * (1.0 - ratio);
    }
    step = std::min(step * 2.0, 1e6);
    double f_new = kInf;
    for (;;) {
      trial = a - step * grad;
      project_lorentz_cone(trial, prot);
      f_new = value_at(trial);
      double quad = f + grad.dot(trial - a) + (trial - a).squaredNorm() / (2.0 * step);
      if (f_new <= quad + 1e-15 * (1.0 + std::abs(f))) break;
      step *= 0.5;
      if (step < 1e-18) break;
    }
    if (step < 1e-18) break;
    double move = (trial - a).norm() / step;
    a = trial;
    f = f_new;
    if (move < grad_tol) break;
  }

  out.value = f * scale;
  for (int i = 0; i < m; ++i) out.cone_point[keep[static_cast<std::size_t>(i)]] = a[i] * scale;
  return out;
}

// ---------------------------------------------------------------------------
// Slope kernels
// ---------------------------------------------------------------------------

double slope_value(const VectorXd& weights, const VectorXd& beta) {
  VectorXd mag = beta.cwiseAbs();
  std::sort(mag.data(), mag.data() + mag.size(), std::greater<double>());
  return weights.dot(mag);
}

// Stack-based prox of the sorted-l1 penalty with thresholds lam (decreasing).
VectorXd slope_prox(const VectorXd& lam, const VectorXd& v) {
  const int p = static_cast<int>(v.size());
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return std::abs(v[i]) > std::abs(v[j]); });

  struct Block {
    double sum;
    int count;
  };
  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(p));
  for (int r = 0; r < p; ++r) {
    Block b{std::abs(v[order[static_cast<std::size_t>(r)]]) - lam[r], 1};
    while (!blocks.empty() && blocks.back().sum * b.count <= b.sum * blocks.back().count) {
      b.sum += blocks.back().sum;
      b.count += blocks.back().count;
      blocks.pop_back();
    }
    blocks.push_back(b);
  }
  VectorXd out = VectorXd::Zero(p);
  int r = 0;
  for (const Block& b : blocks) {
    double w = std::max(b.sum / b.count, 0.0);
    for (int k = 0; k < b.count; ++k, ++r) {
      int i = order[static_cast<std::size_t>(r)];
      out[i] = v[i] >= 0.0 ? w : -w;
    }
  }
  return out;
}

double slope_dual(const VectorXd& weights, const VectorXd& z) {
  VectorXd mag = z.cwiseAbs();
  std::sort(mag.data(), mag.data() + mag.size(), std::greater<double>());
  double best = 0.0, num = 0.0, den = 0.0;
  for (int k = 0; k < mag.size(); ++k) {
    num += mag[k];
    den += weights[k];
    best = std::max(best, num / den);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Group helpers
// ---------------------------------------------------------------------------

double group_weight(const NormSpec& norm, int g) {
  if (norm.kind == NormKind::GroupWedge)
    return std::sqrt(static_cast<double>(norm.groups[static_cast<std::size_t>(g)].size()));
  if (norm.group_weights.size() > 0) return norm.group_weights[g];
  return 1.0;
}

double group_l2(const VectorXd& beta, const std::vector<int>& group) {
  double s = 0.0;
  for (int i : group) s += beta[i] * beta[i];
  return std::sqrt(s);
}

// Weighted group norms in listed order.
VectorXd group_norm_vector(const NormSpec& norm, const VectorXd& beta) {
  VectorXd u(static_cast<int>(norm.groups.size()));
  for (int g = 0; g < u.size(); ++g)
    u[g] = group_weight(norm, g) * group_l2(beta, norm.groups[static_cast<std::size_t>(g)]);
  return u;
}

// ---------------------------------------------------------------------------
// Variational prox by alternating minimization (wedge / group wedge /
// Lorentz family). The cone update reuses the evaluation machinery.
// ---------------------------------------------------------------------------

constexpr int kProxRounds = 500;
constexpr double kProxTol = 1e-10;

VectorXd wedge_prox(const VectorXd& v, double t) {
  const int p = static_cast<int>(v.size());
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return VectorXd::Zero(p);
  const VectorXd w = v / scale;
  const double tt = t / scale;
  const double floor = 1e-14;

  VectorXd a = wedge_cone_argmin(w).cwiseMax(floor);
  VectorXd beta(p);
  double prev = kInf;
  for (int round = 0; round < kProxRounds; ++round) {
    beta = w.array() * a.array() / (a.array() + tt);
    a = wedge_cone_argmin(beta).cwiseMax(floor);
    double obj = 0.5 * (beta - w).squaredNorm() +
                 0.5 * tt * ((beta.cwiseAbs2().array() / a.array()).sum() + a.sum());
    if (std::abs(prev - obj) < kProxTol * std::max(1.0, std::abs(obj))) break;
    prev = obj;
  }
  // Exact zeros: one unfloored cone pass, then the closed-form update.
  a = wedge_cone_argmin(beta);
  for (int i = 0; i < p; ++i) beta[i] = a[i] > 0.0 ? w[i] * a[i] / (a[i] + tt) : 0.0;
  return beta * scale;
}

VectorXd group_wedge_prox(const NormSpec& norm, const VectorXd& v, double t) {
  const int p = static_cast<int>(v.size());
  const int g = static_cast<int>(norm.groups.size());
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return VectorXd::Zero(p);
  const VectorXd w = v / scale;
  const double tt = t / scale;
  const double floor = 1e-14;

  VectorXd wsq(g);
  for (int j = 0; j < g; ++j) {
    double gw = group_weight(norm, j);
    wsq[j] = gw * gw;
  }
  auto update_beta = [&](const VectorXd& a, VectorXd& beta) {
    for (int j = 0; j < g; ++j) {
      double s = a[j] > 0.0 ? a[j] / (a[j] + tt * wsq[j]) : 0.0;
      for (int i : norm.groups[static_cast<std::size_t>(j)]) beta[i] = w[i] * s;
    }
  };

  VectorXd a = wedge_cone_argmin(group_norm_vector(norm, w)).cwiseMax(floor);
  VectorXd beta = VectorXd::Zero(p);
  double prev = kInf;
  for (int round = 0; round < kProxRounds; ++round) {
    update_beta(a, beta);
    VectorXd u = group_norm_vector(norm, beta);
    a = wedge_cone_argmin(u).cwiseMax(floor);
    double obj = 0.5 * (beta - w).squaredNorm() +
                 0.5 * tt * ((u.cwiseAbs2().array() / a.array()).sum() + a.sum());
    if (std::abs(prev - obj) < kProxTol * std::max(1.0, std::abs(obj))) break;
    prev = obj;
  }
  a = wedge_cone_argmin(group_norm_vector(norm, beta));
  update_beta(a, beta);
  return beta * scale;
}

VectorXd lorentz_prox(const NormSpec& norm, const VectorXd& v, double t) {
  const int p = static_cast<int>(v.size());
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return VectorXd::Zero(p);
  const VectorXd w = v / scale;
  const double tt = t / scale;
  const std::vector<int> prot = norm.lorentz_protected();

  std::vector<char> is_prot(static_cast<std::size_t>(p), 0);
  for (int j : prot) is_prot[static_cast<std::size_t>(j)] = 1;
  VectorXd a = w.cwiseAbs();
  project_lorentz_cone(a, is_prot);

  VectorXd beta(p);
  double prev = kInf;
  for (int round = 0; round < kProxRounds; ++round) {
    for (int i = 0; i < p; ++i) beta[i] = a[i] > 0.0 ? w[i] * a[i] / (a[i] + tt) : 0.0;
    LorentzMin lm = lorentz_minimize(beta, prot, 1e-10, 4000);
    a = lm.cone_point;
    double obj = 0.5 * (beta - w).squaredNorm() + tt * lm.value;
    if (std::abs(prev - obj) < kProxTol * std::max(1.0, std::abs(obj))) break;
    prev = obj;
  }
  for (int i = 0; i < p; ++i) beta[i] = a[i] > 0.0 ? w[i] * a[i] / (a[i] + tt) : 0.0;
  return beta * scale;
}

// ---------------------------------------------------------------------------
// Allowed sets
// ---------------------------------------------------------------------------

bool is_prefix_set(const IndexSet& S, int) {
  for (int i = 0; i < S.size(); ++i)
    if (S.indices[static_cast<std::size_t>(i)] != i) return false;
  return true;
}

// Which groups S covers; returns {covered group ids} or nullopt-like failure.
bool covered_groups(const NormSpec& norm, const IndexSet& S, std::vector<int>* out) {
  out->clear();
  std::vector<char> in_s(static_cast<std::size_t>(norm.dimension), 0);
  for (int i : S.indices) in_s[static_cast<std::size_t>(i)] = 1;
  for (std::size_t g = 0; g < norm.groups.size(); ++g) {
    std::size_t hit = 0;
    for (int i : norm.groups[g])
      if (in_s[static_cast<std::size_t>(i)]) ++hit;
    if (hit == norm.groups[g].size())
      out->push_back(static_cast<int>(g));
    else if (hit != 0)
      return false;  // partially covered group
  }
  std::size_t covered = 0;
  for (int g : *out) covered += norm.groups[static_cast<std::size_t>(g)].size();
  return covered == S.indices.size();
}

// Companion norm on packed S^c coordinates, expressed as a NormSpec of its
// own so evaluation, prox and duals all reuse the full machinery.
NormSpec residual_spec(const NormSpec& norm, const IndexSet& S) {
  require(is_allowed(norm, S), "S is not an allowed set for this norm");
  const int p = norm.dimension;
  const int m = p - S.size();
  require(m > 0, "residual norm undefined for S = {1..p}");
  switch (norm.kind) {
    case NormKind::L1:
      return NormSpec::l1(m);
    case NormKind::Slope:
      return NormSpec::slope(norm.weights.tail(m));
    case NormKind::GroupLasso:
    case NormKind::GroupWedge: {
      std::vector<int> covered;
      covered_groups(norm, S, &covered);
      std::vector<char> is_covered(norm.groups.size(), 0);
      for (int g : covered) is_covered[static_cast<std::size_t>(g)] = 1;
      // original index -> packed position
      std::vector<int> pos(static_cast<std::size_t>(p), -1);
      IndexSet sc = S.complement(p);
      for (int k = 0; k < sc.size(); ++k)
        pos[static_cast<std::size_t>(sc.indices[static_cast<std::size_t>(k)])] = k;
      std::vector<std::vector<int>> tail_groups;
      Eigen::VectorXd tail_weights(static_cast<int>(norm.groups.size()) - static_cast<int>(covered.size()));
      int t = 0;
      for (std::size_t g = 0; g < norm.groups.size(); ++g) {
        if (is_covered[g]) continue;
        std::vector<int> remapped;
        remapped.reserve(norm.groups[g].size());
        for (int i : norm.groups[g]) remapped.push_back(pos[static_cast<std::size_t>(i)]);
        tail_groups.push_back(std::move(remapped));
        tail_weights[t++] = group_weight(norm, static_cast<int>(g));
      }
      if (norm.kind == NormKind::GroupWedge)
        return NormSpec::group_wedge(std::move(tail_groups), m);
      return NormSpec::group_lasso_weighted(std::move(tail_groups), tail_weights, m);
    }
    case NormKind::Wedge:
      return NormSpec::wedge(m);
    case NormKind::Lorentz:
    case NormKind::GeneralizedLorentz:
      return NormSpec::l1(m);
  }
  throw std::logic_error("unreachable");
}

}  // namespace

// ---------------------------------------------------------------------------
// IndexSet
// ---------------------------------------------------------------------------

IndexSet::IndexSet(std::vector<int> idx) : indices(std::move(idx)) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
}

IndexSet IndexSet::range(int count) {
  std::vector<int> idx(static_cast<std::size_t>(count));
  std::iota(idx.begin(), idx.end(), 0);
  return IndexSet(std::move(idx));
}

bool IndexSet::contains(int j) const {
  return std::binary_search(indices.begin(), indices.end(), j);
}

IndexSet IndexSet::complement(int dimension) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(dimension - size()));
  std::size_t k = 0;
  for (int i = 0; i < dimension; ++i) {
    if (k < indices.size() && indices[k] == i)
      ++k;
    else
      out.push_back(i);
  }
  return IndexSet(std::move(out));
}

void IndexSet::validate(int dimension) const {
  for (int i : indices)
    require(i >= 0 && i < dimension, "index set entry out of range");
}

// ---------------------------------------------------------------------------
// NormSpec
// ---------------------------------------------------------------------------

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::L1: return "l1";
    case NormKind::Slope: return "slope";
    case NormKind::GroupLasso: return "group_lasso";
    case NormKind::Wedge: return "wedge";
    case NormKind::GroupWedge: return "group_wedge";
    case NormKind::Lorentz: return "lorentz";
    case NormKind::GeneralizedLorentz: return "generalized_lorentz";
  }
  throw std::logic_error("unreachable");
}

NormKind norm_kind_from_string(const std::string& name) {
  if (name == "l1") return NormKind::L1;
  if (name == "slope") return NormKind::Slope;
  if (name == "group_lasso") return NormKind::GroupLasso;
  if (name == "wedge") return NormKind::Wedge;
  if (name == "group_wedge") return NormKind::GroupWedge;
  if (name == "lorentz") return NormKind::Lorentz;
  if (name == "generalized_lorentz") return NormKind::GeneralizedLorentz;
  throw std::invalid_argument("unknown norm kind: " + name);
}

NormSpec NormSpec::l1(int p) {
  NormSpec s;
  s.kind = NormKind::L1;
  s.dimension = p;
  s.validate();
  return s;
}

NormSpec NormSpec::slope(const Eigen::VectorXd& weights) {
  NormSpec s;
  s.kind = NormKind::Slope;
  s.dimension = static_cast<int>(weights.size());
  s.weights = weights;
  s.validate();
  return s;
}

NormSpec NormSpec::group_lasso(std::vector<std::vector<int>> groups, int p) {
  NormSpec s;
  s.kind = NormKind::GroupLasso;
  s.dimension = p;
  s.groups = std::move(groups);
  s.validate();
  return s;
}

NormSpec NormSpec::group_lasso_weighted(std::vector<std::vector<int>> groups,
                                        const Eigen::VectorXd& group_weights, int p) {
  NormSpec s;
  s.kind = NormKind::GroupLasso;
  s.dimension = p;
  s.groups = std::move(groups);
  s.group_weights = group_weights;
  s.validate();
  return s;
}

NormSpec NormSpec::wedge(int p) {
  NormSpec s;
  s.kind = NormKind::Wedge;
  s.dimension = p;
  s.validate();
  return s;
}

NormSpec NormSpec::group_wedge(std::vector<std::vector<int>> groups, int p) {
  NormSpec s;
  s.kind = NormKind::GroupWedge;
  s.dimension = p;
  s.groups = std::move(groups);
  s.validate();
  return s;
}

NormSpec NormSpec::lorentz(int p) {
  NormSpec s;
  s.kind = NormKind::Lorentz;
  s.dimension = p;
  s.validate();
  return s;
}

NormSpec NormSpec::generalized_lorentz(std::vector<int> protected_set, int p) {
  NormSpec s;
  s.kind = NormKind::GeneralizedLorentz;
  s.dimension = p;
  std::sort(protected_set.begin(), protected_set.end());
  protected_set.erase(std::unique(protected_set.begin(), protected_set.end()),
                      protected_set.end());
  s.protected_set = std::move(protected_set);
  s.validate();
  return s;
}

void NormSpec::validate() const {
  require(dimension >= 1, "norm dimension must be positive");
  switch (kind) {
    case NormKind::Slope: {
      require(static_cast<int>(weights.size()) == dimension,
              "slope weights length must equal dimension");
      require(weights[0] <= 1.0, "slope weights must satisfy l_1 <= 1");
      for (int i = 0; i < weights.size(); ++i) {
        require(weights[i] > 0.0, "slope weights must be strictly positive");
        if (i > 0) require(weights[i] <= weights[i - 1], "slope weights must be non-increasing");
      }
      break;
    }
    case NormKind::GroupLasso:
    case NormKind::GroupWedge: {
      require(!groups.empty(), "group norm requires a partition");
      std::vector<char> seen(static_cast<std::size_t>(dimension), 0);
      std::size_t total = 0;
      for (const auto& g : groups) {
        require(!g.empty(), "groups must be nonempty");
        for (int i : g) {
          require(i >= 0 && i < dimension, "group index out of range");
          require(!seen[static_cast<std::size_t>(i)], "groups must be disjoint");
          seen[static_cast<std::size_t>(i)] = 1;
        }
        total += g.size();
      }
      require(total == static_cast<std::size_t>(dimension), "groups must cover all coordinates");
      if (group_weights.size() > 0) {
        require(kind == NormKind::GroupLasso, "group_weights only apply to group lasso");
        require(group_weights.size() == static_cast<int>(groups.size()),
                "group_weights length must equal number of groups");
        for (int i = 0; i < group_weights.size(); ++i)
          require(group_weights[i] > 0.0, "group weights must be positive");
      }
      break;
    }
    case NormKind::GeneralizedLorentz: {
      require(!protected_set.empty(), "generalized Lorentz needs a protected set");
      for (int i : protected_set)
        require(i >= 0 && i < dimension, "protected index out of range");
      break;
    }
    case NormKind::L1:
    case NormKind::Wedge:
    case NormKind::Lorentz:
      break;
  }
}

std::vector<int> NormSpec::lorentz_protected() const {
  if (kind == NormKind::Lorentz) return {dimension - 1};
  return protected_set;
}

nlohmann::json norm_to_json(const NormSpec& spec) {
  nlohmann::json j;
  j["kind"] = to_string(spec.kind);
  j["p"] = spec.dimension;
  if (spec.weights.size() > 0)
    j["weights"] = std::vector<double>(spec.weights.data(), spec.weights.data() + spec.weights.size());
  if (!spec.groups.empty()) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : spec.groups) {
      std::vector<int> one_based;
      one_based.reserve(g.size());
      for (int i : g) one_based.push_back(i + 1);
      groups.push_back(one_based);
    }
    j["groups"] = groups;
  }
  if (spec.group_weights.size() > 0)
    j["group_weights"] = std::vector<double>(spec.group_weights.data(),
                                             spec.group_weights.data() + spec.group_weights.size());
  if (!spec.protected_set.empty()) {
    std::vector<int> one_based;
    for (int i : spec.protected_set) one_based.push_back(i + 1);
    j["protected"] = one_based;
  }
  return j;
}

NormSpec norm_from_json(const nlohmann::json& j) {
  NormSpec spec;
  spec.kind = norm_kind_from_string(j.at("kind").get<std::string>());
  spec.dimension = j.at("p").get<int>();
  if (j.contains("weights")) {
    auto w = j["weights"].get<std::vector<double>>();
    spec.weights = Eigen::Map<const VectorXd>(w.data(), static_cast<int>(w.size()));
  } else if (spec.kind == NormKind::Slope) {
    spec.weights = VectorXd::Ones(spec.dimension);
  }
  if (j.contains("groups")) {
    for (const auto& g : j["groups"]) {
      std::vector<int> zero_based;
      for (int i : g.get<std::vector<int>>()) zero_based.push_back(i - 1);
      spec.groups.push_back(std::move(zero_based));
    }
  }
  if (j.contains("group_weights")) {
    auto w = j["group_weights"].get<std::vector<double>>();
    spec.group_weights = Eigen::Map<const VectorXd>(w.data(), static_cast<int>(w.size()));
  }
  if (j.contains("protected")) {
    for (int i : j["protected"].get<std::vector<int>>()) spec.protected_set.push_back(i - 1);
    std::sort(spec.protected_set.begin(), spec.protected_set.end());
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

double evaluate(const NormSpec& norm, const VectorXd& beta) {
  check_vector(norm, beta, "evaluate");
  switch (norm.kind) {
    case NormKind::L1:
      return beta.lpNorm<1>();
    case NormKind::Slope:
      return slope_value(norm.weights, beta);
    case NormKind::GroupLasso: {
      double total = 0.0;
      for (std::size_t g = 0; g < norm.groups.size(); ++g)
        total += group_weight(norm, static_cast<int>(g)) * group_l2(beta, norm.groups[g]);
      return total;
    }
    case NormKind::Wedge:
      return wedge_value(beta);
    case NormKind::GroupWedge:
      return wedge_value(group_norm_vector(norm, beta));
    case NormKind::Lorentz:
    case NormKind::GeneralizedLorentz:
      return lorentz_minimize(beta, norm.lorentz_protected()).value;
  }
  throw std::logic_error("unreachable");
}

Eigen::VectorXd prox(const NormSpec& norm, const VectorXd& v, double t) {
  check_vector(norm, v, "prox");
  require(t > 0.0, "prox requires t > 0");
  switch (norm.kind) {
    case NormKind::L1: {
      VectorXd out(v.size());
      for (int i = 0; i < v.size(); ++i)
        out[i] = std::copysign(std::max(std::abs(v[i]) - t, 0.0), v[i]);
      return out;
    }
    case NormKind::Slope:
      return slope_prox(t * norm.weights, v);
    case NormKind::GroupLasso: {
      VectorXd out = VectorXd::Zero(v.size());
      for (std::size_t g = 0; g < norm.groups.size(); ++g) {
        double nrm = group_l2(v, norm.groups[g]);
        double thr = t * group_weight(norm, static_cast<int>(g));
        if (nrm > thr) {
          double s = 1.0 - thr / nrm;
          for (int i : norm.groups[g]) out[i] = s * v[i];
        }
      }
      return out;
    }
    case NormKind::Wedge:
      return wedge_prox(v, t);
    case NormKind::GroupWedge:
      return group_wedge_prox(norm, v, t);
    case NormKind::Lorentz:
    case NormKind::GeneralizedLorentz:
      return lorentz_prox(norm, v, t);
  }
  throw std::logic_error("unreachable");
}

bool dual_is_exact(const NormSpec& norm) {
  switch (norm.kind) {
    case NormKind::L1:
    case NormKind::Slope:
    case NormKind::GroupLasso:
      return true;
    default:
      return false;
  }
}

double dual(const NormSpec& norm, const VectorXd& z) {
  check_vector(norm, z, "dual");
  switch (norm.kind) {
    case NormKind::L1:
      return z.lpNorm<Eigen::Infinity>();
    case NormKind::Slope:
      return slope_dual(norm.weights, z);
    case NormKind::GroupLasso: {
      double best = 0.0;
      for (std::size_t g = 0; g < norm.groups.size(); ++g)
        best = std::max(best, group_l2(z, norm.groups[g]) / group_weight(norm, static_cast<int>(g)));
      return best;
    }
    default:
      return numeric_dual(ops_full(norm), z);
  }
}

double residual_norm(const NormSpec& norm, const IndexSet& S, const VectorXd& beta_sc) {
  require(is_allowed(norm, S), "S is not an allowed set for this norm");
  require(static_cast<int>(beta_sc.size()) == norm.dimension - S.size(),
          "residual_norm: packed vector has wrong length");
  if (beta_sc.size() == 0) return 0.0;
  return evaluate(residual_spec(norm, S), beta_sc);
}

double upsilon(const NormSpec& norm, const IndexSet& S, const VectorXd& beta) {
  check_vector(norm, beta, "upsilon");
  return evaluate(norm, mask_to(beta, S)) +
         residual_norm(norm, S, pack_complement(beta, S));
}

double upsilon_dual(const NormSpec& norm, const IndexSet& S, const VectorXd& z) {
  check_vector(norm, z, "upsilon_dual");
  require(is_allowed(norm, S), "S is not an allowed set for this norm");
  double on_s = 0.0;
  if (!S.empty()) {
    VectorXd masked = mask_to(z, S);
    on_s = dual_is_exact(norm) ? dual(norm, masked) : numeric_dual(ops_full(norm), masked);
  }
  double on_sc = 0.0;
  if (S.size() < norm.dimension) {
    NormOps res = ops_residual(norm, S);
    on_sc = res.dual_norm(pack_complement(z, S));
  }
  return std::max(on_s, on_sc);
}

NormSpec gauge_of(const NormSpec& norm) {
  switch (norm.kind) {
    case NormKind::L1:
      return norm;
    case NormKind::Slope:
      return NormSpec::slope(VectorXd::Constant(norm.dimension, norm.weights[norm.dimension - 1]));
    case NormKind::GroupLasso:
      return norm;
    case NormKind::Wedge:
    case NormKind::Lorentz:
    case NormKind::GeneralizedLorentz:
      return NormSpec::l1(norm.dimension);
    case NormKind::GroupWedge: {
      Eigen::VectorXd w(static_cast<int>(norm.groups.size()));
      for (int g = 0; g < w.size(); ++g)
        w[g] = std::sqrt(static_cast<double>(norm.groups[static_cast<std::size_t>(g)].size()));
      return NormSpec::group_lasso_weighted(norm.groups, w, norm.dimension);
    }
  }
  throw std::logic_error("unreachable");
}

double c_constant(const NormSpec& norm, const IndexSet& S) {
  require(is_allowed(norm, S), "S is not an allowed set for this norm");
  switch (norm.kind) {
    case NormKind::L1:
    case NormKind::GroupLasso:
      return 1.0;
    case NormKind::Slope:
      return norm.weights[0] / norm.weights[norm.dimension - 1];
    case NormKind::Wedge:
      return std::sqrt(static_cast<double>(S.size()) + 1.0);
    case NormKind::GroupWedge: {
      std::vector<int> covered;
      covered_groups(norm, S, &covered);
      return std::sqrt(static_cast<double>(covered.size()) + 1.0);
    }
    case NormKind::Lorentz:
      return 1.5;
    case NormKind::GeneralizedLorentz:
      return (static_cast<double>(norm.protected_set.size()) + 2.0) / 2.0;
  }
  throw std::logic_error("unreachable");
}

bool is_allowed(const NormSpec& norm, const IndexSet& S) {
  S.validate(norm.dimension);
  switch (norm.kind) {
    case NormKind::L1:
    case NormKind::Slope:
      return true;
    case NormKind::GroupLasso: {
      std::vector<int> covered;
      return covered_groups(norm, S, &covered);
    }
    case NormKind::GroupWedge: {
      std::vector<int> covered;
      if (!covered_groups(norm, S, &covered)) return false;
      for (std::size_t k = 0; k < covered.size(); ++k)
        if (covered[k] != static_cast<int>(k)) return false;
      return true;
    }
    case NormKind::Wedge:
      return is_prefix_set(S, norm.dimension);
    case NormKind::Lorentz:
    case NormKind::GeneralizedLorentz: {
      for (int j : norm.lorentz_protected())
        if (!S.contains(j)) return false;
      return true;
    }
  }
  throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// NormOps bundles and the numeric dual
// ---------------------------------------------------------------------------

double NormOps::dual_norm(const Eigen::VectorXd& z) const {
  if (has_closed_dual()) return dual_closed(z);
  return numeric_dual(*this, z);
}

NormOps ops_full(const NormSpec& norm) {
  NormOps ops;
  ops.dim = norm.dimension;
  NormSpec spec = norm;
  ops.eval = [spec](const VectorXd& v) { return evaluate(spec, v); };
  ops.prox = [spec](const VectorXd& v, double t) { return prox(spec, v, t); };
  if (dual_is_exact(norm))
    ops.dual_closed = [spec](const VectorXd& z) { return dual(spec, z); };
  return ops;
}

NormOps ops_residual(const NormSpec& norm, const IndexSet& S) {
  const int m = norm.dimension - S.size();
  if (m == 0) {
    NormOps ops;
    ops.dim = 0;
    ops.eval = [](const VectorXd&) { return 0.0; };
    ops.prox = [](const VectorXd& v, double) { return v; };
    ops.dual_closed = [](const VectorXd&) { return 0.0; };
    return ops;
  }
  NormSpec spec = residual_spec(norm, S);
  // The Lorentz residual is the l1 norm, so the bundle below is exact for
  // every kind whose residual has a closed dual.
  return ops_full(spec);
}

NormOps ops_masked(const NormSpec& norm, const IndexSet& J) {
  J.validate(norm.dimension);
  NormOps ops;
  const int p = norm.dimension;
  ops.dim = p - J.size();
  NormSpec spec = norm;
  IndexSet mask = J;
  ops.eval = [spec, mask, p](const VectorXd& v) {
    return evaluate(spec, embed_complement(v, mask, p));
  };
  ops.prox = [spec, mask, p](const VectorXd& v, double t) {
    return pack_complement(prox(spec, embed_complement(v, mask, p), t), mask);
  };
  if (dual_is_exact(norm)) {
    // For coordinate-monotone norms the dual of the restriction equals the
    // dual of the zero-embedded argument.
    ops.dual_closed = [spec, mask, p](const VectorXd& z) {
      return dual(spec, embed_complement(z, mask, p));
    };
  }
  return ops;
}

double numeric_dual(const NormOps& ops, const Eigen::VectorXd& z,
                    const NumericDualOptions& opts) {
  if (ops.dim == 0 || z.size() == 0) return 0.0;
  const double znorm = z.norm();
  if (znorm == 0.0) return 0.0;

  auto project_ball = [&](const VectorXd& v) -> VectorXd {
    double val = ops.eval(v);
    if (val <= 1.0) return v;
    double hi = 1e-3 * v.norm();
    for (int k = 0; k < 200 && ops.eval(ops.prox(v, hi)) > 1.0; ++k) hi *= 2.0;
    double lo = 0.0;
    for (int k = 0; k < 64; ++k) {
      double mid = 0.5 * (lo + hi);
      if (ops.eval(ops.prox(v, mid)) > 1.0)
        lo = mid;
      else
        hi = mid;
    }
    VectorXd b = ops.prox(v, hi);
    double bn = ops.eval(b);
    if (bn > 1.0) b /= bn;
    return b;
  };

  auto ascend = [&](VectorXd x) -> double {
    x = project_ball(x);
    double f = z.dot(x);
    int stall = 0;
    const double eta = 1.0 / znorm;
    for (int it = 0; it < opts.max_iters; ++it) {
      x = project_ball(x + eta * z);
      double fn = z.dot(x);
      if (fn - f < opts.tol * std::max(1.0, std::abs(fn)))
        ++stall;
      else
        stall = 0;
      f = std::max(f, fn);
      if (stall >= 8) break;
    }
    return f;
  };

  double best = 0.0;
  // Deterministic starts first: the score direction, its sign pattern, and
  // the largest coordinate.
  best = std::max(best, ascend(z));
  VectorXd sgn(z.size());
  for (int i = 0; i < z.size(); ++i) sgn[i] = z[i] > 0.0 ? 1.0 : (z[i] < 0.0 ? -1.0 : 0.0);
  best = std::max(best, ascend(sgn));
  int arg = 0;
  z.cwiseAbs().maxCoeff(&arg);
  VectorXd e = VectorXd::Zero(z.size());
  e[arg] = z[arg] >= 0.0 ? 1.0 : -1.0;
  best = std::max(best, ascend(e));

  CounterRng rng(0x5EED0A11DULL);
  for (int r = 3; r < opts.restarts; ++r) {
    VectorXd x(z.size());
    for (int i = 0; i < x.size(); ++i) x[i] = rng.gaussian();
    best = std::max(best, ascend(x));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Packing helpers
// ---------------------------------------------------------------------------

Eigen::VectorXd embed_complement(const VectorXd& packed, const IndexSet& J, int p) {
  VectorXd out = VectorXd::Zero(p);
  IndexSet jc = J.complement(p);
  for (int k = 0; k < jc.size(); ++k)
    out[jc.indices[static_cast<std::size_t>(k)]] = packed[k];
  return out;
}

Eigen::VectorXd pack_complement(const VectorXd& full, const IndexSet& J) {
  IndexSet jc = J.complement(static_cast<int>(full.size()));
  VectorXd out(jc.size());
  for (int k = 0; k < jc.size(); ++k)
    out[k] = full[jc.indices[static_cast<std::size_t>(k)]];
  return out;
}

Eigen::VectorXd mask_to(const VectorXd& full, const IndexSet& S) {
  VectorXd out = VectorXd::Zero(full.size());
  for (int i : S.indices) out[i] = full[i];
  return out;
}

}  // namespace structinfer
