#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace structinfer {

enum class NormKind {
  L1,
  Slope,
  GroupLasso,
  Wedge,
  GroupWedge,
  Lorentz,
  GeneralizedLorentz,
};

std::string to_string(NormKind kind);
NormKind norm_kind_from_string(const std::string& name);

/// Sorted, duplicate-free set of 0-based coordinates.
struct IndexSet {
  std::vector<int> indices;

  IndexSet() = default;
  explicit IndexSet(std::vector<int> idx);
  static IndexSet single(int j) { return IndexSet({j}); }
  static IndexSet range(int count);  // {0, ..., count-1}

  int size() const { return static_cast<int>(indices.size()); }
  bool empty() const { return indices.empty(); }
  bool contains(int j) const;
  IndexSet complement(int dimension) const;
  void validate(int dimension) const;

  bool operator==(const IndexSet& other) const { return indices == other.indices; }
};

/// Description of a penalty norm: the kind plus whatever parameters that
/// kind needs (weight sequence, group partition, protected coordinates).
struct NormSpec {
  NormKind kind = NormKind::L1;
  int dimension = 0;
  /// Slope: non-increasing weights, 1 >= l_1 >= ... >= l_p > 0.
  Eigen::VectorXd weights;
  /// GroupLasso / GroupWedge: partition of {0, ..., p-1}, in listed order.
  std::vector<std::vector<int>> groups;
  /// Optional per-group multipliers for GroupLasso (empty means all ones).
  /// The GroupWedge gauge uses sqrt(|G_j|) here.
  Eigen::VectorXd group_weights;
  /// GeneralizedLorentz: coordinates whose cone entries dominate the rest.
  /// Lorentz fixes this to the last coordinate.
  std::vector<int> protected_set;

  static NormSpec l1(int p);
  static NormSpec slope(const Eigen::VectorXd& weights);
  static NormSpec group_lasso(std::vector<std::vector<int>> groups, int p);
  static NormSpec group_lasso_weighted(std::vector<std::vector<int>> groups,
                                       const Eigen::VectorXd& group_weights, int p);
  static NormSpec wedge(int p);
  static NormSpec group_wedge(std::vector<std::vector<int>> groups, int p);
  static NormSpec lorentz(int p);
  static NormSpec generalized_lorentz(std::vector<int> protected_set, int p);

  /// Throws std::invalid_argument when a structural invariant is violated.
  void validate() const;

  /// Coordinates of the cone vertex set for the Lorentz family
  /// ({p-1} for Lorentz, the protected set otherwise).
  std::vector<int> lorentz_protected() const;
};

nlohmann::json norm_to_json(const NormSpec& spec);
NormSpec norm_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Norm operations
// ---------------------------------------------------------------------------

/// Omega(beta). Wedge and GroupWedge use the pool-adjacent-violators block
/// closed form; the Lorentz family minimizes the variational objective by
/// projected gradient over the cone.
double evaluate(const NormSpec& norm, const Eigen::VectorXd& beta);

/// argmin_beta 0.5*||beta - v||_2^2 + t*Omega(beta), t > 0.
Eigen::VectorXd prox(const NormSpec& norm, const Eigen::VectorXd& v, double t);

/// Dual norm Omega*(z) = sup_{Omega(beta) <= 1} beta^T z. Closed form for
/// L1, Slope and GroupLasso; multi-restart projected ascent for the wedge
/// and Lorentz families (approximate, see dual_is_exact).
double dual(const NormSpec& norm, const Eigen::VectorXd& z);

/// True when dual() is a closed form rather than a numerical approximation.
bool dual_is_exact(const NormSpec& norm);

/// Companion norm Omega^{S^c} on the complement, evaluated at the packed
/// vector beta_sc (coordinates of S^c in increasing original order).
/// Requires is_allowed(norm, S).
double residual_norm(const NormSpec& norm, const IndexSet& S, const Eigen::VectorXd& beta_sc);

/// Omega(beta_S) + Omega^{S^c}(beta_{S^c}) for a full-length beta.
double upsilon(const NormSpec& norm, const IndexSet& S, const Eigen::VectorXd& beta);

/// Dual of the combined norm: max of the blockwise duals.
double upsilon_dual(const NormSpec& norm, const IndexSet& S, const Eigen::VectorXd& z);

/// Closed-form largest norm lower-bounding every combined norm over allowed
/// sets: L1 stays L1, Slope gives l_p * L1, the wedge and Lorentz families
/// give L1, GroupWedge gives the sqrt(|G|)-weighted GroupLasso.
NormSpec gauge_of(const NormSpec& norm);

/// Smallest constant with Omega(beta_{S^c}) <= C * Omega^{S^c}(beta_{S^c}).
double c_constant(const NormSpec& norm, const IndexSet& S);

/// Whether the norm is weakly decomposable for S.
bool is_allowed(const NormSpec& norm, const IndexSet& S);

// ---------------------------------------------------------------------------
// Internal norm machinery shared with the solvers
// ---------------------------------------------------------------------------

/// Type-erased evaluate/prox bundle for a norm on some packed coordinate
/// space. Solvers only need these two callables plus an optional closed-form
/// dual; the numeric dual works for any bundle through the prox.
struct NormOps {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&)> eval;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> prox;
  /// Empty when no closed form exists.
  std::function<double(const Eigen::VectorXd&)> dual_closed;

  bool has_closed_dual() const { return static_cast<bool>(dual_closed); }
  double dual_norm(const Eigen::VectorXd& z) const;
};

NormOps ops_full(const NormSpec& norm);
/// Companion norm Omega^{S^c} on packed S^c coordinates.
NormOps ops_residual(const NormSpec& norm, const IndexSet& S);
/// Omega restricted to vectors vanishing on J, on packed J^c coordinates.
NormOps ops_masked(const NormSpec& norm, const IndexSet& J);

struct NumericDualOptions {
  int restarts = 20;
  int max_iters = 400;
  double tol = 1e-10;
};

/// sup z^T beta over the unit ball of the bundled norm, by projected ascent
/// with deterministic pseudo-random restarts.
double numeric_dual(const NormOps& ops, const Eigen::VectorXd& z,
                    const NumericDualOptions& opts = {});

/// Embeds a packed J^c vector into R^p with zeros on J.
Eigen::VectorXd embed_complement(const Eigen::VectorXd& packed, const IndexSet& J, int p);
/// Extracts the J^c coordinates of a full vector, in increasing order.
Eigen::VectorXd pack_complement(const Eigen::VectorXd& full, const IndexSet& J);
/// Zeroes the coordinates outside S.
Eigen::VectorXd mask_to(const Eigen::VectorXd& full, const IndexSet& S);

}  // namespace structinfer
