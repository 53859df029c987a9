#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "structinfer/norms.hpp"
#include "structinfer/rng.hpp"

using namespace structinfer;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::vector<NormSpec> zoo(int p) {
  std::vector<NormSpec> out;
  out.push_back(NormSpec::l1(p));
  VectorXd w(p);
  for (int i = 0; i < p; ++i) w[i] = 1.0 - 0.8 * i / std::max(1, p - 1);
  out.push_back(NormSpec::slope(w));
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < p; i += 2) {
    std::vector<int> g{i};
    if (i + 1 < p) g.push_back(i + 1);
    groups.push_back(g);
  }
  out.push_back(NormSpec::group_lasso(groups, p));
  out.push_back(NormSpec::wedge(p));
  out.push_back(NormSpec::group_wedge(groups, p));
  out.push_back(NormSpec::lorentz(p));
  if (p >= 3) out.push_back(NormSpec::generalized_lorentz({p - 2, p - 1}, p));
  return out;
}

std::vector<IndexSet> enumerate_allowed(const NormSpec& norm) {
  std::vector<IndexSet> out;
  const int p = norm.dimension;
  for (unsigned mask = 0; mask < (1u << p); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < p; ++i)
      if ((mask >> i) & 1u) idx.push_back(i);
    IndexSet s(idx);
    if (s.size() < p && is_allowed(norm, s)) out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("evaluate: stated examples") {
  CHECK(evaluate(NormSpec::l1(3), vec({1, -2, 3})) == doctest::Approx(6.0));
  CHECK(evaluate(NormSpec::wedge(2), vec({0, 1})) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(evaluate(NormSpec::slope(vec({1, 0.5})), vec({3, 1})) == doctest::Approx(3.5));
  CHECK(evaluate(NormSpec::group_lasso({{0, 1}, {2}}, 3), vec({3, 4, 5})) ==
        doctest::Approx(10.0));
  CHECK(evaluate(NormSpec::wedge(4), VectorXd::Zero(4)) == 0.0);
  CHECK(evaluate(NormSpec::lorentz(3), VectorXd::Zero(3)) == 0.0);
}

TEST_CASE("evaluate: wedge closed form equals cone minimization") {
  CHECK(evaluate(NormSpec::wedge(2), vec({0, 1})) ==
        doctest::Approx(oracles::wedge_grid_p2(0, 1)).epsilon(1e-5));
  CounterRng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    int p = 2 + static_cast<int>(rng.uniform() * 4);
    VectorXd beta = oracles::random_vector(p, rng, 2.0);
    if (trial % 3 == 0) beta[static_cast<int>(rng.uniform() * p)] = 0.0;
    double lib = evaluate(NormSpec::wedge(p), beta);
    double ref = oracles::wedge_enumeration(beta);
    CHECK(lib == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("evaluate: Lorentz matches the reference minimizer") {
  CounterRng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    int p = 2 + static_cast<int>(rng.uniform() * 4);
    VectorXd beta = oracles::random_vector(p, rng, 2.0);
    NormSpec lo = NormSpec::lorentz(p);
    double lib = evaluate(lo, beta);
    double ref = oracles::lorentz_reference(beta, lo.lorentz_protected());
    CHECK(lib == doctest::Approx(ref).epsilon(1e-6));
  }
  // p = 2: the Lorentz cone is the reversed wedge cone
  CounterRng rng2(13);
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd beta = oracles::random_vector(2, rng2, 2.0);
    VectorXd rev = vec({beta[1], beta[0]});
    CHECK(evaluate(NormSpec::lorentz(2), beta) ==
          doctest::Approx(evaluate(NormSpec::wedge(2), rev)).epsilon(1e-7));
  }
}

TEST_CASE("evaluate: errors") {
  CHECK_THROWS_AS(evaluate(NormSpec::l1(3), vec({1, 2})), std::invalid_argument);
  VectorXd bad = vec({1, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(evaluate(NormSpec::l1(2), bad), std::invalid_argument);
  CHECK_THROWS_AS(NormSpec::slope(vec({1.5, 0.5})), std::invalid_argument);
  CHECK_THROWS_AS(NormSpec::slope(vec({0.5, 0.7})), std::invalid_argument);
}

TEST_CASE("prox: stated examples") {
  VectorXd out = prox(NormSpec::l1(2), vec({2, -0.5}), 1.0);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(0.0));

  out = prox(NormSpec::group_lasso({{0, 1}}, 2), vec({3, 4}), 5.0);
  CHECK(out.norm() == doctest::Approx(0.0));

  out = prox(NormSpec::slope(vec({1, 1})), vec({3, 1}), 1.0);
  CHECK(out[0] == doctest::Approx(2.0));
  CHECK(out[1] == doctest::Approx(0.0));

  CHECK(prox(NormSpec::wedge(3), VectorXd::Zero(3), 0.7).norm() == 0.0);
  CHECK_THROWS_AS(prox(NormSpec::l1(2), vec({1, 2}), 0.0), std::invalid_argument);
}

TEST_CASE("prox: beats candidate clouds for every kind") {
  CounterRng rng(21);
  for (const NormSpec& norm : zoo(5)) {
    NormOps ops = ops_full(norm);
    for (int trial = 0; trial < 8; ++trial) {
      VectorXd v = oracles::random_vector(5, rng, 2.0);
      double t = 0.1 + 2.0 * rng.uniform();
      VectorXd px = prox(norm, v, t);
      double obj_prox = 0.5 * (px - v).squaredNorm() + t * ops.eval(px);
      double obj_best = oracles::best_candidate_prox_objective(norm, v, t, px, 800, rng,
                                                               ops.eval);
      CHECK(obj_prox <= obj_best + 1e-8);
    }
  }
}

TEST_CASE("dual: stated examples") {
  CHECK(dual(NormSpec::l1(2), vec({1, -3})) == doctest::Approx(3.0));
  CHECK(dual(NormSpec::slope(vec({1, 0.5})), vec({1, 1})) == doctest::Approx(4.0 / 3.0));
  CHECK(dual(NormSpec::wedge(3), vec({1, 0, 0})) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(dual_is_exact(NormSpec::l1(2)));
  CHECK(!dual_is_exact(NormSpec::wedge(2)));
  CHECK_THROWS_AS(dual(NormSpec::l1(3), vec({1, 2})), std::invalid_argument);
}

TEST_CASE("dual: slope formula matches the boundary grid") {
  CounterRng rng(31);
  NormSpec sl = NormSpec::slope(vec({1, 0.6}));
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd z = oracles::random_vector(2, rng);
    double lib = dual(sl, z);
    double ref = oracles::dual_boundary_grid(
        [&](const VectorXd& u) { return evaluate(sl, u); }, z, 4000);
    CHECK(lib == doctest::Approx(ref).epsilon(1e-5));
  }
}

TEST_CASE("dual inequality: pointwise norm domination flips for duals") {
  // l_p * L1 <= Slope <= L1 pointwise, so the duals satisfy
  // dual(L1) <= dual(Slope) <= dual(l_p * L1).
  CounterRng rng(32);
  VectorXd w = vec({1, 0.7, 0.4});
  NormSpec sl = NormSpec::slope(w);
  NormSpec l1 = NormSpec::l1(3);
  NormSpec scaled = NormSpec::slope(vec({0.4, 0.4, 0.4}));
  for (int trial = 0; trial < 1000; ++trial) {
    VectorXd b = oracles::random_vector(3, rng);
    CHECK(evaluate(scaled, b) <= evaluate(sl, b) + 1e-10);
    CHECK(evaluate(sl, b) <= evaluate(l1, b) + 1e-10);
    VectorXd z = oracles::random_vector(3, rng);
    CHECK(dual(l1, z) <= dual(sl, z) + 1e-8);
    CHECK(dual(sl, z) <= dual(scaled, z) + 1e-8);
  }
}

TEST_CASE("residual_norm: stated examples") {
  CHECK(residual_norm(NormSpec::slope(vec({1, 0.5, 0.25})), IndexSet({0}), vec({2, 1})) ==
        doctest::Approx(1.25));
  CHECK(residual_norm(NormSpec::l1(3), IndexSet({1}), vec({1, 1})) == doctest::Approx(2.0));
  CHECK(residual_norm(NormSpec::wedge(3), IndexSet({0}), vec({0, 1})) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK_THROWS_AS(residual_norm(NormSpec::wedge(3), IndexSet({1}), vec({1, 1})),
                  std::invalid_argument);
}

TEST_CASE("upsilon: stated examples") {
  CHECK(upsilon(NormSpec::l1(3), IndexSet({0}), vec({1, 2, 3})) == doctest::Approx(6.0));
  CHECK(upsilon(NormSpec::slope(vec({1, 0.5})), IndexSet({0}), vec({3, 1})) ==
        doctest::Approx(3.5));
  CHECK(upsilon(NormSpec::wedge(3), IndexSet({0}), vec({5, 0, 1})) ==
        doctest::Approx(5.0 + std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("upsilon_dual: stated examples") {
  CHECK(upsilon_dual(NormSpec::l1(2), IndexSet({0}), vec({1, -3})) == doctest::Approx(3.0));
  CHECK(upsilon_dual(NormSpec::slope(vec({1, 0.5})), IndexSet({0}), vec({1, 1})) ==
        doctest::Approx(2.0));
  CHECK(upsilon_dual(NormSpec::wedge(3), IndexSet({0, 1}), VectorXd::Zero(3)) ==
        doctest::Approx(0.0));
}

TEST_CASE("upsilon_dual: equals the combined-ball boundary sup (p <= 3)") {
  CounterRng rng(41);
  auto check_norm = [&](const NormSpec& norm, int trials) {
    for (const IndexSet& S : enumerate_allowed(norm)) {
      if (S.empty()) continue;
      for (int trial = 0; trial < trials; ++trial) {
        VectorXd z = oracles::random_vector(norm.dimension, rng);
        double lib = upsilon_dual(norm, S, z);
        double ref = oracles::dual_boundary_grid(
            [&](const VectorXd& u) { return upsilon(norm, S, u); }, z,
            norm.dimension == 2 ? 2000 : 160);
        CHECK(lib == doctest::Approx(ref).epsilon(1e-3));
      }
    }
  };
  check_norm(NormSpec::l1(2), 4);
  check_norm(NormSpec::slope(vec({1, 0.5, 0.3})), 2);
  check_norm(NormSpec::group_lasso({{0, 1}, {2}}, 3), 3);
  check_norm(NormSpec::wedge(3), 2);
  check_norm(NormSpec::lorentz(2), 3);
}

TEST_CASE("gauge_of: stated examples") {
  CHECK(gauge_of(NormSpec::wedge(4)).kind == NormKind::L1);
  NormSpec g = gauge_of(NormSpec::slope(vec({1, 0.6, 0.2})));
  CHECK(evaluate(g, vec({1, 1, 1})) == doctest::Approx(0.6));  // 3 * 0.2
  NormSpec gw = gauge_of(NormSpec::group_wedge({{0, 1}, {2}}, 3));
  CHECK(gw.kind == NormKind::GroupLasso);
  // sqrt(2)*||(1,1)|| + sqrt(1)*|1| = 2 + 1
  CHECK(evaluate(gw, vec({1, 1, 1})) == doctest::Approx(3.0));
  CHECK(gauge_of(NormSpec::lorentz(3)).kind == NormKind::L1);
}

TEST_CASE("c_constant: stated examples") {
  CHECK(c_constant(NormSpec::wedge(8), IndexSet({0, 1, 2, 3, 4})) ==
        doctest::Approx(std::sqrt(6.0)));
  CHECK(c_constant(NormSpec::l1(4), IndexSet({1, 3})) == doctest::Approx(1.0));
  CHECK(c_constant(NormSpec::lorentz(4), IndexSet({3})) == doctest::Approx(1.5));
  CHECK(c_constant(NormSpec::generalized_lorentz({2, 3}, 4), IndexSet({2, 3})) ==
        doctest::Approx(2.0));
  CHECK(c_constant(NormSpec::slope(vec({1, 0.5, 0.25})), IndexSet({0})) ==
        doctest::Approx(4.0));
}

TEST_CASE("is_allowed: stated examples") {
  CHECK(is_allowed(NormSpec::wedge(5), IndexSet({0, 1, 2})));
  CHECK(!is_allowed(NormSpec::wedge(5), IndexSet({1, 2})));
  CHECK(is_allowed(NormSpec::lorentz(4), IndexSet({3})));
  CHECK(!is_allowed(NormSpec::lorentz(4), IndexSet({0})));
  CHECK(is_allowed(NormSpec::l1(4), IndexSet({0, 2})));
  CHECK(is_allowed(NormSpec::group_lasso({{0, 1}, {2, 3}}, 4), IndexSet({2, 3})));
  CHECK(!is_allowed(NormSpec::group_lasso({{0, 1}, {2, 3}}, 4), IndexSet({1, 2})));
  CHECK(is_allowed(NormSpec::group_wedge({{0, 1}, {2, 3}}, 4), IndexSet({0, 1})));
  CHECK(!is_allowed(NormSpec::group_wedge({{0, 1}, {2, 3}}, 4), IndexSet({2, 3})));
}

TEST_CASE("norm axioms: homogeneity, triangle inequality, zero") {
  CounterRng rng(51);
  for (const NormSpec& norm : zoo(6)) {
    CHECK(evaluate(norm, VectorXd::Zero(6)) == doctest::Approx(0.0));
    int pair_trials = dual_is_exact(norm) ? 1000 : 150;
    for (int trial = 0; trial < pair_trials; ++trial) {
      VectorXd a = oracles::random_vector(6, rng);
      VectorXd b = oracles::random_vector(6, rng);
      double c = 0.1 + 3.0 * rng.uniform();
      double tol = norm.kind == NormKind::Lorentz ||
                           norm.kind == NormKind::GeneralizedLorentz
                       ? 1e-7
                       : 1e-10;
      CHECK(evaluate(norm, c * a) ==
            doctest::Approx(c * evaluate(norm, a)).epsilon(tol));
      CHECK(evaluate(norm, a + b) <= evaluate(norm, a) + evaluate(norm, b) + 1e-7);
    }
  }
}

TEST_CASE("structural lemmas: sandwich, weak decomposability, contraction, flip") {
  CounterRng rng(52);
  for (const NormSpec& norm : zoo(6)) {
    NormSpec g = gauge_of(norm);
    auto allowed = enumerate_allowed(norm);
    int trials = norm.kind == NormKind::Lorentz ||
                         norm.kind == NormKind::GeneralizedLorentz
                     ? 40
                     : 120;
    for (int trial = 0; trial < trials; ++trial) {
      VectorXd beta = oracles::random_vector(6, rng);
      double omega = evaluate(norm, beta);
      double gauge_val = evaluate(g, beta);
      for (const IndexSet& S : allowed) {
        double ups = upsilon(norm, S, beta);
        CHECK(gauge_val <= ups + 1e-7);   // gauge lower-bounds every combined norm
        CHECK(ups <= omega + 1e-7);       // weak decomposability
      }
      // contraction and flip of the closed-form gauges
      IndexSet J({1, 3});
      VectorXd masked = beta;
      for (int j : J.indices) masked[j] = 0.0;
      CHECK(evaluate(g, masked) <= gauge_val + 1e-10);
      VectorXd flipped = beta;
      for (int i = 0; i < 6; ++i)
        if (!J.contains(i)) flipped[i] = -flipped[i];
      CHECK(evaluate(g, flipped) == doctest::Approx(gauge_val).epsilon(1e-12));
    }
  }
}

TEST_CASE("C constant bounds the norm by the residual norm on complements") {
  CounterRng rng(53);
  for (const NormSpec& norm : zoo(6)) {
    auto allowed = enumerate_allowed(norm);
    int trials = norm.kind == NormKind::Lorentz ||
                         norm.kind == NormKind::GeneralizedLorentz
                     ? 30
                     : 150;
    for (int trial = 0; trial < trials; ++trial) {
      VectorXd beta = oracles::random_vector(6, rng);
      for (const IndexSet& S : allowed) {
        IndexSet sc = S.complement(6);
        VectorXd masked = mask_to(beta, sc);
        double lhs = evaluate(norm, masked);
        double rhs = c_constant(norm, S) *
                     residual_norm(norm, S, pack_complement(beta, S));
        CHECK(lhs <= rhs + 1e-7);
      }
    }
  }
}

TEST_CASE("NormSpec json round trip") {
  CounterRng rng(54);
  for (const NormSpec& norm : zoo(5)) {
    NormSpec back = norm_from_json(norm_to_json(norm));
    for (int trial = 0; trial < 5; ++trial) {
      VectorXd beta = oracles::random_vector(5, rng);
      CHECK(evaluate(norm, beta) == doctest::Approx(evaluate(back, beta)).epsilon(1e-9));
    }
  }
}
