// Reference implementations used only by the tests. Each one reaches the
// quantity it checks by a different algorithmic route than the library.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "structinfer/norms.hpp"
#include "structinfer/rng.hpp"

namespace oracles {

using Eigen::VectorXd;

// Wedge norm by exhaustive enumeration of contiguous partitions: the
// variational minimizer is constant on blocks with strictly decreasing
// block values, so scanning every feasible partition finds the optimum.
inline double wedge_enumeration(const VectorXd& beta) {
  const int p = static_cast<int>(beta.size());
  VectorXd sq = beta.cwiseAbs2();
  double best = std::numeric_limits<double>::infinity();
  // bitmask over the p-1 possible block boundaries
  for (unsigned long mask = 0; mask < (1UL << (p - 1)); ++mask) {
    double total = 0.0;
    double prev_mean = std::numeric_limits<double>::infinity();
    bool feasible = true;
    int start = 0;
    for (int i = 0; i < p; ++i) {
      bool boundary = (i == p - 1) || ((mask >> i) & 1UL);
      if (!boundary) continue;
      double sum = 0.0;
      for (int k = start; k <= i; ++k) sum += sq[k];
      int count = i - start + 1;
      double mean = sum / count;
      if (mean > prev_mean + 1e-15) {
        feasible = false;
        break;
      }
      prev_mean = mean;
      total += std::sqrt(static_cast<double>(count) * sum);
      start = i + 1;
    }
    if (feasible) best = std::min(best, total);
  }
  return best;
}

// Wedge norm for p = 2 by a dense grid over decreasing positive cone points,
// with local refinement around the best cell.
inline double wedge_grid_p2(double b1, double b2) {
  auto objective = [&](double a1, double a2) {
    double f = 0.0;
    if (b1 != 0.0) {
      if (a1 <= 0.0) return std::numeric_limits<double>::infinity();
      f += b1 * b1 / a1;
    }
    if (b2 != 0.0) {
      if (a2 <= 0.0) return std::numeric_limits<double>::infinity();
      f += b2 * b2 / a2;
    }
    return 0.5 * (f + a1 + a2);
  };
  double scale = std::max(std::abs(b1), std::abs(b2));
  if (scale == 0.0) return 0.0;
  double lo = scale * 1e-6, hi = scale * 4.0;
  double best = std::numeric_limits<double>::infinity();
  double ba1 = lo, ba2 = lo;
  const int grid = 400;
  for (int i = 0; i <= grid; ++i) {
    double a1 = lo + (hi - lo) * i / grid;
    for (int j = 0; j <= i; ++j) {
      double a2 = lo + (hi - lo) * j / grid;
      double f = objective(a1, a2);
      if (f < best) {
        best = f;
        ba1 = a1;
        ba2 = a2;
      }
    }
  }
  // refine around the best cell
  for (int round = 0; round < 40; ++round) {
    double h = (hi - lo) / grid / std::pow(1.3, round);
    for (int di = -2; di <= 2; ++di) {
      for (int dj = -2; dj <= 2; ++dj) {
        double a1 = ba1 + di * h;
        double a2 = std::min(ba2 + dj * h, a1);
        if (a1 <= 0.0 || a2 <= 0.0) continue;
        double f = objective(a1, a2);
        if (f < best) {
          best = f;
          ba1 = a1;
          ba2 = a2;
        }
      }
    }
  }
  return best;
}

// Lorentz norm by a one-dimensional golden-section search over the common
// radius of the non-protected block, with an inner Lagrangian solve of the
// norm-constrained subproblem (bisection on the multiplier, cubic roots per
// coordinate).
inline double lorentz_reference(const VectorXd& beta, const std::vector<int>& protected_set) {
  const int p = static_cast<int>(beta.size());
  std::vector<char> prot(static_cast<std::size_t>(p), 0);
  for (int j : protected_set) prot[static_cast<std::size_t>(j)] = 1;
  std::vector<double> x;  // non-protected, nonzero
  std::vector<double> t;  // protected values |beta_j|
  for (int i = 0; i < p; ++i) {
    if (prot[static_cast<std::size_t>(i)])
      t.push_back(std::abs(beta[i]));
    else if (beta[i] != 0.0)
      x.push_back(std::abs(beta[i]));
  }

  // inner: min over ||a||_2 <= rho, a > 0 of 0.5*sum(x_i^2/a_i + a_i)
  auto inner = [&](double rho) {
    if (x.empty()) return 0.0;
    double norm_unc = 0.0;
    for (double xi : x) norm_unc += xi * xi;
    if (std::sqrt(norm_unc) <= rho) {
      double s = 0.0;
      for (double xi : x) s += xi;
      return s;  // a_i = x_i
    }
    if (rho <= 0.0) return std::numeric_limits<double>::infinity();
    // active ball: solve 2 mu a^3 + a^2 = x^2 per coordinate, bisect on mu
    auto radius = [&](double mu) {
      double ss = 0.0;
      for (double xi : x) {
        double lo = 0.0, hi = xi;
        for (int it = 0; it < 200; ++it) {
          double a = 0.5 * (lo + hi);
          if (2.0 * mu * a * a * a + a * a < xi * xi)
            lo = a;
          else
            hi = a;
        }
        double a = 0.5 * (lo + hi);
        ss += a * a;
      }
      return std::sqrt(ss);
    };
    double mu_lo = 0.0, mu_hi = 1.0;
    while (radius(mu_hi) > rho && mu_hi < 1e18) mu_hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      double mu = 0.5 * (mu_lo + mu_hi);
      if (radius(mu) > rho)
        mu_lo = mu;
      else
        mu_hi = mu;
    }
    double mu = 0.5 * (mu_lo + mu_hi);
    double f = 0.0;
    for (double xi : x) {
      double lo = 0.0, hi = xi;
      for (int it = 0; it < 200; ++it) {
        double a = 0.5 * (lo + hi);
        if (2.0 * mu * a * a * a + a * a < xi * xi)
          lo = a;
        else
          hi = a;
      }
      double a = 0.5 * (lo + hi);
      f += 0.5 * (xi * xi / std::max(a, 1e-300) + a);
    }
    return f;
  };

  auto total = [&](double rho) {
    double f = inner(rho);
    for (double tj : t) {
      double aj = std::max(tj, rho);  // min over a_j >= rho of the scalar term
      if (tj == 0.0)
        f += 0.5 * aj;
      else
        f += 0.5 * (tj * tj / std::max(aj, 1e-300) + aj);
    }
    return f;
  };

  double hi = 1e-12;
  for (double xi : x) hi += xi * xi;
  hi = std::sqrt(hi) + 1.0;
  for (double tj : t) hi = std::max(hi, tj + 1.0);
  double lo = 0.0;
  // golden-section on the convex profile
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = total(c), fd = total(d);
  for (int it = 0; it < 200; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = total(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = total(d);
    }
  }
  return std::min(fc, fd);
}

// Slope value by sort-and-dot.
inline double slope_sort_dot(const VectorXd& weights, const VectorXd& beta) {
  VectorXd mag = beta.cwiseAbs();
  std::sort(mag.data(), mag.data() + mag.size(), std::greater<double>());
  return weights.dot(mag);
}

// Best prox objective over a candidate cloud: random perturbations of two
// anchors plus sign/sparsity patterns.
inline double best_candidate_prox_objective(
    const structinfer::NormSpec& norm, const VectorXd& v, double t,
    const VectorXd& anchor, int candidates, structinfer::CounterRng& rng,
    const std::function<double(const VectorXd&)>& norm_eval) {
  const int p = static_cast<int>(v.size());
  double best = std::numeric_limits<double>::infinity();
  auto objective = [&](const VectorXd& b) {
    return 0.5 * (b - v).squaredNorm() + t * norm_eval(b);
  };
  best = std::min(best, objective(VectorXd::Zero(p)));
  best = std::min(best, objective(v));
  best = std::min(best, objective(anchor));
  for (int c = 0; c < candidates; ++c) {
    VectorXd b(p);
    double mode = rng.uniform();
    if (mode < 0.4) {
      double radius = 1e-4 * std::pow(10.0, 4.0 * rng.uniform());  // 1e-4 .. 1
      for (int i = 0; i < p; ++i) b[i] = anchor[i] + radius * rng.gaussian();
    } else if (mode < 0.7) {
      for (int i = 0; i < p; ++i) b[i] = v[i] * rng.uniform();
    } else {
      for (int i = 0; i < p; ++i)
        b[i] = rng.uniform() < 0.5 ? 0.0 : v[i] * (2.0 * rng.uniform() - 0.5);
    }
    best = std::min(best, objective(b));
  }
  (void)norm;
  return best;
}

// sup of z^T beta over the unit ball boundary of an arbitrary norm: a dense
// direction grid scaled onto the boundary (p = 2 or 3), followed by local
// angular refinement around the best cell.
inline double dual_boundary_grid(const std::function<double(const VectorXd&)>& norm_eval,
                                 const VectorXd& z, int steps) {
  const int p = static_cast<int>(z.size());
  auto score2 = [&](double th) {
    VectorXd u(2);
    u << std::cos(th), std::sin(th);
    double nv = norm_eval(u);
    return nv > 0.0 ? z.dot(u) / nv : 0.0;
  };
  auto score3 = [&](double phi, double th) {
    VectorXd u(3);
    u << std::sin(phi) * std::cos(th), std::sin(phi) * std::sin(th), std::cos(phi);
    double nv = norm_eval(u);
    return nv > 0.0 ? z.dot(u) / nv : 0.0;
  };

  double best = 0.0;
  if (p == 2) {
    double best_th = 0.0;
    for (int i = 0; i < steps; ++i) {
      double th = 2.0 * M_PI * i / steps;
      double f = score2(th);
      if (f > best) {
        best = f;
        best_th = th;
      }
    }
    double h = 2.0 * M_PI / steps;
    for (int round = 0; round < 60; ++round) {
      for (int d : {-1, 1}) {
        double f = score2(best_th + d * h);
        if (f > best) {
          best = f;
          best_th += d * h;
        }
      }
      h *= 0.7;
    }
    return best;
  }

  double best_phi = 0.0, best_th = 0.0;
  for (int i = 0; i < steps; ++i) {
    double phi = M_PI * i / (steps - 1);
    for (int j = 0; j < steps; ++j) {
      double th = 2.0 * M_PI * j / steps;
      double f = score3(phi, th);
      if (f > best) {
        best = f;
        best_phi = phi;
        best_th = th;
      }
    }
  }
  double h = 2.0 * M_PI / steps;
  for (int round = 0; round < 80; ++round) {
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        if (di == 0 && dj == 0) continue;
        double f = score3(best_phi + di * h, best_th + dj * h);
        if (f > best) {
          best = f;
          best_phi += di * h;
          best_th += dj * h;
        }
      }
    }
    h *= 0.75;
  }
  return best;
}

inline VectorXd random_vector(int p, structinfer::CounterRng& rng, double scale = 1.0) {
  VectorXd v(p);
  for (int i = 0; i < p; ++i) v[i] = scale * rng.gaussian();
  return v;
}

}  // namespace oracles
