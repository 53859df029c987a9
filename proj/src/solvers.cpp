#include "structinfer/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace structinfer {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

MatrixXd drop_columns(const MatrixXd& X, const IndexSet& J) {
  IndexSet jc = J.complement(static_cast<int>(X.cols()));
  MatrixXd out(X.rows(), jc.size());
  for (int k = 0; k < jc.size(); ++k)
    out.col(k) = X.col(jc.indices[static_cast<std::size_t>(k)]);
  return out;
}

MatrixXd take_columns(const MatrixXd& X, const IndexSet& J) {
  MatrixXd out(X.rows(), J.size());
  for (int k = 0; k < J.size(); ++k)
    out.col(k) = X.col(J.indices[static_cast<std::size_t>(k)]);
  return out;
}

// Symmetric inverse square root with an eigenvalue floor; throws naming the
// matrix when it is numerically singular.
MatrixXd inv_sqrt_spd(const MatrixXd& A, const char* name) {
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

double nuclear_norm(const MatrixXd& A) {
  if (A.cols() == 1) return A.col(0).norm();
  return Eigen::JacobiSVD<MatrixXd>(A).singularValues().sum();
}

// KKT slack of the nodewise fit at the exact subdifferential scaling
// W = X_{J^c}^T R Sigma_J^{-1/2} / sqrt(n); slack is relative to lambda_J.
void multivariate_kkt(const MatrixXd& Xjc, const MatrixXd& R, double lambda_J,
                      const ColumnNorm& colnorm, MultivariateFit* fit) {
  const double n = static_cast<double>(R.rows());
  MatrixXd gram = R.transpose() * R / n;
  double max_ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(gram).eigenvalues().maxCoeff();
  if (max_ev <= 1e-28) {
    // interpolating fit: the subdifferential of the nuclear norm at zero is
    // the whole unit ball, no sharp certificate exists
    fit->kkt_gap = 0.0;
    fit->kkt_exact = false;
    return;
  }
  MatrixXd W = Xjc.transpose() * R * inv_sqrt_spd(gram, "Sigma_J") / std::sqrt(n);
  const NumericDualOptions fast{8, 200, 1e-9};
  double worst = 0.0;
  for (int j = 0; j < W.cols(); ++j) {
    double d = colnorm.ops.has_closed_dual() ? colnorm.ops.dual_closed(W.col(j))
                                             : numeric_dual(colnorm.ops, W.col(j), fast);
    worst = std::max(worst, d);
  }
  fit->kkt_gap = std::max(0.0, worst / lambda_J - 1.0);
  fit->kkt_exact = colnorm.ops.has_closed_dual();
}

}  // namespace

std::string to_string(Framework fw) {
  return fw == Framework::Gauge ? "gauge" : "omega";
}

Framework framework_from_string(const std::string& name) {
  if (name == "gauge") return Framework::Gauge;
  if (name == "omega") return Framework::Omega;
  throw std::invalid_argument("unknown framework: " + name);
}

double design_spectral_bound(const Eigen::MatrixXd& X) {
  if (X.cols() == 0) return 0.0;
  VectorXd v = VectorXd::Constant(X.cols(), 1.0 / std::sqrt(static_cast<double>(X.cols())));
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    VectorXd w = X.transpose() * (X * v);
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    lambda = nw;
  }
  return lambda * 1.02;
}

namespace detail {

EngineResult fista(const MatrixXd& X, const VectorXd& y, const NormOps& norm, double lambda,
                   const SolverOptions& opts, const VectorXd* warm_start,
                   double spectral_bound) {
  const double n = static_cast<double>(X.rows());
  if (spectral_bound < 0.0) spectral_bound = design_spectral_bound(X);
  const double L = std::max(2.0 * spectral_bound / n, 1e-12);

  auto objective = [&](const VectorXd& b) {
    return (y - X * b).squaredNorm() / n + lambda * norm.eval(b);
  };
  auto step = [&](const VectorXd& at) {
    VectorXd grad = 2.0 / n * (X.transpose() * (X * at - y));
    return norm.prox(at - grad / L, lambda / L);
  };

  EngineResult res;
  VectorXd beta = warm_start ? *warm_start : VectorXd::Zero(X.cols());
  VectorXd prev = beta;
  VectorXd momentum = beta;
  double theta = 1.0;
  double F = objective(beta);
  res.trace.push_back(F);

  int stall = 0;
  for (int k = 1; k <= opts.max_iter; ++k) {
    res.iterations = k;
    VectorXd cand = step(momentum);
    double Fc = objective(cand);
    if (Fc > F && opts.restart) {
      theta = 1.0;
      momentum = beta;
      cand = step(momentum);
      Fc = objective(cand);
      stall = 0;
    }
    double Fnew;
    if (Fc <= F) {
      prev = beta;
      beta = cand;
      Fnew = Fc;
    } else {
      // plain gradient step failed to descend: at numerical optimum
      prev = beta;
      theta = 1.0;
      Fnew = F;
    }
    double rel = std::abs(F - Fnew) / std::max(1.0, std::abs(Fnew));
    res.trace.push_back(Fnew);
    stall = rel < opts.tol ? stall + 1 : 0;
    F = Fnew;
    double theta_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    momentum = beta + ((theta - 1.0) / theta_new) * (beta - prev);
    theta = theta_new;
    if (stall >= opts.stall_iters) {
      res.stalled = true;
      break;
    }
  }
  res.beta = beta;
  return res;
}

}  // namespace detail

PenalizedFit fit_penalized(const Dataset& data, const NormSpec& norm, double lambda,
                           const SolverOptions& opts) {
  data.validate();
  if (lambda <= 0.0) throw std::invalid_argument("fit_penalized requires lambda > 0");
  if (norm.dimension != data.p())
    throw std::invalid_argument("norm dimension does not match design columns");

  const double n = static_cast<double>(data.n());
  NormOps ops = ops_full(norm);
  double sb = design_spectral_bound(data.X);
  detail::EngineResult eng = detail::fista(data.X, data.Y, ops, lambda, opts, nullptr, sb);

  PenalizedFit fit;
  fit.beta = eng.beta;
  fit.lambda = lambda;
  fit.objective_trace = std::move(eng.trace);
  fit.objective = fit.objective_trace.back();
  fit.iterations = eng.iterations;

  VectorXd resid = data.Y - data.X * fit.beta;
  if (dual_is_exact(norm)) {
    VectorXd z = 2.0 * (data.X.transpose() * resid) / (n * lambda);
    fit.kkt_gap = std::max(0.0, dual(norm, z) - 1.0);
    fit.kkt_exact = true;
  } else {
    // no closed-form dual: scaled fixed-point residual of the prox map
    const double L = std::max(2.0 * sb / n, 1e-12);
    VectorXd grad = 2.0 / n * (data.X.transpose() * (data.X * fit.beta - data.Y));
    VectorXd fp = ops.prox(fit.beta - grad / L, lambda / L);
    fit.kkt_gap = L * (fit.beta - fp).norm() / (lambda * (1.0 + fit.beta.norm()));
    fit.kkt_exact = false;
  }
  fit.converged = eng.stalled && fit.kkt_gap <= opts.kkt_tol;
  return fit;
}

ColumnNorm ColumnNorm::masked(const NormSpec& full_norm, const IndexSet& J) {
  ColumnNorm c;
  c.ops = ops_masked(full_norm, J);
  return c;
}

ColumnNorm ColumnNorm::packed(const NormSpec& packed_norm) {
  ColumnNorm c;
  c.ops = ops_full(packed_norm);
  return c;
}

ColumnNorm column_norm_for(const NormSpec& omega, const IndexSet& J, Framework fw) {
  if (fw == Framework::Gauge) return ColumnNorm::masked(gauge_of(omega), J);
  return ColumnNorm::masked(omega, J);
}

MultivariateFit fit_sqrt_node(const Dataset& data, int node, const NormSpec& packed_norm,
                              double lambda_J, const SolverOptions& opts) {
  return fit_sqrt_node(data, node, ColumnNorm::packed(packed_norm), lambda_J, opts);
}

MultivariateFit fit_sqrt_node(const Dataset& data, int node, const ColumnNorm& colnorm,
                              double lambda_J, const SolverOptions& opts) {
  if (node < 0 || node >= data.p()) throw std::invalid_argument("node index out of range");
  if (lambda_J <= 0.0) throw std::invalid_argument("fit_sqrt_node requires lambda_J > 0");
  IndexSet J = IndexSet::single(node);
  const MatrixXd Xjc = drop_columns(data.X, J);
  const VectorXd x = data.X.col(node);
  const double n = static_cast<double>(data.n());
  if (x.norm() <= 0.0) throw std::invalid_argument("target column is identically zero");

  double sb = design_spectral_bound(Xjc);
  VectorXd gamma = VectorXd::Zero(Xjc.cols());
  double prev_obj = kInf;
  int total_iters = 0;
  bool inner_ok = true;
  double obj = x.norm() + 0.0;

  for (int round = 0; round < 100; ++round) {
    VectorXd r = x - Xjc * gamma;
    double sigma = std::max(r.norm() / std::sqrt(n), 1e-8);
    double lambda_eff = 2.0 * sigma * lambda_J / std::sqrt(n);
    detail::EngineResult eng =
        detail::fista(Xjc, x, colnorm.ops, lambda_eff, opts, &gamma, sb);
    gamma = eng.beta;
    total_iters += eng.iterations;
    inner_ok = eng.stalled;
    obj = (x - Xjc * gamma).norm() + lambda_J * colnorm.ops.eval(gamma);
    if (std::abs(prev_obj - obj) < 1e-8 * std::max(1.0, obj)) break;
    prev_obj = obj;
  }

  MultivariateFit fit;
  fit.J = J;
  fit.Gamma = gamma;
  fit.lambda_J = lambda_J;
  fit.nuclear_residual = (x - Xjc * gamma).norm();
  fit.objective = obj;
  fit.iterations = total_iters;
  multivariate_kkt(Xjc, x - Xjc * gamma, lambda_J, colnorm, &fit);
  fit.converged = inner_ok && fit.kkt_gap <= opts.kkt_tol;
  return fit;
}

MultivariateFit fit_multivariate(const Dataset& data, const IndexSet& J,
                                 const NormSpec& omega, double lambda_J, Framework fw,
                                 const SolverOptions& opts) {
  return fit_multivariate(data, J, column_norm_for(omega, J, fw), lambda_J, fw, opts);
}

MultivariateFit fit_multivariate(const Dataset& data, const IndexSet& J,
                                 const ColumnNorm& colnorm, double lambda_J, Framework fw,
                                 const SolverOptions& opts) {
  J.validate(data.p());
  if (J.empty()) throw std::invalid_argument("J must be nonempty");
  if (lambda_J <= 0.0) throw std::invalid_argument("fit_multivariate requires lambda_J > 0");
  if (data.n() <= J.size()) throw std::invalid_argument("need n > |J|");

  const MatrixXd XJ = take_columns(data.X, J);
  const MatrixXd Xjc = drop_columns(data.X, J);
  const int q = J.size();
  const int m = static_cast<int>(Xjc.cols());

  double sb = design_spectral_bound(Xjc);
  MatrixXd B = MatrixXd::Zero(m, q);

  auto penalty = [&](const MatrixXd& Bmat) {
    double s = 0.0;
    for (int j = 0; j < q; ++j) s += colnorm.ops.eval(Bmat.col(j));
    return s;
  };
  auto objective = [&](const MatrixXd& Bmat) {
    return nuclear_norm(XJ - Xjc * Bmat) + lambda_J * penalty(Bmat);
  };

  double F = objective(B);
  int total_iters = 0;
  bool stalled = false;
  for (int outer = 0; outer < 300; ++outer) {
    MatrixXd R = XJ - Xjc * B;
    MatrixXd G = R.transpose() * R;
    double tr = G.trace();
    if (tr <= 1e-28) break;  // interpolation
    double eps = 1e-8 * tr / q;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(G + eps * MatrixXd::Identity(q, q));
    VectorXd ev = eig.eigenvalues().cwiseMax(eps);
    MatrixXd Vinv = eig.eigenvectors() * ev.array().sqrt().inverse().matrix().asDiagonal() *
                    eig.eigenvectors().transpose();
    double Lh = std::max(sb * Vinv.norm() * 1.02, 1e-12);

    // proximal-gradient pass on the smooth surrogate
    for (int inner = 0; inner < 40; ++inner) {
      MatrixXd grad = -Xjc.transpose() * (XJ - Xjc * B) * Vinv;
      MatrixXd Bnew(m, q);
      for (int j = 0; j < q; ++j)
        Bnew.col(j) = colnorm.ops.prox(B.col(j) - grad.col(j) / Lh, lambda_J / Lh);
      double move = (Bnew - B).norm();
      B = Bnew;
      ++total_iters;
      if (move < 1e-10 * (1.0 + B.norm())) break;
    }

    double Fnew = objective(B);
    if (std::abs(F - Fnew) < 1e-9 * std::max(1.0, std::abs(Fnew))) {
      F = Fnew;
      stalled = true;
      break;
    }
    F = Fnew;
  }

  MultivariateFit fit;
  fit.J = J;
  fit.Gamma = B;
  fit.lambda_J = lambda_J;
  fit.framework = fw;
  fit.nuclear_residual = nuclear_norm(XJ - Xjc * B);
  fit.objective = F;
  fit.iterations = total_iters;
  multivariate_kkt(Xjc, XJ - Xjc * B, lambda_J, colnorm, &fit);
  fit.converged = stalled && fit.kkt_gap <= opts.kkt_tol;
  return fit;
}

}  // namespace structinfer
