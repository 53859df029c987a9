#include "structinfer/inference.hpp"

#include <cmath>
#include <stdexcept>

namespace structinfer {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd gather(const VectorXd& v, const IndexSet& J) {
  VectorXd out(J.size());
  for (int k = 0; k < J.size(); ++k) out[k] = v[J.indices[static_cast<std::size_t>(k)]];
  return out;
}

}  // namespace

std::string to_string(SigmaMode mode) {
  return mode == SigmaMode::Known ? "known" : "plugin";
}

SigmaMode sigma_mode_from_string(const std::string& name) {
  if (name == "known") return SigmaMode::Known;
  if (name == "plugin") return SigmaMode::PlugIn;
  throw std::invalid_argument("unknown sigma mode: " + name);
}

double sigma_estimate(const Dataset& data, const PenalizedFit& fit, SigmaMode mode,
                      double known_value) {
  if (mode == SigmaMode::Known) {
    if (known_value <= 0.0) throw std::invalid_argument("known sigma must be positive");
    return known_value;
  }
  const int n = data.n();
  int active = 0;
  for (int j = 0; j < fit.beta.size(); ++j)
    if (std::abs(fit.beta[j]) > 1e-10) ++active;
  if (active >= n)
    throw std::invalid_argument("plug-in sigma needs n > #active coefficients");
  double rss = (data.Y - data.X * fit.beta).squaredNorm();
  if (rss <= 0.0)
    throw std::invalid_argument("plug-in sigma undefined at an interpolating fit");
  return std::sqrt(rss / (n - active));
}

DesparsifiedEstimate desparsify(const Dataset& data, const PenalizedFit& fit,
                                const PrecisionFit& prec, SigmaMode mode,
                                double known_sigma) {
  data.validate();
  const double n = static_cast<double>(data.n());
  VectorXd resid = data.Y - data.X * fit.beta;
  VectorXd score = prec.residual.transpose() * resid / n;

  Eigen::FullPivLU<MatrixXd> lu(prec.t_cross);
  if (!lu.isInvertible()) throw std::runtime_error("T_J is numerically singular");

  DesparsifiedEstimate est;
  est.J = prec.J;
  est.estimate = gather(fit.beta, prec.J) + lu.solve(score);
  est.normalizer = prec.normalizer;
  est.sigma_mode = mode;
  est.sigma_hat = sigma_estimate(data, fit, mode, known_sigma);
  return est;
}

bool ConfidenceRegion::contains(const Eigen::VectorXd& beta_J) const {
  if (kind == Kind::PointwiseInterval)
    return std::abs(beta_J[0] - center[0]) <= halfwidth;
  double stat = (shape * (center - beta_J)).squaredNorm();
  return stat <= sigma_hat * sigma_hat * threshold;
}

ConfidenceRegion pointwise_ci(const DesparsifiedEstimate& est, double alpha) {
  if (est.J.size() != 1) throw std::invalid_argument("pointwise_ci needs |J| = 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
  double m = est.normalizer(0, 0);
  if (m == 0.0) throw std::invalid_argument("pointwise_ci needs a nonzero normalizer");

  ConfidenceRegion region;
  region.kind = ConfidenceRegion::Kind::PointwiseInterval;
  region.J = est.J;
  region.center = est.estimate;
  region.level = 1.0 - alpha;
  region.sigma_hat = est.sigma_hat;
  region.halfwidth = normal_quantile(1.0 - alpha / 2.0) * est.sigma_hat / std::abs(m);
  return region;
}

ConfidenceRegion group_region(const DesparsifiedEstimate& est, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
  const int q = est.J.size();

  ConfidenceRegion region;
  region.kind = ConfidenceRegion::Kind::GroupEllipsoid;
  region.J = est.J;
  region.center = est.estimate;
  region.level = 1.0 - alpha;
  region.sigma_hat = est.sigma_hat;
  region.shape = est.normalizer;
  region.threshold = chi2_quantile(q, 1.0 - alpha);

  // Bounding box: |delta_j| <= sigma * sqrt(threshold * ((M^T M)^{-1})_jj).
  MatrixXd mtm_inv = (est.normalizer.transpose() * est.normalizer).inverse();
  region.box_halfwidths.resize(q);
  for (int j = 0; j < q; ++j)
    region.box_halfwidths[j] =
        est.sigma_hat * std::sqrt(region.threshold * mtm_inv(j, j));
  return region;
}

RemainderDiagnostic remainder_bound(const Dataset& data, const PenalizedFit& fit,
                                    const PrecisionFit& prec, const NormSpec& omega,
                                    const VectorXd& beta0, double sigma0,
                                    const IndexSet& S_ref) {
  if (sigma0 <= 0.0) throw std::invalid_argument("sigma0 must be positive");
  if (!is_allowed(omega, S_ref))
    throw std::invalid_argument("S_ref is not an allowed set for this norm");
  const double n = static_cast<double>(data.n());
  const double sqrt_n = std::sqrt(n);

  DesparsifiedEstimate est = desparsify(data, fit, prec, SigmaMode::Known, sigma0);
  VectorXd eps = data.Y - data.X * beta0;
  VectorXd gaussian = prec.normalizer *
                      Eigen::FullPivLU<MatrixXd>(prec.t_cross)
                          .solve(prec.residual.transpose() * eps / n);

  RemainderDiagnostic diag;
  VectorXd pivot = prec.normalizer * (est.estimate - gather(beta0, prec.J));
  diag.remainder = (pivot - gaussian) / sigma0;
  diag.actual_inf = diag.remainder.lpNorm<Eigen::Infinity>();
  diag.gaussian_inf = gaussian.lpNorm<Eigen::Infinity>() / sigma0;

  // Independent route to the remainder through the nodewise score matrix,
  // bypassing T_J; the difference is the decomposition identity residual.
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(prec.sigma_res);
  MatrixXd sigma_inv_sqrt = eig.eigenvectors() *
                            eig.eigenvalues().array().sqrt().inverse().matrix().asDiagonal() *
                            eig.eigenvectors().transpose();
  VectorXd diff = fit.beta - beta0;
  VectorXd diff_jc = diff;
  for (int j : prec.J.indices) diff_jc[j] = 0.0;
  VectorXd rem_indep =
      -sigma_inv_sqrt * (prec.residual.transpose() * (data.X * diff_jc)) / (sqrt_n * sigma0);
  diag.identity_error = (diag.remainder - rem_indep).lpNorm<Eigen::Infinity>();

  NormSpec g = gauge_of(omega);
  diag.bound_gauge = sqrt_n * prec.lambda_J * evaluate(g, diff_jc) / sigma0;
  diag.bound_cconst = 2.0 * sqrt_n * prec.lambda_J * c_constant(omega, S_ref) *
                      upsilon(omega, S_ref, diff) / sigma0;
  diag.kkt_inflation = prec.kkt_gap;
  double tol = 1e-12 * (1.0 + diag.actual_inf);
  diag.within_gauge = diag.actual_inf <= diag.bound_gauge * (1.0 + diag.kkt_inflation) + tol;
  diag.within_cconst = diag.actual_inf <= diag.bound_cconst * (1.0 + diag.kkt_inflation) + tol;
  return diag;
}

double lambda_m(const Dataset& data, const VectorXd& eps, const NormSpec& norm,
                const IndexSet& S) {
  if (eps.size() != data.n()) throw std::invalid_argument("eps length must equal n");
  VectorXd score = data.X.transpose() * eps;
  return upsilon_dual(norm, S, score) / static_cast<double>(data.n());
}

}  // namespace structinfer
