#pragma once

#include <Eigen/Dense>

#include "structinfer/precision.hpp"

namespace structinfer {

enum class SigmaMode { Known, PlugIn };

std::string to_string(SigmaMode mode);
SigmaMode sigma_mode_from_string(const std::string& name);

/// One-step bias-corrected estimate on a target set J, with the pivot
/// normalizer and the noise scale used for region construction.
struct DesparsifiedEstimate {
  IndexSet J;
  Eigen::VectorXd estimate;     // b_J
  Eigen::MatrixXd normalizer;   // M
  double sigma_hat = 0.0;
  SigmaMode sigma_mode = SigmaMode::PlugIn;
};

/// b_J = beta_J + T_J^{-1} R^T (Y - X beta_hat) / n. Throws on singular T_J.
DesparsifiedEstimate desparsify(const Dataset& data, const PenalizedFit& fit,
                                const PrecisionFit& prec,
                                SigmaMode mode = SigmaMode::PlugIn,
                                double known_sigma = 0.0);

/// PlugIn: residual variance with degrees-of-freedom correction n - s_hat,
/// s_hat = #{|beta_j| > 1e-10}. Throws when s_hat >= n or the residual is
/// exactly zero. Known returns the supplied value.
double sigma_estimate(const Dataset& data, const PenalizedFit& fit, SigmaMode mode,
                      double known_value = 0.0);

double normal_cdf(double x);
/// Inverse standard normal CDF, |Phi(x) - q| < 1e-12 on (0,1).
double normal_quantile(double q);
double chi2_cdf(int df, double x);
/// Chi-square quantile by bisection on the regularized incomplete gamma,
/// |CDF - q| < 1e-10.
double chi2_quantile(int df, double q);

struct ConfidenceRegion {
  enum class Kind { PointwiseInterval, GroupEllipsoid };
  Kind kind = Kind::PointwiseInterval;
  IndexSet J;
  Eigen::VectorXd center;
  double level = 0.0;  // 1 - alpha
  double sigma_hat = 0.0;
  // Pointwise interval
  double halfwidth = 0.0;
  // Group ellipsoid { beta : ||M (center - beta)||_2^2 <= sigma_hat^2 * threshold }
  Eigen::MatrixXd shape;  // M
  double threshold = 0.0;
  Eigen::VectorXd box_halfwidths;  // per-axis bounding box, for reporting

  bool contains(const Eigen::VectorXd& beta_J) const;
};

ConfidenceRegion pointwise_ci(const DesparsifiedEstimate& est, double alpha);
ConfidenceRegion group_region(const DesparsifiedEstimate& est, double alpha);

/// Simulation-only diagnostic comparing the realized remainder of the pivot
/// decomposition against the theoretical bounds (gauge-based and
/// C-constant-based), scaled by the true noise level.
struct RemainderDiagnostic {
  Eigen::VectorXd remainder;      // M(b_J - beta0_J)/sigma0 minus the Gaussian term
  double actual_inf = 0.0;        // sup-norm of the remainder
  double gaussian_inf = 0.0;      // sup-norm of the Gaussian term (context)
  double bound_gauge = 0.0;       // sqrt(n) lambda_J g(diff_{J^c}) / sigma0
  double bound_cconst = 0.0;      // 2 sqrt(n) lambda_J C_S Upsilon_S(diff) / sigma0
  double kkt_inflation = 0.0;     // certificate slack used to inflate the bounds
  bool within_gauge = false;
  bool within_cconst = false;
  double identity_error = 0.0;    // decomposition identity residual (sup-norm)
};

RemainderDiagnostic remainder_bound(const Dataset& data, const PenalizedFit& fit,
                                    const PrecisionFit& prec, const NormSpec& omega,
                                    const Eigen::VectorXd& beta0, double sigma0,
                                    const IndexSet& S_ref);

/// Theoretical penalty level Upsilon_S^*(X^T eps) / n.
double lambda_m(const Dataset& data, const Eigen::VectorXd& eps, const NormSpec& norm,
                const IndexSet& S);

}  // namespace structinfer
