#pragma once

#include <Eigen/Dense>
#include <string>

namespace structinfer {

/// Regression data: n x p design and length-n response.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd Y;

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }

  /// Throws std::invalid_argument on inconsistent or non-finite data.
  void validate() const;

  /// CSV with a header row; the response column is named "y" and the design
  /// columns "x1" ... "xp" (any column order).
  static Dataset from_csv(const std::string& path);
  void to_csv(const std::string& path) const;
};

}  // namespace structinfer
