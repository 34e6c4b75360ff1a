#pragma once

#include <Eigen/Dense>

namespace waveband {

// Least-squares fit of log(error) = log(prefactor) + order * log(scale).
struct ConvergenceFit {
  double order = 0.0;
  double order_stderr = 0.0;  // zero when only two points are given
  double prefactor = 0.0;
  double residual_rms = 0.0;  // in log space
  int points = 0;
};

// Needs at least two points; throws NonPositiveError for errors or scales <= 0.
ConvergenceFit fit_order(const Eigen::VectorXd& scale, const Eigen::VectorXd& error);

}  // namespace waveband
