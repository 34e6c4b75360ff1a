#include "waveband/fit.hpp"

#include <cmath>
#include <sstream>

#include "waveband/errors.hpp"

namespace waveband {

ConvergenceFit fit_order(const Eigen::VectorXd& scale, const Eigen::VectorXd& error) {
  const Eigen::Index n = scale.size();
  if (error.size() != n) throw GridMismatch("fit_order: scale and error sizes differ");
  if (n < 2) throw DimensionTooSmall("fit_order: need at least two points");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(scale(i) > 0.0) || !(error(i) > 0.0)) {
      std::ostringstream msg;
      msg << "fit_order: non-positive value at point " << i << " (scale " << scale(i) << ", error " << error(i) << ")";
      throw NonPositiveError(msg.str());
    }
  }
  const Eigen::ArrayXd lx = scale.array().log(), ly = error.array().log();
  const double mx = lx.mean(), my = ly.mean();
  const double sxx = (lx - mx).square().sum();
  if (sxx == 0.0) throw DimensionTooSmall("fit_order: scales must differ");
  ConvergenceFit f;
  f.points = static_cast<int>(n);
  f.order = ((lx - mx) * (ly - my)).sum() / sxx;
  const double intercept = my - f.order * mx;
  f.prefactor = std::exp(intercept);
  const Eigen::ArrayXd res = ly - (intercept + f.order * lx);
  f.residual_rms = std::sqrt(res.square().mean());
  if (n > 2) f.order_stderr = std::sqrt(res.square().sum() / static_cast<double>(n - 2) / sxx);
  return f;
}

}  // namespace waveband
