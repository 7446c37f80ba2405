#include "dpa/gaussmath.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpa::gauss {

GaussStats fit_gauss(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("fit_gauss: empty sample");
  const double n = static_cast<double>(values.size());
  double mu = 0.0;
  for (double v : values) mu += v;
  mu /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  // Rounding can push the mean a hair outside the sample range.
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {std::clamp(mu, *lo, *hi), ss / n};
}

double erf(double x) {
  // The polynomial leaves a 1e-9 residue at the origin; keep erf odd.
  if (x == 0.0) return 0.0;
  constexpr double p = 0.3275911;
  constexpr double a1 = 0.254829592;
  constexpr double a2 = -0.284496736;
  constexpr double a3 = 1.421413741;
  constexpr double a4 = -1.453152027;
  constexpr double a5 = 1.061405429;

  const double ax = std::abs(x);
  const double t = 1.0 / (1.0 + p * ax);
  const double poly = ((((a5 * t + a4) * t + a3) * t + a2) * t + a1) * t;
  const double y = 1.0 - poly * std::exp(-ax * ax);
  return x < 0.0 ? -y : y;
}

double cdf(double z, const GaussStats& stats) {
  const double sigma = std::max(std::sqrt(std::max(stats.sigma2, 0.0)), kSigmaFloor);
  return 0.5 * (1.0 + erf((z - stats.mu) / (sigma * std::sqrt(2.0))));
}

}  // namespace dpa::gauss
