#pragma once

#include <span>

namespace dpa::gauss {

// Smallest standard deviation used inside cdf(); zero-variance batches
// become a (nearly) hard step at mu.
inline constexpr double kSigmaFloor = 1e-6;

struct GaussStats {
  double mu = 0.0;
  double sigma2 = 0.0;  // population variance
};

// Mean and population (1/n) variance. Throws std::invalid_argument on empty input.
GaussStats fit_gauss(std::span<const double> values);

// Abramowitz & Stegun 7.1.26; absolute error <= 1.5e-7.
double erf(double x);

// Normal CDF at z with sigma clamped to kSigmaFloor.
double cdf(double z, const GaussStats& stats);

}  // namespace dpa::gauss
