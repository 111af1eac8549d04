#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "m2mpool/errors.hpp"
#include "m2mpool/rng.hpp"

namespace m2mpool {

/// Gaussian tail probability Q(x) = P[Z > x] for standard normal Z.
///
/// Evaluated through the complementary error function, which keeps full
/// relative precision deep into the upper tail where 1 - Phi(x) would cancel.
inline double q_function(double x) noexcept { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Standard normal cdf.
inline double normal_cdf(double x) noexcept { return q_function(-x); }

inline double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Inverse of q_function: the x with Q(x) = p.
///
/// Bracketing bisection on [-40, 40]; Q is strictly decreasing there, so
/// the bracket always holds the root. Throws DomainError unless 0 < p < 1.
inline double q_inverse(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("q_inverse: probability must lie in (0, 1), got " + std::to_string(p));
  }
  double lo = -40.0;
  double hi = 40.0;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (q_function(mid) > p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Poisson(mean) variate by sequential inversion of the cumulative sum.
///
/// Means above 500 are split into chunks (a sum of independent Poisson
/// variates is Poisson) so exp(-mean) never underflows.
inline std::uint64_t sample_poisson(RngStream& rng, double mean) {
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw DomainError("sample_poisson: mean must be positive and finite");
  }
  constexpr double kChunk = 500.0;
  std::uint64_t total = 0;
  double left = mean;
  while (left > 0.0) {
    const double m = left > kChunk ? kChunk : left;
    left -= m;
    const double u = rng.uniform();
    std::uint64_t k = 0;
    double pmf = std::exp(-m);
    double cdf = pmf;
    // The pmf tail eventually underflows; cap the search where it cannot move cdf.
    while (u >= cdf && pmf > 0.0) {
      ++k;
      pmf *= m / static_cast<double>(k);
      cdf += pmf;
    }
    total += k;
  }
  return total;
}

/// Transmission attempts for one report: the count of Bernoulli(p_e)
/// failures until the first success, plus one, capped at max_attempts.
inline int sample_attempts(RngStream& rng, double p_e, int max_attempts) {
  if (!(p_e >= 0.0 && p_e < 1.0)) {
    throw DomainError("sample_attempts: p_e must lie in [0, 1)");
  }
  if (max_attempts < 1) {
    throw DomainError("sample_attempts: max_attempts must be >= 1");
  }
  int k = 1;
  while (k < max_attempts && rng.bernoulli(p_e)) ++k;
  return k;
}

}  // namespace m2mpool
