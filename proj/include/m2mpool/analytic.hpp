#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>

#include "m2mpool/errors.hpp"
#include "m2mpool/numerics.hpp"

namespace m2mpool {

/// Reports per device per RI are Poisson with mean `load` (= lambda * T_RI).
struct PoissonPerRi {
  double load = 1.0;
};

/// Every device produces exactly one report per RI.
struct OnePerRi {};

using ArrivalModel = std::variant<PoissonPerRi, OnePerRi>;

struct SystemParams {
  std::int64_t n_devices = 30000;
  double p_e = 0.1;
  int max_attempts = 10;
  ArrivalModel arrival = PoissonPerRi{};
  double target_failure = 1e-3;

  /// Probability that a report exhausts all attempts: p_e^L.
  double failure_floor() const { return std::pow(p_e, max_attempts); }

  void validate() const {
    if (n_devices < 1) throw DomainError("n_devices must be >= 1");
    if (!(p_e >= 0.0 && p_e < 1.0)) throw DomainError("p_e must lie in [0, 1)");
    if (max_attempts < 1) throw DomainError("max_attempts must be >= 1");
    if (!(target_failure > 0.0 && target_failure < 1.0)) {
      throw DomainError("target_failure must lie in (0, 1)");
    }
    if (const auto* poisson = std::get_if<PoissonPerRi>(&arrival)) {
      if (!(poisson->load > 0.0) || !std::isfinite(poisson->load)) {
        throw DomainError("Poisson load must be positive");
      }
    }
  }
};

/// Mean and variance of the common-pool transmission demand R.
struct DemandSummary {
  double mean = 0.0;
  double variance = 0.0;

  double stddev() const { return std::sqrt(variance); }
};

namespace detail {
inline void check_attempt_params(double p_e, int max_attempts) {
  if (!(p_e >= 0.0 && p_e < 1.0)) throw DomainError("p_e must lie in [0, 1)");
  if (max_attempts < 1) throw DomainError("max_attempts must be >= 1");
}
}  // namespace detail

/// P[W = k] for the attempt count W: geometric in p_e, truncated at L
/// with the whole tail mass p_e^{L-1} placed on k = L.
inline double attempts_pmf(int k, double p_e, int max_attempts) {
  detail::check_attempt_params(p_e, max_attempts);
  if (k < 1 || k > max_attempts) {
    throw DomainError("attempts_pmf: k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(max_attempts) + "]");
  }
  if (k == max_attempts) return std::pow(p_e, max_attempts - 1);
  return std::pow(p_e, k - 1) * (1.0 - p_e);
}

/// E[W] = (1 - p_e^L) / (1 - p_e).
inline double expected_attempts(double p_e, int max_attempts) {
  detail::check_attempt_params(p_e, max_attempts);
  return (1.0 - std::pow(p_e, max_attempts)) / (1.0 - p_e);
}

/// E[W^2] by direct summation over the L support points.
inline double attempts_second_moment(double p_e, int max_attempts) {
  detail::check_attempt_params(p_e, max_attempts);
  double sum = 0.0;
  for (int k = 1; k <= max_attempts; ++k) {
    sum += static_cast<double>(k) * k * attempts_pmf(k, p_e, max_attempts);
  }
  return sum;
}

/// Closed form of E[W^2]:
/// ((2L-1) p^{L+1} - (2L+1) p^L + p + 1) / (1-p)^2.
inline double attempts_second_moment_closed_form(double p_e, int max_attempts) {
  detail::check_attempt_params(p_e, max_attempts);
  const double L = max_attempts;
  const double pl = std::pow(p_e, max_attempts);
  return ((2.0 * L - 1.0) * pl * p_e - (2.0 * L + 1.0) * pl + p_e + 1.0) /
         ((1.0 - p_e) * (1.0 - p_e));
}

/// Moments of one device's common-pool demand R_i.
inline DemandSummary device_demand(double p_e, int max_attempts, const ArrivalModel& arrival) {
  const double ew = expected_attempts(p_e, max_attempts);
  if (std::holds_alternative<OnePerRi>(arrival)) {
    const double ew2 = attempts_second_moment(p_e, max_attempts);
    return {ew - 1.0, std::max(0.0, ew2 - ew * ew)};
  }
  const double load = std::get<PoissonPerRi>(arrival).load;
  if (load != 1.0) {
    throw UnsupportedAnalytic(
        "closed-form demand requires unit Poisson load per RI; use the simulator for load " +
        std::to_string(load));
  }
  const double e1 = std::exp(-1.0);
  // R_i = S_U - 1 + 1{U = 0}: Var = E[W^2] + e^{-1}(1 - 2E[W] - e^{-1}).
  const double mean = ew - (1.0 - e1);
  const double variance =
      attempts_second_moment_closed_form(p_e, max_attempts) + e1 * (1.0 - 2.0 * ew - e1);
  return {mean, variance};
}

/// Moments of R = sum of N IID device demands.
inline DemandSummary demand_summary(const SystemParams& params) {
  params.validate();
  const auto one = device_demand(params.p_e, params.max_attempts, params.arrival);
  const auto n = static_cast<double>(params.n_devices);
  return {n * one.mean, n * one.variance};
}

/// Upper bound on the report failure probability for a common pool of
/// `capacity` transmissions, valid for any scheduling policy:
///   Q((C - mu) / sigma) (1 - p_e^L) + p_e^L.
/// With zero variance the Gaussian collapses to a step at the mean.
inline double failure_bound(std::int64_t capacity, const DemandSummary& summary, double p_e,
                            int max_attempts) {
  detail::check_attempt_params(p_e, max_attempts);
  const double floor = std::pow(p_e, max_attempts);
  const auto c = static_cast<double>(capacity);
  if (summary.variance <= 0.0) {
    return c >= summary.mean ? floor : 1.0;
  }
  return q_function((c - summary.mean) / summary.stddev()) * (1.0 - floor) + floor;
}

/// Smallest common-pool capacity C with failure_bound(C) <= target_failure.
///
/// Starts from the Gaussian quantile and scans integers until
/// bound(C) <= eps < bound(C - 1) holds exactly.
inline std::int64_t dimension_capacity(const SystemParams& params) {
  params.validate();
  const double floor = params.failure_floor();
  const double eps = params.target_failure;
  if (eps <= floor) {
    throw InfeasibleTarget("target failure " + std::to_string(eps) +
                           " is not above the retransmission floor p_e^L = " +
                           std::to_string(floor));
  }
  const auto summary = demand_summary(params);
  const auto bound = [&](std::int64_t c) {
    return failure_bound(c, summary, params.p_e, params.max_attempts);
  };

  std::int64_t c = 0;
  if (summary.variance > 0.0) {
    const double z = q_inverse((eps - floor) / (1.0 - floor));
    c = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(summary.mean + summary.stddev() * z)));
  } else {
    c = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(summary.mean)));
  }
  while (c > 0 && bound(c - 1) <= eps) --c;
  while (bound(c) > eps) ++c;
  return c;
}

}  // namespace m2mpool
