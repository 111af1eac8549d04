#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "m2mpool/analytic.hpp"
#include "m2mpool/errors.hpp"

namespace m2mpool {

enum class Modulation : int { Qpsk = 2, Qam64 = 6 };

inline int bits_per_symbol(Modulation m) noexcept { return static_cast<int>(m); }

// LTE uplink grid and report geometry. Defaults: 5 MHz carrier (25 RBs),
// the whole carrier available to M2M, 144 data REs per RB (168 minus 24
// reference-signal REs), QPSK, 100-byte reports, 60 s reporting interval.
struct LteProfile {
  int rbs_per_subframe_total = 25;
  int m2m_rbs_per_subframe = 25;
  int data_res_per_rb = 144;
  int bits_per_re = bits_per_symbol(Modulation::Qpsk);
  std::int64_t report_size_bits = 800;
  std::int64_t ri_subframes = 60000;
  double subframe_seconds = 0.001;

  void validate() const {
    if (rbs_per_subframe_total < 1 || m2m_rbs_per_subframe < 1 || data_res_per_rb < 1 ||
        bits_per_re < 1 || report_size_bits < 1 || ri_subframes < 1) {
      throw DomainError("LTE profile counts must all be >= 1");
    }
    if (m2m_rbs_per_subframe > rbs_per_subframe_total) {
      throw DomainError("M2M RBs per subframe exceed the system bandwidth");
    }
    if (!(subframe_seconds > 0.0)) throw DomainError("subframe duration must be positive");
  }
};

struct PoolPlan {
  int rbs_per_report = 1;
  double alpha = 1.0;
  std::int64_t capacity = 0;
  std::int64_t preallocated_subframes = 0;
  std::int64_t common_subframes = 0;
  std::int64_t total_subframes = 0;
  double capacity_fraction = 0.0;
  double worst_case_delay_seconds = 0.0;
};

namespace detail {
inline std::int64_t ceil_div(std::int64_t num, std::int64_t den) { return (num + den - 1) / den; }
}  // namespace detail

/// RBs one report occupies: ceil(RS / (data REs per RB * bits per RE)).
inline int rbs_per_report(const LteProfile& profile) {
  profile.validate();
  const std::int64_t bits_per_rb = std::int64_t{profile.data_res_per_rb} * profile.bits_per_re;
  return static_cast<int>(detail::ceil_div(profile.report_size_bits, bits_per_rb));
}

/// Lays out the preallocated and common pools on the M2M band.
///
/// X_P and X_C are each rounded up to whole subframes. The capacity
/// fraction counts RBs actually needed, r (N + C), against every RB of
/// the carrier over one RI. Throws InfeasibleGeometry when a report is
/// wider than the M2M band or the pool is longer than the RI.
inline PoolPlan build_pool_plan(const SystemParams& params, const LteProfile& profile,
                                std::int64_t capacity) {
  params.validate();
  profile.validate();
  if (capacity < 0) throw DomainError("capacity must be non-negative");
  const int r = rbs_per_report(profile);
  const int y = profile.m2m_rbs_per_subframe;
  if (r > y) {
    throw InfeasibleGeometry("a report needs " + std::to_string(r) + " RBs but only " +
                             std::to_string(y) + " M2M RBs exist per subframe");
  }

  PoolPlan plan;
  plan.rbs_per_report = r;
  plan.alpha = static_cast<double>(r) / y;
  plan.capacity = capacity;
  plan.preallocated_subframes = detail::ceil_div(params.n_devices * r, y);
  plan.common_subframes = detail::ceil_div(capacity * r, y);
  plan.total_subframes = plan.preallocated_subframes + plan.common_subframes;
  if (plan.total_subframes > profile.ri_subframes) {
    throw InfeasibleGeometry("pool of " + std::to_string(plan.total_subframes) +
                             " subframes does not fit in an RI of " +
                             std::to_string(profile.ri_subframes) + " subframes");
  }
  plan.capacity_fraction = static_cast<double>(r) * static_cast<double>(params.n_devices + capacity) /
                           (static_cast<double>(profile.rbs_per_subframe_total) *
                            static_cast<double>(profile.ri_subframes));
  plan.worst_case_delay_seconds =
      static_cast<double>(profile.ri_subframes + plan.total_subframes) * profile.subframe_seconds;
  return plan;
}

/// Transmissions a common pool of `common_subframes` can carry: floor(X_C Y / r).
inline std::int64_t capacity_from_subframes(std::int64_t common_subframes, const LteProfile& profile,
                                            int rbs_per_report) {
  if (common_subframes < 0) throw DomainError("common_subframes must be non-negative");
  if (rbs_per_report < 1) throw DomainError("rbs_per_report must be >= 1");
  return common_subframes * profile.m2m_rbs_per_subframe / rbs_per_report;
}

}  // namespace m2mpool
