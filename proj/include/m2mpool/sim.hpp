#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <thread>
#include <variant>
#include <vector>

#include "m2mpool/analytic.hpp"
#include "m2mpool/errors.hpp"
#include "m2mpool/numerics.hpp"
#include "m2mpool/rng.hpp"

namespace m2mpool {

// Empirical distribution of the common-pool demand R over replications.
struct DemandHistogram {
  std::map<std::int64_t, std::int64_t> counts;
  std::int64_t runs = 0;

  double mean() const {
    double s = 0.0;
    for (const auto& [value, count] : counts) s += static_cast<double>(value) * count;
    return s / static_cast<double>(runs);
  }

  // Unbiased sample variance (0 for a single run).
  double variance() const {
    if (runs < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (const auto& [value, count] : counts) {
      const double d = static_cast<double>(value) - m;
      s += d * d * count;
    }
    return s / static_cast<double>(runs - 1);
  }
};

struct FailureEstimate {
  std::int64_t reports_total = 0;
  std::int64_t reports_failed = 0;
  std::int64_t exhausted_failures = 0;  // all L attempts failed
  std::int64_t unserved_failures = 0;   // pool ended with a transmission pending
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;

  friend bool operator==(const FailureEstimate&, const FailureEstimate&) = default;
};

enum class SchedulerPolicy { RandomUniform, Fifo };

struct IntervalOutcome {
  std::int64_t reports = 0;
  std::int64_t failures = 0;
  std::int64_t exhausted_failures = 0;
  std::int64_t unserved_failures = 0;
  std::int64_t demand = 0;      // common-pool transmissions needed with unlimited capacity
  std::int64_t slots_used = 0;  // common-pool slots actually consumed
};

/// Wilson score interval for k successes in n trials at normal quantile z.
struct WilsonInterval {
  double low;
  double high;
};

inline WilsonInterval wilson_interval(std::int64_t k, std::int64_t n, double z = 1.959963984540054) {
  if (n <= 0) throw DomainError("wilson_interval: n must be positive");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, std::min(p, centre - half)), std::min(1.0, std::max(p, centre + half))};
}

/// One Wilson standard error: the half-width of the z = 1 Wilson interval.
inline double wilson_standard_error(std::int64_t k, std::int64_t n) {
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  return std::sqrt(p * (1.0 - p) / nn + 1.0 / (4.0 * nn * nn)) / (1.0 + 1.0 / nn);
}

namespace detail {

inline std::uint64_t draw_report_count(RngStream& rng, const ArrivalModel& arrival) {
  if (const auto* poisson = std::get_if<PoissonPerRi>(&arrival)) {
    return sample_poisson(rng, poisson->load);
  }
  return 1;
}

// Splits [0, count) into contiguous chunks, one per worker, and merges the
// partial results in chunk order so the reduction never depends on timing.
template <class Partial, class Body, class Merge>
Partial parallel_reduce(std::int64_t count, unsigned threads, Body body, Merge merge) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<std::int64_t>(
      std::max<std::int64_t>(1, std::min<std::int64_t>(threads, count)));
  std::vector<Partial> partials(static_cast<std::size_t>(workers));
  const auto span = [&](std::int64_t w) { return count * w / workers; };
  if (workers == 1) {
    partials[0] = body(0, count);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (std::int64_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] { partials[static_cast<std::size_t>(w)] = body(span(w), span(w + 1)); });
    }
  }
  Partial total = std::move(partials[0]);
  for (std::size_t w = 1; w < partials.size(); ++w) merge(total, partials[w]);
  return total;
}

}  // namespace detail

/// Monte Carlo histogram of R. Replication i draws from stream (seed, i).
inline DemandHistogram sample_demand(const SystemParams& params, std::int64_t runs,
                                     std::uint64_t seed, unsigned threads = 0) {
  params.validate();
  if (runs < 1) throw DomainError("sample_demand: runs must be >= 1");
  using Counts = std::map<std::int64_t, std::int64_t>;
  auto counts = detail::parallel_reduce<Counts>(
      runs, threads,
      [&](std::int64_t begin, std::int64_t end) {
        Counts local;
        for (std::int64_t run = begin; run < end; ++run) {
          RngStream rng(seed, static_cast<std::uint64_t>(run));
          std::int64_t total = 0;
          for (std::int64_t device = 0; device < params.n_devices; ++device) {
            const auto reports = detail::draw_report_count(rng, params.arrival);
            if (reports == 0) continue;
            std::int64_t sum = 0;
            for (std::uint64_t j = 0; j < reports; ++j) {
              sum += sample_attempts(rng, params.p_e, params.max_attempts);
            }
            total += sum - 1;
          }
          ++local[total];
        }
        return local;
      },
      [](Counts& into, const Counts& from) {
        for (const auto& [value, count] : from) into[value] += count;
      });
  return {std::move(counts), runs};
}

/// Kolmogorov-Smirnov distance between the empirical cdf of R and the
/// continuity-corrected Gaussian cdf Phi((r + 0.5 - mu) / sigma), taken
/// over every integer r where either cdf can move.
inline double ks_distance(const DemandHistogram& hist, const DemandSummary& summary) {
  if (hist.runs < 1 || hist.counts.empty()) throw DomainError("ks_distance: empty histogram");
  if (!(summary.variance > 0.0)) {
    throw DegenerateComparison("ks_distance: Gaussian with zero variance");
  }
  const double sigma = summary.stddev();
  const auto gauss = [&](std::int64_t r) {
    return normal_cdf((static_cast<double>(r) + 0.5 - summary.mean) / sigma);
  };
  const auto first = hist.counts.begin()->first;
  const auto last = hist.counts.rbegin()->first;
  double worst = gauss(first - 1);
  std::int64_t cumulative = 0;
  auto it = hist.counts.begin();
  for (std::int64_t r = first; r <= last; ++r) {
    if (it != hist.counts.end() && it->first == r) {
      cumulative += it->second;
      ++it;
    }
    const double empirical = static_cast<double>(cumulative) / static_cast<double>(hist.runs);
    worst = std::max(worst, std::abs(empirical - gauss(r)));
  }
  return worst;
}

/// Per-report attempt tally: counts[k] = reports resolved after k
/// transmissions (index 0 unused). Filled only when a caller asks for it.
using AttemptTally = std::vector<std::int64_t>;

/// Slot-level simulator of one reporting interval.
///
/// Every report's error sequence is drawn up front (transmissions until
/// first success, capped at L), so the scheduler only chooses which
/// pending transmission a slot serves and never alters the error process.
/// Failed transmissions are eligible again in the very next slot.
class IntervalSimulator {
 public:
  explicit IntervalSimulator(SystemParams params) : params_(std::move(params)) { params_.validate(); }

  const SystemParams& params() const { return params_; }

  IntervalOutcome run(std::int64_t capacity, SchedulerPolicy policy, RngStream& rng,
                      AttemptTally* tally = nullptr) {
    if (capacity < 0) throw DomainError("capacity must be non-negative");
    const int max_attempts = params_.max_attempts;
    if (tally && tally->size() < static_cast<std::size_t>(max_attempts) + 1) {
      tally->resize(static_cast<std::size_t>(max_attempts) + 1, 0);
    }
    IntervalOutcome out;
    remaining_.clear();
    delivers_.clear();
    used_.clear();

    const auto resolve = [&](std::size_t report) {
      if (tally) ++(*tally)[static_cast<std::size_t>(used_[report])];
      if (!delivers_[report]) {
        ++out.exhausted_failures;
      }
    };

    for (std::int64_t device = 0; device < params_.n_devices; ++device) {
      const auto reports = detail::draw_report_count(rng, params_.arrival);
      for (std::uint64_t j = 0; j < reports; ++j) {
        int transmissions = 1;
        while (transmissions <= max_attempts && rng.bernoulli(params_.p_e)) ++transmissions;
        const bool delivers = transmissions <= max_attempts;
        transmissions = std::min(transmissions, max_attempts);
        ++out.reports;
        // The device's first report gets its first transmission in the preallocated pool.
        const int preallocated = j == 0 ? 1 : 0;
        remaining_.push_back(transmissions - preallocated);
        delivers_.push_back(delivers);
        used_.push_back(preallocated);
        out.demand += transmissions - preallocated;
      }
    }

    pending_.clear();
    for (std::size_t report = 0; report < remaining_.size(); ++report) {
      if (remaining_[report] == 0) {
        resolve(report);
      } else {
        pending_.push_back(static_cast<std::uint32_t>(report));
      }
    }

    if (policy == SchedulerPolicy::RandomUniform) {
      while (out.slots_used < capacity && !pending_.empty()) {
        const auto pick = static_cast<std::size_t>(rng.below(pending_.size()));
        const auto report = pending_[pick];
        ++out.slots_used;
        ++used_[report];
        if (--remaining_[report] == 0) {
          resolve(report);
          pending_[pick] = pending_.back();
          pending_.pop_back();
        }
      }
    } else {
      std::deque<std::uint32_t> queue(pending_.begin(), pending_.end());
      while (out.slots_used < capacity && !queue.empty()) {
        const auto report = queue.front();
        queue.pop_front();
        ++out.slots_used;
        ++used_[report];
        if (--remaining_[report] == 0) {
          resolve(report);
        } else {
          queue.push_back(report);
        }
      }
      pending_.assign(queue.begin(), queue.end());
    }

    out.unserved_failures = static_cast<std::int64_t>(pending_.size());
    out.failures = out.exhausted_failures + out.unserved_failures;
    return out;
  }

 private:
  SystemParams params_;
  std::vector<int> remaining_;
  std::vector<char> delivers_;
  std::vector<int> used_;
  std::vector<std::uint32_t> pending_;
};

/// One reporting interval with a common pool of `capacity` slots.
inline IntervalOutcome simulate_interval(const SystemParams& params, std::int64_t capacity,
                                         SchedulerPolicy policy, RngStream& rng) {
  IntervalSimulator sim(params);
  return sim.run(capacity, policy, rng);
}

/// Empirical report failure probability over `intervals` independent
/// intervals (interval i uses stream (seed, i)) with a 95% Wilson interval.
inline FailureEstimate estimate_failure_prob(const SystemParams& params, std::int64_t capacity,
                                             SchedulerPolicy policy, std::int64_t intervals,
                                             std::uint64_t seed, unsigned threads = 0) {
  params.validate();
  if (intervals < 1) throw DomainError("estimate_failure_prob: intervals must be >= 1");
  if (capacity < 0) throw DomainError("capacity must be non-negative");
  auto est = detail::parallel_reduce<FailureEstimate>(
      intervals, threads,
      [&](std::int64_t begin, std::int64_t end) {
        FailureEstimate local;
        IntervalSimulator sim(params);
        for (std::int64_t i = begin; i < end; ++i) {
          RngStream rng(seed, static_cast<std::uint64_t>(i));
          const auto out = sim.run(capacity, policy, rng);
          local.reports_total += out.reports;
          local.reports_failed += out.failures;
          local.exhausted_failures += out.exhausted_failures;
          local.unserved_failures += out.unserved_failures;
        }
        return local;
      },
      [](FailureEstimate& into, const FailureEstimate& from) {
        into.reports_total += from.reports_total;
        into.reports_failed += from.reports_failed;
        into.exhausted_failures += from.exhausted_failures;
        into.unserved_failures += from.unserved_failures;
      });
  if (est.reports_total == 0) {
    throw IndeterminateEstimate("no reports were generated in any interval");
  }
  est.p_hat = static_cast<double>(est.reports_failed) / static_cast<double>(est.reports_total);
  const auto ci = wilson_interval(est.reports_failed, est.reports_total);
  est.ci_low = ci.low;
  est.ci_high = ci.high;
  return est;
}

}  // namespace m2mpool
