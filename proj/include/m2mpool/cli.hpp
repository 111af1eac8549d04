#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "m2mpool/analytic.hpp"
#include "m2mpool/errors.hpp"
#include "m2mpool/lte_map.hpp"
#include "m2mpool/sim.hpp"

namespace m2mpool::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kInfeasibleTarget = 2,
  kInfeasibleGeometry = 3,
  kIo = 4,
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SweepVariable { Devices, ReportBytes };

struct SweepAxis {
  SweepVariable variable = SweepVariable::Devices;
  std::int64_t start = 0;
  std::int64_t stop = 0;
  std::int64_t step = 1;
};

struct RunConfig {
  std::string command;
  SystemParams params;
  LteProfile profile;
  std::int64_t runs = 100000;
  std::uint64_t seed = 1;
  std::string output_path;  // empty: stdout
  std::optional<SweepAxis> sweep;
  std::optional<std::int64_t> capacity;
  SchedulerPolicy scheduler = SchedulerPolicy::RandomUniform;
  unsigned threads = 0;
  bool runs_given = false;
  bool devices_given = false;
  bool pe_given = false;
};

inline std::string format_number(double value, int precision = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, value);
  return buf;
}

inline std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

/// Parses "VAR:START:STOP:STEP" with VAR one of N/devices or RS/report-bytes.
inline SweepAxis parse_sweep(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() != 4) throw DomainError("sweep must look like VAR:START:STOP:STEP");
  SweepAxis axis;
  if (parts[0] == "N" || parts[0] == "devices") {
    axis.variable = SweepVariable::Devices;
  } else if (parts[0] == "RS" || parts[0] == "report-bytes") {
    axis.variable = SweepVariable::ReportBytes;
  } else {
    throw DomainError("unknown sweep variable '" + parts[0] + "' (use N or RS)");
  }
  try {
    std::size_t used = 0;
    for (int i = 1; i <= 3; ++i) {
      const auto v = std::stoll(parts[static_cast<std::size_t>(i)], &used);
      if (used != parts[static_cast<std::size_t>(i)].size()) throw std::invalid_argument("trailing");
      (i == 1 ? axis.start : i == 2 ? axis.stop : axis.step) = v;
    }
  } catch (const std::logic_error&) {
    throw DomainError("sweep bounds must be integers: " + text);
  }
  if (axis.step <= 0) throw DomainError("sweep step must be positive");
  return axis;
}

/// Writes `contents` to `path` through a temporary file and a rename, so a
/// reader never observes a partial file.
inline void write_atomically(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot open " + tmp.string() + " for writing");
    file << contents;
    file.flush();
    if (!file) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path);
  }
}

inline void emit_csv(const RunConfig& config, const std::string& csv, std::ostream& out) {
  if (config.output_path.empty()) {
    out << csv;
  } else {
    write_atomically(config.output_path, csv);
  }
}

inline const char* policy_name(SchedulerPolicy policy) {
  return policy == SchedulerPolicy::Fifo ? "fifo" : "random";
}

// dimension ------------------------------------------------------------------

inline constexpr const char* kDimensionHeader =
    "N,pe,L,eps,mu,sigma,C_min,r_rbs,alpha,X_P,X_C,X,fraction,delay_s\n";

inline std::string dimension_row(const SystemParams& params, const DemandSummary& summary,
                                 const PoolPlan& plan) {
  std::string row;
  row += std::to_string(params.n_devices) + ',';
  row += format_number(params.p_e) + ',';
  row += std::to_string(params.max_attempts) + ',';
  row += format_number(params.target_failure) + ',';
  row += format_fixed(summary.mean, 4) + ',';
  row += format_fixed(summary.stddev(), 4) + ',';
  row += std::to_string(plan.capacity) + ',';
  row += std::to_string(plan.rbs_per_report) + ',';
  row += format_fixed(plan.alpha, 6) + ',';
  row += std::to_string(plan.preallocated_subframes) + ',';
  row += std::to_string(plan.common_subframes) + ',';
  row += std::to_string(plan.total_subframes) + ',';
  row += format_fixed(plan.capacity_fraction, 6) + ',';
  row += format_fixed(plan.worst_case_delay_seconds, 3) + '\n';
  return row;
}

inline int cmd_dimension(const RunConfig& config, std::ostream& out) {
  const auto summary = demand_summary(config.params);
  const auto c_min = dimension_capacity(config.params);
  const auto plan = build_pool_plan(config.params, config.profile, c_min);
  const std::string csv = std::string(kDimensionHeader) + dimension_row(config.params, summary, plan);
  emit_csv(config, csv, out);
  if (!config.output_path.empty()) {
    out << "C_min=" << c_min << " X_P=" << plan.preallocated_subframes
        << " X_C=" << plan.common_subframes << " fraction=" << format_fixed(plan.capacity_fraction, 4)
        << " delay_s=" << format_fixed(plan.worst_case_delay_seconds, 3) << '\n';
  }
  return kOk;
}

// validate-clt ---------------------------------------------------------------

inline int cmd_validate_clt(const RunConfig& config, std::ostream& out) {
  SystemParams base = config.params;
  if (!config.devices_given) base.n_devices = 100;
  std::vector<double> error_rates{base.p_e};
  if (!config.pe_given) error_rates = {0.1, 0.4};

  std::string csv = "pe,value,empirical_pdf,empirical_cdf,gaussian_pdf,gaussian_cdf\n";
  std::string summary_lines;
  for (const double p_e : error_rates) {
    SystemParams params = base;
    params.p_e = p_e;
    const auto summary = demand_summary(params);
    const auto hist = sample_demand(params, config.runs, config.seed, config.threads);
    const double sigma = summary.stddev();
    const auto gauss_cdf = [&](double x) {
      if (sigma <= 0.0) return x >= summary.mean ? 1.0 : 0.0;
      return normal_cdf((x - summary.mean) / sigma);
    };
    std::int64_t cumulative = 0;
    const double runs = static_cast<double>(hist.runs);
    for (const auto& [value, count] : hist.counts) {
      cumulative += count;
      const double v = static_cast<double>(value);
      csv += format_number(p_e) + ',' + std::to_string(value) + ',' +
             format_number(static_cast<double>(count) / runs) + ',' +
             format_number(static_cast<double>(cumulative) / runs) + ',' +
             format_number(gauss_cdf(v + 0.5) - gauss_cdf(v - 0.5)) + ',' +
             format_number(gauss_cdf(v + 0.5)) + '\n';
    }
    std::string ks = "nan";
    if (sigma > 0.0) ks = format_fixed(ks_distance(hist, summary), 6);
    summary_lines += "# ks pe=" + format_number(p_e) + " N=" + std::to_string(params.n_devices) +
                     " L=" + std::to_string(params.max_attempts) +
                     " runs=" + std::to_string(hist.runs) + " distance=" + ks +
                     " empirical_mean=" + format_fixed(hist.mean(), 4) +
                     " mu=" + format_fixed(summary.mean, 4) + " sigma=" + format_fixed(sigma, 4) +
                     '\n';
  }
  emit_csv(config, csv, out);
  out << summary_lines;
  return kOk;
}

// simulate -------------------------------------------------------------------

inline int cmd_simulate(const RunConfig& config, std::ostream& out) {
  const auto& params = config.params;
  std::int64_t capacity = 0;
  std::string bound = "";
  const bool analytic = !std::holds_alternative<PoissonPerRi>(params.arrival) ||
                        std::get<PoissonPerRi>(params.arrival).load == 1.0;
  if (config.capacity) {
    capacity = *config.capacity;
  } else {
    capacity = dimension_capacity(params);
  }
  if (analytic) {
    bound = format_number(failure_bound(capacity, demand_summary(params), params.p_e,
                                        params.max_attempts));
  }
  const auto est =
      estimate_failure_prob(params, capacity, config.scheduler, config.runs, config.seed, config.threads);
  std::string csv = "N,pe,L,eps,C,scheduler,intervals,reports,failed,p_hat,ci_low,ci_high,bound\n";
  csv += std::to_string(params.n_devices) + ',' + format_number(params.p_e) + ',' +
         std::to_string(params.max_attempts) + ',' + format_number(params.target_failure) + ',' +
         std::to_string(capacity) + ',' + policy_name(config.scheduler) + ',' +
         std::to_string(config.runs) + ',' + std::to_string(est.reports_total) + ',' +
         std::to_string(est.reports_failed) + ',' + format_number(est.p_hat) + ',' +
         format_number(est.ci_low) + ',' + format_number(est.ci_high) + ',' + bound + '\n';
  emit_csv(config, csv, out);
  if (!config.output_path.empty()) {
    out << "C=" << capacity << " p_hat=" << format_number(est.p_hat, 6)
        << " ci=[" << format_number(est.ci_low, 6) << ", " << format_number(est.ci_high, 6) << "]"
        << (bound.empty() ? "" : " bound=" + bound) << '\n';
  }
  return kOk;
}

// sweep ----------------------------------------------------------------------

inline int cmd_sweep(const RunConfig& config, std::ostream& out) {
  if (!config.sweep) throw DomainError("sweep requires --sweep VAR:START:STOP:STEP");
  const auto& axis = *config.sweep;
  std::string csv = "N,RS_bytes,mu,sigma,C_min,r,X_P,X_C,fraction,p_hat,ci_high\n";
  for (std::int64_t value = axis.start; value <= axis.stop; value += axis.step) {
    SystemParams params = config.params;
    LteProfile profile = config.profile;
    if (axis.variable == SweepVariable::Devices) {
      params.n_devices = value;
    } else {
      profile.report_size_bits = value * 8;
    }
    params.validate();
    profile.validate();
    const auto summary = demand_summary(params);
    const auto c_min = dimension_capacity(params);
    const auto plan = build_pool_plan(params, profile, c_min);
    std::string p_hat;
    std::string ci_high;
    if (config.runs_given) {
      const auto est =
          estimate_failure_prob(params, c_min, config.scheduler, config.runs, config.seed, config.threads);
      p_hat = format_number(est.p_hat);
      ci_high = format_number(est.ci_high);
    }
    csv += std::to_string(params.n_devices) + ',' + std::to_string(profile.report_size_bits / 8) + ',' +
           format_fixed(summary.mean, 4) + ',' + format_fixed(summary.stddev(), 4) + ',' +
           std::to_string(c_min) + ',' + std::to_string(plan.rbs_per_report) + ',' +
           std::to_string(plan.preallocated_subframes) + ',' + std::to_string(plan.common_subframes) +
           ',' + format_fixed(plan.capacity_fraction, 6) + ',' + p_hat + ',' + ci_high + '\n';
  }
  emit_csv(config, csv, out);
  return kOk;
}

// entry point ----------------------------------------------------------------

inline int run_config(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (config.command == "dimension") return cmd_dimension(config, out);
    if (config.command == "validate-clt") return cmd_validate_clt(config, out);
    if (config.command == "simulate") return cmd_simulate(config, out);
    if (config.command == "sweep") return cmd_sweep(config, out);
    err << "error: unknown command '" << config.command << "'\n";
    return kUsage;
  } catch (const InfeasibleTarget& e) {
    err << "error: infeasible reliability target: " << e.what() << '\n';
    return kInfeasibleTarget;
  } catch (const InfeasibleGeometry& e) {
    err << "error: infeasible pool geometry: " << e.what() << '\n';
    return kInfeasibleGeometry;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

/// Parses the command line (and an optional key=value config file, which
/// flags override) and runs the selected command. Returns the exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Periodic M2M resource pool dimensioning and simulation", "m2mpool"};
  app.set_config("--config", "", "Read key=value settings from a file; flags take precedence");

  std::int64_t devices = 30000;
  double p_e = 0.1;
  int max_attempts = 10;
  double target_eps = 1e-3;
  std::string arrival = "poisson";
  double load = 1.0;
  std::int64_t report_bytes = 100;
  std::string modulation = "qpsk";
  int bandwidth_rbs = 25;
  int m2m_rbs = 0;
  int data_res = 144;
  double ri_seconds = 60.0;
  std::int64_t runs = 100000;
  std::uint64_t seed = 1;
  std::string out_path;
  std::string sweep;
  std::int64_t capacity = -1;
  std::string scheduler = "random";
  unsigned threads = 0;

  auto* opt_devices = app.add_option("--devices", devices, "Number of reporting devices N");
  auto* opt_pe = app.add_option("--pe", p_e, "Per-transmission error probability");
  app.add_option("--max-attempts", max_attempts, "Maximum transmissions per report L");
  app.add_option("--target-eps", target_eps, "Report failure budget");
  app.add_option("--arrival", arrival, "Arrival model")->check(CLI::IsMember({"poisson", "one-per-ri"}));
  app.add_option("--load", load, "Mean reports per device per RI (Poisson model)");
  app.add_option("--report-bytes", report_bytes, "Report size in bytes");
  app.add_option("--modulation", modulation, "Uplink modulation")->check(CLI::IsMember({"qpsk", "qam64"}));
  app.add_option("--bandwidth-rbs", bandwidth_rbs, "System RBs per subframe");
  auto* opt_m2m = app.add_option("--m2m-rbs", m2m_rbs, "RBs per subframe reserved for M2M (default: all)");
  app.add_option("--data-res", data_res, "Data resource elements per RB");
  app.add_option("--ri-seconds", ri_seconds, "Reporting interval in seconds");
  auto* opt_runs = app.add_option("--runs", runs, "Monte Carlo replications");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out_path, "Output CSV path (default: stdout)");
  app.add_option("--sweep", sweep, "Sweep axis VAR:START:STOP:STEP, VAR in {N, RS}");
  auto* opt_capacity = app.add_option("--capacity", capacity, "Common-pool capacity (default: dimensioned)");
  app.add_option("--scheduler", scheduler, "Common-pool scheduler")->check(CLI::IsMember({"random", "fifo"}));
  app.add_option("--threads", threads, "Worker threads (0: hardware concurrency)");

  std::vector<CLI::App*> commands;
  for (const char* name : {"dimension", "validate-clt", "simulate", "sweep"}) {
    commands.push_back(app.add_subcommand(name)->fallthrough());
  }
  commands[0]->description("Dimension the common pool and lay it out on the LTE grid");
  commands[1]->description("Compare simulated demand with its Gaussian approximation");
  commands[2]->description("Estimate the report failure probability by simulation");
  commands[3]->description("Dimension over a range of N or report sizes");
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  RunConfig config;
  config.command = app.get_subcommands().front()->get_name();
  try {
    config.params.n_devices = devices;
    config.params.p_e = p_e;
    config.params.max_attempts = max_attempts;
    config.params.target_failure = target_eps;
    if (arrival == "one-per-ri") {
      config.params.arrival = OnePerRi{};
    } else {
      config.params.arrival = PoissonPerRi{load};
    }
    config.params.validate();

    config.profile.rbs_per_subframe_total = bandwidth_rbs;
    config.profile.m2m_rbs_per_subframe = opt_m2m->count() > 0 ? m2m_rbs : bandwidth_rbs;
    config.profile.data_res_per_rb = data_res;
    config.profile.bits_per_re = bits_per_symbol(modulation == "qam64" ? Modulation::Qam64 : Modulation::Qpsk);
    if (report_bytes < 1) throw DomainError("report size must be >= 1 byte");
    config.profile.report_size_bits = report_bytes * 8;
    if (!(ri_seconds > 0.0)) throw DomainError("reporting interval must be positive");
    config.profile.ri_subframes = std::llround(ri_seconds / config.profile.subframe_seconds);
    config.profile.validate();

    if (runs < 1) throw DomainError("runs must be >= 1");
    config.runs = runs;
    config.runs_given = opt_runs->count() > 0;
    config.devices_given = opt_devices->count() > 0;
    config.pe_given = opt_pe->count() > 0;
    config.seed = seed;
    config.output_path = out_path;
    config.threads = threads;
    config.scheduler = scheduler == "fifo" ? SchedulerPolicy::Fifo : SchedulerPolicy::RandomUniform;
    if (opt_capacity->count() > 0) {
      if (capacity < 0) throw DomainError("capacity must be non-negative");
      config.capacity = capacity;
    }
    if (!sweep.empty()) config.sweep = parse_sweep(sweep);
    if (config.command == "sweep" && !config.sweep) {
      throw DomainError("sweep requires --sweep VAR:START:STOP:STEP");
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return run_config(config, out, err);
}

}  // namespace m2mpool::cli
