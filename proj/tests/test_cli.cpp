#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "m2mpool/cli.hpp"

namespace fs = std::filesystem;
using namespace m2mpool;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "m2mpool");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, sep);) parts.push_back(p);
  return parts;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& line : split(text, '\n')) {
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(split(line, ','));
  }
  return rows;
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("m2mpool_cli_" + std::to_string(::getpid()) + "_" +
                                                   std::to_string(counter_++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  bool empty() const { return fs::is_empty(path_); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

}  // namespace

TEST(CliDimension, DefaultsReproduceHeadline) {
  const auto r = run({"dimension"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], split("N,pe,L,eps,mu,sigma,C_min,r_rbs,alpha,X_P,X_C,X,fraction,delay_s", ','));
  EXPECT_EQ(rows[1][0], "30000");
  EXPECT_EQ(rows[1][6], "14841");
  EXPECT_EQ(rows[1][7], "3");
  EXPECT_NEAR(std::stod(rows[1][12]), 0.09, 0.005);
}

TEST(CliDimension, Qam64) {
  const auto r = run({"dimension", "--modulation", "qam64"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NEAR(std::stod(csv_rows(r.out)[1][12]), 0.03, 0.005);
}

TEST(CliDimension, ZeroDevicesIsUsageError) {
  const auto r = run({"dimension", "--devices", "0"});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.out.empty());
}

TEST(CliDimension, InfeasibleTarget) {
  const auto r = run({"dimension", "--max-attempts", "2", "--target-eps", "1e-3"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("infeasible"), std::string::npos);
}

TEST(CliDimension, InfeasibleGeometry) {
  EXPECT_EQ(run({"dimension", "--ri-seconds", "1"}).code, 3);
  EXPECT_EQ(run({"dimension", "--m2m-rbs", "2"}).code, 3);
}

TEST(CliDimension, IoFailure) {
  const auto r = run({"dimension", "--out", "/nonexistent-dir/x/out.csv"});
  EXPECT_EQ(r.code, 4);
}

TEST(CliDimension, WritesFileAtomically) {
  TempDir dir;
  const auto path = dir / "dim.csv";
  const auto r = run({"dimension", "--out", path.string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(path));
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));
  EXPECT_EQ(slurp(path), run({"dimension"}).out);
}

TEST(CliUsage, BadFlagsAndValues) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"dimension", "--bogus"}).code, 1);
  EXPECT_EQ(run({"dimension", "--modulation", "bpsk"}).code, 1);
  EXPECT_EQ(run({"dimension", "--pe", "1.5"}).code, 1);
  EXPECT_EQ(run({"dimension", "--runs", "0"}).code, 1);
  EXPECT_EQ(run({"sweep"}).code, 1);
  EXPECT_EQ(run({"sweep", "--sweep", "N:1:10:0"}).code, 1);
  EXPECT_EQ(run({"sweep", "--sweep", "X:1:10:1"}).code, 1);
  EXPECT_EQ(run({"sweep", "--sweep", "N:1:ten:1"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(CliUsage, InvalidConfigWritesNothing) {
  TempDir dir;
  const auto path = dir / "never.csv";
  EXPECT_EQ(run({"sweep", "--sweep", "N:1000:2000:0", "--out", path.string()}).code, 1);
  EXPECT_EQ(run({"dimension", "--devices", "-4", "--out", path.string()}).code, 1);
  EXPECT_TRUE(dir.empty());
}

TEST(CliConfig, FileValuesAndFlagPrecedence) {
  TempDir dir;
  const auto cfg = dir / "run.ini";
  {
    std::ofstream f(cfg);
    f << "devices=1000\nmodulation=qam64\npe=0.2\n";
  }
  const auto from_file = csv_rows(run({"dimension", "--config", cfg.string()}).out);
  EXPECT_EQ(from_file[1][0], "1000");
  EXPECT_EQ(from_file[1][1], "0.2");
  EXPECT_EQ(from_file[1][7], "1");
  const auto overridden = csv_rows(run({"dimension", "--config", cfg.string(), "--devices", "500"}).out);
  EXPECT_EQ(overridden[1][0], "500");
  EXPECT_EQ(overridden[1][1], "0.2");
}

TEST(CliSweep, DevicesMonotone) {
  const auto r = run({"sweep", "--sweep", "N:1000:30000:1000"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 31u);
  EXPECT_EQ(rows[0], split("N,RS_bytes,mu,sigma,C_min,r,X_P,X_C,fraction,p_hat,ci_high", ','));
  double prev = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double f = std::stod(rows[i][8]);
    EXPECT_GE(f, prev);
    prev = f;
  }
  EXPECT_EQ(rows.back()[0], "30000");
  EXPECT_NEAR(prev, 0.09, 0.005);
}

TEST(CliSweep, ReportSizeAtQam64) {
  const auto r = run({"sweep", "--sweep", "RS:100:1000:100", "--modulation", "qam64"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows.back()[1], "1000");
  EXPECT_NEAR(std::stod(rows.back()[8]), 0.30, 0.015);
  EXPECT_NEAR(std::stod(rows[1][8]), 0.03, 0.005);
}

TEST(CliSweep, EmptyRangeIsHeaderOnly) {
  const auto r = run({"sweep", "--sweep", "N:10:5:1"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "N,RS_bytes,mu,sigma,C_min,r,X_P,X_C,fraction,p_hat,ci_high\n");
}

TEST(CliSweep, OptionalSimulationColumns) {
  const auto r = run({"sweep", "--sweep", "N:100:200:100", "--runs", "200"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 3u);
  ASSERT_EQ(rows[1].size(), 11u);
  EXPECT_LE(std::stod(rows[1][9]), std::stod(rows[1][10]));
}

TEST(CliValidateClt, SingleRun) {
  const auto r = run({"validate-clt", "--runs", "1", "--pe", "0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], split("pe,value,empirical_pdf,empirical_cdf,gaussian_pdf,gaussian_cdf", ','));
  EXPECT_EQ(rows[1][2], "1");
  EXPECT_NE(r.out.find("# ks pe=0.1 N=100"), std::string::npos);
}

TEST(CliValidateClt, DeterministicBytes) {
  TempDir dir;
  const auto a = dir / "a.csv";
  const auto b = dir / "b.csv";
  ASSERT_EQ(run({"validate-clt", "--runs", "3000", "--seed", "5", "--out", a.string()}).code, 0);
  ASSERT_EQ(run({"validate-clt", "--runs", "3000", "--seed", "5", "--threads", "3", "--out", b.string()}).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_FALSE(slurp(a).empty());
}

TEST(CliSimulate, ReportsBoundAndEstimate) {
  const auto r = run({"simulate", "--devices", "100", "--runs", "2000", "--scheduler", "fifo"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], split("N,pe,L,eps,C,scheduler,intervals,reports,failed,p_hat,ci_low,ci_high,bound", ','));
  EXPECT_EQ(rows[1][5], "fifo");
  EXPECT_LE(std::stod(rows[1][9]), std::stod(rows[1][12]));
}

TEST(CliSimulate, ExplicitCapacityWithNonUnitLoad) {
  const auto r = run({"simulate", "--devices", "50", "--load", "2", "--capacity", "80", "--runs", "500"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  EXPECT_EQ(rows[1][4], "80");
  EXPECT_EQ(rows[1].size(), 12u);  // bound column left empty
}

// Golden files live in tests/golden and are regenerated with the commands
// listed in tests/golden/README.
TEST(CliGolden, RegeneratesBitIdentically) {
  const std::string dir = M2MPOOL_GOLDEN_DIR;
  const std::vector<std::pair<std::string, std::vector<std::string>>> cases = {
      {"dimension_default.csv", {"dimension"}},
      {"dimension_qam64.csv", {"dimension", "--modulation", "qam64"}},
      {"sweep_devices_qpsk.csv", {"sweep", "--sweep", "N:1000:30000:1000"}},
      {"sweep_report_size_qam64.csv", {"sweep", "--sweep", "RS:100:1000:100", "--modulation", "qam64"}},
      {"validate_clt_small.csv", {"validate-clt", "--runs", "2000", "--seed", "7"}},
      {"simulate_small.csv", {"simulate", "--devices", "100", "--runs", "1000", "--seed", "3"}},
  };
  for (const auto& [file, args] : cases) {
    TempDir tmp;
    auto with_out = args;
    with_out.push_back("--out");
    with_out.push_back((tmp / file).string());
    ASSERT_EQ(run(with_out).code, 0) << file;
    EXPECT_EQ(slurp(tmp / file), slurp(dir + "/" + file)) << file;
  }
}

TEST(CliBinary, ExitCodesThroughProcess) {
  const std::string tool = M2MPOOL_TOOL;
  EXPECT_EQ(std::system((tool + " dimension > /dev/null").c_str()), 0);
  EXPECT_EQ(WEXITSTATUS(std::system((tool + " dimension --devices 0 2> /dev/null").c_str())), 1);
  EXPECT_EQ(WEXITSTATUS(std::system((tool + " dimension --max-attempts 2 2> /dev/null").c_str())), 2);
}
