#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "photocorr/analysis.hpp"
#include "photocorr/correlator.hpp"
#include "photocorr/timetag.hpp"

namespace fs = std::filesystem;
using namespace photocorr;

namespace {

const fs::path kCli = PHOTOCORR_CLI_PATH;
const fs::path kFixtures = PHOTOCORR_FIXTURE_DIR;

// Runs the CLI with stdout/stderr captured to files in `dir`.
int run(const fs::path& dir, const std::string& args) {
  const std::string cmd = kCli.string() + " " + args + " > " + (dir / "stdout.txt").string() +
                          " 2> " + (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json stdout_json(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "stdout.txt")); }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, HelpForEveryCommand) {
  const auto dir = oracle::scratch_dir("cli_help");
  EXPECT_EQ(run(dir, "--help"), 0);
  for (const char* cmd : {"simulate-hbt", "simulate-hom", "simulate-decay", "correlate", "fit-g2",
                          "fit-lifetime", "fit-hom", "visibility-sweep", "efficiency"}) {
    EXPECT_EQ(run(dir, std::string(cmd) + " --help"), 0) << cmd;
    EXPECT_NE(slurp(dir / "stdout.txt").find("--"), std::string::npos) << cmd;
  }
}

TEST(Cli, UsageErrorsExitOne) {
  const auto dir = oracle::scratch_dir("cli_usage");
  EXPECT_EQ(run(dir, ""), 1);
  EXPECT_EQ(run(dir, "no-such-command"), 1);
  EXPECT_EQ(run(dir, "simulate-hbt --pulses 10"), 1);
  EXPECT_EQ(run(dir, "efficiency --detected-hz abc --setup-eff 1 --det-eff 1 --rep-hz 1"), 1);
}

TEST(Cli, SimulateZeroPulsesWritesEmptyFiles) {
  const auto dir = oracle::scratch_dir("cli_zero");
  for (const char* cmd : {"simulate-hbt", "simulate-hom", "simulate-decay"}) {
    ASSERT_EQ(run(dir, std::string(cmd) + " --pulses 0 --seed 1 --out-a " + q(dir / "a.ptag") +
                           " --out-b " + q(dir / "b.ptag")),
              0)
        << cmd;
    EXPECT_TRUE(read_tag_file(dir / "a.ptag", TagFormat::binary).empty());
    EXPECT_TRUE(read_tag_file(dir / "b.ptag", TagFormat::binary).empty());
  }
}

TEST(Cli, SimulationsAreByteIdenticalUnderSeed) {
  const auto dir = oracle::scratch_dir("cli_determinism");
  std::ofstream(dir / "p.cfg") << "p_two = 0.01\nv_intrinsic = 0.9\ndet1.dark_rate_hz = 1000\n";
  for (const std::string cmd : {"simulate-hbt", "simulate-hom --polarization cross", "simulate-decay"}) {
    for (const std::string ext : {".ptag", ".csv"}) {
      std::string outputs[2];
      for (int rep = 0; rep < 2; ++rep) {
        const auto a = dir / ("a" + std::to_string(rep) + ext);
        const auto b = dir / ("b" + std::to_string(rep) + ext);
        ASSERT_EQ(run(dir, cmd + " --params " + q(dir / "p.cfg") + " --pulses 20000 --seed 7" +
                               " --out-a " + q(a) + " --out-b " + q(b)),
                  0);
        outputs[rep] = slurp(a) + slurp(b);
      }
      EXPECT_FALSE(outputs[0].empty());
      EXPECT_EQ(outputs[0], outputs[1]) << cmd << ext;
    }
  }
}

TEST(Cli, BadConfigIsDataError) {
  const auto dir = oracle::scratch_dir("cli_badcfg");
  std::ofstream(dir / "p.cfg") << "tau1_ps = -5\n";
  EXPECT_EQ(run(dir, "simulate-hbt --params " + q(dir / "p.cfg") + " --pulses 5 --seed 1 --out-a " +
                         q(dir / "a.ptag") + " --out-b " + q(dir / "b.ptag")),
            2);
  EXPECT_NE(slurp(dir / "stderr.txt").find("line 1"), std::string::npos);
}

TEST(Cli, LargeSimulationSmoke) {
  const auto dir = oracle::scratch_dir("cli_smoke");
  const auto t0 = std::chrono::steady_clock::now();
  ASSERT_EQ(run(dir, "simulate-hbt --pulses 10000000 --seed 3 --out-a " + q(dir / "a.ptag") +
                         " --out-b " + q(dir / "b.ptag")),
            0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 60.0);
  ASSERT_EQ(run(dir, "correlate --a " + q(dir / "a.ptag") + " --b " + q(dir / "b.ptag") +
                         " --bin-ps 100 --range-ps 40000 --out " + q(dir / "h.csv")),
            0);
  const auto h = read_histogram_csv(dir / "h.csv");
  EXPECT_GT(h.total_pairs, 1'000'000u);
}

TEST(Cli, CorrelateTwoTags) {
  const auto dir = oracle::scratch_dir("cli_two");
  std::ofstream(dir / "a.csv") << "channel,timestamp_ps\n0,1000\n";
  std::ofstream(dir / "b.csv") << "channel,timestamp_ps\n1,1130\n";
  ASSERT_EQ(run(dir, "correlate --a " + q(dir / "a.csv") + " --b " + q(dir / "b.csv") +
                         " --bin-ps 20 --range-ps 200 --out " + q(dir / "h.csv")),
            0);
  const std::string csv = slurp(dir / "h.csv");
  EXPECT_NE(csv.find("\n130,1\n"), std::string::npos);
  std::size_t nonzero = 0;
  for (const auto c : read_histogram_csv(dir / "h.csv").counts) nonzero += c != 0;
  EXPECT_EQ(nonzero, 1u);
  // Idempotent.
  ASSERT_EQ(run(dir, "correlate --a " + q(dir / "a.csv") + " --b " + q(dir / "b.csv") +
                         " --bin-ps 20 --range-ps 200 --out " + q(dir / "h2.csv")),
            0);
  EXPECT_EQ(slurp(dir / "h2.csv"), csv);
}

TEST(Cli, CorrelateFixtureMatchesBruteForce) {
  const auto dir = oracle::scratch_dir("cli_fixture");
  const auto a = read_tag_file(kFixtures / "small_a.csv", TagFormat::csv);
  const auto b = read_tag_file(kFixtures / "small_b.csv", TagFormat::csv);
  const auto spec = HistogramSpec::symmetric(25, 5000);
  for (const char* mode : {"", " --threads 4"}) {
    ASSERT_EQ(run(dir, "correlate --a " + q(kFixtures / "small_a.csv") + " --b " +
                           q(kFixtures / "small_b.csv") + " --bin-ps 25 --range-ps 5000 --out " +
                           q(dir / "h.csv") + mode),
              0);
    EXPECT_EQ(read_histogram_csv(dir / "h.csv"), oracle::brute_correlate(a.tags(), b.tags(), spec));
  }
  ASSERT_EQ(run(dir, "correlate --start-stop --a " + q(kFixtures / "small_a.csv") + " --b " +
                         q(kFixtures / "small_b.csv") + " --bin-ps 25 --range-ps 5000 --out " +
                         q(dir / "s.csv")),
            0);
  EXPECT_EQ(read_histogram_csv(dir / "s.csv"), oracle::brute_start_stop(a.tags(), b.tags(), spec));
}

TEST(Cli, CorrelateParseErrorExitsTwo) {
  const auto dir = oracle::scratch_dir("cli_parse");
  std::ofstream(dir / "a.csv") << "channel,timestamp_ps\n0,zz\n";
  EXPECT_EQ(run(dir, "correlate --a " + q(dir / "a.csv") + " --b " + q(dir / "a.csv") +
                         " --bin-ps 20 --range-ps 200 --out " + q(dir / "h.csv")),
            2);
}

TEST(Cli, FitG2NoiselessFixture) {
  const auto dir = oracle::scratch_dir("cli_fit_noiseless");
  ASSERT_EQ(run(dir, "fit-g2 --hist " + q(kFixtures / "hbt_noiseless.csv") + " --out " +
                         q(dir / "f.json") + " --model-out " + q(dir / "m.csv")),
            0);
  const auto j = nlohmann::json::parse(slurp(dir / "f.json"));
  EXPECT_EQ(j, stdout_json(dir));
  EXPECT_TRUE(j.at("converged").get<bool>());
  const auto& p = j.at("parameters");
  EXPECT_NEAR(p.at("amplitude").get<double>() / 1e6, 1.0, 5e-3);
  EXPECT_NEAR(p.at("g2_zero").get<double>() / 0.006, 1.0, 5e-3);
  EXPECT_NEAR(p.at("tau1_ps").get<double>() / 3110.0, 1.0, 5e-3);
  EXPECT_EQ(slurp(dir / "m.csv").substr(0, 20), "delay_ps,model_value");
}

TEST(Cli, FitG2MonteCarloFixture) {
  const auto dir = oracle::scratch_dir("cli_fit_mc");
  ASSERT_EQ(run(dir, "fit-g2 --hist " + q(kFixtures / "hbt_mc.csv")), 0);
  const auto j = stdout_json(dir);
  EXPECT_NEAR(j.at("parameters").at("g2_zero").get<double>(), 0.006, 0.003);
}

TEST(Cli, FitMissingFileExitsNonZero) {
  const auto dir = oracle::scratch_dir("cli_fit_missing");
  for (const char* cmd : {"fit-g2", "fit-lifetime", "fit-hom"}) {
    EXPECT_EQ(run(dir, std::string(cmd) + " --hist " + q(dir / "nope.csv")), 2) << cmd;
  }
}

TEST(Cli, FitLifetimeAndHomRun) {
  const auto dir = oracle::scratch_dir("cli_fit_other");
  ASSERT_EQ(run(dir, "simulate-decay --pulses 300000 --seed 2 --jitter-fwhm-ps 50 --out-a " +
                         q(dir / "s.ptag") + " --out-b " + q(dir / "d.ptag")),
            0);
  ASSERT_EQ(run(dir, "correlate --a " + q(dir / "s.ptag") + " --b " +
                         q(dir / "d.ptag") + " --bin-ps 10 --range-ps 12500 --out " +
                         q(dir / "decay.csv")),
            0);
  ASSERT_EQ(run(dir, "fit-lifetime --periodic --range-min-ps 0 --hist " + q(dir / "decay.csv")), 0);
  EXPECT_NEAR(stdout_json(dir).at("parameters").at("tau_ps").get<double>() / 3110.0, 1.0, 0.02);

  ASSERT_EQ(run(dir, "fit-hom --fix-tau1-ps 3110 --hist " + q(kFixtures / "hom_co_mc.csv")), 0);
  const auto j = stdout_json(dir);
  EXPECT_EQ(j.at("fixed").at("tau1_ps").get<double>(), 3110.0);
  EXPECT_TRUE(j.at("parameters").contains("tau_dip_ps"));
}

TEST(Cli, VisibilitySweep) {
  const auto dir = oracle::scratch_dir("cli_sweep");
  const auto co = kFixtures / "hom_co_mc.csv";
  const auto cross = kFixtures / "hom_cross_mc.csv";
  ASSERT_EQ(run(dir, "visibility-sweep --co " + q(cross) + " --cross " + q(cross) +
                         " --windows-ps 100,400,12500 --out " + q(dir / "id.csv")),
            0);
  std::istringstream id(slurp(dir / "id.csv"));
  std::string line;
  std::getline(id, line);
  while (std::getline(id, line)) EXPECT_NE(line.find(",0,"), std::string::npos) << line;

  ASSERT_EQ(run(dir, "visibility-sweep --co " + q(co) + " --cross " + q(cross) +
                         " --windows-ps '100, 250,400,1000,2000,5000,12500' --out " +
                         q(dir / "s.csv")),
            0);
  const auto h_co = read_histogram_csv(co);
  const auto h_cross = read_histogram_csv(cross);
  std::istringstream in(slurp(dir / "s.csv"));
  std::getline(in, line);
  double prev_v = 2.0, prev_err = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    double w, v, err, retained;
    char c;
    std::istringstream row(line);
    row >> w >> c >> v >> c >> err >> c >> retained;
    const auto lib = visibility(h_co, h_cross, w, 12'500.0);
    EXPECT_NEAR(v, lib.visibility, 1e-9);
    EXPECT_LE(v, prev_v + 2.0 * std::hypot(err, prev_err)) << w;
    prev_v = v;
    prev_err = err;
    ++rows;
  }
  EXPECT_EQ(rows, 7);

  for (const char* bad : {"100,,400", "abc", "100;400", "-5", ""}) {
    EXPECT_EQ(run(dir, "visibility-sweep --co " + q(co) + " --cross " + q(cross) +
                           " --windows-ps '" + bad + "' --out " + q(dir / "x.csv")),
              1)
        << bad;
  }
}

TEST(Cli, Efficiency) {
  const auto dir = oracle::scratch_dir("cli_eff");
  ASSERT_EQ(run(dir, "efficiency --detected-hz 2e5 --setup-eff 0.018 --det-eff 0.5 --rep-hz 8e7"), 0);
  auto j = stdout_json(dir);
  EXPECT_NEAR(j.at("first_lens_rate_hz").get<double>(), 2.2222222e7, 1.0);
  EXPECT_NEAR(j.at("first_lens_efficiency").get<double>(), 0.27778, 1e-5);
  ASSERT_EQ(run(dir, "efficiency --detected-hz 5000 --setup-eff 1 --det-eff 1 --rep-hz 1e6"), 0);
  j = stdout_json(dir);
  EXPECT_EQ(j.at("first_lens_rate_hz").get<double>(), 5000.0);
  EXPECT_EQ(j.at("first_lens_efficiency").get<double>(), 0.005);
  ASSERT_EQ(run(dir, "efficiency --detected-hz 0 --setup-eff 0.3 --det-eff 0.2 --rep-hz 1e6"), 0);
  EXPECT_EQ(stdout_json(dir).at("first_lens_efficiency").get<double>(), 0.0);
  EXPECT_EQ(run(dir, "efficiency --detected-hz 1 --setup-eff 0 --det-eff 0.2 --rep-hz 1e6"), 2);
}
