#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "heavytail/cli.hpp"

namespace ht = heavytail;
namespace cli = heavytail::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kGoldenDir = HEAVYTAIL_GOLDEN_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "heavytail_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "run.conf";
  std::ofstream(p) << text;
  return p;
}

int run(const std::string& sub, const fs::path& config, const fs::path& out, bool assert_verdicts = false,
        std::optional<ht::Seed> seed = std::nullopt) {
  std::ostringstream log;
  cli::Options opt{sub, config.string(), seed, out.string(), assert_verdicts};
  const int code = cli::dispatch(opt, log);
  if (code != 0) std::cerr << log.str();
  return code;
}

cli::ExperimentOutput run_golden(const std::string& sub) {
  std::ifstream in(kGoldenDir / (sub + ".conf"));
  const auto config = ht::Config::parse(in);
  return cli::run_experiment(sub, config, ht::resolve_seed(config), kGoldenDir);
}

}  // namespace

TEST(ResultCsv, RoundTrip) {
  cli::ResultTable t;
  t.subcommand = "demo";
  auto& a = t.add("series, with comma", "n", "3", "VaR");
  a.estimate = 0.1 + 0.2;
  a.ci_low = -1e-300;
  a.ci_high = 12345.678901234567;
  a.sample_count = 1000;
  a.verdict = "ok";
  t.add("s", "p", "v", "flag").verdict = "inconclusive";
  std::istringstream in(cli::results_text(t));
  const auto back = cli::parse_results(in);
  EXPECT_EQ(back.subcommand, "demo");
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0].series, "series; with comma");
  EXPECT_EQ(back.rows[0].estimate, t.rows[0].estimate);
  EXPECT_EQ(back.rows[0].ci_low, t.rows[0].ci_low);
  EXPECT_EQ(back.rows[0].ci_high, t.rows[0].ci_high);
  EXPECT_EQ(back.rows[1], t.rows[1]);
}

TEST(ResultCsv, RejectsUnknownSchema) {
  std::istringstream in("subcommand,series\n");
  EXPECT_THROW(cli::parse_results(in), ht::Error);
}

// Each golden file pins the exact bytes of one subcommand's result CSV. Set
// HEAVYTAIL_UPDATE_GOLDEN=1 to rewrite them after an intended change.
class Golden : public ::testing::TestWithParam<std::string> {};

TEST_P(Golden, MatchesStoredCsv) {
  const std::string sub = GetParam();
  const auto out = run_golden(sub);
  const std::string text = cli::results_text(out.table);
  const auto golden = kGoldenDir / (sub + ".csv");
  if (std::getenv("HEAVYTAIL_UPDATE_GOLDEN")) {
    std::ofstream(golden, std::ios::binary) << text;
    for (const auto& [name, content] : out.extra_files)
      std::ofstream(kGoldenDir / (sub + "-" + name), std::ios::binary) << content;
  }
  ASSERT_TRUE(fs::exists(golden)) << golden;
  EXPECT_EQ(text, slurp(golden));
  for (const auto& [name, content] : out.extra_files) EXPECT_EQ(content, slurp(kGoldenDir / (sub + "-" + name)));

  std::istringstream in(text);
  const auto parsed = cli::parse_results(in);
  EXPECT_EQ(parsed.subcommand, sub);
  EXPECT_EQ(parsed.rows.size(), out.table.rows.size());
  EXPECT_EQ(cli::results_text(parsed), text);
}

INSTANTIATE_TEST_SUITE_P(Subcommands, Golden,
                         ::testing::Values("synth", "fit", "var-sweep", "bootstrap", "schur-scan", "trunc-scan",
                                           "copula-check", "eu-sweep"),
                         [](const auto& info) {
                           std::string s = info.param;
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

TEST(Dispatch, WritesCsvAndManifest) {
  const auto dir = scratch("manifest");
  const auto cfg = write_config(dir, slurp(kGoldenDir / "schur-scan.conf"));
  ASSERT_EQ(run("schur-scan", cfg, dir / "out"), cli::kExitOk);
  ASSERT_TRUE(fs::exists(dir / "out" / "schur-scan.csv"));
  const auto m = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(m["seed"], 3);
  EXPECT_EQ(m["subcommand"], "schur-scan");
  EXPECT_EQ(m["resultSchema"], std::string(cli::kResultSchema));
  EXPECT_EQ(m["config"]["dist.alpha"], "0.7");
  EXPECT_EQ(m["exitCode"], 0);
  EXPECT_TRUE(m.contains("configHash"));
  EXPECT_TRUE(m.contains("timestamp"));
}

TEST(Dispatch, RepeatedRunsAreByteIdentical) {
  const auto dir = scratch("repeat");
  const auto cfg = write_config(dir, slurp(kGoldenDir / "trunc-scan.conf"));
  ASSERT_EQ(run("trunc-scan", cfg, dir / "a"), 0);
  ASSERT_EQ(run("trunc-scan", cfg, dir / "b"), 0);
  EXPECT_EQ(slurp(dir / "a" / "trunc-scan.csv"), slurp(dir / "b" / "trunc-scan.csv"));
}

TEST(Dispatch, WorkerCountDoesNotChangeResults) {
  const auto dir = scratch("threads");
  const auto cfg2 = write_config(dir, "seed = 3\ndist.family = cauchy\nsweep.n = 1, 4\nmc = 100000\n");
  ::setenv("HEAVYTAIL_THREADS", "1", 1);
  ASSERT_EQ(run("var-sweep", cfg2, dir / "one"), 0);
  ::setenv("HEAVYTAIL_THREADS", "3", 1);
  ASSERT_EQ(run("var-sweep", cfg2, dir / "three"), 0);
  ::unsetenv("HEAVYTAIL_THREADS");
  EXPECT_EQ(slurp(dir / "one" / "var-sweep.csv"), slurp(dir / "three" / "var-sweep.csv"));
}

TEST(Dispatch, SeedOverrideChangesOutputAndManifest) {
  const auto dir = scratch("seed");
  const auto cfg = write_config(dir, slurp(kGoldenDir / "var-sweep.conf"));
  ASSERT_EQ(run("var-sweep", cfg, dir / "a"), 0);
  ASSERT_EQ(run("var-sweep", cfg, dir / "b", false, 99), 0);
  EXPECT_NE(slurp(dir / "a" / "var-sweep.csv"), slurp(dir / "b" / "var-sweep.csv"));
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "b" / "manifest.json"))["seed"], 99);
}

TEST(Dispatch, ExitCodes) {
  const auto dir = scratch("exit");
  const auto good = write_config(dir, slurp(kGoldenDir / "eu-sweep.conf"));
  EXPECT_EQ(run("no-such-command", good, dir / "o"), cli::kExitUsage);
  EXPECT_EQ(run("eu-sweep", dir / "missing.conf", dir / "o"), cli::kExitError);

  const auto typo = dir / "typo.conf";
  std::ofstream(typo) << "seed = 1\ndist.family = cauchy\nsweep.nn = 1..3\n";
  EXPECT_EQ(run("var-sweep", typo, dir / "o"), cli::kExitError);

  const auto bad = dir / "bad.conf";
  std::ofstream(bad) << "dist.family = stable\ndist.alpha = 2.5\n";
  EXPECT_EQ(run("schur-scan", bad, dir / "o"), cli::kExitError);

  // Four points are too few for a shape verdict.
  const auto few = dir / "few.conf";
  std::ofstream(few) << "dist.family = powerlaw\ndist.alpha = 1\neu.n = 1..4\nmc = 1000\n";
  EXPECT_EQ(run("eu-sweep", few, dir / "o"), cli::kExitOk);
  EXPECT_EQ(run("eu-sweep", few, dir / "o", true), cli::kExitInconclusive);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "o" / "manifest.json"))["exitCode"], 3);
}

TEST(Dispatch, SynthFeedsFitThroughDataPath) {
  const auto dir = scratch("synth");
  const auto cfg = write_config(dir, "seed = 8\ndata.family = gpd\ndata.shape = 0.3\ndata.count = 500\n");
  ASSERT_EQ(run("synth", cfg, dir), 0);
  const auto from_file = dir / "fit.conf";
  std::ofstream(from_file) << "data.path = losses.csv\nfit.families = gpd\n";
  ASSERT_EQ(run("fit", from_file, dir / "f1"), 0);
  const auto inline_cfg = dir / "fit2.conf";
  std::ofstream(inline_cfg) << "seed = 8\ndata.family = gpd\ndata.shape = 0.3\ndata.count = 500\nfit.families = gpd\n";
  ASSERT_EQ(run("fit", inline_cfg, dir / "f2"), 0);
  EXPECT_EQ(slurp(dir / "f1" / "fit.csv"), slurp(dir / "f2" / "fit.csv"));
}

TEST(Subcommands, SchurScanAlphaBelowOneVerdict) {
  const ht::Config c{{"seed", "1"}, {"dist.family", "stable"}, {"dist.alpha", "0.7"}, {"mc", "1e6"}};
  const auto out = cli::run_experiment("schur-scan", c, 1);
  const auto v = out.table.find("schur-verdict");
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].verdict, "increasing-toward-equal");
}

TEST(Subcommands, VarSweepOnNormalFitDecreases) {
  const ht::Config c{{"data.family", "gpd"}, {"data.shape", "0.1862"}, {"fit.family", "normal"},
                     {"sweep.n", "1..20"},   {"measures", "var"},       {"mc", "200000"}};
  const auto out = cli::run_experiment("var-sweep", c, 4);
  const auto trend = out.table.find("VaR-trend");
  ASSERT_EQ(trend.size(), 1u);
  EXPECT_EQ(trend[0].verdict, "strictly-decreasing");
  EXPECT_EQ(out.table.find("VaR").size(), 20u);
}
