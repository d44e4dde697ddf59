#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "fdi/continual.hpp"
#include "report.hpp"

namespace fdi {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("fdi_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const json cfg = {
        {"seed", 7},
        {"fixtures", std::string(FDI_SOURCE_DIR) + "/data/pandas_tasks.jsonl"},
        {"profiling", {{"probes_per_state", 10}}},
        {"backdoor", {{"subset_size", 300}, {"rounds", 3}, {"test_queries", 30}}},
        {"defense", {{"samples", 200}, {"lm_samples", 300}}},
        {"simulate", {{"samples", 20}}},
    };
    std::ofstream(dir_ / "cfg.json") << cfg.dump();
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string cfg() const { return (dir_ / "cfg.json").string(); }
  fs::path dir_;
};

TEST_F(CliTest, OutputsAreByteIdenticalAcrossRuns) {
  const std::vector<std::vector<std::string>> commands = {
      {"attack", "prompt-inject"}, {"attack", "backdoor"}, {"simulate"}};
  for (const auto& c : commands) {
    for (const char* out : {"a", "b"}) {
      auto args = c;
      args.insert(args.end(), {"--config", cfg(), "--out", (dir_ / out).string()});
      const auto r = run(args);
      ASSERT_EQ(r.code, 0) << r.err;
    }
    for (const auto& e : fs::directory_iterator(dir_ / "a")) {
      EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / e.path().filename())) << e.path();
    }
    fs::remove_all(dir_ / "a");
    fs::remove_all(dir_ / "b");
  }
}

TEST_F(CliTest, SummaryRoundTrips) {
  const auto r = run({"simulate", "--config", cfg(), "--out", (dir_ / "s").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json s = json::parse(slurp(dir_ / "s" / "summary.json"));
  EXPECT_EQ(s["command"], "simulate");
  EXPECT_EQ(s["seed"], 7);
  EXPECT_TRUE(s["metrics"].is_object());
  EXPECT_EQ(s["config_hash"].get<std::string>().size(), 16u);
  EXPECT_EQ(json::parse(s.dump()), s);
}

TEST_F(CliTest, SeedFlagOverridesConfig) {
  const auto r = run({"simulate", "--config", cfg(), "--seed", "9", "--out", (dir_ / "s").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(slurp(dir_ / "s" / "summary.json"))["seed"], 9);
}

TEST_F(CliTest, MissingConfigNamesPath) {
  const std::string missing = (dir_ / "nope.json").string();
  const auto r = run({"simulate", "--config", missing});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find(missing), std::string::npos);
}

TEST_F(CliTest, InvalidJsonAndMissingSeed) {
  std::ofstream(dir_ / "bad.json") << "{oops";
  EXPECT_EQ(run({"simulate", "--config", (dir_ / "bad.json").string()}).code, cli::kConfigError);
  std::ofstream(dir_ / "noseed.json") << "{}";
  const auto r = run({"simulate", "--config", (dir_ / "noseed.json").string()});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("seed"), std::string::npos);
}

TEST_F(CliTest, BadFlags) {
  EXPECT_EQ(run({"simulate", "--bogus"}).code, cli::kConfigError);
  EXPECT_EQ(run({"attack", "backdoor", "--backdoor", "B9", "--seed", "1"}).code, cli::kConfigError);
  EXPECT_EQ(run({"attack", "backdoor", "--rate", "2", "--seed", "1"}).code, cli::kConfigError);
  EXPECT_EQ(run({}).code, cli::kConfigError);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST(Report, EmptyTraceIsHeaderOnly) {
  EXPECT_EQ(AsrTrace{}.to_csv(), AsrTrace::csv_header() + "\n");
  const json s = report::summary("x", 1, 2, json::object());
  EXPECT_EQ(s["config_hash"], "0000000000000001");
}

}  // namespace
}  // namespace fdi
