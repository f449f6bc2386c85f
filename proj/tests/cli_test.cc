#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.h"
#include "sentinel/io.h"
#include "test_util.h"

namespace sentinel {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = CliRun(args, out, err);
  return {code, out.str(), err.str()};
}

TEST(Cli, GenerateAnalyzeValidatePipeline) {
  testing::TempDir dir;
  const fs::path gen = dir.path() / "gen";
  const CliResult g = Cli({"generate", "--n", "120", "--seed", "4", "--out", gen.string()});
  ASSERT_EQ(g.code, kExitOk) << g.err;
  for (const char* f : {"survey.csv", "schema.json", "gen_config.json", "calibration.json"}) {
    EXPECT_TRUE(fs::exists(gen / f)) << f;
  }

  const fs::path report = dir.path() / "report";
  const CliResult a = Cli({"analyze", "--data", (gen / "survey.csv").string(), "--schema",
                     (gen / "schema.json").string(), "--out", report.string(), "--clusters",
                     "4"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  for (const char* f : {"pca.json", "merges.txt", "dendrogram.svg", "clusters.csv",
                        "similarity_hist.csv", "similarity_hist.svg", "correlogram.svg",
                        "correlation_graph.dot", "summary.json"}) {
    EXPECT_TRUE(fs::exists(report / f)) << f;
  }
  const json summary = json::parse(ReadFile(report / "summary.json"));
  EXPECT_FALSE(summary.empty());

  // The generated file carries the invalid block, so validation has findings.
  const CliResult v = Cli({"validate", "--data", (gen / "survey.csv").string(), "--schema",
                     (gen / "schema.json").string()});
  EXPECT_EQ(v.code, kExitFindings) << v.err;
}

TEST(Cli, SimulateWritesReportTraceAndDivergence) {
  testing::TempDir dir;
  const CliResult s = Cli({"simulate", "--config", testing::DataPath("three_agents.json").string(),
                     "--out", dir.path().string()});
  ASSERT_EQ(s.code, kExitOk) << s.err;
  const json report = json::parse(ReadFile(dir.path() / "report.json"));
  EXPECT_EQ(report.at("agents").size(), 3u);
  const std::string csv = ReadFile(dir.path() / "divergence.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "agent_id,agent-0,agent-1,agent-2");
  EXPECT_TRUE(fs::exists(dir.path() / "trace.jsonl"));
}

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(Cli({"frobnicate"}).code, kExitError);
  EXPECT_EQ(Cli({"analyze"}).code, kExitError);
  EXPECT_EQ(Cli({"analyze", "--data", "/no/such/file.csv"}).code, kExitError);
  EXPECT_EQ(Cli({}).code, kExitError);
}

TEST(Cli, BinaryReportsExitCodes) {
  const std::string cli = SENTINEL_CLI_PATH;
  const int status = std::system((cli + " frobnicate >/dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), kExitError);
  const int help = std::system((cli + " --help >/dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(help));
  EXPECT_EQ(WEXITSTATUS(help), kExitOk);
}

}  // namespace
}  // namespace sentinel
