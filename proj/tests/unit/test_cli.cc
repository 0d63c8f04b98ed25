#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "chronoshift/cli.h"
#include "test_util.h"

namespace chronoshift {
namespace {

namespace fs = std::filesystem;
using testing::temp_dir;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "chronoshift");
  ::testing::internal::CaptureStdout();
  ::testing::internal::CaptureStderr();
  const int code = run_cli(args);
  return {code, ::testing::internal::GetCapturedStdout(), ::testing::internal::GetCapturedStderr()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const fs::path& workspace() {
  static const fs::path ws = [] {
    const fs::path dir = temp_dir("cli_ws");
    const std::string w = dir.string();
    EXPECT_EQ(run({"-w", w, "synth", "--vocab", "300", "--dim", "30", "--influential", "8", "--distractors", "6",
                   "--background", "6", "--cotimed", "2"}).code, 0);
    EXPECT_EQ(run({"-w", w, "align"}).code, 0);
    EXPECT_EQ(run({"-w", w, "project"}).code, 0);
    return dir;
  }();
  return ws;
}

TEST(Cli, HelpAndUsageErrors) {
  const CliResult help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("timeline"), std::string::npos);
  const CliResult bad = run({"frobnicate"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("error: usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
}

TEST(Cli, MissingArtifactsNameTheFix) {
  const fs::path empty = temp_dir("cli_empty");
  const CliResult r = run({"-w", empty.string(), "timeline", "--word", "w0001"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing-artifact"), std::string::npos);
  EXPECT_NE(r.err.find("chronoshift align"), std::string::npos);
}

TEST(Cli, DetectWritesTurningPoints) {
  const std::string w = workspace().string();
  const CliResult r = run({"-w", w, "detect", "--all"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_TRUE(j.is_array());
  ASSERT_FALSE(j.empty());
  EXPECT_TRUE(j[0].contains("word"));
  EXPECT_TRUE(j[0].contains("zscore"));
  const CliResult bad = run({"-w", w, "detect", "--word", "w0001", "--lambda", "-3"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("config"), std::string::npos);
}

TEST(Cli, ClassifyAndTimelineRoundTrip) {
  const std::string w = workspace().string();
  ASSERT_EQ(run({"-w", w, "classify", "build-dataset"}).code, 0);
  ASSERT_EQ(run({"-w", w, "classify", "train", "--kind", "logreg"}).code, 0);
  EXPECT_TRUE(fs::exists(workspace() / "model.tclf"));
  const CliResult cv = run({"-w", w, "classify", "cv", "--kind", "logreg", "--folds", "3"});
  ASSERT_EQ(cv.code, 0) << cv.err;
  EXPECT_EQ(nlohmann::json::parse(cv.out)["per_fold"].size(), 3u);

  const auto truth = nlohmann::json::parse(slurp(workspace() / "truth.json"));
  const std::string word = truth["shifts"][0]["word"];
  const int year = truth["shifts"][0]["year"];
  const CliResult tl = run({"-w", w, "timeline", "--word", word, "--method", "byknncls"});
  ASSERT_EQ(tl.code, 0) << tl.err;
  EXPECT_EQ(nlohmann::json::parse(tl.out)["method"], "byknncls");
  const CliResult md = run({"-w", w, "timeline", "--word", word, "--format", "markdown"});
  EXPECT_EQ(md.out.rfind("# " + word, 0), 0u);
  const CliResult desc = run({"-w", w, "descriptors", "--word", word, "--year", std::to_string(year), "--method", "words"});
  ASSERT_EQ(desc.code, 0) << desc.err;
  EXPECT_EQ(nlohmann::json::parse(desc.out)["method"], "words");
  const CliResult glob = run({"-w", w, "timeline", "--word", word, "--method", "byknnglobcls"});
  EXPECT_EQ(glob.code, 1);
  EXPECT_NE(glob.err.find("global"), std::string::npos);
}

TEST(Cli, PipelineWritesOneFilePerWord) {
  const std::string w = workspace().string();
  const auto truth = nlohmann::json::parse(slurp(workspace() / "truth.json"));
  const std::string a = truth["shifts"][0]["word"], b = truth["shifts"][1]["word"];
  const fs::path out = workspace() / "tl";
  ASSERT_EQ(run({"-w", w, "pipeline", "--word", a, "--word", b, "--out", out.string(), "--workers", "2"}).code, 0);
  EXPECT_TRUE(fs::exists(out / (a + ".json")));
  EXPECT_TRUE(fs::exists(out / (b + ".json")));
}

TEST(Cli, EventsAndEval) {
  const fs::path dir = temp_dir("cli_events");
  {
    std::ofstream e(dir / "e.jsonl");
    e << R"({"id":"wiki:A","title":"A","year":2000,"categories":[],"internal_links":1,"external_links":20,"pageviews":7000})"
      << "\n"
      << R"({"id":"wiki:B","title":"B","year":2000,"categories":[],"internal_links":1,"external_links":2,"pageviews":7000})"
      << "\n";
  }
  const CliResult v = run({"events", "validate", (dir / "e.jsonl").string()});
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_EQ(nlohmann::json::parse(v.out)["events"], 2);
  ASSERT_EQ(run({"events", "filter", "--in", (dir / "e.jsonl").string(), "--out", (dir / "f.jsonl").string()}).code, 0);
  EXPECT_EQ(run({"events", "validate", (dir / "f.jsonl").string()}).out, "{\"events\":1,\"years\":1}\n");

  const CliResult tau = run({"eval", "--rank-a", "1,2,3,4", "--rank-b", "1,3,2,4"});
  ASSERT_EQ(tau.code, 0);
  EXPECT_NEAR(nlohmann::json::parse(tau.out)["kendall_tau"].get<double>(), 2.0 / 3.0, 1e-15);
}

TEST(Cli, ConfigFileSuppliesOptions) {
  const fs::path dir = temp_dir("cli_config");
  std::ofstream(dir / "c.toml") << "[eval]\nrank-a = \"1,2,3\"\nrank-b = \"3,2,1\"\n";
  const CliResult r = run({"--config", (dir / "c.toml").string(), "eval"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(r.out)["kendall_tau"].get<double>(), -1.0);
}

}  // namespace
}  // namespace chronoshift
