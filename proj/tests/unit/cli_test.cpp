#include <gtest/gtest.h>

#include <cstdlib>

#include "coplay/cli/cli.hpp"

using namespace coplay;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Every test gets a fresh output root.
class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("coplay_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    setenv(cli::kOutputRootVar, root_.c_str(), 1);
  }
  void TearDown() override { unsetenv(cli::kOutputRootVar); }

  fs::path root_;
};

const std::vector<std::string> kTiny = {
    "--preset", "desk", "--set", "net.embed_hidden=8", "net.embed_out=4", "net.trunk=[8]", "net.core=8",
    "env.max_steps=60", "learner.unroll=10", "learner.batch_size=4", "learner.sync_period=5",
    "replay.capacity=200", "replay.min_size=4", "replay.updates_per_snippet=0.5", "log_every=1"};

std::vector<std::string> tiny_train(const std::string& out, double budget) {
  std::vector<std::string> a = {"train", "--out", out};
  a.insert(a.end(), kTiny.begin(), kTiny.end());
  a.push_back("frame_budget=" + std::to_string(budget));
  return a;
}

}  // namespace

TEST_F(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(invoke({}).code, cli::kUsage);
  EXPECT_EQ(invoke({"nash"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"tournament", "random", "--matches", "many"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"probe", "--team", "random", "--side", "up"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"train", "--preset", "huge"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"--help"}).code, cli::kOk);
}

TEST_F(Cli, RockPaperScissorsFileGivesUniformWeights) {
  cli::write_text(root_ / "rps.json", R"({"payoff": [[0, -1, 1], [1, 0, -1], [-1, 1, 0]], "names": ["r", "p", "s"]})");
  const auto r = invoke({"nash", (root_ / "rps.json").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto rep = cli::read_json_file((root_ / "nash" / "nash.json").string());
  for (double p : rep.at("p").get<std::vector<double>>()) EXPECT_NEAR(p, 1.0 / 3.0, 1e-6);
  EXPECT_LE(rep.at("exploitability").get<double>(), 1e-6);
  EXPECT_EQ(rep.at("support").size(), 3u);
}

TEST_F(Cli, MalformedMatrixNamesOffendingRow) {
  cli::write_text(root_ / "bad.json", R"({"payoff": [[0, 1], [1]]})");
  auto r = invoke({"nash", (root_ / "bad.json").string()});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("record 2"), std::string::npos) << r.err;
  cli::write_text(root_ / "sym.json", R"({"payoff": [[0, 1], [1, 0]]})");
  EXPECT_EQ(invoke({"nash", (root_ / "sym.json").string()}).code, cli::kDataError);
  cli::write_text(root_ / "junk.json", "{not json");
  EXPECT_EQ(invoke({"nash", (root_ / "junk.json").string()}).code, cli::kDataError);
  EXPECT_EQ(invoke({"nash", (root_ / "missing.json").string()}).code, cli::kDataError);
}

TEST_F(Cli, TwoStubsGiveTwoByTwoMatrixThatNashReads) {
  auto r = invoke({"tournament", "scripted", "passive", "--matches", "6", "--max-steps", "100", "--out", "t"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto file = root_ / "t" / "payoff.json";
  const auto text = slurp(file);
  const auto pm = eval::PayoffMatrix::from_json(io::Json::parse(text));
  EXPECT_EQ(pm.size(), 2);
  EXPECT_EQ(pm.counts().sum(), 12);
  EXPECT_EQ(pm.to_json().dump(2) + "\n", text);
  r = invoke({"nash", file.string(), "--out", "n"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto rep = cli::read_json_file((root_ / "n" / "nash.json").string());
  EXPECT_EQ(rep.at("names"), io::Json::parse(R"(["scripted", "passive"])"));
  EXPECT_EQ(io::read_jsonl_file((root_ / "t" / "matches.jsonl").string()).size(), 6u);
}

TEST_F(Cli, SelfPairingHasZeroDiagonal) {
  const auto r = invoke({"tournament", "random", "random", "--matches", "4", "--max-steps", "40"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto pm = eval::PayoffMatrix::from_json(cli::read_json_file((root_ / "tournament" / "payoff.json").string()));
  EXPECT_EQ(pm.goal_difference().diagonal().cwiseAbs().sum(), 0.0);
  const Eigen::MatrixXd gd = pm.goal_difference();
  EXPECT_EQ((gd + gd.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(Cli, UnreadableCheckpointIsSkipped) {
  const auto r = invoke({"tournament", "random", "passive", (root_ / "nope.bin").string(), "--matches", "2",
                      "--max-steps", "20"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.err.find("skipped"), std::string::npos);
  EXPECT_EQ(cli::read_json_file((root_ / "tournament" / "manifest.json").string()).at("excluded").size(), 1u);
  EXPECT_EQ(invoke({"tournament", "random", (root_ / "nope.bin").string()}).code, cli::kDataError);
}

TEST_F(Cli, EmptyTraceSetGivesFlaggedZeroReport) {
  const auto r = invoke({"analyze"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto rep = cli::read_json_file((root_ / "analysis" / "analysis.json").string());
  EXPECT_TRUE(rep.at("stats").at("empty").get<bool>());
  EXPECT_EQ(rep.at("stats").at("steps"), 0);
  EXPECT_EQ(rep.at("stats").at("vel_to_ball"), 0.0);
}

TEST_F(Cli, ProbeReportsPasses) {
  const auto r = invoke({"probe", "--team", "passer", "--opponents", "passive", "--episodes", "3"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto rep = cli::read_json_file((root_ / "probe" / "probe.json").string());
  ASSERT_EQ(rep.at("results").size(), 2u);
  for (const auto& s : rep.at("results")) EXPECT_GE(s.at("passes").get<int>(), 3);
}

TEST_F(Cli, ExportedTracesRoundTripAndAnalyze) {
  auto r = invoke({"export-traces", "--blue", "scripted", "--red", "random", "--episodes", "2", "--max-steps", "40",
                "--set", "base_length=14", "base_width=10.5", "--out", "tr.jsonl"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto text = slurp(root_ / "tr.jsonl");
  const auto trace = env::read_trace_file((root_ / "tr.jsonl").string());
  EXPECT_EQ(trace.size(), 80u);
  std::ostringstream again;
  env::write_trace(again, trace);
  EXPECT_EQ(again.str(), text);
  r = invoke({"analyze", "--trace", (root_ / "tr.jsonl").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto rep = cli::read_json_file((root_ / "analysis" / "analysis.json").string());
  EXPECT_FALSE(rep.at("stats").at("empty").get<bool>());
  EXPECT_EQ(rep.at("stats").at("episodes"), 2);
  EXPECT_EQ(io::read_jsonl_file((root_ / "analysis" / "stats.jsonl").string()).size(), 2u);
  EXPECT_EQ(invoke({"export-traces", "--blue", "scripted", "--set", "nope=1"}).code, cli::kDataError);
}

TEST_F(Cli, ZeroBudgetTrainWritesConfigAndInitialCheckpoints) {
  const auto r = invoke(tiny_train("run", 0));
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto cfg = cli::read_json_file((root_ / "run" / "config.json").string());
  EXPECT_EQ(cfg.at("version"), kVersion);
  EXPECT_EQ(cfg.at("config").at("net").at("core"), 8);
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(fs::exists(root_ / "run" / "checkpoints" / ("agent_" + std::to_string(i) + ".bin")));
  EXPECT_EQ(invoke(tiny_train("run", 0)).code, cli::kUsage);  // refuses to overwrite
  EXPECT_EQ(invoke({"train", "--set", "pbt.bogus=1"}).code, cli::kDataError);
  EXPECT_EQ(invoke({"train", "--config", (root_ / "none.json").string()}).code, cli::kDataError);
}

TEST_F(Cli, ConfigFileAndRunConfigAreAccepted) {
  ASSERT_EQ(invoke(tiny_train("a", 0)).code, cli::kOk);
  // A run's config.json can seed a new run.
  const auto r = invoke({"train", "--config", (root_ / "a" / "config.json").string(), "--out", "b"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(cli::read_json_file((root_ / "a" / "config.json").string()).at("config"),
            cli::read_json_file((root_ / "b" / "config.json").string()).at("config"));
}

TEST_F(Cli, DeterministicRunsRepeatAndResumeContinues) {
  ASSERT_EQ(invoke(tiny_train("x", 300)).code, cli::kOk);
  ASSERT_EQ(invoke(tiny_train("y", 300)).code, cli::kOk);
  for (const char* f : {"learner.jsonl", "ratings.jsonl", "evolution.jsonl", "state.json"}) {
    EXPECT_EQ(slurp(root_ / "x" / f), slurp(root_ / "y" / f)) << f;
  }
  // Match records also carry wall-clock times.
  auto matches = [&](const char* run) {
    auto recs = io::read_jsonl_file((root_ / run / "matches.jsonl").string());
    for (auto& r : recs) {
      r.erase("started_ms");
      r.erase("finished_ms");
    }
    return recs;
  };
  EXPECT_EQ(matches("x"), matches("y"));
  const double before = io::read_jsonl_file((root_ / "x" / "ratings.jsonl").string()).back().at("frames").get<double>();
  const auto r = invoke({"train", "--resume", "x", "--set", "frame_budget=600"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  double last = 0.0;
  for (const auto& rec : io::read_jsonl_file((root_ / "x" / "ratings.jsonl").string())) {
    EXPECT_GE(rec.at("frames").get<double>(), last);
    last = rec.at("frames").get<double>();
  }
  EXPECT_GT(last, before);
  EXPECT_GE(last, 600.0);
}

TEST_F(Cli, AnalyzeSeriesOverSnapshots) {
  auto args = tiny_train("run", 400);
  args.insert(args.begin() + 1, {"--snapshot-every", "200"});
  ASSERT_EQ(invoke(args).code, cli::kOk);
  std::vector<std::string> a = {"analyze", "--episodes", "1", "--max-steps", "30", "--alternatives", "2"};
  std::vector<std::string> snaps;
  for (const auto& d : fs::directory_iterator(root_ / "run" / "snapshots")) snaps.push_back((d.path() / "agent_0.bin").string());
  ASSERT_GE(snaps.size(), 2u);
  for (const auto& s : snaps) {
    a.push_back("--checkpoint");
    a.push_back(s);
  }
  const auto r = invoke(a);
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto series = io::read_jsonl_file((root_ / "analysis" / "series.jsonl").string());
  ASSERT_EQ(series.size(), snaps.size());
  for (std::size_t i = 1; i < series.size(); ++i) {
    EXPECT_LT(series[i - 1].at("frames").get<double>(), series[i].at("frames").get<double>());
  }
  EXPECT_TRUE(series[0].at("kl_ball").is_number());
}
