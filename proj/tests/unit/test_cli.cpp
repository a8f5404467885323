#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "fhm/checkpoint.hpp"
#include "fhm/dataset.hpp"
#include "support.hpp"

namespace fhm {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun fhm_run(std::vector<std::string> args) {
  args.insert(args.begin(), "fhm");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// The only subdirectory of `root` whose name starts with `prefix`.
fs::path only_dir(const fs::path& root, const std::string& prefix) {
  fs::path found;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.path().filename().string().starts_with(prefix)) {
      EXPECT_TRUE(found.empty()) << "several " << prefix << " directories";
      found = e.path();
    }
  }
  EXPECT_FALSE(found.empty()) << "no " << prefix << " directory";
  return found;
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

TEST(Cli, ConfigHashIsStable) {
  EXPECT_EQ(cli::config_hash(""), "cbf29ce484222325");
  EXPECT_EQ(cli::config_hash("a"), "af63dc4c8601ec8c");
}

TEST(Cli, ExitCodes) {
  const auto dir = testing::scratch_dir("cli_codes").string();
  EXPECT_EQ(fhm_run({"--help"}).code, cli::kOk);
  EXPECT_EQ(fhm_run({"bogus"}).code, cli::kConfigError);
  EXPECT_EQ(fhm_run({"generate", "--topology", "base-urban-9", "--out", dir}).code,
            cli::kConfigError);
  const CliRun unknown = fhm_run({"generate", "--topology", "no-such", "--seed", "1", "--out", dir});
  EXPECT_EQ(unknown.code, cli::kConfigError);
  EXPECT_NE(unknown.err.find("config error"), std::string::npos);
  EXPECT_EQ(fhm_run({"train", "--topology", "base-urban-9", "--seed", "1", "--data",
                     "/nonexistent.csv", "--out", dir})
                .code,
            cli::kIoError);
  EXPECT_EQ(fhm_run({"invert", "--checkpoint", "/nonexistent.json", "--query", "/q.json",
                     "--out", dir})
                .code,
            cli::kIoError);
  EXPECT_EQ(fhm_run({"train", "--topology", "base-urban-9", "--seed", "1", "--samples", "3",
                     "--out", dir})
                .code,
            cli::kConfigError);
}

TEST(Cli, MissingSeedNamesTheRequirement) {
  const CliRun r = fhm_run({"fcm-sim", "--topology", "base-urban-9", "--out",
                         testing::scratch_dir("cli_seed").string()});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("seed"), std::string::npos);
}

TEST(Cli, GenerateWritesRequestedRows) {
  const auto root = testing::scratch_dir("cli_generate");
  const CliRun r = fhm_run({"generate", "--topology", "auto-mpg-6", "--samples", "100", "--seed",
                         "4", "--out", root.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path dir = only_dir(root, "generate-auto-mpg-6-");
  EXPECT_EQ(line_count(slurp(dir / "data.csv")), 101U);
  const TopologySpec spec = read_topology(dir / "topology.json");
  EXPECT_EQ(spec.generator.seed, 4U);
  EXPECT_EQ(load_csv(dir / "data.csv", CsvSchema::from_topology(spec)).samples(), 100U);
}

TEST(Cli, TrainIsByteIdenticalOnRerun) {
  const auto a = testing::scratch_dir("cli_train_a");
  const auto b = testing::scratch_dir("cli_train_b");
  const std::vector<std::string> common{"train", "--topology", "base-urban-9", "--seed", "2",
                                        "--samples", "60", "--epochs", "20", "--folds", "3"};
  auto args_a = common, args_b = common;
  args_a.insert(args_a.end(), {"--out", a.string()});
  args_b.insert(args_b.end(), {"--out", b.string(), "--threads", "3"});
  const CliRun ra = fhm_run(args_a);
  const CliRun rb = fhm_run(args_b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  const fs::path da = only_dir(a, "train-base-urban-9-");
  const fs::path db = only_dir(b, "train-base-urban-9-");
  EXPECT_EQ(da.filename(), db.filename());
  for (const char* file : {"report.json", "table.txt", "best_fold.json", "fold_0.json",
                           "fold_2.json"}) {
    EXPECT_EQ(slurp(da / file), slurp(db / file)) << file;
  }
  const Checkpoint ck = read_checkpoint(da / "fold_1.json");
  EXPECT_EQ(ck.fold, 1U);
  EXPECT_EQ(ck.config.epochs, 20U);
}

TEST(Cli, ConfigFileAndFlagOverride) {
  const auto root = testing::scratch_dir("cli_config");
  std::ofstream(root / "run.json") << R"({"topology": "auto-mpg-6", "seed": 3,
      "train": {"epochs": 5, "folds": 2}, "generator": {"samples": 30}})";
  const CliRun r = fhm_run({"train", "--config", (root / "run.json").string(), "--epochs", "7",
                         "--out", (root / "runs").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path dir = only_dir(root / "runs", "train-auto-mpg-6-");
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report["config"]["epochs"], 7);
  EXPECT_EQ(report["config"]["folds"], 2);
  EXPECT_EQ(report["folds"].size(), 2U);
}

TEST(Cli, InvertFromTrainDirectory) {
  const auto root = testing::scratch_dir("cli_invert");
  ASSERT_EQ(fhm_run({"train", "--topology", "auto-mpg-6", "--seed", "5", "--samples", "40",
                     "--epochs", "10", "--folds", "2", "--out", root.string()})
                .code,
            0);
  const fs::path train = only_dir(root, "train-");
  std::ofstream(root / "q.json") << R"({"fuzzy": {"mpg": "high"}, "seed": 1})";
  const CliRun r = fhm_run({"invert", "--checkpoint", train.string(), "--query",
                         (root / "q.json").string(), "--steps", "200", "--out", root.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto sol = nlohmann::json::parse(slurp(only_dir(root, "invert-") / "solution.json"));
  EXPECT_EQ(sol["trace"].size(), 200U);
  EXPECT_TRUE(sol["nodes"].contains("mpg"));

  std::ofstream(root / "bad.json") << R"({"fuzzy": {"mpg": "enormous"}})";
  const CliRun bad = fhm_run({"invert", "--checkpoint", train.string(), "--query",
                           (root / "bad.json").string(), "--out", root.string()});
  EXPECT_EQ(bad.code, cli::kConfigError);
  EXPECT_NE(bad.err.find("very_high"), std::string::npos);
}

TEST(Cli, FcmSimWithoutEdgesSettlesImmediately) {
  const auto root = testing::scratch_dir("cli_sim");
  std::ofstream(root / "flat.json")
      << R"({"name": "flat", "nodes": ["a", "b"], "edges": [], "groups": {"all": ["a", "b"]}})";
  const CliRun r = fhm_run({"fcm-sim", "--topology", (root / "flat.json").string(), "--seed", "0",
                         "--out", root.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("converged after 1 iterations"), std::string::npos) << r.out;
  const std::string csv = slurp(only_dir(root, "fcm-sim-flat-") / "trajectory.csv");
  EXPECT_EQ(csv, "step,a,b\n0,0.5,0.5\n1,0.5,0.5\n");
}

TEST(Cli, FcmSimTrajectoryLengthMatchesIterations) {
  const auto root = testing::scratch_dir("cli_sim_len");
  const CliRun r = fhm_run({"fcm-sim", "--topology", "base-urban-9", "--seed", "3", "--activation",
                         "tanh", "--start", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "--out",
                         root.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::size_t iters = std::stoul(r.out.substr(r.out.find("after ") + 6));
  const std::string csv = slurp(only_dir(root, "fcm-sim-") / "trajectory.csv");
  EXPECT_EQ(line_count(csv), iters + 2);
  EXPECT_NE(csv.find("\n0,0.10000000000000001,"), std::string::npos);
}

TEST(Cli, EvalRendersReports) {
  const auto root = testing::scratch_dir("cli_eval");
  ASSERT_EQ(fhm_run({"train", "--topology", "base-urban-9", "--seed", "1", "--samples", "30",
                     "--epochs", "5", "--folds", "2", "--out", root.string()})
                .code,
            0);
  const fs::path report = only_dir(root, "train-") / "report.json";
  const CliRun r = fhm_run({"eval", "--report", report.string(), "--report", report.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Transitive Chain Acc."), std::string::npos);
  EXPECT_EQ(line_count(r.out), 4U);
}

}  // namespace
}  // namespace fhm
