#include <sstream>

#include <nlohmann/json.hpp>

#include "lht/cli.hpp"
#include "test_util.hpp"

using namespace lht;
using lht::testing::read_file;
using lht::testing::temp_dir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

const std::vector<std::string> kShortTrain = {"--benchmark", "--steps", "30"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"train", "--benchmark"}).code, cli::kExitUsage);  // --out missing
  auto dir = temp_dir();
  EXPECT_EQ(run({"train", "--benchmark", "--mode", "lht", "--out", dir.string()}).code,
            cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST(Cli, GenDataWritesFourFilesDeterministically) {
  auto a = temp_dir("a"), b = temp_dir("b");
  ASSERT_EQ(run({"gen-data", "--out", a.string(), "--preset", "8,4,2", "--seed", "3"}).code, 0);
  for (const char* f : {"hierarchy.json", "train.csv", "test.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  auto first = read_file(a / "train.csv");
  ASSERT_EQ(run({"gen-data", "--out", a.string(), "--preset", "8,4,2", "--seed", "3"}).code, 0);
  EXPECT_EQ(read_file(a / "train.csv"), first);
  ASSERT_EQ(run({"gen-data", "--out", b.string(), "--preset", "8,4,2", "--seed", "3"}).code, 0);
  EXPECT_EQ(read_file(b / "test.csv"), read_file(a / "test.csv"));
  EXPECT_EQ(cli::file_digest(b / "train.csv"), cli::file_digest(a / "train.csv"));
}

TEST(Cli, MissingOutputDirectory) {
  auto r = run({"gen-data", "--out", "/nonexistent/lht_out"});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_NE(r.err.find("IoError"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("/nonexistent/lht_out"), std::string::npos) << r.err;
}

TEST(Cli, NegativeLambdaRejectedBeforeTraining) {
  auto dir = temp_dir();
  auto r = run(concat({"train", "--out", dir.string(), "--lambda", "-1"}, kShortTrain));
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_NE(r.err.find("NegativeLambda"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "history.jsonl"));
  EXPECT_FALSE(fs::exists(dir / "checkpoint.json"));
}

TEST(Cli, TrainOutputsAndDeterminism) {
  auto a = temp_dir("a"), b = temp_dir("b");
  auto args = concat({"train", "--mode", "lht_f2c", "--seed", "2"}, kShortTrain);
  ASSERT_EQ(run(concat(args, {"--out", a.string()})).code, 0);
  ASSERT_EQ(run(concat(args, {"--out", b.string()})).code, 0);
  for (const char* f : {"checkpoint.json", "report.json", "history.jsonl", "per_class.csv",
                        "config.json", "hierarchy.json", "manifest.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
  }
  EXPECT_EQ(read_file(a / "checkpoint.json"), read_file(b / "checkpoint.json"));
  EXPECT_EQ(read_file(a / "report.json"), read_file(b / "report.json"));
  std::istringstream history(read_file(a / "history.jsonl"));
  std::size_t lines = 0;
  for (std::string line; std::getline(history, line);) {
    auto rec = nlohmann::json::parse(line);
    EXPECT_TRUE(rec.contains("ce_per_level"));
    ++lines;
  }
  EXPECT_EQ(lines, 30u);
}

TEST(Cli, RerunFromManifestIsBitIdentical) {
  auto data = temp_dir("data"), a = temp_dir("a"), b = temp_dir("b");
  ASSERT_EQ(run({"gen-data", "--out", data.string(), "--train-per-class", "20",
                 "--test-per-class", "20"}).code, 0);
  ASSERT_EQ(run({"train", "--data", data.string(), "--steps", "25", "--mode", "lht_c2f", "--out",
                 a.string()}).code, 0);
  auto manifest = nlohmann::json::parse(read_file(a / "manifest.json"));
  EXPECT_EQ(manifest["command"], "train");
  EXPECT_FALSE(manifest["inputs"].empty());
  ASSERT_EQ(run({"rerun", "--manifest", (a / "manifest.json").string(), "--out", b.string()}).code, 0);
  EXPECT_EQ(read_file(b / "checkpoint.json"), read_file(a / "checkpoint.json"));
  auto again = nlohmann::json::parse(read_file(b / "manifest.json"));
  EXPECT_EQ(again["outputs"], manifest["outputs"]);

  // a changed input is refused
  std::ofstream(data / "train.csv", std::ios::app) << "\n";
  EXPECT_EQ(run({"rerun", "--manifest", (a / "manifest.json").string(), "--out", b.string()}).code,
            cli::kExitRuntime);
}

TEST(Cli, EvaluateWithBaseline) {
  auto a = temp_dir("a"), b = temp_dir("b"), e = temp_dir("e");
  ASSERT_EQ(run(concat({"train", "--mode", "lht_f2c", "--out", a.string()}, kShortTrain)).code, 0);
  ASSERT_EQ(run(concat({"train", "--mode", "vanilla", "--out", b.string()}, kShortTrain)).code, 0);
  auto r = run({"evaluate", "--benchmark", "--checkpoint", (a / "checkpoint.json").string(),
                "--baseline", (b / "checkpoint.json").string(), "--out", e.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(e / "per_class_delta.csv"));
  auto report = nlohmann::json::parse(read_file(e / "report.json"));
  auto trained = nlohmann::json::parse(read_file(a / "report.json"));
  EXPECT_EQ(report["avg_acc"], trained["avg_acc"]);
}

TEST(Cli, AblationsEvaluateOnFullHierarchy) {
  auto a = temp_dir("a"), b = temp_dir("b");
  ASSERT_EQ(run(concat({"train", "--drop-level", "2", "--out", a.string()}, kShortTrain)).code, 0);
  auto dropped = nlohmann::json::parse(read_file(a / "report.json"));
  EXPECT_EQ(dropped["acc"].size(), 3u);
  EXPECT_TRUE(fs::exists(a / "report_reduced.json"));
  ASSERT_EQ(run(concat({"train", "--random-hierarchy", "4", "--out", b.string()}, kShortTrain)).code, 0);
  auto random = nlohmann::json::parse(read_file(b / "report.json"));
  EXPECT_EQ(random["acc"].size(), 3u);
}

TEST(Cli, SweepLambdaTable) {
  auto dir = temp_dir();
  auto r = run(concat({"sweep-lambda", "--lambdas", "0,2", "--seeds", "0,1", "--workers", "2",
                       "--out", dir.string()},
                      kShortTrain));
  ASSERT_EQ(r.code, 0) << r.err;
  auto runs = read_file(dir / "runs.csv");
  EXPECT_EQ(std::count(runs.begin(), runs.end(), '\n'), 5);
  auto sweep = read_file(dir / "sweep.csv");
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 3);
}

TEST(Cli, VerifyOnlyAppendixA) {
  auto dir = temp_dir();
  auto r = run({"verify", "--only", "appendixA", "--out", dir.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
  auto line = nlohmann::json::parse(r.out);
  EXPECT_EQ(line["name"], "appendixA");
  EXPECT_TRUE(line["pass"].get<bool>());
  EXPECT_TRUE(fs::exists(dir / "verify.jsonl"));
  EXPECT_EQ(run({"verify", "--only", "nonsense"}).code, cli::kExitUsage);
}

TEST(Cli, ConfigFileOverlaidByFlags) {
  auto dir = temp_dir();
  std::ofstream(dir / "cfg.json") << R"({"lambda": 5, "max_steps": 12})";
  ASSERT_EQ(run({"train", "--benchmark", "--config", (dir / "cfg.json").string(), "--lambda", "1",
                 "--out", dir.string()}).code, 0);
  auto cfg = nlohmann::json::parse(read_file(dir / "config.json"));
  EXPECT_EQ(cfg["lambda"], 1.0);
  EXPECT_EQ(cfg["max_steps"], 12);
}
