#include "uma/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace uma;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string config_error(const Json& doc) {
  try {
    validate_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("uma_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(UMA_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_config(const fs::path& dir, const Json& doc) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << doc.dump(2);
  return p;
}

const Json kSmall = Json::parse(R"({
  "algorithm": "uma2-surrogate",
  "seed": 3,
  "stream": {
    "horizon": 96,
    "segments": [
      {"length": 48, "family": "quadratic", "lambda": 0.5, "noise": 0.2},
      {"length": 48, "family": "absolute", "noise": 0.1}
    ]
  },
  "evaluation": {"tau": [16, 32]}
})");

}  // namespace

TEST(Config, MinimalDocumentGetsDefaults) {
  const auto cfg = validate_config(Json::parse(R"({"algorithm": "uma3", "stream": {"horizon": 100}})"));
  EXPECT_EQ(cfg.algorithm, Algorithm::uma3);
  EXPECT_EQ(cfg.seed(), 0u);
  EXPECT_EQ(cfg.stream.domain.kind(), Domain::Kind::ball);
  EXPECT_EQ(cfg.stream.domain.radius(), 1.0);
  EXPECT_EQ(cfg.stream.domain.center(), Vector::Zero(2));
  ASSERT_EQ(cfg.stream.segments.size(), 1u);
  EXPECT_EQ(cfg.stream.segments[0].length, 100);
  EXPECT_EQ(cfg.taus, (std::vector<Round>{16, 32, 64}));
  EXPECT_EQ(cfg.eval_mode(), EvalMode::exhaustive);
  EXPECT_EQ(cfg.resolved["seed"], 0);
}

TEST(Config, TauBeyondHorizonNamesTheKey) {
  const auto msg = config_error(Json::parse(R"({"algorithm": "uma3", "stream": {"horizon": 10}, "evaluation": {"tau": [16]}})"));
  EXPECT_NE(msg.find("evaluation.tau"), std::string::npos) << msg;
}

TEST(Config, UnknownAlgorithmListsTags) {
  const auto msg = config_error(Json::parse(R"({"algorithm": "uma9", "stream": {"horizon": 10}})"));
  for (const auto& tag : algorithm_tags()) EXPECT_NE(msg.find(tag), std::string::npos) << tag;
}

TEST(Config, EveryOffendingKeyIsReported) {
  const auto msg = config_error(Json::parse(R"({
    "algorithm": "uma3", "colour": 1,
    "stream": {"horizon": 10, "domain": {"type": "ball", "radius": -1}, "segments": [{"length": 10, "family": "cubic"}]},
    "evaluation": {"mode": "sometimes"}})"));
  for (const char* key : {"colour", "stream.domain", "stream.segments[0].family", "evaluation.mode"})
    EXPECT_NE(msg.find(key), std::string::npos) << key << "\n" << msg;
  EXPECT_NE(config_error(Json::parse(R"({"stream": {"horizon": 10}})")).find("algorithm"), std::string::npos);
  EXPECT_NE(config_error(Json::parse(R"({"algorithm": "uma3", "stream": {"horizon": 10, "segments": [{"length": 4}]}})"))
                .find("stream.segments"),
            std::string::npos);
}

TEST(Artifacts, ShortestRoundTripFormatting) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(-2.5e-10), "-2.5e-10");
  for (double v : {1.0 / 3.0, 2.0 / 7.0, 1e300, 5e-324}) EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
}

TEST(Artifacts, BlobHashMatchesGit) {
  // well-known object ids
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Artifacts, ZeroLossStreamHasZeroRegret) {
  Json doc = Json::parse(R"({"algorithm": "uma2-surrogate",
    "stream": {"horizon": 40, "segments": [{"length": 40, "family": "linear", "scale": 0}]},
    "evaluation": {"tau": [8, 40]}})");
  const auto res = run_experiment_in_memory(validate_config(doc));
  std::istringstream csv(res.artifacts.at("regret.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "p,q,tau,empirical_regret,bound_rhs,ratio");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    ASSERT_EQ(cols.size(), 6u);
    ASSERT_EQ(cols[3], "0");
    ++rows;
  }
  EXPECT_EQ(rows, 33 + 1);
}

TEST(Artifacts, SchemasAndManifest) {
  const auto res = run_experiment_in_memory(validate_config(kSmall));
  EXPECT_EQ(res.artifacts.at("trajectory.csv").rfind("t,loss,cumulative_loss,active_experts,gradient_evals\n", 0), 0u);
  EXPECT_EQ(res.artifacts.at("meta.csv").rfind("r,s,expert,lhs,rhs,holds\n", 0), 0u);
  const Json manifest = Json::parse(res.artifacts.at("manifest.json"));
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(manifest["config"]["algorithm"], "uma2-surrogate");
  for (const char* f : {"trajectory.csv", "regret.csv", "meta.csv"})
    EXPECT_EQ(manifest["artifacts"][f], git_blob_hash(res.artifacts.at(f)));
}

TEST(Cli, RerunIsByteIdentical) {
  const fs::path dir = scratch("rerun");
  const fs::path cfg = write_config(dir, kSmall);
  ASSERT_EQ(run_cli("--config " + cfg.string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("--config " + cfg.string() + " --out " + (dir / "b").string()), 0);
  for (const char* f : {"trajectory.csv", "regret.csv", "meta.csv", "manifest.json"}) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
}

TEST(Cli, OverridesAndCheckMode) {
  const fs::path dir = scratch("overrides");
  const fs::path cfg = write_config(dir, kSmall);
  ASSERT_EQ(run_cli("--config " + cfg.string() + " --out " + (dir / "o").string() + " --seed 11 --algo uma3"), 0);
  const Json manifest = Json::parse(slurp(dir / "o" / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 11);
  EXPECT_EQ(manifest["config"]["algorithm"], "uma3");
  ASSERT_EQ(run_cli("--config " + cfg.string() + " --check --out " + (dir / "c").string()), 0);
  EXPECT_FALSE(fs::exists(dir / "c"));
  EXPECT_EQ(run_cli("--config " + cfg.string() + " --algo nope --check"), 2);
  EXPECT_NE(run_cli("--config " + (dir / "missing.json").string()), 0);
}

TEST(Cli, InvariantViolationExitsNonZero) {
  Json doc = kSmall;
  doc["stream"]["gradient_bound"] = 0.01;  // rejected at generation
  const fs::path dir = scratch("violation");
  EXPECT_NE(run_cli("--config " + write_config(dir, doc).string() + " --check"), 0);
}

TEST(Cli, ReplicatesFanOut) {
  Json doc = kSmall;
  doc["replicates"] = 3;
  const fs::path dir = scratch("replicates");
  ASSERT_EQ(run_cli("--config " + write_config(dir, doc).string() + " --out " + (dir / "r").string()), 0);
  for (int s : {3, 4, 5}) EXPECT_TRUE(fs::exists(dir / "r" / ("seed_" + std::to_string(s)) / "regret.csv")) << s;
  // each replicate equals the single run with that seed
  Json single = kSmall;
  single["seed"] = 4;
  const auto res = run_experiment_in_memory(validate_config(single));
  EXPECT_EQ(slurp(dir / "r" / "seed_4" / "trajectory.csv"), res.artifacts.at("trajectory.csv"));
}

TEST(Cli, ShippedConfigsValidate) {
  for (const auto& entry : fs::directory_iterator(UMA_CONFIG_DIR))
    if (entry.path().extension() == ".json") EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
}
