#include "uma/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Run an adaptive online learner on a synthetic stream and write regret artifacts."};
  std::string config_path;
  std::string out_dir;
  std::optional<std::int64_t> seed;
  std::optional<std::string> algo;
  bool check = false;
  app.add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides the config's \"output\")");
  app.add_option("--seed", seed, "seed override");
  app.add_option("--algo", algo, "algorithm tag override");
  app.add_flag("--check", check, "run the invariant checks without writing artifacts");
  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config_path);
    uma::Json doc = uma::Json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw uma::ConfigError("config: " + config_path + " is not valid JSON");
    if (doc.is_object()) {
      if (seed) doc["seed"] = *seed;
      if (algo) doc["algorithm"] = *algo;
    }
    const uma::ExperimentConfig cfg = uma::validate_config(doc);
    std::optional<std::filesystem::path> target;
    if (!check) {
      if (!out_dir.empty()) target = out_dir;
      else if (!cfg.output.empty()) target = cfg.output;
      else throw uma::UsageError("no output directory: pass --out or set \"output\"");
    }
    uma::run_experiment(cfg, target);
    std::cout << (check ? "invariants: pass\n" : "wrote " + target->string() + "\n");
    return 0;
  } catch (const uma::ConfigError& e) {
    std::cerr << "config error:\n" << e.what() << "\n";
    return 2;
  } catch (const uma::InvariantViolation& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
