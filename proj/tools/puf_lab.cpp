// puf-lab: simulate arbiter PUFs, generate CRP datasets and run
// logistic-regression modeling attacks against them.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "apuf/commands.hpp"

namespace {

using apuf::RunConfig;

// Flags shared by every subcommand. Values are collected as text and applied
// through RunConfig::set so that file and flag values obey the same checks.
struct CommonFlags {
  std::optional<std::string> config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_value_flag(CLI::App* app, CommonFlags& flags, const std::string& name,
                    const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      name, [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); }, help);
}

void add_simulation_flags(CLI::App* app, CommonFlags& flags) {
  add_value_flag(app, flags, "--n", "stages", "stages per arbiter chain");
  add_value_flag(app, flags, "--chains", "chains", "parallel chains (response bits); 1 = classical APUF");
  add_value_flag(app, flags, "--delay-mean", "delay_mean", "mean stage delay");
  add_value_flag(app, flags, "--delay-sigma", "delay_sigma", "stage delay standard deviation");
  add_value_flag(app, flags, "--noise-sigma", "noise_sigma", "evaluation noise standard deviation");
}

void add_training_flags(CLI::App* app, CommonFlags& flags) {
  add_value_flag(app, flags, "--features", "features", "feature map: raw | parity");
  add_value_flag(app, flags, "--lr", "learning_rate", "gradient-descent learning rate");
  add_value_flag(app, flags, "--epochs", "epochs", "maximum descent steps");
  add_value_flag(app, flags, "--l2", "l2", "ridge coefficient");
  add_value_flag(app, flags, "--tol", "tol", "early-stop threshold on loss decrease");
}

void add_common_flags(CLI::App* app, CommonFlags& flags) {
  app->add_option_function<std::string>(
      "--config", [&flags](const std::string& v) { flags.config_path = v; }, "key = value config file");
  add_value_flag(app, flags, "--seed", "seed", "master seed");
  add_value_flag(app, flags, "--threads", "threads", "worker threads (outputs do not depend on it)");
  add_value_flag(app, flags, "-o,--output", "output", "output file");
}

RunConfig resolve(const CommonFlags& flags) {
  RunConfig cfg = flags.config_path ? apuf::load_config(*flags.config_path) : RunConfig{};
  for (const auto& [key, value] : flags.overrides) cfg.set(key, value);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arbiter PUF simulation and logistic-regression modeling attacks"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* generate = app.add_subcommand("generate", "write a simulated CRP dataset");
  add_common_flags(generate, flags);
  add_simulation_flags(generate, flags);
  add_value_flag(generate, flags, "--count", "count", "number of CRPs");

  apuf::cli::DatasetSource source;
  auto* attack = app.add_subcommand("attack", "train per-bit LR models on a dataset and report prediction rates");
  add_common_flags(attack, flags);
  add_training_flags(attack, flags);
  attack->add_option("dataset", source.path, "puf-crp v1 dataset (or rows with --import)")->required();
  add_value_flag(attack, flags, "--test", "test_fraction", "held-out fraction in (0, 1)");
  attack->add_flag("--import", source.import_rows, "read loose '<challenge> <response>' hex rows");
  attack->add_option("--challenge-bits", source.challenge_bits, "challenge width for --import");
  attack->add_option("--response-bits", source.response_bits, "response width for --import");

  auto* sweep = app.add_subcommand("sweep", "prediction rate over a grid of CRP counts and test fractions");
  add_common_flags(sweep, flags);
  add_simulation_flags(sweep, flags);
  add_training_flags(sweep, flags);
  add_value_flag(sweep, flags, "--counts", "counts", "comma-separated CRP counts");
  add_value_flag(sweep, flags, "--test-fractions", "test_fractions", "comma-separated test fractions");
  add_value_flag(sweep, flags, "--count", "count", "single CRP count");
  add_value_flag(sweep, flags, "--test", "test_fraction", "single test fraction");

  auto* metrics = app.add_subcommand("metrics", "uniformity, uniqueness, reliability and bit aliasing");
  add_common_flags(metrics, flags);
  add_simulation_flags(metrics, flags);
  add_value_flag(metrics, flags, "--instances", "instances", "simulated instances");
  add_value_flag(metrics, flags, "--challenges", "challenges", "challenges per instance");
  add_value_flag(metrics, flags, "--repetitions", "repetitions", "noisy re-evaluations per challenge");

  bool inject_fault = false;
  auto* oracle = app.add_subcommand("oracle-check", "compare the propagation simulator with the additive model");
  add_common_flags(oracle, flags);
  add_value_flag(oracle, flags, "--n", "stages", "check this width only");
  add_value_flag(oracle, flags, "--instances", "instances", "chains per width");
  add_value_flag(oracle, flags, "--challenges", "challenges", "random challenges per wide chain");
  oracle->add_flag("--inject-fault", inject_fault, "corrupt one model (self-test of the checker)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : apuf::cli::kUsage;
  }

  return apuf::cli::run_guarded(
      [&]() -> int {
        const RunConfig cfg = resolve(flags);
        const apuf::cli::Streams io{std::cout, std::cerr};
        if (*generate) return apuf::cli::cmd_generate(cfg, io);
        if (*attack) return apuf::cli::cmd_attack(cfg, source, io);
        if (*sweep) return apuf::cli::cmd_sweep(cfg, io);
        if (*metrics) return apuf::cli::cmd_metrics(cfg, io);
        return apuf::cli::cmd_oracle_check(cfg, inject_fault, io);
      },
      std::cerr);
}
