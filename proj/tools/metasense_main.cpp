#include "metasense/config.hpp"
#include "metasense/errors.hpp"
#include "metasense/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

using namespace metasense;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> epochs;
  std::optional<std::string> preset;
  std::optional<unsigned> threads;
  bool wall_time = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Root seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--epochs", f.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  cmd->add_option("--preset", f.preset, "Base preset")->check(CLI::IsMember({"tiny", "paper"}));
  cmd->add_option("--threads", f.threads, "Worker threads (0 = auto, 1 = strictly deterministic)");
  cmd->add_flag("--wall-time", f.wall_time, "Record wall-clock seconds in loss traces");
}

ExperimentConfig resolve(const CommonFlags& f) {
  const std::string base = f.preset.value_or("tiny");
  ExperimentConfig c = f.config_path.empty() ? preset_config(base) : load_config(f.config_path, base);
  if (f.preset && f.config_path.empty()) c.preset = *f.preset;
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out = *f.out;
  if (f.epochs) c.training.epochs = *f.epochs;
  if (f.threads) c.threads = *f.threads;
  if (f.wall_time) c.training.record_wall_time = true;
  c.validate();
  set_default_threads(c.threads);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metasurface-assisted RF 3D sensing: training, baselines and analytical bounds"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string baseline_name;
  std::vector<std::string> algorithms;

  auto* train_cmd = app.add_subcommand("train", "Train the policy and sensing networks");
  add_common(train_cmd, flags);

  auto* baseline_cmd = app.add_subcommand("baseline", "Train a baseline algorithm");
  baseline_cmd->add_option("which", baseline_name,
                           "random-control | no-decoder | decoder-only | single-mlp-policy | mimo-<n>")
      ->required();
  add_common(baseline_cmd, flags);

  auto* bound_cmd = app.add_subcommand("bound", "Analytical cross-entropy upper bound");
  add_common(bound_cmd, flags);

  auto* bench_cmd = app.add_subcommand("bench", "Timing sweeps over K, N, N_S and M");
  add_common(bench_cmd, flags);

  auto* compare_cmd = app.add_subcommand("compare", "Run several algorithms on one scenario");
  compare_cmd->add_option("--algorithms", algorithms, "Algorithms to run (default: config compare list)")
      ->delimiter(',');
  add_common(compare_cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*baseline_cmd) Algorithm::parse(baseline_name);
    for (const auto& a : algorithms) Algorithm::parse(a);
  } catch (const InvalidInput& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    const ExperimentConfig config = resolve(flags);
    if (*train_cmd) {
      const TrainResult r = run_train(config);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      if (r.trace.empty())
        std::printf("no training epochs, outputs in %s\n", config.out.c_str());
      else
        std::printf("final ce_eval %.6g (initial %.6g), outputs in %s\n", r.trace.back().ce_eval,
                    r.trace.front().ce_eval, config.out.c_str());
    } else if (*baseline_cmd) {
      const LossTrace t = run_baseline(config, baseline_name);
      if (!t.empty()) std::printf("%s final ce_eval %.6g\n", baseline_name.c_str(), t.back().ce_eval);
    } else if (*bound_cmd) {
      const BoundReport r = run_bound(config);
      std::printf("L_ub %.6g  P_err_ub %.6g  P_acc_lb %.6g\n", r.loss_ub, r.p_err_ub, r.p_acc_lb);
    } else if (*bench_cmd) {
      const BenchResult r = run_bench(config);
      for (const auto& f : r.fits) std::printf("%-4s %-15s exponent %.3f\n", f.sweep.c_str(), f.quantity.c_str(), f.exponent);
    } else if (*compare_cmd) {
      const auto list = algorithms.empty() ? config.compare.algorithms : algorithms;
      const ComparisonReport r = run_compare(config, list);
      for (const auto& row : r.rows) std::printf("%-18s final ce_eval %.6g\n", row.algorithm.c_str(), row.final_ce);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
