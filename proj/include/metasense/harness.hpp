#pragma once

#include "metasense/bound.hpp"
#include "metasense/config.hpp"
#include "metasense/prpg.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace metasense {

/// One of the trainable algorithms: "prpg", "random-control", "no-decoder",
/// "decoder-only", "single-mlp-policy" or "mimo-<n>" ("mimo(<n>)" is also accepted).
struct Algorithm {
  enum class Kind { prpg, random_control, no_decoder, decoder_only, single_mlp_policy, mimo } kind = Kind::prpg;
  int mimo_antennas = 0;

  /// Throws InvalidInput on unknown names.
  static Algorithm parse(const std::string& name);
  std::string name() const;
};

/// n Tx antennas at phases 2·pi·t/n and n Rx antennas, both spaced 0.1 m
/// along y around the configured Tx/Rx positions; the surface is a static
/// reflector whose contribution calibration removes. Returns n x M.
CMatrix mimo_gamma(const ExperimentConfig& config, int antennas);

/// Training configuration and environment of `algorithm` on this scenario.
std::pair<TrainConfig, TrainEnv> algorithm_setup(const ExperimentConfig& config, const Algorithm& algorithm);
TrainResult run_algorithm(const ExperimentConfig& config, const Algorithm& algorithm);

/// Writes trace.csv, checkpoint.txt, control.csv and config.json under config.out.
TrainResult run_train(const ExperimentConfig& config);

/// Writes baseline_<name>.csv and config.json under config.out.
LossTrace run_baseline(const ExperimentConfig& config, const std::string& which);

/// `k,s_1,...,s_N` rows with 1-based frame and state indices.
void write_control_csv(const std::filesystem::path& path, const ControlMatrix& control);
ControlMatrix read_control_csv(const std::filesystem::path& path, int states);

/// Control matrix named by config.bound: seeded random (the same one the
/// random-control baseline uses), the greedy matrix of a checkpoint's policy,
/// or a control CSV.
ControlMatrix bound_control(const ExperimentConfig& config);
BoundInstance bound_instance(const ExperimentConfig& config, const ControlMatrix& control);

/// Writes bound.csv and bound_summary.csv, plus bound_validation.csv when
/// config.bound.mc_draws > 0.
BoundReport run_bound(const ExperimentConfig& config);

struct BenchRow {
  std::string sweep;
  int frames = 0;
  int elements = 0;
  int states = 0;
  int grids = 0;
  std::string policy_arch;
  std::size_t policy_params = 0;
  std::size_t feature_params = 0;
  std::size_t sensing_params = 0;
  double action_seconds = 0.0;
  double train_seconds = 0.0;
};

struct BenchFit {
  std::string sweep;
  std::string quantity;
  double exponent = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<BenchFit> fits;
};

/// Doubling sweeps over K, N, N_S and M from the configured base sizes plus a
/// symmetric-group vs single-MLP pair. bench.csv holds the deterministic size
/// columns; bench_timing.csv and bench_fit.csv hold the wall-clock parts.
BenchResult run_bench(const ExperimentConfig& config);

struct ComparisonRow {
  std::string algorithm;
  std::uint64_t seed = 0;
  double initial_ce = 0.0;
  double final_ce = 0.0;
  int epochs = 0;
  double wall_seconds = 0.0;
  LossTrace trace;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
};

/// Runs every algorithm on the same scenario seed. Writes compare.csv,
/// compare_traces.csv and compare_timing.csv.
ComparisonReport run_compare(const ExperimentConfig& config, const std::vector<std::string>& algorithms);

/// Median of a non-empty sample.
double median(std::vector<double> v);

}  // namespace metasense
