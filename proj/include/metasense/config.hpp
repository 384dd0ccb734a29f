#pragma once

#include "metasense/bound.hpp"
#include "metasense/channel.hpp"
#include "metasense/prpg.hpp"
#include "metasense/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace metasense {

/// The surface is a rows x cols array in the y-z plane. Elements are tied in
/// group_rows x group_cols tiles that always share one configuration.
struct GeometryBlock {
  Vec3 tx{0.87, -0.84, 0.0};
  Vec3 rx{0.0, 0.0, -0.5};
  int surface_rows = 2;
  int surface_cols = 2;
  double element_spacing = 0.1;
  int group_rows = 1;
  int group_cols = 1;
  double tx_gain = 1.0;
  double rx_gain = 1.0;

  int n_elements() const { return surface_rows * surface_cols; }
  int group_size() const { return group_rows * group_cols; }
  int n_groups() const { return n_elements() / group_size(); }
};

struct ChannelBlock {
  double wavelength = 0.05;
  double transmit_power = 1.0;
  double noise_power = 1e-14;
  double env_noise_power = 0.0;
  int n_states = 2;
  /// Optional reflection table CSV; empty means uniform phases.
  std::string table_path;
};

struct SceneBlock {
  int grids = 4;
  std::string layout = "2d";  // "2d" | "3d"
  double cell = 0.1;
  Vec3 center{1.0, 0.0, 0.0};
  /// One prior per grid, or a single value broadcast to all grids.
  std::vector<double> priors{0.5};
  std::vector<double> reflection_variance{1.0};
  /// Optional occupancy-mask file that replaces the training scene set.
  std::string scene_file;
  SceneSetSpec train_set;
  SceneSetSpec eval_set;
};

struct BoundBlock {
  double cost_cap = kDefaultCostCap;
  BoundMode mode = BoundMode::exact;
  int samples = 256;
  NoiseTerm noise = NoiseTerm::row;
  /// Where the control matrix comes from: "random" | "checkpoint" | "file".
  std::string control = "random";
  std::string control_path;
  /// Monte Carlo draws for the empirical-detector validation columns (0: off).
  std::size_t mc_draws = 0;
};

struct BenchBlock {
  int repeats = 5;
  /// Base sizes that each doubling sweep starts from.
  int frames = 4;
  int elements = 4;
  int states = 2;
  int grids = 4;
  int doublings = 3;
  int train_epochs = 3;
};

struct CompareBlock {
  std::vector<std::string> algorithms{"prpg", "random-control", "no-decoder", "decoder-only", "single-mlp-policy"};
};

struct ExperimentConfig {
  std::string preset = "tiny";
  GeometryBlock geometry;
  ChannelBlock channel;
  SceneBlock scene;
  TrainConfig training;
  BoundBlock bound;
  BenchBlock bench;
  CompareBlock compare;
  std::string out = "out";
  std::uint64_t seed = 1;
  unsigned threads = 1;

  /// Checks ranges, cross-block consistency and that referenced files exist.
  /// Throws ConfigError naming the offending field path.
  void validate() const;
};

/// "tiny": 2x2 surface, 2x2x1 grids, K = 4, exhaustive scenes, 2000 epochs.
/// "paper": 48x48 surface in 16 groups of 12x12, 4x4x4 grids, sampled scenes.
ExperimentConfig preset_config(const std::string& name);

/// Starts from the preset named by the top-level "preset" key (or
/// `default_preset` when absent) and applies every other key on top. Unknown
/// keys are rejected.
ExperimentConfig parse_config(const std::string& json_text, const std::string& default_preset = "tiny");
ExperimentConfig load_config(const std::filesystem::path& path, const std::string& default_preset = "tiny");

/// Full resolved configuration; parsing it reproduces `config` exactly.
std::string dump_config(const ExperimentConfig& config);

/// Surface element positions ordered tile by tile so that consecutive
/// indices form the groups.
std::vector<Vec3> tiled_array(const GeometryBlock& g);

Geometry make_geometry(const ExperimentConfig& config);
ReflectionTable make_table(const ExperimentConfig& config);
SceneDistribution make_scene_distribution(const ExperimentConfig& config);
/// Grouped projection, measurement model and scene prior for training.
TrainEnv make_env(const ExperimentConfig& config);
/// The training block with seed, threads and the scene sets filled in.
TrainConfig make_train_config(const ExperimentConfig& config);

}  // namespace metasense
