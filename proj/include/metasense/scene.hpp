#pragma once

#include "metasense/channel.hpp"
#include "metasense/numerics.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace metasense {

using Occupancy = std::vector<std::uint8_t>;

/// Per-grid occupancy prior and the variance of the (zero-mean, circular
/// complex Gaussian) reflection coefficient of an occupied grid.
struct SceneDistribution {
  RVector priors;
  RVector reflection_variance;

  static SceneDistribution uniform(std::size_t grids, double prior = 0.5, double variance = 1.0);
  std::size_t n_grids() const { return static_cast<std::size_t>(priors.size()); }
  void validate() const;
};

struct Scene {
  Occupancy occupancy;
  CVector nu;
};

enum class SceneSetMode { exhaustive, sampled };

struct SceneSetSpec {
  SceneSetMode mode = SceneSetMode::exhaustive;
  std::size_t count = 0;  // sampled mode only
};

inline constexpr std::size_t kMaxExhaustiveGrids = 16;

Occupancy occupancy_of(const CVector& nu);

CVector sample_scene(const Occupancy& q, const SceneDistribution& dist, Rng& rng);

/// All 2^M occupancy patterns (pattern index bit m -> grid m), or `count`
/// draws from the priors; each pattern gets one sampled coefficient vector.
std::vector<Scene> enumerate_scene_set(std::size_t grids, const SceneDistribution& dist,
                                       const SceneSetSpec& spec, Rng& rng);

/// Resamples coefficients for a fixed list of occupancy masks.
std::vector<Scene> scenes_from_masks(const std::vector<Occupancy>& masks, const SceneDistribution& dist,
                                     Rng& rng);

/// `scene_id,q_1,...,q_M` rows, with a header line.
std::vector<Occupancy> read_scene_file(const std::filesystem::path& path, std::size_t grids);
void write_scene_file(const std::filesystem::path& path, const std::vector<Occupancy>& masks);

/// Cubic cells of side `cell` stacked nx (depth, along x) by ny by nz around `center`.
/// Grid index runs fastest along y, then z, then x.
std::vector<Vec3> grid_layout(const std::array<int, 3>& counts, double cell, const Vec3& center);

/// Cell counts for M grids packed in a single layer facing the surface (2D)
/// or as close to a cube as possible (3D).
std::array<int, 3> packing_2d(int grids);
std::array<int, 3> packing_3d(int grids);

}  // namespace metasense
