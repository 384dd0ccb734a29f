#pragma once

#include "metasense/numerics.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace metasense {

using Vec3 = Eigen::Vector3d;

/// Positions are in meters; powers in watts. The surface lies in the y-z plane.
struct Geometry {
  Vec3 tx_position{0.87, -0.84, 0.0};
  Vec3 rx_position{0.0, 0.0, -0.5};
  std::vector<Vec3> element_positions;
  std::vector<Vec3> grid_centers;
  double wavelength = 0.05;
  double tx_gain = 1.0;
  double rx_gain = 1.0;
  double transmit_power = 1.0;
  cplx tx_symbol{1.0, 0.0};
  double noise_power = 0.0;
  /// Residual environmental scattering, modeled as extra receiver noise.
  double env_noise_power = 0.0;

  std::size_t n_elements() const { return element_positions.size(); }
  std::size_t n_grids() const { return grid_centers.size(); }

  /// Variance of one calibrated sample: the difference of two noisy receptions.
  double measurement_noise_variance() const { return 2.0 * (noise_power + env_noise_power); }
  cplx amplitude() const { return std::sqrt(transmit_power) * tx_symbol; }

  /// Tx -> element n.
  double tx_distance(std::size_t n) const;
  /// Element n -> grid m -> Rx.
  double reflected_distance(std::size_t n, std::size_t m) const;

  void validate() const;
};

/// Square-ish planar array centered at the origin of the y-z plane.
std::vector<Vec3> planar_array(int rows, int cols, double spacing);

/// Per-state reflection coefficients, either shared by all (element, grid)
/// pairs or given per (n, m, state).
class ReflectionTable {
 public:
  /// States with unit amplitude and phases (2i + 1)·pi/N_S, i = 0..N_S-1.
  static ReflectionTable uniform_phase(int n_states);
  static ReflectionTable direction_independent(std::vector<cplx> coefficients);
  static ReflectionTable full(int n_elements, int n_grids, int n_states, std::vector<cplx> coefficients);

  /// Reads `state,re,im` or `n,m,state,re,im` CSV files (1-based indices).
  static ReflectionTable load(const std::filesystem::path& path);

  int n_states() const { return n_states_; }
  bool is_full() const { return full_; }
  cplx coefficient(std::size_t n, std::size_t m, int state) const;

  void check_compatible(std::size_t n_elements, std::size_t n_grids) const;

 private:
  int n_states_ = 0;
  bool full_ = false;
  int n_elements_ = 0;
  int n_grids_ = 0;
  std::vector<cplx> values_;
};

/// K beamformer patterns, each a row of N one-hot blocks of width N_S. Stored
/// as the selected state per (frame, element); state 0 is the default.
class ControlMatrix {
 public:
  ControlMatrix() = default;
  ControlMatrix(int frames, int elements, int states);

  static ControlMatrix default_pattern(int frames, int elements, int states) {
    return ControlMatrix(frames, elements, states);
  }
  static ControlMatrix random(int frames, int elements, int states, Rng& rng);

  int frames() const { return frames_; }
  int elements() const { return elements_; }
  int states() const { return states_; }

  int state(int k, int n) const;
  void set(int k, int n, int state);

  /// Binary K x (N·N_S) form.
  RMatrix to_binary() const;
  static ControlMatrix from_binary(const RMatrix& binary, int elements, int states);

  bool operator==(const ControlMatrix&) const = default;

 private:
  int frames_ = 0;
  int elements_ = 0;
  int states_ = 0;
  std::vector<int> selected_;
};

cplx los_gain(const Geometry& geom);

/// Gain of the path Tx -> element n (state i) -> grid m -> Rx for a unit
/// reflection coefficient at the grid.
cplx projection_entry(const Geometry& geom, const ReflectionTable& table, std::size_t m,
                      std::size_t n, int i);

/// (N·N_S) x M; row n·N_S + i holds element n in state i.
CMatrix build_projection_matrix(const Geometry& geom, const ReflectionTable& table);

/// Gamma = sqrt(P)·x·(C - C0)·A.
CMatrix measurement_matrix(cplx amplitude, const CMatrix& projection, const ControlMatrix& control);
CMatrix measurement_matrix(const Geometry& geom, const CMatrix& projection, const ControlMatrix& control);

/// Calibrated measurement Gamma·nu plus CN(0, noise_variance) per frame.
CVector simulate_measurement(const CMatrix& gamma, const CVector& nu, double noise_variance, Rng& rng);

/// Elements tied together in groups of `group_size` consecutive indices.
class ElementGrouping {
 public:
  ElementGrouping(int n_elements, int group_size);

  int n_elements() const { return n_elements_; }
  int group_size() const { return group_size_; }
  int n_groups() const { return n_elements_ / group_size_; }
  int group_of(int element) const { return element / group_size_; }

  /// Sums the projection rows of grouped elements state by state.
  CMatrix apply(const CMatrix& projection, int n_states) const;
  /// Per-element control matrix in which every element copies its group's state.
  ControlMatrix expand(const ControlMatrix& grouped) const;

 private:
  int n_elements_;
  int group_size_;
};

ElementGrouping group_elements(int n_elements, int group_size);

/// What the sensing side needs to turn a control matrix into a measurement
/// matrix. A fixed Gamma models front ends that cannot be reconfigured.
struct MeasurementModel {
  CMatrix projection;  // already grouped
  cplx amplitude{1.0, 0.0};
  double noise_variance = 0.0;
  std::optional<CMatrix> fixed_gamma;

  CMatrix gamma(const ControlMatrix& control) const;
  std::size_t n_grids() const;
};

}  // namespace metasense
