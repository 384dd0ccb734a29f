#include "metasense/channel.hpp"

#include "metasense/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

namespace metasense {

namespace {

constexpr double kPi = std::numbers::pi;

cplx phase(double path_length, double wavelength) {
  return std::polar(1.0, -2.0 * kPi * path_length / wavelength);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::string normalized = line;
  for (char& c : normalized) {
    if (c == ',' || c == ';' || c == '\t') c = ' ';
  }
  std::istringstream in(normalized);
  std::vector<std::string> out;
  std::string field;
  while (in >> field) out.push_back(field);
  return out;
}

}  // namespace

double Geometry::tx_distance(std::size_t n) const {
  return (element_positions.at(n) - tx_position).norm();
}

double Geometry::reflected_distance(std::size_t n, std::size_t m) const {
  const Vec3& grid = grid_centers.at(m);
  return (grid - element_positions.at(n)).norm() + (rx_position - grid).norm();
}

void Geometry::validate() const {
  if (!(wavelength > 0.0)) throw InvalidInput("geometry: wavelength must be positive");
  if (!(transmit_power > 0.0)) throw InvalidInput("geometry: transmit power must be positive");
  if (std::abs(std::abs(tx_symbol) - 1.0) > 1e-12) throw InvalidInput("geometry: |x| must be 1");
  if (!(noise_power >= 0.0) || !(env_noise_power >= 0.0))
    throw InvalidInput("geometry: noise powers must be non-negative");
  if (!(tx_gain > 0.0) || !(rx_gain > 0.0)) throw InvalidInput("geometry: antenna gains must be positive");
  if (element_positions.empty()) throw InvalidInput("geometry: no surface elements");
  if (grid_centers.empty()) throw InvalidInput("geometry: no space grids");
  for (std::size_t a = 0; a < element_positions.size(); ++a) {
    if ((element_positions[a] - rx_position).norm() == 0.0)
      throw InvalidInput("geometry: rx co-located with element " + std::to_string(a + 1));
    if ((element_positions[a] - tx_position).norm() == 0.0)
      throw InvalidInput("geometry: tx co-located with element " + std::to_string(a + 1));
    for (std::size_t b = a + 1; b < element_positions.size(); ++b) {
      if ((element_positions[a] - element_positions[b]).norm() == 0.0)
        throw InvalidInput("geometry: element spacing must be positive");
    }
  }
  for (std::size_t a = 0; a < grid_centers.size(); ++a) {
    for (std::size_t b = a + 1; b < grid_centers.size(); ++b) {
      if ((grid_centers[a] - grid_centers[b]).norm() == 0.0)
        throw InvalidInput("geometry: grid centers must be pairwise distinct");
    }
  }
}

std::vector<Vec3> planar_array(int rows, int cols, double spacing) {
  if (rows < 1 || cols < 1 || !(spacing > 0.0)) throw InvalidInput("planar_array: bad dimensions");
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double y = (c - (cols - 1) / 2.0) * spacing;
      const double z = ((rows - 1) / 2.0 - r) * spacing;
      out.emplace_back(0.0, y, z);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ReflectionTable ReflectionTable::uniform_phase(int n_states) {
  if (n_states < 1) throw InvalidInput("reflection table: need at least one state");
  std::vector<cplx> values;
  for (int i = 0; i < n_states; ++i) values.push_back(std::polar(1.0, (2.0 * i + 1.0) * kPi / n_states));
  return direction_independent(std::move(values));
}

ReflectionTable ReflectionTable::direction_independent(std::vector<cplx> coefficients) {
  for (const auto& r : coefficients) {
    if (!(std::abs(r) <= 1.0 + 1e-12)) throw InvalidInput("reflection table: |r| must not exceed 1");
  }
  ReflectionTable t;
  t.n_states_ = static_cast<int>(coefficients.size());
  t.values_ = std::move(coefficients);
  return t;
}

ReflectionTable ReflectionTable::full(int n_elements, int n_grids, int n_states,
                                      std::vector<cplx> coefficients) {
  if (coefficients.size() != static_cast<std::size_t>(n_elements) * n_grids * n_states)
    throw ShapeError("reflection table: expected N*M*N_S coefficients");
  for (const auto& r : coefficients) {
    if (!(std::abs(r) <= 1.0 + 1e-12)) throw InvalidInput("reflection table: |r| must not exceed 1");
  }
  ReflectionTable t;
  t.n_states_ = n_states;
  t.full_ = true;
  t.n_elements_ = n_elements;
  t.n_grids_ = n_grids;
  t.values_ = std::move(coefficients);
  return t;
}

ReflectionTable ReflectionTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open reflection table '" + path.string() + "'");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    header = split_fields(line);
    if (!header.empty()) break;
  }
  const bool full = header == std::vector<std::string>{"n", "m", "state", "re", "im"};
  if (!full && header != std::vector<std::string>{"state", "re", "im"})
    throw ConfigError("reflection table '" + path.string() + "': unexpected header");

  std::map<std::tuple<int, int, int>, cplx> entries;
  int max_n = 0, max_m = 0, max_s = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != header.size())
      throw ConfigError("reflection table line " + std::to_string(line_no) + ": wrong field count");
    try {
      std::size_t f = 0;
      const int n = full ? std::stoi(fields[f++]) : 1;
      const int m = full ? std::stoi(fields[f++]) : 1;
      const int s = std::stoi(fields[f++]);
      const double re = std::stod(fields[f++]);
      const double im = std::stod(fields[f++]);
      if (n < 1 || m < 1 || s < 1) throw ConfigError("indices are 1-based");
      entries[{n, m, s}] = {re, im};
      max_n = std::max(max_n, n);
      max_m = std::max(max_m, m);
      max_s = std::max(max_s, s);
    } catch (const std::logic_error&) {
      throw ConfigError("reflection table line " + std::to_string(line_no) + ": malformed number");
    }
  }
  if (max_s < 2) throw ConfigError("reflection table '" + path.string() + "': need at least two states");
  if (entries.size() != static_cast<std::size_t>(max_n) * max_m * max_s)
    throw ConfigError("reflection table '" + path.string() + "': incomplete table");

  std::vector<cplx> values;
  values.reserve(entries.size());
  for (int n = 1; n <= max_n; ++n)
    for (int m = 1; m <= max_m; ++m)
      for (int s = 1; s <= max_s; ++s) values.push_back(entries.at({n, m, s}));
  try {
    return full ? ReflectionTable::full(max_n, max_m, max_s, std::move(values))
                : ReflectionTable::direction_independent(std::move(values));
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("reflection table '") + path.string() + "': " + e.what());
  }
}

cplx ReflectionTable::coefficient(std::size_t n, std::size_t m, int state) const {
  if (state < 0 || state >= n_states_) throw IndexError("reflection table: state out of range");
  if (!full_) return values_[static_cast<std::size_t>(state)];
  if (n >= static_cast<std::size_t>(n_elements_) || m >= static_cast<std::size_t>(n_grids_))
    throw IndexError("reflection table: element or grid out of range");
  return values_[(n * n_grids_ + m) * n_states_ + static_cast<std::size_t>(state)];
}

void ReflectionTable::check_compatible(std::size_t n_elements, std::size_t n_grids) const {
  if (full_ && (n_elements != static_cast<std::size_t>(n_elements_) ||
                n_grids != static_cast<std::size_t>(n_grids_)))
    throw ShapeError("reflection table dimensions do not match the geometry");
}

// ---------------------------------------------------------------------------

ControlMatrix::ControlMatrix(int frames, int elements, int states)
    : frames_(frames), elements_(elements), states_(states),
      selected_(static_cast<std::size_t>(std::max(frames, 0) * std::max(elements, 0)), 0) {
  if (frames < 0 || elements < 1 || states < 1) throw InvalidInput("control matrix: bad dimensions");
}

ControlMatrix ControlMatrix::random(int frames, int elements, int states, Rng& rng) {
  ControlMatrix c(frames, elements, states);
  for (auto& s : c.selected_) s = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(states)));
  return c;
}

int ControlMatrix::state(int k, int n) const {
  if (k < 0 || k >= frames_ || n < 0 || n >= elements_) throw IndexError("control matrix: index out of range");
  return selected_[static_cast<std::size_t>(k * elements_ + n)];
}

void ControlMatrix::set(int k, int n, int state) {
  if (k < 0 || k >= frames_ || n < 0 || n >= elements_) throw IndexError("control matrix: index out of range");
  if (state < 0 || state >= states_) throw IndexError("control matrix: state out of range");
  selected_[static_cast<std::size_t>(k * elements_ + n)] = state;
}

RMatrix ControlMatrix::to_binary() const {
  RMatrix out = RMatrix::Zero(frames_, elements_ * states_);
  for (int k = 0; k < frames_; ++k)
    for (int n = 0; n < elements_; ++n) out(k, n * states_ + state(k, n)) = 1.0;
  return out;
}

ControlMatrix ControlMatrix::from_binary(const RMatrix& binary, int elements, int states) {
  if (binary.cols() != elements * states) throw ShapeError("control matrix: column count mismatch");
  ControlMatrix c(static_cast<int>(binary.rows()), elements, states);
  for (int k = 0; k < c.frames_; ++k) {
    for (int n = 0; n < elements; ++n) {
      int chosen = -1;
      for (int i = 0; i < states; ++i) {
        const double v = binary(k, n * states + i);
        if (v == 1.0) {
          if (chosen >= 0) throw InvalidInput("control matrix: block is not one-hot");
          chosen = i;
        } else if (v != 0.0) {
          throw InvalidInput("control matrix: entries must be binary");
        }
      }
      if (chosen < 0) throw InvalidInput("control matrix: block is not one-hot");
      c.set(k, n, chosen);
    }
  }
  return c;
}

// ---------------------------------------------------------------------------

cplx los_gain(const Geometry& geom) {
  const double d = (geom.rx_position - geom.tx_position).norm();
  if (!(d > 0.0)) throw InvalidInput("los_gain: Tx and Rx are co-located");
  return geom.wavelength / (4.0 * kPi) * std::sqrt(geom.tx_gain * geom.rx_gain) *
         phase(d, geom.wavelength) / d;
}

cplx projection_entry(const Geometry& geom, const ReflectionTable& table, std::size_t m,
                      std::size_t n, int i) {
  if (m >= geom.n_grids() || n >= geom.n_elements()) throw IndexError("projection_entry: index out of range");
  const double d_n = geom.tx_distance(n);
  const double d_nm = geom.reflected_distance(n, m);
  if (!(d_n > 0.0) || !(d_nm > 0.0)) throw InvalidInput("projection_entry: degenerate path length");
  const double lambda = geom.wavelength;
  const double scale = lambda * lambda * std::sqrt(geom.tx_gain * geom.rx_gain) /
                       (16.0 * kPi * kPi * d_n * d_nm);
  return table.coefficient(n, m, i) * scale * phase(d_n + d_nm, lambda);
}

CMatrix build_projection_matrix(const Geometry& geom, const ReflectionTable& table) {
  table.check_compatible(geom.n_elements(), geom.n_grids());
  const int ns = table.n_states();
  CMatrix a(static_cast<Eigen::Index>(geom.n_elements()) * ns, static_cast<Eigen::Index>(geom.n_grids()));
  for (std::size_t n = 0; n < geom.n_elements(); ++n)
    for (int i = 0; i < ns; ++i)
      for (std::size_t m = 0; m < geom.n_grids(); ++m)
        a(static_cast<Eigen::Index>(n) * ns + i, static_cast<Eigen::Index>(m)) = projection_entry(geom, table, m, n, i);
  return a;
}

CMatrix measurement_matrix(cplx amplitude, const CMatrix& projection, const ControlMatrix& control) {
  const int ns = control.states();
  if (projection.rows() != static_cast<Eigen::Index>(control.elements()) * ns)
    throw ShapeError("measurement_matrix: projection rows do not match N*N_S");
  CMatrix gamma = CMatrix::Zero(control.frames(), projection.cols());
  for (int k = 0; k < control.frames(); ++k) {
    for (int n = 0; n < control.elements(); ++n) {
      const int s = control.state(k, n);
      if (s == 0) continue;
      gamma.row(k) += projection.row(n * ns + s) - projection.row(n * ns);
    }
  }
  gamma *= amplitude;
  return gamma;
}

CMatrix measurement_matrix(const Geometry& geom, const CMatrix& projection, const ControlMatrix& control) {
  return measurement_matrix(geom.amplitude(), projection, control);
}

CVector simulate_measurement(const CMatrix& gamma, const CVector& nu, double noise_variance, Rng& rng) {
  if (gamma.cols() != nu.size()) throw ShapeError("simulate_measurement: nu length mismatch");
  CVector y = gamma * nu;
  if (noise_variance > 0.0) {
    for (Eigen::Index k = 0; k < y.size(); ++k) y(k) += sample_complex_gaussian(noise_variance, rng);
  } else if (noise_variance < 0.0) {
    throw InvalidInput("simulate_measurement: negative noise variance");
  }
  return y;
}

// ---------------------------------------------------------------------------

ElementGrouping::ElementGrouping(int n_elements, int group_size)
    : n_elements_(n_elements), group_size_(group_size) {
  if (n_elements < 1 || group_size < 1 || n_elements % group_size != 0)
    throw ConfigError("group size " + std::to_string(group_size) + " does not divide " +
                      std::to_string(n_elements) + " elements");
}

CMatrix ElementGrouping::apply(const CMatrix& projection, int n_states) const {
  if (projection.rows() != static_cast<Eigen::Index>(n_elements_) * n_states)
    throw ShapeError("grouping: projection rows do not match N*N_S");
  CMatrix out = CMatrix::Zero(static_cast<Eigen::Index>(n_groups()) * n_states, projection.cols());
  for (int n = 0; n < n_elements_; ++n)
    for (int i = 0; i < n_states; ++i) out.row(group_of(n) * n_states + i) += projection.row(n * n_states + i);
  return out;
}

ControlMatrix ElementGrouping::expand(const ControlMatrix& grouped) const {
  if (grouped.elements() != n_groups()) throw ShapeError("grouping: control matrix has wrong group count");
  ControlMatrix out(grouped.frames(), n_elements_, grouped.states());
  for (int k = 0; k < grouped.frames(); ++k)
    for (int n = 0; n < n_elements_; ++n) out.set(k, n, grouped.state(k, group_of(n)));
  return out;
}

ElementGrouping group_elements(int n_elements, int group_size) { return {n_elements, group_size}; }

CMatrix MeasurementModel::gamma(const ControlMatrix& control) const {
  if (fixed_gamma) return *fixed_gamma;
  return measurement_matrix(amplitude, projection, control);
}

std::size_t MeasurementModel::n_grids() const {
  return static_cast<std::size_t>(fixed_gamma ? fixed_gamma->cols() : projection.cols());
}

}  // namespace metasense
