#include "metasense/scene.hpp"

#include "metasense/errors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>

namespace metasense {

SceneDistribution SceneDistribution::uniform(std::size_t grids, double prior, double variance) {
  SceneDistribution d;
  d.priors = RVector::Constant(static_cast<Eigen::Index>(grids), prior);
  d.reflection_variance = RVector::Constant(static_cast<Eigen::Index>(grids), variance);
  d.validate();
  return d;
}

void SceneDistribution::validate() const {
  if (priors.size() != reflection_variance.size()) throw ShapeError("scene distribution: length mismatch");
  for (Eigen::Index m = 0; m < priors.size(); ++m) {
    if (!(priors(m) >= 0.0 && priors(m) <= 1.0)) throw InvalidInput("scene distribution: prior outside [0,1]");
    if (!(reflection_variance(m) > 0.0)) throw InvalidInput("scene distribution: variance must be positive");
  }
}

Occupancy occupancy_of(const CVector& nu) {
  Occupancy q(static_cast<std::size_t>(nu.size()));
  for (Eigen::Index m = 0; m < nu.size(); ++m) q[static_cast<std::size_t>(m)] = std::abs(nu(m)) != 0.0 ? 1 : 0;
  return q;
}

CVector sample_scene(const Occupancy& q, const SceneDistribution& dist, Rng& rng) {
  if (q.size() != dist.n_grids()) throw ShapeError("sample_scene: occupancy length mismatch");
  CVector nu = CVector::Zero(static_cast<Eigen::Index>(q.size()));
  for (std::size_t m = 0; m < q.size(); ++m) {
    if (!q[m]) continue;
    cplx v;
    // A continuous draw is nonzero almost surely; the loop makes it certain.
    do {
      v = sample_complex_gaussian(dist.reflection_variance(static_cast<Eigen::Index>(m)), rng);
    } while (v == cplx{0.0, 0.0});
    nu(static_cast<Eigen::Index>(m)) = v;
  }
  return nu;
}

std::vector<Scene> enumerate_scene_set(std::size_t grids, const SceneDistribution& dist,
                                       const SceneSetSpec& spec, Rng& rng) {
  if (dist.n_grids() != grids) throw ShapeError("enumerate_scene_set: distribution length mismatch");
  std::vector<Occupancy> masks;
  if (spec.mode == SceneSetMode::exhaustive) {
    if (grids > kMaxExhaustiveGrids)
      throw InvalidInput("enumerate_scene_set: exhaustive mode needs M <= " + std::to_string(kMaxExhaustiveGrids));
    const std::size_t total = std::size_t{1} << grids;
    masks.reserve(total);
    for (std::size_t pattern = 0; pattern < total; ++pattern) {
      Occupancy q(grids);
      for (std::size_t m = 0; m < grids; ++m) q[m] = (pattern >> m) & 1U;
      masks.push_back(std::move(q));
    }
  } else {
    if (spec.count == 0) throw InvalidInput("enumerate_scene_set: sampled mode needs a positive count");
    masks.reserve(spec.count);
    for (std::size_t s = 0; s < spec.count; ++s) {
      Occupancy q(grids);
      for (std::size_t m = 0; m < grids; ++m) q[m] = rng.bernoulli(dist.priors(static_cast<Eigen::Index>(m))) ? 1 : 0;
      masks.push_back(std::move(q));
    }
  }
  return scenes_from_masks(masks, dist, rng);
}

std::vector<Scene> scenes_from_masks(const std::vector<Occupancy>& masks, const SceneDistribution& dist,
                                     Rng& rng) {
  std::vector<Scene> out;
  out.reserve(masks.size());
  for (const auto& q : masks) out.push_back({q, sample_scene(q, dist, rng)});
  return out;
}

std::vector<Occupancy> read_scene_file(const std::filesystem::path& path, std::size_t grids) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file '" + path.string() + "'");
  std::vector<Occupancy> masks;
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    }
    std::istringstream fields(line);
    std::string id;
    if (!(fields >> id)) continue;
    if (!header_seen) {
      header_seen = true;
      if (id == "scene_id") continue;
    }
    Occupancy q;
    std::string token;
    while (fields >> token) {
      if (token != "0" && token != "1")
        throw ConfigError("scene file line " + std::to_string(line_no) + ": occupancy must be 0 or 1");
      q.push_back(token == "1" ? 1 : 0);
    }
    if (q.size() != grids)
      throw ConfigError("scene file line " + std::to_string(line_no) + ": expected " + std::to_string(grids) +
                        " occupancy flags");
    masks.push_back(std::move(q));
  }
  if (masks.empty()) throw ConfigError("scene file '" + path.string() + "' has no scenes");
  return masks;
}

void write_scene_file(const std::filesystem::path& path, const std::vector<Occupancy>& masks) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scene file '" + path.string() + "'");
  const std::size_t grids = masks.empty() ? 0 : masks.front().size();
  out << "scene_id";
  for (std::size_t m = 1; m <= grids; ++m) out << ",q_" << m;
  out << '\n';
  for (std::size_t s = 0; s < masks.size(); ++s) {
    out << s;
    for (auto v : masks[s]) out << ',' << static_cast<int>(v);
    out << '\n';
  }
}

std::vector<Vec3> grid_layout(const std::array<int, 3>& counts, double cell, const Vec3& center) {
  const auto [nx, ny, nz] = counts;
  if (nx < 1 || ny < 1 || nz < 1 || !(cell > 0.0)) throw InvalidInput("grid_layout: bad dimensions");
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(nx * ny * nz));
  for (int ix = 0; ix < nx; ++ix)
    for (int iz = 0; iz < nz; ++iz)
      for (int iy = 0; iy < ny; ++iy)
        out.push_back(center + cell * Vec3(ix - (nx - 1) / 2.0, iy - (ny - 1) / 2.0, (nz - 1) / 2.0 - iz));
  return out;
}

std::array<int, 3> packing_2d(int grids) {
  if (grids < 1) throw InvalidInput("packing_2d: need at least one grid");
  int nz = 1;
  for (int d = 1; d * d <= grids; ++d) {
    if (grids % d == 0) nz = d;
  }
  return {1, grids / nz, nz};
}

std::array<int, 3> packing_3d(int grids) {
  if (grids < 1) throw InvalidInput("packing_3d: need at least one grid");
  std::array<int, 3> best{grids, 1, 1};
  auto key = [](const std::array<int, 3>& c) {
    const int hi = std::max({c[0], c[1], c[2]});
    const int lo = std::min({c[0], c[1], c[2]});
    // Smallest spread first, then deeper stacks, then wider rows.
    return std::tuple(hi - lo, -c[0], -c[1]);
  };
  for (int nx = 1; nx <= grids; ++nx) {
    if (grids % nx) continue;
    for (int ny = 1; ny <= grids / nx; ++ny) {
      if ((grids / nx) % ny) continue;
      const std::array<int, 3> c{nx, ny, grids / nx / ny};
      if (key(c) < key(best)) best = c;
    }
  }
  return best;
}

}  // namespace metasense
