#include "metasense/channel.hpp"
#include "metasense/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace metasense;

namespace {

constexpr double kPi = std::numbers::pi;

Geometry seeded_geometry(int n_elements, int n_grids, double wavelength, Rng& rng) {
  Geometry g;
  g.wavelength = wavelength;
  for (int n = 0; n < n_elements; ++n) g.element_positions.emplace_back(0.0, 0.3 * rng.uniform() - 0.15, 0.3 * rng.uniform() - 0.15);
  for (int m = 0; m < n_grids; ++m) g.grid_centers.emplace_back(0.9 + 0.2 * rng.uniform(), 0.4 * rng.uniform() - 0.2, 0.4 * rng.uniform() - 0.2);
  return g;
}

// Path gain recomputed from scratch: Tx -> element -> grid -> Rx with the
// grid's reflection coefficient nu and the element state's coefficient r.
cplx path_gain(const Geometry& g, std::size_t n, std::size_t m, cplx r, cplx nu) {
  const Vec3 e = g.element_positions[n];
  const Vec3 q = g.grid_centers[m];
  const double dx = std::sqrt((e - g.tx_position).squaredNorm());
  const double dy = std::sqrt((q - e).squaredNorm()) + std::sqrt((g.rx_position - q).squaredNorm());
  const double amp = g.wavelength * g.wavelength * std::sqrt(g.tx_gain * g.rx_gain) / (std::pow(4.0 * kPi, 2) * dx * dy);
  return nu * r * amp * std::exp(cplx(0.0, -2.0 * kPi * (dx + dy) / g.wavelength));
}

}  // namespace

TEST_SUITE("channel") {
  TEST_CASE("line-of-sight gain") {
    Geometry g;
    g.wavelength = 0.1;
    g.tx_position = Vec3(0, 0, 0);
    g.rx_position = Vec3(0.1, 0, 0);
    const cplx h = los_gain(g);
    CHECK(std::abs(h) == doctest::Approx(1.0 / (4.0 * kPi)).epsilon(1e-12));
    CHECK(std::arg(h) == doctest::Approx(0.0).epsilon(1e-9));
    g.rx_position = Vec3(0.2, 0, 0);
    CHECK(std::abs(los_gain(g)) == doctest::Approx(0.5 / (4.0 * kPi)).epsilon(1e-12));
    g.tx_gain = 4.0;
    CHECK(std::abs(los_gain(g)) == doctest::Approx(1.0 / (4.0 * kPi)).epsilon(1e-12));
    g.rx_position = g.tx_position;
    CHECK_THROWS_AS(los_gain(g), InvalidInput);
  }

  TEST_CASE("projection entry direct substitution") {
    Geometry g;
    g.wavelength = 0.1;
    g.tx_position = Vec3(0.1, 0, 0);
    g.element_positions = {Vec3(0, 0, 0)};
    // Element -> grid -> Rx totals one wavelength.
    g.grid_centers = {Vec3(0.05, 0, 0)};
    g.rx_position = Vec3(0.1, 0, 0);
    const auto table = ReflectionTable::direction_independent({cplx(1.0, 0.0), cplx(0.0, 0.0)});
    const cplx a = projection_entry(g, table, 0, 0, 0);
    CHECK(std::abs(a) == doctest::Approx(1.0 / std::pow(4.0 * kPi, 2)).epsilon(1e-12));
    CHECK(std::abs(std::arg(a)) < 1e-9);
    CHECK(projection_entry(g, table, 0, 0, 1) == cplx{});
    CHECK_THROWS_AS(projection_entry(g, table, 1, 0, 0), IndexError);
  }

  TEST_CASE("projection entries match an independent recomputation") {
    Rng rng(5);
    const Geometry g = seeded_geometry(2, 2, 0.1, rng);
    const auto table = ReflectionTable::uniform_phase(2);
    const CMatrix a = build_projection_matrix(g, table);
    REQUIRE(a.rows() == 4);
    REQUIRE(a.cols() == 2);
    for (int n = 0; n < 2; ++n)
      for (int i = 0; i < 2; ++i)
        for (int m = 0; m < 2; ++m) {
          const cplx expect = path_gain(g, n, m, std::polar(1.0, (2 * i + 1) * kPi / 2), 1.0);
          CHECK(std::abs(a(n * 2 + i, m) - expect) < 1e-12 * std::abs(expect));
        }
  }

  TEST_CASE("c·A·nu equals the per-path double sum") {
    Rng rng(9);
    for (int t = 0; t < 5; ++t) {
      const Geometry g = seeded_geometry(2, 3, 0.05, rng);
      const auto table = ReflectionTable::uniform_phase(2);
      const CMatrix a = build_projection_matrix(g, table);
      CVector nu(3);
      for (int m = 0; m < 3; ++m) nu(m) = sample_complex_gaussian(1.0, rng);
      const ControlMatrix c = ControlMatrix::random(1, 2, 2, rng);
      const cplx lhs = (c.to_binary().row(0).cast<cplx>() * a * nu)(0);
      cplx rhs = 0.0;
      for (int m = 0; m < 3; ++m)
        for (int n = 0; n < 2; ++n) rhs += path_gain(g, n, m, std::polar(1.0, (2 * c.state(0, n) + 1) * kPi / 2), nu(m));
      CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1e-30, std::abs(rhs)) + 1e-22);
    }
  }

  TEST_CASE("measurement matrix calibration and scaling") {
    Rng rng(2);
    Geometry g = seeded_geometry(3, 4, 0.05, rng);
    const auto table = ReflectionTable::uniform_phase(2);
    const CMatrix a = build_projection_matrix(g, table);
    const ControlMatrix c0 = ControlMatrix::default_pattern(4, 3, 2);
    CHECK(measurement_matrix(g, a, c0).cwiseAbs().maxCoeff() == 0.0);

    ControlMatrix c1(1, 3, 2);
    c1.set(0, 0, 1);
    const CMatrix row = measurement_matrix(g, a, c1);
    const CMatrix expect = g.amplitude() * (a.row(1) - a.row(0));
    CHECK((row - expect).norm() < 1e-14 * expect.norm());

    const ControlMatrix c = ControlMatrix::random(4, 3, 2, rng);
    const double base = measurement_matrix(g, a, c).norm();
    g.transmit_power *= 4.0;
    CHECK(measurement_matrix(g, a, c).norm() == doctest::Approx(2.0 * base).epsilon(1e-12));
  }

  TEST_CASE("frame permutation permutes rows of Gamma") {
    Rng rng(4);
    const Geometry g = seeded_geometry(3, 2, 0.05, rng);
    const CMatrix a = build_projection_matrix(g, ReflectionTable::uniform_phase(2));
    const ControlMatrix c = ControlMatrix::random(3, 3, 2, rng);
    ControlMatrix p(3, 3, 2);
    const int perm[3] = {2, 0, 1};
    for (int k = 0; k < 3; ++k)
      for (int n = 0; n < 3; ++n) p.set(k, n, c.state(perm[k], n));
    const CMatrix gc = measurement_matrix(g, a, c), gp = measurement_matrix(g, a, p);
    for (int k = 0; k < 3; ++k) CHECK((gp.row(k) - gc.row(perm[k])).norm() == 0.0);
  }

  TEST_CASE("measurement linearity and noise") {
    Rng rng(6);
    const Geometry g = seeded_geometry(2, 3, 0.05, rng);
    const CMatrix a = build_projection_matrix(g, ReflectionTable::uniform_phase(2));
    const CMatrix gamma = measurement_matrix(g, a, ControlMatrix::random(4, 2, 2, rng));
    CVector n1(3), n2(3);
    for (int m = 0; m < 3; ++m) {
      n1(m) = sample_complex_gaussian(1.0, rng);
      n2(m) = sample_complex_gaussian(1.0, rng);
    }
    const CVector y = simulate_measurement(gamma, n1 + n2, 0.0, rng);
    CHECK((y - simulate_measurement(gamma, n1, 0.0, rng) - simulate_measurement(gamma, n2, 0.0, rng)).norm() <
          1e-12 * y.norm());

    const CMatrix g1 = CMatrix::Identity(2, 2);
    const double eps = 0.3;
    double var = 0.0;
    constexpr int draws = 200000;
    for (int i = 0; i < draws; ++i) var += simulate_measurement(g1, CVector::Zero(2), 2.0 * eps, rng).squaredNorm();
    CHECK(var / (2.0 * draws) == doctest::Approx(2.0 * eps).epsilon(0.01));
  }

  TEST_CASE("projection magnitude decreases with distance") {
    Geometry g;
    g.element_positions = {Vec3(0, 0, 0)};
    g.grid_centers = {Vec3(1, 0, 0)};
    const auto table = ReflectionTable::uniform_phase(2);
    double prev = std::abs(projection_entry(g, table, 0, 0, 0));
    for (int i = 1; i < 10; ++i) {
      g.grid_centers[0] = Vec3(1.0 + 0.1 * i, 0, 0);
      const double v = std::abs(projection_entry(g, table, 0, 0, 0));
      CHECK(v <= prev);
      prev = v;
    }
  }

  TEST_CASE("element grouping") {
    Rng rng(8);
    const Geometry g = seeded_geometry(4, 3, 0.05, rng);
    const CMatrix a = build_projection_matrix(g, ReflectionTable::uniform_phase(2));
    CHECK(ElementGrouping(4, 1).apply(a, 2).isApprox(a));
    const CMatrix all = ElementGrouping(4, 4).apply(a, 2);
    CHECK((all.row(1) - (a.row(1) + a.row(3) + a.row(5) + a.row(7))).norm() < 1e-15);

    const ElementGrouping pairs(4, 2);
    const CMatrix grouped = pairs.apply(a, 2);
    const ControlMatrix c = ControlMatrix::random(3, 2, 2, rng);
    const CMatrix lhs = measurement_matrix(cplx(1.0), grouped, c);
    const CMatrix rhs = measurement_matrix(cplx(1.0), a, pairs.expand(c));
    CHECK((lhs - rhs).norm() < 1e-12 * rhs.norm());
    CHECK_THROWS_AS(ElementGrouping(4, 3), ConfigError);
  }

  TEST_CASE("reflection table files") {
    const auto dir = std::filesystem::temp_directory_path() / "metasense_table_test";
    std::filesystem::create_directories(dir);
    {
      std::ofstream f(dir / "di.csv");
      f << "state,re,im\n1,1,0\n2,-1,0\n";
    }
    const auto t = ReflectionTable::load(dir / "di.csv");
    CHECK(t.n_states() == 2);
    CHECK(t.coefficient(3, 5, 1) == cplx(-1.0, 0.0));
    {
      std::ofstream f(dir / "bad.csv");
      f << "state,re\n1,1\n";
    }
    CHECK_THROWS_AS(ReflectionTable::load(dir / "bad.csv"), ConfigError);
    CHECK_THROWS_AS(ReflectionTable::load(dir / "missing.csv"), ConfigError);
  }

  TEST_CASE("control matrix binary form round-trips") {
    Rng rng(1);
    const ControlMatrix c = ControlMatrix::random(4, 3, 3, rng);
    const RMatrix b = c.to_binary();
    CHECK(b.rows() == 4);
    CHECK(b.cols() == 9);
    for (int k = 0; k < 4; ++k) CHECK(b.row(k).sum() == 3.0);
    CHECK(ControlMatrix::from_binary(b, 3, 3) == c);
  }
}
