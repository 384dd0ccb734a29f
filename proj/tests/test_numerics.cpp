#include "metasense/errors.hpp"
#include "metasense/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

using namespace metasense;

namespace {

// Independent erf: Maclaurin series for |x| <= 2.5, continued fraction of erfc beyond.
double erf_oracle(double x) {
  const double ax = std::fabs(x);
  double r;
  if (ax <= 2.5) {
    long double term = ax, sum = ax;
    for (int n = 1; n < 200; ++n) {
      term *= -static_cast<long double>(ax) * ax / n;
      sum += term / (2 * n + 1);
    }
    r = static_cast<double>(sum * 2.0L / std::sqrt(std::numbers::pi_v<long double>));
  } else {
    // erfc(x) = exp(-x^2)/sqrt(pi) · 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...)))) (Lentz-free backward form).
    long double f = ax;
    for (int k = 200; k >= 1; --k) f = ax + (k / 2.0L) / f;
    const long double erfc = std::exp(-static_cast<long double>(ax) * ax) /
                             std::sqrt(std::numbers::pi_v<long double>) / f;
    r = static_cast<double>(1.0L - erfc);
  }
  return x < 0 ? -r : r;
}

CMatrix random_matrix(int rows, int cols, Rng& rng) {
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = sample_complex_gaussian(2.0, rng);
  return m;
}

double rel(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

void check_moore_penrose(const CMatrix& a) {
  const CMatrix p = pinv(a);
  CHECK(rel(a * p * a, a) < 1e-8);
  CHECK(rel(p * a * p, p) < 1e-8);
  CHECK(rel((a * p).adjoint(), a * p) < 1e-8);
  CHECK(rel((p * a).adjoint(), p * a) < 1e-8);
}

}  // namespace

TEST_SUITE("numerics") {
  TEST_CASE("pinv of identity and zero") {
    CHECK(pinv(CMatrix::Identity(3, 3)).isApprox(CMatrix::Identity(3, 3)));
    const CMatrix z = pinv(CMatrix::Zero(2, 4));
    CHECK(z.rows() == 4);
    CHECK(z.cols() == 2);
    CHECK(z.norm() == 0.0);
  }

  TEST_CASE("pinv satisfies the Moore-Penrose identities across shapes") {
    Rng rng(11);
    for (int t = 0; t < 10; ++t) {
      check_moore_penrose(random_matrix(2, 2, rng));
      check_moore_penrose(random_matrix(3, 5, rng));
      check_moore_penrose(random_matrix(5, 3, rng));
      const CMatrix rank2 = random_matrix(4, 2, rng) * random_matrix(2, 4, rng);
      check_moore_penrose(rank2);
      Eigen::JacobiSVD<CMatrix> svd(pinv(rank2));
      CHECK(svd.singularValues()(2) < 1e-9 * svd.singularValues()(0));
    }
  }

  TEST_CASE("pinv rejects non-finite input") {
    CMatrix m = CMatrix::Identity(2, 2);
    m(0, 1) = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
    CHECK_THROWS_AS(pinv(m), InvalidInput);
  }

  TEST_CASE("erf matches the series oracle") {
    CHECK(metasense::erf(0.0) == 0.0);
    CHECK(std::fabs(metasense::erf(6.0) - 1.0) < 1e-12);
    CHECK(std::fabs(metasense::erf(1.0) - 0.842700792949715) < 1e-12);
    for (double x = -5.0; x <= 5.0; x += 0.037) CHECK(std::fabs(metasense::erf(x) - erf_oracle(x)) < 1e-12);
  }

  TEST_CASE("erf is odd, increasing and bounded") {
    double prev = -1.0;
    for (double x = -4.0; x <= 4.0; x += 0.01) {
      CHECK(metasense::erf(-x) == doctest::Approx(-metasense::erf(x)).epsilon(1e-15));
      CHECK(metasense::erf(x) > -1.0);
      CHECK(metasense::erf(x) < 1.0);
      CHECK(metasense::erf(x) >= prev);
      prev = metasense::erf(x);
    }
  }

  TEST_CASE("complex gaussian moments") {
    Rng rng(3);
    CHECK(sample_complex_gaussian(0.0, rng) == cplx{});
    CHECK_THROWS_AS(sample_complex_gaussian(-1.0, rng), InvalidInput);
    constexpr int n = 1000000;
    double re2 = 0.0, mag2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const cplx z = sample_complex_gaussian(2.0, rng);
      re2 += z.real() * z.real();
      mag2 += std::norm(z);
    }
    CHECK(re2 / n > 0.99);
    CHECK(re2 / n < 1.01);
    CHECK(mag2 / n > 1.98);
    CHECK(mag2 / n < 2.02);
  }

  TEST_CASE("rng streams are reproducible and split deterministically") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    const Rng root(7);
    Rng s1 = root.split(3), s2 = root.split(3), s3 = root.split(4);
    CHECK(s1.next_u64() == s2.next_u64());
    CHECK(s1.next_u64() != s3.next_u64());
    Rng u(1);
    for (int i = 0; i < 1000; ++i) {
      const double x = u.uniform();
      CHECK(x > 0.0);
      CHECK(x < 1.0);
    }
  }

  TEST_CASE("finite differences") {
    RVector x(1);
    x << 3.0;
    const RVector g = finite_diff_gradient([](const RVector& v) { return v(0) * v(0); }, x, 1e-5);
    CHECK(std::fabs(g(0) - 6.0) < 1e-6);
    const RVector z = finite_diff_gradient([](const RVector&) { return 4.0; }, RVector::Ones(3), 1e-3);
    CHECK(z.norm() == 0.0);
  }

  TEST_CASE("parallel_for covers every index once for any thread count") {
    for (unsigned threads : {1u, 2u, 3u, 8u}) {
      std::vector<int> hits(37, 0);
      parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
      for (int h : hits) CHECK(h == 1);
    }
  }
}
