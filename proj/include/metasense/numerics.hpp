#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>

namespace metasense {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Moore-Penrose pseudo-inverse through a thin SVD.
///
/// Singular values below sigma_max * max(rows, cols) * 1e-12 are treated as
/// zero, so rank-deficient inputs (repeated beamformer patterns) are handled.
/// Throws InvalidInput on NaN/Inf entries.
CMatrix pinv(const CMatrix& mat);

double erf(double x);

/// Counter-based generator: the output for draw i is a pure function of
/// (key, i). `split` derives child streams whose keys depend only on the
/// parent key and the child index, so work fanned out over threads stays
/// reproducible regardless of scheduling.
///
/// Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }
  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  Rng split(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter, int /*raw*/) : key_(key), counter_(counter) {}
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Circularly-symmetric complex normal with total variance `variance`
/// (each quadrature gets variance/2).
cplx sample_complex_gaussian(double variance, Rng& rng);

/// Central differences, one coordinate at a time.
RVector finite_diff_gradient(const std::function<double(const RVector&)>& f, const RVector& x,
                             double step);

double relative_error(const RVector& a, const RVector& b);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). Work assignment is static, so callers that write to slot i
/// and reduce in index order get bitwise identical results for any thread count.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

/// Process-wide default worker count used by Monte Carlo fan-out.
void set_default_threads(unsigned threads);
unsigned default_threads();

}  // namespace metasense
