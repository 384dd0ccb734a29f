#pragma once

// Shared fixtures and finite-difference checks for the unit and acceptance suites.

#include "metasense/bound.hpp"
#include "metasense/config.hpp"
#include "metasense/harness.hpp"
#include "metasense/mdp.hpp"
#include "metasense/nets.hpp"
#include "metasense/scene.hpp"

#include <cmath>
#include <functional>
#include <string>

namespace metasense::testing {

inline CMatrix random_projection(int elements, int states, int grids, Rng& rng) {
  CMatrix a(elements * states, grids);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = sample_complex_gaussian(1.0, rng);
  return a;
}

/// A state reached by a random number of random decisions from the start.
inline MdpState random_state(int frames, int elements, int states, Rng& rng) {
  MdpState s = initial_state(frames, elements, states);
  const auto steps = rng.uniform_index(static_cast<std::size_t>(frames * elements));
  for (std::size_t i = 0; i < steps; ++i) s = transition(s, static_cast<int>(rng.uniform_index(states)));
  return s;
}

/// Relative error between grad ln pi_a(s) and central differences.
inline double policy_gradient_error(std::uint64_t seed) {
  Rng rng(seed);
  PolicyShape shape;
  shape.frames = 3;
  shape.elements = 2;
  shape.states = 2 + static_cast<int>(seed % 2);
  shape.grids = 3;
  shape.group_hidden = {6};
  shape.group_out = 4;
  shape.head_hidden = {7};
  shape.arch = seed % 3 == 0 ? PolicyArch::single_mlp : PolicyArch::symmetric_groups;
  PolicyNet policy(shape, rng);
  // Zero biases put ReLUs fed by unconfigured (all-zero) frames exactly on the
  // kink, where central differences see half the slope. Jitter moves them off.
  RVector theta = policy.parameters();
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += 0.2 * (rng.uniform() - 0.5);
  policy.set_parameters(theta);
  const CMatrix a = random_projection(shape.elements, shape.states, shape.grids, rng);
  const MdpState s = random_state(shape.frames, shape.elements, shape.states, rng);
  const int action = static_cast<int>(rng.uniform_index(shape.states));
  const RVector analytic = policy.grad_log_prob(s, action, a);
  PolicyNet probe = policy;
  const RVector numeric = finite_diff_gradient(
      [&](const RVector& p) {
        probe.set_parameters(p);
        return std::log(probe.probabilities(s, a)(action));
      },
      policy.parameters(), 1e-6);
  return relative_error(analytic, numeric);
}

/// Relative error between the sensing loss gradient and central differences.
inline double sensing_gradient_error(std::uint64_t seed) {
  Rng rng(seed);
  const int frames = 3, elements = 2, grids = 3;
  MeasurementModel model;
  model.projection = random_projection(elements, 2, grids, rng);
  model.noise_variance = 0.05;
  const SensingArch arch = seed % 4 == 0 ? SensingArch::raw_mlp
                           : seed % 4 == 1 ? SensingArch::decoder_threshold
                                           : SensingArch::decoder_mlp;
  SensingNet net({grids, frames, {6, 5}, arch, 0.5}, rng);
  // A layer whose inputs are all inactive ReLUs sees only its zero bias; jitter
  // keeps every unit off the kink.
  RVector w = net.parameters();
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) += 0.2 * (rng.uniform() - 0.5);
  net.set_parameters(w);
  const auto scenes = enumerate_scene_set(grids, SceneDistribution::uniform(grids), {}, rng);
  const SensingBatch batch =
      make_sensing_batch(model, ControlMatrix::random(frames, elements, 2, rng), scenes, 2, rng.split(1));
  const RVector analytic = net.loss_grad(batch).second;
  SensingNet probe = net;
  const RVector numeric = finite_diff_gradient(
      [&](const RVector& p) {
        probe.set_parameters(p);
        return probe.loss(batch);
      },
      net.parameters(), 1e-6);
  return relative_error(analytic, numeric);
}

/// K x M measurement matrix with unit-variance entries; K < M leaves interference.
inline BoundInstance random_bound_instance(std::uint64_t seed, int frames, int grids, double noise_power) {
  Rng rng(seed);
  CMatrix gamma(frames, grids);
  for (Eigen::Index i = 0; i < gamma.size(); ++i) gamma(i) = sample_complex_gaussian(1.0, rng);
  SceneDistribution dist = SceneDistribution::uniform(static_cast<std::size_t>(grids));
  for (int m = 0; m < grids; ++m) {
    dist.priors(m) = 0.2 + 0.6 * rng.uniform();
    dist.reflection_variance(m) = 0.5 + rng.uniform();
  }
  return BoundInstance::make(gamma, dist, noise_power);
}

/// Draws the decoded statistic of grid m with its own occupancy forced to
/// `occupied` and the others set by `q_minus_m`.
inline std::vector<double> sample_statistic(const BoundInstance& inst, int m, bool occupied,
                                            const Occupancy& q_minus_m, std::size_t draws, Rng& rng) {
  const int grids = inst.n_grids();
  std::vector<double> out(draws);
  CVector nu(grids), y(inst.gamma.rows());
  for (std::size_t i = 0; i < draws; ++i) {
    std::size_t j = 0;
    for (int g = 0; g < grids; ++g) {
      const bool on = g == m ? occupied : q_minus_m[j++] != 0;
      nu(g) = on ? sample_complex_gaussian(inst.reflection_variance(g), rng) : cplx{};
    }
    y = inst.gamma * nu;
    for (Eigen::Index k = 0; k < y.size(); ++k) y(k) += sample_complex_gaussian(2.0 * inst.noise_power, rng);
    out[i] = decode_statistic(inst, y, m);
  }
  return out;
}

inline double sample_variance(const std::vector<double>& x) {
  double s = 0.0, s2 = 0.0;
  for (double v : x) s += v, s2 += v * v;
  const double n = static_cast<double>(x.size());
  return (s2 - s * s / n) / (n - 1.0);
}

/// Monte Carlo false-alarm and miss frequencies of the energy detector on grid
/// m, interferers drawn from the priors.
inline ErrorProbs empirical_error_probs(const BoundInstance& inst, int m, double rho_hat, std::size_t draws,
                                        Rng& rng) {
  ErrorProbs e;
  Occupancy q(static_cast<std::size_t>(inst.n_grids() - 1));
  for (bool occupied : {false, true}) {
    std::size_t errors = 0;
    for (std::size_t i = 0; i < draws; ++i) {
      std::size_t j = 0;
      for (int g = 0; g < inst.n_grids(); ++g)
        if (g != m) q[j++] = rng.bernoulli(inst.priors(g)) ? 1 : 0;
      const double mu = sample_statistic(inst, m, occupied, q, 1, rng)[0];
      errors += (mu * mu > rho_hat) != occupied;
    }
    (occupied ? e.miss : e.false_alarm) = static_cast<double>(errors) / static_cast<double>(draws);
  }
  return e;
}

/// Minimum of f on [lo, hi]: a uniform scan to bracket the best point, then
/// golden-section refinement inside the bracket.
inline double golden_section_min(const std::function<double(double)>& f, double lo, double hi, int scan = 2000) {
  double best_x = lo, best = f(lo);
  const double h = (hi - lo) / scan;
  for (int i = 1; i <= scan; ++i) {
    const double x = lo + i * h, v = f(x);
    if (v < best) best = v, best_x = x;
  }
  double a = std::max(lo, best_x - h), b = std::min(hi, best_x + h);
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200; ++it) {
    if (fc < fd) {
      b = d, d = c, fd = fc;
      c = b - r * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + r * (b - a), fd = f(d);
    }
  }
  return std::min({best, fc, fd});
}

/// Default-preset scenario with M grids in the given packing, seeded random control.
inline ExperimentConfig grid_scenario(const std::string& layout, int grids, std::uint64_t seed) {
  ExperimentConfig c = preset_config("tiny");
  c.scene.layout = layout;
  c.scene.grids = grids;
  c.seed = seed;
  c.validate();
  return c;
}

}  // namespace metasense::testing
