#include "metasense/bound.hpp"

#include "metasense/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

namespace metasense {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// P(mu^2 <= rho_hat) for mu ~ N(0, v).
double below(double rho_hat, double v) {
  if (rho_hat == kInf) return 1.0;
  if (v <= 0.0) return rho_hat > 0.0 ? 1.0 : 0.0;
  return erf(std::sqrt(rho_hat / (2.0 * v)));
}

// d/d rho_hat of below(rho_hat, v).
double below_density(double rho_hat, double v) {
  if (v <= 0.0) return 0.0;
  return std::exp(-rho_hat / (2.0 * v)) / std::sqrt(2.0 * std::numbers::pi * v * rho_hat);
}

void check_grid(const BoundInstance& inst, int m) {
  if (m < 0 || m >= inst.n_grids()) throw IndexError("bound: grid index out of range");
}

// Sum over other grids of q·eps_ref·|Xi(m, m')|^2.
double interference(const BoundInstance& inst, int m, const Occupancy& q_minus_m) {
  const int grids = inst.n_grids();
  if (q_minus_m.size() != static_cast<std::size_t>(grids - 1))
    throw ShapeError("bound: q_minus_m must have M-1 entries");
  double v = 0.0;
  std::size_t j = 0;
  for (int mp = 0; mp < grids; ++mp) {
    if (mp == m) continue;
    if (q_minus_m[j++]) v += inst.reflection_variance(mp) * std::norm(inst.xi(m, mp));
  }
  return v;
}

double noise_variance(const BoundInstance& inst, int m, NoiseTerm noise) {
  if (noise == NoiseTerm::literal) return inst.noise_power * inst.gamma_pinv.squaredNorm();
  return 2.0 * inst.noise_power * inst.gamma_pinv.row(m).squaredNorm();
}

struct Sums {
  double slope = 0.0;   // sum (eps1 - eps0)/(eps1·eps0)
  double offset = 0.0;  // 1/2·sum ln(eps1/eps0)
};

Sums detector_sums(const HypothesisSet& q) {
  if (q.empty()) throw InvalidInput("bound: empty hypothesis set");
  Sums s;
  for (const auto& h : q) {
    if (!(h.eps0 > 0.0) || !(h.eps1 > 0.0)) throw DegenerateDetector("bound: variance must be positive");
    s.slope += (h.eps1 - h.eps0) / (h.eps1 * h.eps0);
    s.offset += 0.5 * std::log(h.eps1 / h.eps0);
  }
  if (!(s.slope > 0.0) || !std::isfinite(s.slope))
    throw DegenerateDetector("bound: occupied and empty variances coincide");
  return s;
}

}  // namespace

BoundInstance BoundInstance::make(const CMatrix& gamma, const SceneDistribution& dist, double noise_power,
                                  double cost_cap) {
  dist.validate();
  if (static_cast<std::size_t>(gamma.cols()) != dist.n_grids()) throw ShapeError("bound: Gamma columns != M");
  BoundInstance inst;
  inst.gamma = gamma;
  inst.gamma_pinv = pinv(gamma);
  inst.xi = inst.gamma_pinv * gamma;
  inst.priors = dist.priors;
  inst.reflection_variance = dist.reflection_variance;
  inst.noise_power = noise_power;
  inst.cost_cap = cost_cap;
  inst.validate();
  return inst;
}

void BoundInstance::validate() const {
  const auto grids = gamma.cols();
  if (gamma_pinv.rows() != grids || gamma_pinv.cols() != gamma.rows()) throw ShapeError("bound: Gamma^+ shape");
  if (xi.rows() != grids || xi.cols() != grids) throw ShapeError("bound: Xi shape");
  if (priors.size() != grids || reflection_variance.size() != grids) throw ShapeError("bound: prior length");
  if ((gamma_pinv * gamma - xi).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, xi.cwiseAbs().maxCoeff()))
    throw InvalidInput("bound: Xi inconsistent with Gamma^+ Gamma");
  if (!(cost_cap > 0.0)) throw InvalidInput("bound: C_In0 must be positive");
  if (!(noise_power >= 0.0)) throw InvalidInput("bound: noise power must be non-negative");
}

double decode_statistic(const BoundInstance& inst, const CVector& y, int m) {
  check_grid(inst, m);
  if (y.size() != inst.gamma_pinv.cols()) throw ShapeError("decode_statistic: measurement length");
  const cplx v = inst.gamma_pinv.row(m) * y;
  return v.real() + v.imag();
}

double variance_empty(const BoundInstance& inst, int m, const Occupancy& q_minus_m, NoiseTerm noise) {
  check_grid(inst, m);
  return interference(inst, m, q_minus_m) + noise_variance(inst, m, noise);
}

double variance_occupied(const BoundInstance& inst, int m, const Occupancy& q_minus_m, NoiseTerm noise) {
  return variance_empty(inst, m, q_minus_m, noise) + inst.reflection_variance(m) * std::norm(inst.xi(m, m));
}

double prior_prob(const RVector& priors, int m, const Occupancy& q_minus_m) {
  if (q_minus_m.size() + 1 != static_cast<std::size_t>(priors.size())) throw ShapeError("prior_prob: length");
  double p = 1.0;
  std::size_t j = 0;
  for (Eigen::Index mp = 0; mp < priors.size(); ++mp) {
    if (mp == m) continue;
    p *= q_minus_m[j++] ? priors(mp) : 1.0 - priors(mp);
  }
  return p;
}

HypothesisSet hypotheses_for(const BoundInstance& inst, int m, const std::vector<Occupancy>& patterns,
                             NoiseTerm noise) {
  check_grid(inst, m);
  HypothesisSet out;
  out.reserve(patterns.size());
  const double own = inst.reflection_variance(m) * std::norm(inst.xi(m, m));
  const double n = noise_variance(inst, m, noise);
  for (const auto& q : patterns) {
    const double e0 = interference(inst, m, q) + n;
    out.push_back({e0, e0 + own, 1.0 / static_cast<double>(patterns.size())});
  }
  return out;
}

HypothesisSet enumerate_hypotheses(const BoundInstance& inst, int m, NoiseTerm noise) {
  check_grid(inst, m);
  const int others = inst.n_grids() - 1;
  if (others > kMaxEnumeratedInterferers)
    throw InvalidInput("enumerate_hypotheses: exhaustive enumeration needs M <= 13");
  std::vector<Occupancy> patterns;
  patterns.reserve(std::size_t{1} << others);
  for (std::size_t bits = 0; bits < (std::size_t{1} << others); ++bits) {
    Occupancy q(static_cast<std::size_t>(others));
    for (int j = 0; j < others; ++j) q[static_cast<std::size_t>(j)] = (bits >> j) & 1U;
    patterns.push_back(std::move(q));
  }
  HypothesisSet out = hypotheses_for(inst, m, patterns, noise);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].weight = prior_prob(inst.priors, m, patterns[i]);
  return out;
}

HypothesisSet sample_hypotheses(const BoundInstance& inst, int m, int count, Rng& rng, NoiseTerm noise) {
  check_grid(inst, m);
  if (count < 1) throw InvalidInput("sample_hypotheses: count must be positive");
  std::vector<Occupancy> patterns(static_cast<std::size_t>(count));
  for (auto& q : patterns) {
    q.resize(static_cast<std::size_t>(inst.n_grids() - 1));
    std::size_t j = 0;
    for (int mp = 0; mp < inst.n_grids(); ++mp) {
      if (mp != m) q[j++] = rng.bernoulli(inst.priors(mp)) ? 1 : 0;
    }
  }
  return hypotheses_for(inst, m, patterns, noise);
}

double rho_hat(const HypothesisSet& q, double rho) {
  const Sums s = detector_sums(q);
  return (s.offset + rho) / s.slope;
}

double rho_from_rho_hat(const HypothesisSet& q, double rho_hat_value) {
  const Sums s = detector_sums(q);
  return rho_hat_value * s.slope - s.offset;
}

double judgement_variable(const HypothesisSet& q, double mu) {
  const Sums s = detector_sums(q);
  return mu * mu * s.slope - s.offset;
}

Hypothesis detect(double mu, double rho_hat_value) {
  return mu * mu > rho_hat_value ? Hypothesis::H1 : Hypothesis::H0;
}

ErrorProbs error_probs(const HypothesisSet& q, double rho_hat_value) {
  if (!(rho_hat_value >= 0.0)) throw InvalidInput("error_probs: rho_hat must be non-negative");
  ErrorProbs e{1.0, 0.0};
  for (const auto& h : q) {
    e.false_alarm -= h.weight * below(rho_hat_value, h.eps0);
    e.miss += h.weight * below(rho_hat_value, h.eps1);
  }
  e.false_alarm = std::max(0.0, e.false_alarm);
  return e;
}

double grid_loss_at(const HypothesisSet& q, double prior, double rho_hat_value, double cost_cap) {
  const ErrorProbs e = error_probs(q, rho_hat_value);
  return cost_cap * ((1.0 - prior) * e.false_alarm + prior * e.miss);
}

double grid_loss(const HypothesisSet& q, double prior, double rho, double cost_cap) {
  const Sums s = detector_sums(q);
  // The admissible edge rho = -offset maps to rho_hat = 0 only up to rounding.
  const double lifted = s.offset + rho;
  const double slack = 1e-12 * std::max({1.0, std::fabs(s.offset), std::fabs(rho)});
  return grid_loss_at(q, prior, lifted < 0.0 && lifted > -slack ? 0.0 : lifted / s.slope, cost_cap);
}

double grid_loss_derivative(const HypothesisSet& q, double prior, double rho, double cost_cap) {
  const Sums s = detector_sums(q);
  const double rh = (s.offset + rho) / s.slope;
  if (!(rh > 0.0)) throw InvalidInput("grid_loss_derivative: singular at rho_hat = 0");
  double d = 0.0;
  for (const auto& h : q) d += h.weight * (prior * below_density(rh, h.eps1) - (1.0 - prior) * below_density(rh, h.eps0));
  return cost_cap * d / s.slope;
}

double optimal_rho_single(double eps0, double eps1, double prior) {
  if (!(eps0 > 0.0) || !(eps1 > eps0)) throw DegenerateDetector("optimal_rho_single: need eps1 > eps0 > 0");
  if (!(prior >= 0.0 && prior <= 1.0)) throw InvalidInput("optimal_rho_single: prior outside [0,1]");
  const double lower = 0.5 * std::log(eps0 / eps1);
  double rho;
  if (prior > std::sqrt(eps1 / (eps0 + eps1))) {
    rho = lower;
  } else {
    rho = 2.0 * std::log((1.0 - prior) / prior) - 0.5 * std::log(eps0 / eps1);
  }
  return std::max(rho, lower);
}

double estimate_rho(const HypothesisSet& sample, double prior) {
  if (sample.empty()) throw InvalidInput("estimate_rho: empty sample");
  double sum = 0.0;
  for (const auto& h : sample) sum += optimal_rho_single(h.eps0, h.eps1, prior);
  return sum / static_cast<double>(sample.size());
}

double minimize_rho_hat(const HypothesisSet& q, double prior, double cost_cap) {
  if (q.empty()) throw InvalidInput("minimize_rho_hat: empty hypothesis set");
  double vmax = 0.0;
  for (const auto& h : q) vmax = std::max(vmax, h.eps1);
  auto loss_t = [&](double t) { return grid_loss_at(q, prior, t * t, cost_cap); };

  // Past sqrt(80·vmax) every erf term is within 1e-9 of saturation.
  const double t_max = std::sqrt(80.0 * std::max(vmax, std::numeric_limits<double>::min()));
  constexpr int kScan = 4000;
  int best = 0;
  double best_loss = loss_t(0.0);
  for (int i = 1; i <= kScan; ++i) {
    const double l = loss_t(t_max * i / kScan);
    if (l < best_loss) {
      best_loss = l;
      best = i;
    }
  }
  double a = t_max * std::max(0, best - 1) / kScan;
  double b = t_max * std::min(kScan, best + 1) / kScan;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = loss_t(c), fd = loss_t(d);
  for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, b); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = loss_t(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = loss_t(d);
    }
  }
  double t = 0.5 * (a + b);
  double rh = t * t;
  double l = grid_loss_at(q, prior, rh, cost_cap);
  if (best_loss < l) {
    rh = std::pow(t_max * best / kScan, 2);
    l = best_loss;
  }
  // Never declaring the grid occupied is the limit rho_hat -> inf.
  if (cost_cap * prior < l) return kInf;
  return rh;
}

void BoundReport::write_grid_csv(std::ostream& out) const {
  out << kGridHeader << '\n';
  char line[512];
  for (const auto& g : grids) {
    std::snprintf(line, sizeof line, "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", g.m + 1, g.rho_star, g.rho_hat,
                  g.p_fa, g.p_miss, g.loss, g.eps0_mean, g.eps1_mean);
    out << line;
  }
}

void BoundReport::write_summary_csv(std::ostream& out) const {
  out << kSummaryHeader << '\n';
  char line[256];
  std::snprintf(line, sizeof line, "%.10g,%.10g,%.10g,%.10g\n", loss_ub, p_err_ub, p_acc_lb, loss_over_cap);
  out << line;
}

BoundReport upper_bound(const BoundInstance& inst, const BoundOptions& options) {
  inst.validate();
  BoundReport report;
  report.cost_cap = inst.cost_cap;
  const Rng root(options.seed);
  const int grids = inst.n_grids();
  for (int m = 0; m < grids; ++m) {
    GridBound g;
    g.m = m;
    const double prior = inst.priors(m);
    HypothesisSet q;
    if (options.mode == BoundMode::exact) {
      q = enumerate_hypotheses(inst, m, options.noise);
      g.rho_hat = minimize_rho_hat(q, prior, inst.cost_cap);
    } else {
      Rng rng = root.split(static_cast<std::uint64_t>(m));
      q = sample_hypotheses(inst, m, options.samples, rng, options.noise);
      try {
        g.rho_hat = std::max(0.0, rho_hat(q, estimate_rho(q, prior)));
      } catch (const DegenerateDetector&) {
        // Both hypotheses look alike: the best detector ignores the measurement.
        g.rho_hat = prior >= 0.5 ? 0.0 : kInf;
      }
    }
    try {
      // Throws for degenerate grids even when rho_hat is infinite, so they report NaN.
      rho_from_rho_hat(q, 0.0);
      g.rho_star = std::isfinite(g.rho_hat) ? rho_from_rho_hat(q, g.rho_hat) : kInf;
    } catch (const DegenerateDetector&) {
      g.rho_star = kNaN;
    }
    const ErrorProbs e = error_probs(q, g.rho_hat);
    g.p_fa = e.false_alarm;
    g.p_miss = e.miss;
    g.loss = inst.cost_cap * ((1.0 - prior) * e.false_alarm + prior * e.miss);
    double wsum = 0.0;
    for (const auto& h : q) {
      g.eps0_mean += h.weight * h.eps0;
      g.eps1_mean += h.weight * h.eps1;
      wsum += h.weight;
    }
    if (wsum > 0.0) {
      g.eps0_mean /= wsum;
      g.eps1_mean /= wsum;
    }
    report.loss_ub += g.loss;
    report.grids.push_back(g);
  }
  report.p_err_ub = report.loss_ub / (inst.cost_cap * grids);
  report.loss_over_cap = report.loss_ub / inst.cost_cap;
  report.p_acc_lb = accuracy_lower_bound(report.loss_ub, inst.cost_cap, grids);
  return report;
}

double accuracy_lower_bound(double loss_ub, double cost_cap, int grids) {
  if (!(cost_cap > 0.0) || grids < 1) throw InvalidInput("accuracy_lower_bound: need C_In0 > 0 and M >= 1");
  return 1.0 - loss_ub / (cost_cap * grids);
}

EmpiricalLoss empirical_detector_loss(const BoundInstance& inst, const std::vector<double>& rho_hats,
                                      std::size_t draws, const Rng& rng, unsigned threads) {
  const int grids = inst.n_grids();
  if (rho_hats.size() != static_cast<std::size_t>(grids)) throw ShapeError("empirical_detector_loss: thresholds");
  if (draws == 0) throw InvalidInput("empirical_detector_loss: need at least one draw");
  const double noise_var = 2.0 * inst.noise_power;
  const std::size_t chunks = std::min<std::size_t>(draws, 64);
  std::vector<double> sum(chunks, 0.0), sum_sq(chunks, 0.0);
  parallel_for(chunks, threads, [&](std::size_t c) {
    Rng r = rng.split(c);
    const std::size_t lo = c * draws / chunks, hi = (c + 1) * draws / chunks;
    CVector nu(grids), noise(inst.gamma.rows());
    std::vector<bool> occupied(static_cast<std::size_t>(grids));
    for (std::size_t i = lo; i < hi; ++i) {
      for (int m = 0; m < grids; ++m) {
        occupied[m] = r.bernoulli(inst.priors(m));
        nu(m) = occupied[m] ? sample_complex_gaussian(inst.reflection_variance(m), r) : cplx{};
      }
      for (Eigen::Index k = 0; k < noise.size(); ++k) noise(k) = sample_complex_gaussian(noise_var, r);
      const CVector decoded = inst.gamma_pinv * (inst.gamma * nu + noise);
      double cost = 0.0;
      for (int m = 0; m < grids; ++m) {
        const double mu = decoded(m).real() + decoded(m).imag();
        const bool h1 = detect(mu, rho_hats[m]) == Hypothesis::H1;
        if (h1 != occupied[m]) cost += inst.cost_cap;
      }
      sum[c] += cost;
      sum_sq[c] += cost * cost;
    }
  });
  double s = 0.0, s2 = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    s += sum[c];
    s2 += sum_sq[c];
  }
  const double n = static_cast<double>(draws);
  EmpiricalLoss out;
  out.draws = draws;
  out.mean = s / n;
  const double var = draws > 1 ? std::max(0.0, (s2 - n * out.mean * out.mean) / (n - 1.0)) : 0.0;
  out.std_error = std::sqrt(var / n);
  return out;
}

}  // namespace metasense
