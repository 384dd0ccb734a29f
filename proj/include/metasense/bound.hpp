#pragma once

#include "metasense/numerics.hpp"
#include "metasense/scene.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace metasense {

/// Cost of one wrong hard decision: -ln of the probability clamp.
inline const double kDefaultCostCap = -std::log(1e-7);

/// Linear decoder nu_hat = Gamma^+ y followed by a per-grid energy threshold.
struct BoundInstance {
  CMatrix gamma;       // K x M
  CMatrix gamma_pinv;  // M x K
  CMatrix xi;          // Gamma^+ Gamma
  RVector priors;
  RVector reflection_variance;
  double noise_power = 0.0;  // per-frame measurement noise is CN(0, 2·noise_power)
  double cost_cap = kDefaultCostCap;

  static BoundInstance make(const CMatrix& gamma, const SceneDistribution& dist, double noise_power,
                            double cost_cap = kDefaultCostCap);
  int n_grids() const { return static_cast<int>(gamma.cols()); }
  void validate() const;
};

/// `row`: noise through row m of Gamma^+ only. `literal`: the printed form
/// that sums the noise gain over every row.
enum class NoiseTerm { row, literal };

/// mu_m = Re(nu_hat_m) + Im(nu_hat_m).
double decode_statistic(const BoundInstance& inst, const CVector& y, int m);

/// `q_minus_m` lists the occupancy of the other M-1 grids in index order.
double variance_empty(const BoundInstance& inst, int m, const Occupancy& q_minus_m, NoiseTerm noise = NoiseTerm::row);
double variance_occupied(const BoundInstance& inst, int m, const Occupancy& q_minus_m,
                         NoiseTerm noise = NoiseTerm::row);

double prior_prob(const RVector& priors, int m, const Occupancy& q_minus_m);

/// Variances of mu_m under both hypotheses for one interferer pattern, with its weight.
struct Hypotheses {
  double eps0 = 0.0;
  double eps1 = 0.0;
  double weight = 1.0;
};
using HypothesisSet = std::vector<Hypotheses>;

/// Every q_{-m} weighted by its prior probability (M - 1 <= 12).
HypothesisSet enumerate_hypotheses(const BoundInstance& inst, int m, NoiseTerm noise = NoiseTerm::row);
/// `count` patterns drawn from the priors, equal weights.
HypothesisSet sample_hypotheses(const BoundInstance& inst, int m, int count, Rng& rng,
                                NoiseTerm noise = NoiseTerm::row);
HypothesisSet hypotheses_for(const BoundInstance& inst, int m, const std::vector<Occupancy>& patterns,
                             NoiseTerm noise = NoiseTerm::row);

inline constexpr int kMaxEnumeratedInterferers = 12;

/// [1/2·sum ln(eps1/eps0) + rho] / sum (eps1 - eps0)/(eps1·eps0).
double rho_hat(const HypothesisSet& q, double rho);
/// Inverse of rho_hat.
double rho_from_rho_hat(const HypothesisSet& q, double rho_hat);

/// tau = mu^2·sum (eps1 - eps0)/(eps1·eps0) - 1/2·sum ln(eps1/eps0); tau > rho iff mu^2 > rho_hat.
double judgement_variable(const HypothesisSet& q, double mu);

enum class Hypothesis { H0, H1 };
Hypothesis detect(double mu, double rho_hat);

struct ErrorProbs {
  double false_alarm = 0.0;
  double miss = 0.0;
};

/// rho_hat may be +inf (never declare occupied).
ErrorProbs error_probs(const HypothesisSet& q, double rho_hat);

double grid_loss_at(const HypothesisSet& q, double prior, double rho_hat, double cost_cap);
double grid_loss(const HypothesisSet& q, double prior, double rho, double cost_cap);
double grid_loss_derivative(const HypothesisSet& q, double prior, double rho, double cost_cap);

/// Closed-form optimal threshold for a single interferer pattern, clamped to
/// the admissible range [-1/2·ln(eps1/eps0), inf).
double optimal_rho_single(double eps0, double eps1, double prior);
/// Mean of optimal_rho_single over the sample.
double estimate_rho(const HypothesisSet& sample, double prior);

/// Global minimizer of grid_loss_at over rho_hat in [0, inf]: coarse scan on
/// sqrt(rho_hat) refined by golden-section search.
double minimize_rho_hat(const HypothesisSet& q, double prior, double cost_cap);

enum class BoundMode { exact, sampled };

struct BoundOptions {
  BoundMode mode = BoundMode::exact;
  int samples = 256;
  std::uint64_t seed = 0;
  NoiseTerm noise = NoiseTerm::row;
};

struct GridBound {
  int m = 0;
  double rho_star = 0.0;  // NaN when the detector is degenerate
  double rho_hat = 0.0;
  double p_fa = 0.0;
  double p_miss = 0.0;
  double loss = 0.0;
  double eps0_mean = 0.0;
  double eps1_mean = 0.0;
};

struct BoundReport {
  std::vector<GridBound> grids;
  double loss_ub = 0.0;
  double cost_cap = kDefaultCostCap;
  /// L_ub / (C_In0·M), a probability.
  double p_err_ub = 0.0;
  /// L_ub / C_In0, the normalization without dividing by M.
  double loss_over_cap = 0.0;
  double p_acc_lb = 0.0;

  static constexpr const char* kGridHeader = "m,rho_star,rho_hat,P_fa,P_miss,L_m,eps0_mean,eps1_mean";
  static constexpr const char* kSummaryHeader = "L_ub,P_err_ub,P_acc_lb,L_ub_over_cap";
  void write_grid_csv(std::ostream& out) const;
  void write_summary_csv(std::ostream& out) const;
};

/// Exact mode minimizes every grid loss numerically over the full enumeration;
/// sampled mode plugs the mean closed-form threshold of a prior-drawn sample.
BoundReport upper_bound(const BoundInstance& inst, const BoundOptions& options = {});

double accuracy_lower_bound(double loss_ub, double cost_cap, int grids);

struct EmpiricalLoss {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t draws = 0;
};

/// Monte Carlo cost of the threshold detector with thresholds `rho_hats`:
/// scenes from the priors, C_In0 per wrong decision and 0 per correct one.
EmpiricalLoss empirical_detector_loss(const BoundInstance& inst, const std::vector<double>& rho_hats,
                                      std::size_t draws, const Rng& rng, unsigned threads = 1);

}  // namespace metasense
