#pragma once

#include "metasense/channel.hpp"
#include "metasense/mdp.hpp"
#include "metasense/nets.hpp"
#include "metasense/scene.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace metasense {

struct TrainConfig {
  int frames = 4;
  int n_states = 2;
  int n_mc = 8;
  int epochs = 2000;
  double lr0 = 1e-3;
  std::uint64_t seed = 1;

  SceneSetSpec scene_set;
  /// Fixed occupancy masks; when non-empty they replace `scene_set`.
  std::vector<Occupancy> scene_masks;
  /// Draw fresh reflection coefficients for the training scenes every epoch.
  bool resample_scenes = true;

  int eval_every = 10;
  SceneSetSpec eval_scene_set;
  int eval_n_mc = 16;
  /// 0: evaluate the greedy control matrix. R > 0: average the held-out CE
  /// over R control matrices sampled from the policy with fixed seeds.
  int eval_rollouts = 16;

  /// How the per-sample losses combine in the update steps. `sum` follows the
  /// unnormalized Monte Carlo reward (steps scale with |V|·N_mc); `mean` uses
  /// the batch mean. Reported rewards and CE are always means.
  enum class Reduction { sum, mean } reduction = Reduction::sum;

  /// running_mean: mean of the last `baseline_window` terminal rewards.
  /// greedy: reward of the greedy control matrix on the same scenes and noise.
  enum class Baseline { none, running_mean, greedy } baseline = Baseline::running_mean;
  std::size_t baseline_window = 64;
  double grad_clip = 10.0;

  /// Keep C fixed at a seeded random control matrix and train only w.
  bool fixed_random_control = false;

  PolicyShape policy;  // frames / elements / states / grids are filled in by train()
  SensingShape sensing;

  unsigned threads = 1;
  bool record_wall_time = false;

  void validate() const;
};

/// What the agent acts on: the grouped projection matrix, the scene prior and
/// how measurements are produced.
struct TrainEnv {
  MeasurementModel model;
  SceneDistribution scenes;
  int elements = 1;  // controllable units (groups) seen by the policy
};

struct TraceRecord {
  int epoch = 0;
  double ce_eval = 0.0;
  double reward_mean = 0.0;
  double grad_norm_theta = 0.0;
  double grad_norm_w = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

class LossTrace {
 public:
  static constexpr const char* kHeader = "epoch,ce_eval,reward_mean,grad_norm_theta,grad_norm_w,lr,seconds";

  /// Throws InvalidInput unless epochs strictly increase.
  void push(const TraceRecord& r);
  const std::vector<TraceRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }
  const TraceRecord& front() const { return records_.front(); }
  const TraceRecord& back() const { return records_.back(); }

  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<TraceRecord> records_;
};

/// Running mean of the most recent terminal rewards.
class RewardBaseline {
 public:
  explicit RewardBaseline(std::size_t window = 64) : window_(window) {}
  /// The running mean, or `fallback` when no reward has been seen yet.
  double value(double fallback) const;
  void push(double reward);
  std::size_t size() const { return history_.size(); }

 private:
  std::size_t window_;
  std::deque<double> history_;
  double sum_ = 0.0;
};

int select_action(const PolicyNet& policy, const MdpState& s, const CMatrix& projection, Rng& rng);
int greedy_action(const PolicyNet& policy, const MdpState& s, const CMatrix& projection);

struct Rollout {
  ReplayBuffer buffer;
  MdpState terminal;
};

Rollout rollout_episode(const PolicyNet& policy, const CMatrix& projection, Rng& rng);
/// Control matrix from always taking the most probable action.
ControlMatrix greedy_control(const PolicyNet& policy, const CMatrix& projection);

double monte_carlo_reward(const ControlMatrix& control, const SensingNet& net, const std::vector<Scene>& scenes,
                          int n_mc, const MeasurementModel& model, const Rng& rng);

double lr_schedule(double lr0, double epoch);

/// Scales `g` in place so that its norm is at most `max_norm`; returns the norm before scaling.
double clip_gradient(RVector& g, double max_norm);

/// Mean over the buffer of (return - baseline)·grad ln pi.
RVector policy_gradient(const PolicyNet& policy, const ReplayBuffer& buffer, const std::vector<double>& returns,
                        double baseline, const CMatrix& projection);

/// theta += lr·clip(policy_gradient). Returns the unclipped gradient norm.
double update_policy(PolicyNet& policy, const ReplayBuffer& buffer, const std::vector<double>& returns,
                     double baseline, double lr, const CMatrix& projection, double max_norm = 0.0);

struct SensingStep {
  double loss = 0.0;       // batch CE before the step
  double grad_norm = 0.0;  // unclipped
};

/// w -= lr·clip(grad mean CE) on the given batch.
SensingStep update_sensing(SensingNet& net, const SensingBatch& batch, double lr, double max_norm = 0.0,
                           unsigned threads = 1);

/// Closed-form minimizer of g·(x' - x) + |x' - x|^2 / (2·lr).
RVector bsg_step(const RVector& x, const RVector& g, double lr);

struct TrainResult {
  PolicyNet policy;
  SensingNet sensing;
  LossTrace trace;
  ControlMatrix final_control;
  int skipped_epochs = 0;
  std::vector<std::string> warnings;
};

/// The training-scene and evaluation streams are both derived from config.seed.
TrainResult train(const TrainConfig& config, const TrainEnv& env);

/// Held-out CE of the sensing network under a given control matrix.
double evaluate(const SensingNet& net, const ControlMatrix& control, const MeasurementModel& model,
                const std::vector<Scene>& scenes, int n_mc, const Rng& rng, unsigned threads = 1);

}  // namespace metasense
