#include "metasense/prpg.hpp"

#include "metasense/errors.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace metasense {

void TrainConfig::validate() const {
  if (frames < 1) throw ConfigError("frames must be >= 1", "train.frames");
  if (n_states < 1) throw ConfigError("n_states must be >= 1", "train.n_states");
  if (n_mc < 1) throw ConfigError("n_mc must be >= 1", "train.n_mc");
  if (epochs < 0) throw ConfigError("epochs must be >= 0", "train.epochs");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("lr0 must be positive", "train.lr0");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1", "train.eval_every");
  if (eval_n_mc < 1) throw ConfigError("eval_n_mc must be >= 1", "train.eval_n_mc");
  if (eval_rollouts < 0) throw ConfigError("eval_rollouts must be >= 0", "train.eval_rollouts");
  if (baseline_window < 1) throw ConfigError("baseline_window must be >= 1", "train.baseline_window");
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0", "train.grad_clip");
}

void LossTrace::push(const TraceRecord& r) {
  if (!records_.empty() && r.epoch <= records_.back().epoch)
    throw InvalidInput("loss trace: epochs must be strictly increasing");
  records_.push_back(r);
}

void LossTrace::write_csv(std::ostream& out) const {
  out << kHeader << '\n';
  char line[256];
  for (const auto& r : records_) {
    std::snprintf(line, sizeof line, "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.6f\n", r.epoch, r.ce_eval, r.reward_mean,
                  r.grad_norm_theta, r.grad_norm_w, r.lr, r.seconds);
    out << line;
  }
}

void LossTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace '" + path.string() + "'");
  write_csv(out);
}

double RewardBaseline::value(double fallback) const {
  return history_.empty() ? fallback : sum_ / static_cast<double>(history_.size());
}

void RewardBaseline::push(double reward) {
  history_.push_back(reward);
  sum_ += reward;
  if (history_.size() > window_) {
    sum_ -= history_.front();
    history_.pop_front();
  }
}

int select_action(const PolicyNet& policy, const MdpState& s, const CMatrix& projection, Rng& rng) {
  if (is_terminal(s)) throw InvalidState("select_action: terminal state");
  const RVector p = policy.probabilities(s, projection);
  const double u = rng.uniform();
  double acc = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    acc += p(a);
    if (u < acc) return static_cast<int>(a);
  }
  // Rounding can leave acc slightly below 1; fall back to the last action with mass.
  for (Eigen::Index a = p.size(); a-- > 0;) {
    if (p(a) > 0.0) return static_cast<int>(a);
  }
  return 0;
}

int greedy_action(const PolicyNet& policy, const MdpState& s, const CMatrix& projection) {
  if (is_terminal(s)) throw InvalidState("greedy_action: terminal state");
  Eigen::Index best = 0;
  policy.probabilities(s, projection).maxCoeff(&best);
  return static_cast<int>(best);
}

Rollout rollout_episode(const PolicyNet& policy, const CMatrix& projection, Rng& rng) {
  const auto& shape = policy.shape();
  Rollout out{ReplayBuffer(static_cast<std::size_t>(shape.frames * shape.elements)),
              initial_state(shape.frames, shape.elements, shape.states)};
  while (!is_terminal(out.terminal)) {
    const int a = select_action(policy, out.terminal, projection, rng);
    out.buffer.push({out.terminal, a});
    out.terminal = transition(out.terminal, a);
  }
  return out;
}

ControlMatrix greedy_control(const PolicyNet& policy, const CMatrix& projection) {
  const auto& shape = policy.shape();
  MdpState s = initial_state(shape.frames, shape.elements, shape.states);
  while (!is_terminal(s)) s = transition(s, greedy_action(policy, s, projection));
  return s.control;
}

double monte_carlo_reward(const ControlMatrix& control, const SensingNet& net, const std::vector<Scene>& scenes,
                          int n_mc, const MeasurementModel& model, const Rng& rng) {
  MdpState terminal{control.frames(), 0, control};
  return reward(terminal, net, scenes, n_mc, model, rng);
}

double lr_schedule(double lr0, double epoch) {
  if (epoch < 0.0) throw InvalidInput("lr_schedule: negative epoch");
  return lr0 / (1.0 + epoch * 1e-3);
}

double clip_gradient(RVector& g, double max_norm) {
  const double norm = g.norm();
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient (norm " + std::to_string(norm) + ")");
  if (max_norm > 0.0 && norm > max_norm) g *= max_norm / norm;
  return norm;
}

RVector policy_gradient(const PolicyNet& policy, const ReplayBuffer& buffer, const std::vector<double>& returns,
                        double baseline, const CMatrix& projection) {
  if (returns.size() != buffer.size()) throw ShapeError("policy_gradient: returns and buffer differ in length");
  RVector g = RVector::Zero(static_cast<Eigen::Index>(policy.parameter_count()));
  if (buffer.empty()) return g;
  for (std::size_t t = 0; t < buffer.size(); ++t) {
    const double advantage = returns[t] - baseline;
    if (advantage == 0.0) continue;
    g += advantage * policy.grad_log_prob(buffer[t].state, buffer[t].action, projection);
  }
  return g / static_cast<double>(buffer.size());
}

double update_policy(PolicyNet& policy, const ReplayBuffer& buffer, const std::vector<double>& returns,
                     double baseline, double lr, const CMatrix& projection, double max_norm) {
  RVector g = policy_gradient(policy, buffer, returns, baseline, projection);
  const double norm = clip_gradient(g, max_norm);
  if (lr != 0.0 && norm > 0.0) policy.set_parameters(policy.parameters() + lr * g);
  return norm;
}

SensingStep update_sensing(SensingNet& net, const SensingBatch& batch, double lr, double max_norm,
                           unsigned threads) {
  auto [loss, g] = net.loss_grad(batch, threads);
  SensingStep step;
  step.loss = loss;
  step.grad_norm = clip_gradient(g, max_norm);
  if (lr != 0.0) net.set_parameters(bsg_step(net.parameters(), g, lr));
  return step;
}

RVector bsg_step(const RVector& x, const RVector& g, double lr) {
  if (x.size() != g.size()) throw ShapeError("bsg_step: length mismatch");
  if (!(lr > 0.0)) throw InvalidInput("bsg_step: step size must be positive");
  return x - lr * g;
}

double evaluate(const SensingNet& net, const ControlMatrix& control, const MeasurementModel& model,
                const std::vector<Scene>& scenes, int n_mc, const Rng& rng, unsigned threads) {
  return net.loss(make_sensing_batch(model, control, scenes, n_mc, rng), threads);
}

namespace {

// Stream layout under the root seed.
enum Stream : std::uint64_t { kInit = 0, kControl = 1, kEval = 2, kTrainScenes = 3, kEpoch = 4 };

}  // namespace

TrainResult train(const TrainConfig& config, const TrainEnv& env) {
  config.validate();
  env.scenes.validate();
  const std::size_t grids = env.model.n_grids();
  if (env.scenes.n_grids() != grids) throw ShapeError("train: scene prior length does not match the grid count");
  const CMatrix& projection = env.model.projection;
  const bool fixed_front_end = env.model.fixed_gamma.has_value();
  if (!fixed_front_end && projection.rows() != static_cast<Eigen::Index>(env.elements) * config.n_states)
    throw ShapeError("train: projection rows must equal elements x states");

  const Rng root(config.seed);
  Rng init = root.split(kInit);

  PolicyShape ps = config.policy;
  ps.frames = config.frames;
  ps.elements = env.elements;
  ps.states = config.n_states;
  ps.grids = static_cast<int>(grids);
  SensingShape ss = config.sensing;
  ss.grids = static_cast<int>(grids);
  ss.frames = fixed_front_end ? static_cast<int>(env.model.fixed_gamma->rows()) : config.frames;

  TrainResult result{PolicyNet(ps, init), SensingNet(ss, init), {}, {}, 0, {}};
  const bool train_policy = !fixed_front_end && !config.fixed_random_control;

  ControlMatrix fixed_control;
  if (!train_policy) {
    Rng control_rng = root.split(kControl);
    fixed_control = ControlMatrix::random(config.frames, env.elements, config.n_states, control_rng);
  }

  Rng eval_scene_rng = root.split(kEval).split(0);
  const Rng eval_noise = root.split(kEval).split(1);
  const auto eval_scenes = enumerate_scene_set(grids, env.scenes, config.eval_scene_set, eval_scene_rng);

  const Rng train_scene_root = root.split(kTrainScenes);
  auto draw_scenes = [&](std::uint64_t index) {
    Rng r = train_scene_root.split(index);
    if (!config.scene_masks.empty()) return scenes_from_masks(config.scene_masks, env.scenes, r);
    return enumerate_scene_set(grids, env.scenes, config.scene_set, r);
  };
  std::vector<Scene> scenes;
  if (!config.resample_scenes) scenes = draw_scenes(0);

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    if (!config.record_wall_time) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  auto current_control = [&] { return train_policy ? greedy_control(result.policy, projection) : fixed_control; };
  const Rng eval_actions = root.split(kEval).split(2);
  auto record = [&](int epoch, double reward_mean, double gn_theta, double gn_w, double lr) {
    double ce = 0.0;
    if (!train_policy || config.eval_rollouts == 0) {
      ce = evaluate(result.sensing, current_control(), env.model, eval_scenes, config.eval_n_mc, eval_noise,
                    config.threads);
    } else {
      for (int i = 0; i < config.eval_rollouts; ++i) {
        Rng act = eval_actions.split(static_cast<std::uint64_t>(i));
        const auto control = rollout_episode(result.policy, projection, act).terminal.control;
        ce += evaluate(result.sensing, control, env.model, eval_scenes, config.eval_n_mc, eval_noise, config.threads);
      }
      ce /= config.eval_rollouts;
    }
    result.trace.push({epoch, ce, reward_mean, gn_theta, gn_w, lr, elapsed()});
  };

  if (config.epochs == 0) {
    result.final_control = current_control();
    return result;
  }
  record(0, 0.0, 0.0, 0.0, config.lr0);

  RewardBaseline baseline(config.baseline_window);
  double reward_sum = 0.0, gn_theta = 0.0, gn_w = 0.0;
  int reward_count = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = lr_schedule(config.lr0, epoch);
    const Rng epoch_rng = root.split(kEpoch).split(static_cast<std::uint64_t>(epoch));
    if (config.resample_scenes) scenes = draw_scenes(static_cast<std::uint64_t>(epoch));
    try {
      Rollout rollout;
      ControlMatrix control = fixed_control;
      if (train_policy) {
        Rng act = epoch_rng.split(0);
        rollout = rollout_episode(result.policy, projection, act);
        control = rollout.terminal.control;
      }
      const Rng noise = epoch_rng.split(1);
      const SensingBatch batch = make_sensing_batch(env.model, control, scenes, config.n_mc, noise);
      auto [ce, grad_w] = result.sensing.loss_grad(batch, config.threads);
      const double r = -ce;
      const double scale = config.reduction == TrainConfig::Reduction::sum ? static_cast<double>(batch.size()) : 1.0;

      // theta first, with w fixed; the same batch then drives the w step.
      PolicyNet next_policy = result.policy;
      double norm_theta = 0.0;
      if (train_policy) {
        double b = 0.0;
        if (config.baseline == TrainConfig::Baseline::running_mean) {
          b = baseline.value(r);
        } else if (config.baseline == TrainConfig::Baseline::greedy) {
          b = monte_carlo_reward(greedy_control(result.policy, projection), result.sensing, scenes, config.n_mc,
                                 env.model, noise);
        }
        norm_theta = update_policy(next_policy, rollout.buffer, episode_return(rollout.buffer, r), b,
                                   scale * lr, projection, config.grad_clip);
      }
      const double norm_w = clip_gradient(grad_w, config.grad_clip);
      const RVector next_w = bsg_step(result.sensing.parameters(), grad_w, scale * lr);
      if (!next_w.allFinite()) throw NumericError("non-finite sensing parameters after the update");

      result.policy = std::move(next_policy);
      result.sensing.set_parameters(next_w);
      baseline.push(r);
      reward_sum += r;
      ++reward_count;
      gn_theta = norm_theta;
      gn_w = norm_w;
    } catch (const NumericError& e) {
      ++result.skipped_epochs;
      result.warnings.push_back("epoch " + std::to_string(epoch) + " skipped: " + e.what());
    }

    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      record(epoch, reward_count ? reward_sum / reward_count : 0.0, gn_theta, gn_w, lr);
      reward_sum = 0.0;
      reward_count = 0;
    }
  }
  result.final_control = current_control();
  return result;
}

}  // namespace metasense
