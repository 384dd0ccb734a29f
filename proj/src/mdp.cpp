#include "metasense/mdp.hpp"

#include "metasense/errors.hpp"
#include "metasense/nets.hpp"

namespace metasense {

MdpState initial_state(int frames, int elements, int states) {
  return {0, 0, ControlMatrix::default_pattern(frames, elements, states)};
}

bool is_terminal(const MdpState& s) { return s.k >= s.control.frames(); }

MdpState transition(const MdpState& s, int action) {
  if (is_terminal(s)) throw InvalidState("transition: episode already terminated");
  if (action < 0 || action >= s.control.states()) throw IndexError("transition: action out of range");
  MdpState next = s;
  next.control.set(s.k, s.n, action);
  if (++next.n == s.control.elements()) {
    next.n = 0;
    ++next.k;
  }
  return next;
}

void ReplayBuffer::push(Experience e) {
  if (capacity_ && items_.size() >= capacity_) throw InvalidState("replay buffer: capacity exceeded");
  items_.push_back(std::move(e));
}

std::vector<double> episode_return(const ReplayBuffer& buffer, double terminal_reward) {
  return std::vector<double>(buffer.size(), terminal_reward);
}

SensingBatch make_sensing_batch(const MeasurementModel& model, const ControlMatrix& control,
                                const std::vector<Scene>& scenes, int n_mc, const Rng& rng) {
  if (scenes.empty()) throw InvalidInput("sensing batch: empty scene set");
  if (n_mc < 1) throw InvalidInput("sensing batch: N_mc must be positive");
  const CMatrix gamma = model.gamma(control);
  SensingBatch batch;
  batch.gamma_pinv = pinv(gamma);
  batch.measurements.reserve(scenes.size() * static_cast<std::size_t>(n_mc));
  batch.truth.reserve(batch.measurements.capacity());
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    if (static_cast<Eigen::Index>(scenes[s].nu.size()) != gamma.cols())
      throw ShapeError("sensing batch: scene length does not match the grid count");
    Rng stream = rng.split(s);
    for (int j = 0; j < n_mc; ++j) {
      batch.measurements.push_back(simulate_measurement(gamma, scenes[s].nu, model.noise_variance, stream));
      batch.truth.push_back(scenes[s].occupancy);
    }
  }
  return batch;
}

double reward(const MdpState& s, const SensingNet& net, const std::vector<Scene>& scenes, int n_mc,
              const MeasurementModel& model, const Rng& rng) {
  if (scenes.empty()) throw InvalidInput("reward: empty scene set");
  if (!is_terminal(s)) return 0.0;
  return -net.loss(make_sensing_batch(model, s.control, scenes, n_mc, rng));
}

}  // namespace metasense
