#pragma once

#include "metasense/channel.hpp"
#include "metasense/scene.hpp"

#include <vector>

namespace metasense {

class SensingNet;
struct SensingBatch;

/// Position (frame k, element n) of the next decision plus the control matrix
/// built so far. Indices are 0-based; the terminal state is (K, 0).
struct MdpState {
  int k = 0;
  int n = 0;
  ControlMatrix control;

  bool operator==(const MdpState&) const = default;
};

MdpState initial_state(int frames, int elements, int states);

bool is_terminal(const MdpState& s);

/// Writes action `a` (a state index in [0, N_S)) into block (k, n) and advances
/// row-major: the element index first, then the frame.
MdpState transition(const MdpState& s, int action);

struct Experience {
  MdpState state;
  int action = 0;
};

/// Experiences of a single epoch. Rewards are not stored: they depend on the
/// sensing network at training time.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

  void push(Experience e);
  void clear() { items_.clear(); }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& operator[](std::size_t i) const { return items_[i]; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::size_t capacity_;
  std::vector<Experience> items_;
};

/// Intermediate rewards are zero, so every step's return is the terminal reward.
std::vector<double> episode_return(const ReplayBuffer& buffer, double terminal_reward);

/// Noisy measurements of every scene under control matrix `control`, N_mc
/// noise draws each. Scene s uses the child stream rng.split(s) so the batch
/// does not depend on how it is computed.
SensingBatch make_sensing_batch(const MeasurementModel& model, const ControlMatrix& control,
                                const std::vector<Scene>& scenes, int n_mc, const Rng& rng);

/// Zero for non-terminal states; otherwise the negated mean cross-entropy of
/// the sensing network over scenes x noise draws.
double reward(const MdpState& s, const SensingNet& net, const std::vector<Scene>& scenes, int n_mc,
              const MeasurementModel& model, const Rng& rng);

}  // namespace metasense
