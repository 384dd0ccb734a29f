#pragma once

#include "metasense/mdp.hpp"
#include "metasense/numerics.hpp"
#include "metasense/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace metasense {

enum class Activation { identity, relu, sigmoid, softmax };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Probability clamp applied before every logarithm in the cross-entropy.
inline constexpr double kProbabilityFloor = 1e-7;

struct DenseLayer {
  RMatrix weight;  // out x in
  RVector bias;
};

/// Fully connected network, ReLU between layers, configurable output activation.
/// Parameters flatten layer by layer as (weight column-major, bias).
class Mlp {
 public:
  struct Cache {
    std::vector<RVector> activations;  // input, hidden outputs..., network output
    std::vector<RVector> pre;          // pre-activation of every layer
    std::uint64_t version = 0;
  };

  Mlp() = default;
  /// He-style uniform init, bound sqrt(6 / fan_in); zero biases.
  Mlp(std::vector<int> sizes, Activation output, Rng& rng);
  static Mlp zeros(std::vector<int> sizes, Activation output);

  RVector forward(const RVector& input, Cache* cache = nullptr) const;

  /// Accumulates dL/dparams into `param_grad` and returns dL/dinput, given
  /// dL/doutput. Throws InvalidInput if the cache came from other parameters.
  RVector backward(const Cache& cache, const RVector& output_grad, Eigen::Ref<RVector> param_grad) const;

  std::size_t parameter_count() const;
  RVector parameters() const;
  void set_parameters(const Eigen::Ref<const RVector>& flat);

  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.empty() ? 0 : static_cast<std::size_t>(sizes_.front()); }
  std::size_t output_size() const { return sizes_.empty() ? 0 : static_cast<std::size_t>(sizes_.back()); }
  Activation output_activation() const { return output_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  /// Direct layer access for tests and fixed initializations; invalidates caches.
  DenseLayer& mutable_layer(std::size_t i);

 private:
  void touch();

  std::vector<int> sizes_;
  Activation output_ = Activation::identity;
  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

// ---------------------------------------------------------------------------
// Policy network

enum class PolicyArch { symmetric_groups, single_mlp };

std::string to_string(PolicyArch a);
PolicyArch policy_arch_from_string(const std::string& s);

struct PolicyShape {
  int frames = 1;
  int elements = 1;
  int states = 2;
  int grids = 1;
  std::vector<int> group_hidden{64};
  int group_out = 32;
  std::vector<int> head_hidden{64};
  PolicyArch arch = PolicyArch::symmetric_groups;
};

/// Frame-slot feature extractors (one parameter set shared by the K slots of
/// each of the real and imaginary groups) followed by a softmax head over the
/// N_S configurations. Head input: one-hot(k) | one-hot(n) | K real-part
/// features | K imaginary-part features.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(const PolicyShape& shape, Rng& rng);

  const PolicyShape& shape() const { return shape_; }

  /// Complex rows (c_f - c_0)·A, one per frame, scaled by 1 / max|A|.
  std::vector<CVector> frame_rows(const MdpState& s, const CMatrix& projection) const;
  /// The 2K extracted feature vectors (real group first).
  std::vector<RVector> group_features(const MdpState& s, const CMatrix& projection) const;

  RVector probabilities(const MdpState& s, const CMatrix& projection) const;

  /// Gradient of ln pi_a(s) with respect to the flat parameter vector.
  RVector grad_log_prob(const MdpState& s, int action, const CMatrix& projection) const;

  std::size_t parameter_count() const;
  RVector parameters() const;
  void set_parameters(const Eigen::Ref<const RVector>& flat);

  Mlp& group_re() { return group_re_; }
  Mlp& group_im() { return group_im_; }
  Mlp& joint() { return joint_; }
  Mlp& head() { return head_; }
  const Mlp& group_re() const { return group_re_; }
  const Mlp& group_im() const { return group_im_; }
  const Mlp& joint() const { return joint_; }
  const Mlp& head() const { return head_; }

  /// Parameters owned by the feature stage; independent of K for symmetric groups.
  std::size_t feature_parameter_count() const;

 private:
  struct Pass;
  Pass run(const MdpState& s, const CMatrix& projection) const;
  void check_state(const MdpState& s, const CMatrix& projection) const;

  PolicyShape shape_;
  Mlp group_re_;
  Mlp group_im_;
  Mlp joint_;
  Mlp head_;
};

// ---------------------------------------------------------------------------
// Sensing network

enum class SensingArch {
  decoder_mlp,        // pseudo-inverse decoder, then MLP on Re | Im
  raw_mlp,            // MLP directly on Re(y) | Im(y)
  decoder_threshold,  // pseudo-inverse decoder, logistic threshold on |nu_hat|^2
};

std::string to_string(SensingArch a);
SensingArch sensing_arch_from_string(const std::string& s);

struct SensingShape {
  int grids = 1;
  int frames = 1;
  std::vector<int> hidden{128};
  SensingArch arch = SensingArch::decoder_mlp;
  /// Multiplies raw measurements before the MLP (raw_mlp only).
  double input_scale = 1.0;
};

struct SensingBatch {
  CMatrix gamma_pinv;                  // M x K
  std::vector<CVector> measurements;   // K each
  std::vector<Occupancy> truth;        // M each
  std::size_t size() const { return measurements.size(); }
};

/// Sum over grids of the binary cross-entropy with clamped predictions.
double cross_entropy(const RVector& predicted, const Occupancy& truth);

class SensingNet {
 public:
  struct Cache {
    CVector decoded;
    std::vector<Mlp::Cache> mlp;
  };

  SensingNet() = default;
  SensingNet(const SensingShape& shape, Rng& rng);

  const SensingShape& shape() const { return shape_; }

  /// Occupancy probabilities in (0, 1)^M.
  RVector forward(const CVector& measurement, const CMatrix& gamma_pinv, Cache* cache = nullptr) const;

  /// Mean cross-entropy over the batch and its exact gradient.
  std::pair<double, RVector> loss_grad(const SensingBatch& batch, unsigned threads = 1) const;
  double loss(const SensingBatch& batch, unsigned threads = 1) const;

  std::size_t parameter_count() const { return mlp_.parameter_count(); }
  RVector parameters() const { return mlp_.parameters(); }
  void set_parameters(const Eigen::Ref<const RVector>& flat) { mlp_.set_parameters(flat); }

  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }

 private:
  void sample_grad(const CVector& y, const Occupancy& truth, const CMatrix& gamma_pinv, double& loss,
                   Eigen::Ref<RVector> grad) const;

  SensingShape shape_;
  Mlp mlp_;
};

// ---------------------------------------------------------------------------
// Checkpoints: versioned text, doubles printed with 17 significant digits.

void write_checkpoint(std::ostream& out, const PolicyNet& policy, const SensingNet& sensing);
std::pair<PolicyNet, SensingNet> read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const PolicyNet& policy, const SensingNet& sensing);
std::pair<PolicyNet, SensingNet> load_checkpoint(const std::filesystem::path& path);

}  // namespace metasense
