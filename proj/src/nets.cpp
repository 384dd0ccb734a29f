#include "metasense/nets.hpp"

#include "metasense/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace metasense {

namespace {

std::atomic<std::uint64_t> g_param_version{1};

std::uint64_t next_version() { return g_param_version.fetch_add(1); }

RVector apply_activation(Activation a, const RVector& z) {
  switch (a) {
    case Activation::identity:
      return z;
    case Activation::relu:
      return z.cwiseMax(0.0);
    case Activation::sigmoid:
      return z.unaryExpr([](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
    case Activation::softmax: {
      const double peak = z.maxCoeff();
      RVector e = (z.array() - peak).exp().matrix();
      return e / e.sum();
    }
  }
  return z;
}

// dL/dz from dL/da for a = act(z).
RVector activation_backward(Activation act, const RVector& z, const RVector& a, const RVector& grad) {
  switch (act) {
    case Activation::identity:
      return grad;
    case Activation::relu:
      return (z.array() > 0.0).select(grad, 0.0);
    case Activation::sigmoid:
      return (grad.array() * a.array() * (1.0 - a.array())).matrix();
    case Activation::softmax:
      return (a.array() * (grad.array() - grad.dot(a))).matrix();
  }
  return grad;
}

void write_ints(std::ostream& out, const char* tag, const std::vector<int>& v) {
  out << tag << ' ' << v.size();
  for (int x : v) out << ' ' << x;
  out << '\n';
}

std::vector<int> read_ints(std::istream& in, const char* tag) {
  std::string t;
  std::size_t n = 0;
  if (!(in >> t >> n) || t != tag) throw InvalidInput(std::string("checkpoint: expected '") + tag + "'");
  std::vector<int> v(n);
  for (auto& x : v) {
    if (!(in >> x)) throw InvalidInput("checkpoint: truncated integer list");
  }
  return v;
}

void write_values(std::ostream& out, const char* tag, const RVector& v) {
  out << tag << ' ' << v.size() << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v(i));
    out << buf;
  }
}

RVector read_values(std::istream& in, const char* tag) {
  std::string t;
  Eigen::Index n = 0;
  if (!(in >> t >> n) || t != tag) throw InvalidInput(std::string("checkpoint: expected '") + tag + "'");
  RVector v(n);
  std::string token;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(in >> token)) throw InvalidInput("checkpoint: truncated parameter block");
    v(i) = std::strtod(token.c_str(), nullptr);
  }
  return v;
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "softmax") return Activation::softmax;
  throw InvalidInput("unknown activation '" + s + "'");
}

// ---------------------------------------------------------------------------

Mlp::Mlp(std::vector<int> sizes, Activation output, Rng& rng) : Mlp(zeros(std::move(sizes), output)) {
  for (auto& layer : layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = bound * (2.0 * rng.uniform() - 1.0);
  }
  touch();
}

Mlp Mlp::zeros(std::vector<int> sizes, Activation output) {
  if (sizes.size() < 2) throw InvalidInput("mlp: need at least input and output sizes");
  for (int s : sizes) {
    if (s < 1) throw InvalidInput("mlp: layer sizes must be positive");
  }
  Mlp net;
  net.output_ = output;
  for (std::size_t l = 1; l < sizes.size(); ++l)
    net.layers_.push_back({RMatrix::Zero(sizes[l], sizes[l - 1]), RVector::Zero(sizes[l])});
  net.sizes_ = std::move(sizes);
  net.touch();
  return net;
}

void Mlp::touch() { version_ = next_version(); }

DenseLayer& Mlp::mutable_layer(std::size_t i) {
  touch();
  return layers_.at(i);
}

RVector Mlp::forward(const RVector& input, Cache* cache) const {
  if (layers_.empty()) throw InvalidInput("mlp: network has no layers");
  if (static_cast<std::size_t>(input.size()) != input_size())
    throw ShapeError("mlp: input length " + std::to_string(input.size()) + ", expected " +
                     std::to_string(input_size()));
  if (cache) {
    cache->activations.assign(1, input);
    cache->pre.clear();
    cache->version = version_;
  }
  RVector a = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    RVector z = layers_[l].weight * a + layers_[l].bias;
    const bool last = l + 1 == layers_.size();
    a = apply_activation(last ? output_ : Activation::relu, z);
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->activations.push_back(a);
    }
  }
  return a;
}

RVector Mlp::backward(const Cache& cache, const RVector& output_grad, Eigen::Ref<RVector> param_grad) const {
  if (cache.version != version_ || cache.pre.size() != layers_.size())
    throw InvalidInput("mlp: stale cache (parameters changed since the forward pass)");
  if (static_cast<std::size_t>(output_grad.size()) != output_size()) throw ShapeError("mlp: output gradient length");
  if (static_cast<std::size_t>(param_grad.size()) != parameter_count()) throw ShapeError("mlp: gradient buffer length");

  // Offsets of each layer's block in the flat layout.
  std::vector<Eigen::Index> offset(layers_.size());
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    offset[l] = pos;
    pos += layers_[l].weight.size() + layers_[l].bias.size();
  }

  const std::size_t last = layers_.size() - 1;
  RVector delta = activation_backward(output_, cache.pre[last], cache.activations[last + 1], output_grad);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const RVector& in = cache.activations[l];
    Eigen::Map<RMatrix> gw(param_grad.data() + offset[l], layer.weight.rows(), layer.weight.cols());
    gw.noalias() += delta * in.transpose();
    param_grad.segment(offset[l] + layer.weight.size(), layer.bias.size()) += delta;
    RVector upstream = layer.weight.transpose() * delta;
    if (l == 0) return upstream;
    delta = activation_backward(Activation::relu, cache.pre[l - 1], cache.activations[l], upstream);
  }
  return {};
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

RVector Mlp::parameters() const {
  RVector flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for (const auto& l : layers_) {
    flat.segment(pos, l.weight.size()) = Eigen::Map<const RVector>(l.weight.data(), l.weight.size());
    pos += l.weight.size();
    flat.segment(pos, l.bias.size()) = l.bias;
    pos += l.bias.size();
  }
  return flat;
}

void Mlp::set_parameters(const Eigen::Ref<const RVector>& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) throw ShapeError("mlp: parameter vector length");
  if (!flat.allFinite()) throw NumericError("mlp: non-finite parameters");
  Eigen::Index pos = 0;
  for (auto& l : layers_) {
    Eigen::Map<RVector>(l.weight.data(), l.weight.size()) = flat.segment(pos, l.weight.size());
    pos += l.weight.size();
    l.bias = flat.segment(pos, l.bias.size());
    pos += l.bias.size();
  }
  touch();
}

// ---------------------------------------------------------------------------

std::string to_string(PolicyArch a) {
  return a == PolicyArch::symmetric_groups ? "symmetric_groups" : "single_mlp";
}

PolicyArch policy_arch_from_string(const std::string& s) {
  if (s == "symmetric_groups") return PolicyArch::symmetric_groups;
  if (s == "single_mlp") return PolicyArch::single_mlp;
  throw InvalidInput("unknown policy architecture '" + s + "'");
}

struct PolicyNet::Pass {
  std::vector<Mlp::Cache> re;
  std::vector<Mlp::Cache> im;
  Mlp::Cache joint;
  Mlp::Cache head;
  RVector probs;
};

PolicyNet::PolicyNet(const PolicyShape& shape, Rng& rng) : shape_(shape) {
  if (shape.frames < 1 || shape.elements < 1 || shape.states < 1 || shape.grids < 1 || shape.group_out < 1)
    throw InvalidInput("policy: dimensions must be positive");
  const int features = 2 * shape.frames * shape.group_out;
  if (shape.arch == PolicyArch::symmetric_groups) {
    std::vector<int> sizes{shape.grids};
    sizes.insert(sizes.end(), shape.group_hidden.begin(), shape.group_hidden.end());
    sizes.push_back(shape.group_out);
    group_re_ = Mlp(sizes, Activation::relu, rng);
    group_im_ = Mlp(sizes, Activation::relu, rng);
  } else {
    std::vector<int> sizes{2 * shape.frames * shape.grids};
    sizes.insert(sizes.end(), shape.group_hidden.begin(), shape.group_hidden.end());
    sizes.push_back(features);
    joint_ = Mlp(sizes, Activation::relu, rng);
  }
  std::vector<int> head_sizes{shape.frames + shape.elements + features};
  head_sizes.insert(head_sizes.end(), shape.head_hidden.begin(), shape.head_hidden.end());
  head_sizes.push_back(shape.states);
  head_ = Mlp(head_sizes, Activation::softmax, rng);
}

void PolicyNet::check_state(const MdpState& s, const CMatrix& projection) const {
  const auto& c = s.control;
  if (c.frames() != shape_.frames || c.elements() != shape_.elements || c.states() != shape_.states)
    throw ShapeError("policy: control matrix shape does not match the network");
  if (projection.rows() != static_cast<Eigen::Index>(shape_.elements) * shape_.states ||
      projection.cols() != shape_.grids)
    throw ShapeError("policy: projection matrix shape does not match the network");
  if (s.k < 0 || s.k >= shape_.frames || s.n < 0 || s.n >= shape_.elements)
    throw InvalidState("policy: state has no pending decision");
}

std::vector<CVector> PolicyNet::frame_rows(const MdpState& s, const CMatrix& projection) const {
  const double peak = projection.size() ? projection.cwiseAbs().maxCoeff() : 0.0;
  const double scale = peak > 0.0 ? 1.0 / peak : 1.0;
  const CMatrix rows = measurement_matrix(cplx{scale, 0.0}, projection, s.control);
  std::vector<CVector> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index f = 0; f < rows.rows(); ++f) out.emplace_back(rows.row(f).transpose());
  return out;
}

PolicyNet::Pass PolicyNet::run(const MdpState& s, const CMatrix& projection) const {
  check_state(s, projection);
  const int frames = shape_.frames;
  const int g = shape_.group_out;
  const auto rows = frame_rows(s, projection);

  RVector head_in = RVector::Zero(frames + shape_.elements + 2 * frames * g);
  head_in(s.k) = 1.0;
  head_in(frames + s.n) = 1.0;
  const Eigen::Index feat0 = frames + shape_.elements;

  Pass pass;
  if (shape_.arch == PolicyArch::symmetric_groups) {
    pass.re.resize(static_cast<std::size_t>(frames));
    pass.im.resize(static_cast<std::size_t>(frames));
    for (int f = 0; f < frames; ++f) {
      head_in.segment(feat0 + f * g, g) = group_re_.forward(rows[f].real(), &pass.re[f]);
      head_in.segment(feat0 + (frames + f) * g, g) = group_im_.forward(rows[f].imag(), &pass.im[f]);
    }
  } else {
    const int m = shape_.grids;
    RVector joint_in(2 * frames * m);
    for (int f = 0; f < frames; ++f) {
      joint_in.segment(f * m, m) = rows[f].real();
      joint_in.segment((frames + f) * m, m) = rows[f].imag();
    }
    head_in.segment(feat0, 2 * frames * g) = joint_.forward(joint_in, &pass.joint);
  }
  pass.probs = head_.forward(head_in, &pass.head);
  return pass;
}

std::vector<RVector> PolicyNet::group_features(const MdpState& s, const CMatrix& projection) const {
  if (shape_.arch != PolicyArch::symmetric_groups) throw InvalidInput("policy: no symmetric groups");
  const auto pass = run(s, projection);
  std::vector<RVector> out;
  for (const auto& c : pass.re) out.push_back(c.activations.back());
  for (const auto& c : pass.im) out.push_back(c.activations.back());
  return out;
}

RVector PolicyNet::probabilities(const MdpState& s, const CMatrix& projection) const {
  return run(s, projection).probs;
}

RVector PolicyNet::grad_log_prob(const MdpState& s, int action, const CMatrix& projection) const {
  if (action < 0 || action >= shape_.states) throw IndexError("policy: action out of range");
  const auto pass = run(s, projection);
  const double p = pass.probs(action);
  if (!(p > 0.0)) throw NumericError("policy: selected action has zero probability");

  const Eigen::Index n_re = static_cast<Eigen::Index>(group_re_.parameter_count());
  const Eigen::Index n_im = static_cast<Eigen::Index>(group_im_.parameter_count());
  const Eigen::Index n_joint = static_cast<Eigen::Index>(joint_.parameter_count());
  const Eigen::Index n_head = static_cast<Eigen::Index>(head_.parameter_count());
  RVector grad = RVector::Zero(n_re + n_im + n_joint + n_head);

  RVector dprob = RVector::Zero(shape_.states);
  dprob(action) = 1.0 / p;
  const RVector dhead_in = head_.backward(pass.head, dprob, grad.segment(n_re + n_im + n_joint, n_head));

  const int frames = shape_.frames;
  const int g = shape_.group_out;
  const Eigen::Index feat0 = frames + shape_.elements;
  if (shape_.arch == PolicyArch::symmetric_groups) {
    for (int f = 0; f < frames; ++f) {
      group_re_.backward(pass.re[f], dhead_in.segment(feat0 + f * g, g), grad.segment(0, n_re));
      group_im_.backward(pass.im[f], dhead_in.segment(feat0 + (frames + f) * g, g), grad.segment(n_re, n_im));
    }
  } else {
    joint_.backward(pass.joint, dhead_in.segment(feat0, 2 * frames * g), grad.segment(n_re + n_im, n_joint));
  }
  return grad;
}

std::size_t PolicyNet::parameter_count() const {
  return group_re_.parameter_count() + group_im_.parameter_count() + joint_.parameter_count() +
         head_.parameter_count();
}

std::size_t PolicyNet::feature_parameter_count() const {
  return group_re_.parameter_count() + group_im_.parameter_count() + joint_.parameter_count();
}

RVector PolicyNet::parameters() const {
  RVector flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for (const Mlp* m : {&group_re_, &group_im_, &joint_, &head_}) {
    const auto n = static_cast<Eigen::Index>(m->parameter_count());
    if (n) flat.segment(pos, n) = m->parameters();
    pos += n;
  }
  return flat;
}

void PolicyNet::set_parameters(const Eigen::Ref<const RVector>& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) throw ShapeError("policy: parameter vector length");
  Eigen::Index pos = 0;
  for (Mlp* m : {&group_re_, &group_im_, &joint_, &head_}) {
    const auto n = static_cast<Eigen::Index>(m->parameter_count());
    if (n) m->set_parameters(flat.segment(pos, n));
    pos += n;
  }
}

// ---------------------------------------------------------------------------

std::string to_string(SensingArch a) {
  switch (a) {
    case SensingArch::decoder_mlp: return "decoder_mlp";
    case SensingArch::raw_mlp: return "raw_mlp";
    case SensingArch::decoder_threshold: return "decoder_threshold";
  }
  return "decoder_mlp";
}

SensingArch sensing_arch_from_string(const std::string& s) {
  if (s == "decoder_mlp") return SensingArch::decoder_mlp;
  if (s == "raw_mlp") return SensingArch::raw_mlp;
  if (s == "decoder_threshold") return SensingArch::decoder_threshold;
  throw InvalidInput("unknown sensing architecture '" + s + "'");
}

double cross_entropy(const RVector& predicted, const Occupancy& truth) {
  if (static_cast<std::size_t>(predicted.size()) != truth.size()) throw ShapeError("cross_entropy: length mismatch");
  double ce = 0.0;
  for (std::size_t m = 0; m < truth.size(); ++m) {
    const double p = std::clamp(predicted(static_cast<Eigen::Index>(m)), kProbabilityFloor, 1.0 - kProbabilityFloor);
    ce -= truth[m] ? std::log(p) : std::log(1.0 - p);
  }
  return ce;
}

SensingNet::SensingNet(const SensingShape& shape, Rng& rng) : shape_(shape) {
  if (shape.grids < 1 || shape.frames < 1) throw InvalidInput("sensing: dimensions must be positive");
  if (shape.arch == SensingArch::decoder_threshold) {
    mlp_ = Mlp({1, 1}, Activation::sigmoid, rng);
    return;
  }
  std::vector<int> sizes{shape.arch == SensingArch::raw_mlp ? 2 * shape.frames : 2 * shape.grids};
  sizes.insert(sizes.end(), shape.hidden.begin(), shape.hidden.end());
  sizes.push_back(shape.grids);
  mlp_ = Mlp(sizes, Activation::sigmoid, rng);
}

RVector SensingNet::forward(const CVector& measurement, const CMatrix& gamma_pinv, Cache* cache) const {
  const int grids = shape_.grids;
  if (shape_.arch == SensingArch::raw_mlp) {
    if (measurement.size() != shape_.frames) throw ShapeError("sensing: measurement length");
    RVector in(2 * measurement.size());
    in << measurement.real() * shape_.input_scale, measurement.imag() * shape_.input_scale;
    if (cache) cache->mlp.resize(1);
    return mlp_.forward(in, cache ? &cache->mlp[0] : nullptr);
  }

  if (gamma_pinv.rows() != grids || gamma_pinv.cols() != measurement.size())
    throw ShapeError("sensing: pseudo-inverse shape does not match measurement / grid count");
  CVector decoded = gamma_pinv * measurement;
  RVector out;
  if (shape_.arch == SensingArch::decoder_mlp) {
    RVector in(2 * grids);
    in << decoded.real(), decoded.imag();
    if (cache) cache->mlp.resize(1);
    out = mlp_.forward(in, cache ? &cache->mlp[0] : nullptr);
  } else {
    out.resize(grids);
    if (cache) cache->mlp.resize(static_cast<std::size_t>(grids));
    for (int m = 0; m < grids; ++m) {
      RVector in(1);
      in(0) = std::norm(decoded(m));
      out(m) = mlp_.forward(in, cache ? &cache->mlp[m] : nullptr)(0);
    }
  }
  if (cache) cache->decoded = std::move(decoded);
  return out;
}

void SensingNet::sample_grad(const CVector& y, const Occupancy& truth, const CMatrix& gamma_pinv, double& loss,
                             Eigen::Ref<RVector> grad) const {
  Cache cache;
  const RVector p = forward(y, gamma_pinv, &cache);
  loss += cross_entropy(p, truth);
  RVector dp(p.size());
  for (Eigen::Index m = 0; m < p.size(); ++m) {
    const double v = p(m);
    if (v < kProbabilityFloor || v > 1.0 - kProbabilityFloor) {
      dp(m) = 0.0;  // clamp is flat here
    } else {
      dp(m) = truth[static_cast<std::size_t>(m)] ? -1.0 / v : 1.0 / (1.0 - v);
    }
  }
  if (shape_.arch == SensingArch::decoder_threshold) {
    for (Eigen::Index m = 0; m < p.size(); ++m) {
      RVector g(1);
      g(0) = dp(m);
      mlp_.backward(cache.mlp[static_cast<std::size_t>(m)], g, grad);
    }
  } else {
    mlp_.backward(cache.mlp[0], dp, grad);
  }
}

std::pair<double, RVector> SensingNet::loss_grad(const SensingBatch& batch, unsigned threads) const {
  const std::size_t n = batch.size();
  if (n == 0) throw InvalidInput("sensing: empty batch");
  if (batch.truth.size() != n) throw ShapeError("sensing: batch truth length");
  const auto params = static_cast<Eigen::Index>(parameter_count());

  // Fixed chunking keeps the reduction order independent of the thread count.
  const std::size_t chunks = std::min<std::size_t>(n, 32);
  std::vector<double> chunk_loss(chunks, 0.0);
  std::vector<RVector> chunk_grad(chunks, RVector::Zero(params));
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t lo = c * n / chunks;
    const std::size_t hi = (c + 1) * n / chunks;
    for (std::size_t i = lo; i < hi; ++i)
      sample_grad(batch.measurements[i], batch.truth[i], batch.gamma_pinv, chunk_loss[c], chunk_grad[c]);
  });
  double loss = 0.0;
  RVector grad = RVector::Zero(params);
  for (std::size_t c = 0; c < chunks; ++c) {
    loss += chunk_loss[c];
    grad += chunk_grad[c];
  }
  const double inv = 1.0 / static_cast<double>(n);
  return {loss * inv, grad * inv};
}

double SensingNet::loss(const SensingBatch& batch, unsigned threads) const {
  const std::size_t n = batch.size();
  if (n == 0) throw InvalidInput("sensing: empty batch");
  const std::size_t chunks = std::min<std::size_t>(n, 32);
  std::vector<double> chunk_loss(chunks, 0.0);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t lo = c * n / chunks;
    const std::size_t hi = (c + 1) * n / chunks;
    for (std::size_t i = lo; i < hi; ++i)
      chunk_loss[c] += cross_entropy(forward(batch.measurements[i], batch.gamma_pinv), batch.truth[i]);
  });
  double loss = 0.0;
  for (double l : chunk_loss) loss += l;
  return loss / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

void write_checkpoint(std::ostream& out, const PolicyNet& policy, const SensingNet& sensing) {
  const auto& ps = policy.shape();
  out << "metasense-checkpoint 1\n";
  out << "policy " << to_string(ps.arch) << ' ' << ps.frames << ' ' << ps.elements << ' ' << ps.states << ' '
      << ps.grids << ' ' << ps.group_out << '\n';
  write_ints(out, "policy_group_hidden", ps.group_hidden);
  write_ints(out, "policy_head_hidden", ps.head_hidden);
  write_values(out, "policy_params", policy.parameters());

  const auto& ss = sensing.shape();
  char scale[40];
  std::snprintf(scale, sizeof scale, "%.17g", ss.input_scale);
  out << "sensing " << to_string(ss.arch) << ' ' << ss.grids << ' ' << ss.frames << ' ' << scale << '\n';
  write_ints(out, "sensing_hidden", ss.hidden);
  write_values(out, "sensing_params", sensing.parameters());
  out << "end\n";
}

std::pair<PolicyNet, SensingNet> read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "metasense-checkpoint")
    throw InvalidInput("checkpoint: not a metasense checkpoint");
  if (version != 1) throw InvalidInput("checkpoint: unsupported version " + std::to_string(version));

  std::string tag, arch;
  PolicyShape ps;
  if (!(in >> tag >> arch >> ps.frames >> ps.elements >> ps.states >> ps.grids >> ps.group_out) || tag != "policy")
    throw InvalidInput("checkpoint: malformed policy header");
  ps.arch = policy_arch_from_string(arch);
  ps.group_hidden = read_ints(in, "policy_group_hidden");
  ps.head_hidden = read_ints(in, "policy_head_hidden");
  Rng unused(0);
  PolicyNet policy(ps, unused);
  policy.set_parameters(read_values(in, "policy_params"));

  SensingShape ss;
  std::string scale;
  if (!(in >> tag >> arch >> ss.grids >> ss.frames >> scale) || tag != "sensing")
    throw InvalidInput("checkpoint: malformed sensing header");
  ss.arch = sensing_arch_from_string(arch);
  ss.input_scale = std::strtod(scale.c_str(), nullptr);
  ss.hidden = read_ints(in, "sensing_hidden");
  SensingNet sensing(ss, unused);
  sensing.set_parameters(read_values(in, "sensing_params"));
  if (!(in >> tag) || tag != "end") throw InvalidInput("checkpoint: missing end marker");
  return {std::move(policy), std::move(sensing)};
}

void save_checkpoint(const std::filesystem::path& path, const PolicyNet& policy, const SensingNet& sensing) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(out, policy, sensing);
}

std::pair<PolicyNet, SensingNet> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace metasense
