#include "metasense/harness.hpp"

#include "metasense/errors.hpp"
#include "metasense/mdp.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace metasense {

namespace {

using Clock = std::chrono::steady_clock;

std::filesystem::path out_dir(const ExperimentConfig& config) {
  std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);
  return dir;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  return out;
}

void write_snapshot(const ExperimentConfig& config) {
  open_out(out_dir(config) / "config.json") << dump_config(config);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Seconds per call of `body`, median over `repeats` batches of at least 2 ms.
template <class F>
double time_call(int repeats, F&& body) {
  std::vector<double> samples;
  for (int r = 0; r < repeats; ++r) {
    int calls = 0;
    const auto start = Clock::now();
    double elapsed = 0.0;
    do {
      body();
      ++calls;
      elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    } while (elapsed < 2e-3);
    samples.push_back(elapsed / calls);
  }
  return median(samples);
}

// Least-squares slope of log(y) against log(x).
double fit_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(std::max(y[i], 1e-12)) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(std::max(y[i], 1e-12)) - my);
    sxx += dx * dx;
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Algorithm Algorithm::parse(const std::string& name) {
  using K = Kind;
  if (name == "prpg") return {K::prpg, 0};
  if (name == "random-control") return {K::random_control, 0};
  if (name == "no-decoder") return {K::no_decoder, 0};
  if (name == "decoder-only") return {K::decoder_only, 0};
  if (name == "single-mlp-policy") return {K::single_mlp_policy, 0};
  std::string digits;
  if (name.rfind("mimo-", 0) == 0) {
    digits = name.substr(5);
  } else if (name.rfind("mimo(", 0) == 0 && name.size() > 6 && name.back() == ')') {
    digits = name.substr(5, name.size() - 6);
  }
  if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const int n = std::stoi(digits);
    if (n >= 1) return {K::mimo, n};
  }
  throw InvalidInput("unknown algorithm '" + name +
                     "' (expected prpg, random-control, no-decoder, decoder-only, single-mlp-policy or mimo-<n>)");
}

std::string Algorithm::name() const {
  switch (kind) {
    case Kind::prpg: return "prpg";
    case Kind::random_control: return "random-control";
    case Kind::no_decoder: return "no-decoder";
    case Kind::decoder_only: return "decoder-only";
    case Kind::single_mlp_policy: return "single-mlp-policy";
    case Kind::mimo: return "mimo-" + std::to_string(mimo_antennas);
  }
  return "?";
}

CMatrix mimo_gamma(const ExperimentConfig& config, int antennas) {
  if (antennas < 1) throw InvalidInput("mimo: need at least one antenna");
  const Geometry g = make_geometry(config);
  constexpr double kSpacing = 0.1;
  auto along_y = [&](const Vec3& center, int i) {
    return Vec3(center + Vec3(0.0, (i - (antennas - 1) / 2.0) * kSpacing, 0.0));
  };
  const double lambda = g.wavelength;
  const double pi = std::numbers::pi;
  // The total transmit power is split evenly over the Tx antennas.
  const double amp = std::sqrt(g.transmit_power / antennas);
  const double scale = lambda * lambda * std::sqrt(g.tx_gain * g.rx_gain) / (16.0 * pi * pi);
  CMatrix gamma = CMatrix::Zero(antennas, static_cast<Eigen::Index>(g.n_grids()));
  for (int r = 0; r < antennas; ++r) {
    const Vec3 rx = along_y(g.rx_position, r);
    for (int t = 0; t < antennas; ++t) {
      const Vec3 tx = along_y(g.tx_position, t);
      const cplx symbol = std::polar(amp, 2.0 * pi * t / antennas);
      for (std::size_t m = 0; m < g.n_grids(); ++m) {
        const double d1 = (g.grid_centers[m] - tx).norm();
        const double d2 = (rx - g.grid_centers[m]).norm();
        gamma(r, static_cast<Eigen::Index>(m)) +=
            symbol * scale / (d1 * d2) * std::polar(1.0, -2.0 * pi * (d1 + d2) / lambda);
      }
    }
  }
  return gamma;
}

std::pair<TrainConfig, TrainEnv> algorithm_setup(const ExperimentConfig& config, const Algorithm& algorithm) {
  config.validate();
  TrainConfig t = make_train_config(config);
  TrainEnv env = make_env(config);
  using K = Algorithm::Kind;
  switch (algorithm.kind) {
    case K::prpg: break;
    case K::random_control: t.fixed_random_control = true; break;
    case K::no_decoder:
      t.sensing.arch = SensingArch::raw_mlp;
      t.sensing.input_scale = 1.0 / (std::abs(env.model.amplitude) * env.model.projection.cwiseAbs().maxCoeff());
      break;
    case K::decoder_only: t.sensing.arch = SensingArch::decoder_threshold; break;
    case K::single_mlp_policy: t.policy.arch = PolicyArch::single_mlp; break;
    case K::mimo: env.model.fixed_gamma = mimo_gamma(config, algorithm.mimo_antennas); break;
  }
  return {t, env};
}

TrainResult run_algorithm(const ExperimentConfig& config, const Algorithm& algorithm) {
  auto [t, env] = algorithm_setup(config, algorithm);
  return train(t, env);
}

TrainResult run_train(const ExperimentConfig& config) {
  TrainResult result = run_algorithm(config, Algorithm{});
  const auto dir = out_dir(config);
  result.trace.write_csv(dir / "trace.csv");
  save_checkpoint(dir / "checkpoint.txt", result.policy, result.sensing);
  write_control_csv(dir / "control.csv", result.final_control);
  write_snapshot(config);
  return result;
}

LossTrace run_baseline(const ExperimentConfig& config, const std::string& which) {
  const Algorithm algorithm = Algorithm::parse(which);
  TrainResult result = run_algorithm(config, algorithm);
  const auto dir = out_dir(config);
  result.trace.write_csv(dir / ("baseline_" + algorithm.name() + ".csv"));
  write_snapshot(config);
  return result.trace;
}

void write_control_csv(const std::filesystem::path& path, const ControlMatrix& control) {
  auto out = open_out(path);
  out << "k";
  for (int n = 0; n < control.elements(); ++n) out << ",s_" << n + 1;
  out << '\n';
  for (int k = 0; k < control.frames(); ++k) {
    out << k + 1;
    for (int n = 0; n < control.elements(); ++n) out << ',' << control.state(k, n) + 1;
    out << '\n';
  }
}

ControlMatrix read_control_csv(const std::filesystem::path& path, int states) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open control file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("control file is empty");
  std::vector<std::vector<int>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<int> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stoi(cell));
      } catch (const std::exception&) {
        throw InvalidInput("control file: bad entry '" + cell + "'");
      }
    }
    if (row.size() < 2 || row[0] != static_cast<int>(rows.size()) + 1)
      throw InvalidInput("control file: rows must be numbered 1, 2, ...");
    rows.emplace_back(row.begin() + 1, row.end());
  }
  if (rows.empty()) throw InvalidInput("control file has no frames");
  const int elements = static_cast<int>(rows.front().size());
  ControlMatrix c(static_cast<int>(rows.size()), elements, states);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (static_cast<int>(rows[k].size()) != elements) throw InvalidInput("control file: ragged rows");
    for (int n = 0; n < elements; ++n) c.set(static_cast<int>(k), n, rows[k][static_cast<std::size_t>(n)] - 1);
  }
  return c;
}

ControlMatrix bound_control(const ExperimentConfig& config) {
  const auto& b = config.bound;
  const int frames = config.training.frames;
  const int elements = config.geometry.n_groups();
  const int states = config.channel.n_states;
  ControlMatrix control;
  if (b.control == "random") {
    // Same stream as the random-control baseline.
    Rng rng = Rng(config.seed).split(1);
    control = ControlMatrix::random(frames, elements, states, rng);
  } else if (b.control == "checkpoint") {
    const std::filesystem::path path =
        b.control_path.empty() ? std::filesystem::path(config.out) / "checkpoint.txt" : std::filesystem::path(b.control_path);
    auto [policy, sensing] = load_checkpoint(path);
    control = greedy_control(policy, make_env(config).model.projection);
  } else {
    control = read_control_csv(b.control_path, states);
  }
  if (control.elements() != elements || control.states() != states)
    throw ConfigError("control matrix does not match the surface", "bound.control_path");
  return control;
}

BoundInstance bound_instance(const ExperimentConfig& config, const ControlMatrix& control) {
  const TrainEnv env = make_env(config);
  const CMatrix gamma = measurement_matrix(env.model.amplitude, env.model.projection, control);
  return BoundInstance::make(gamma, env.scenes, config.channel.noise_power + config.channel.env_noise_power,
                             config.bound.cost_cap);
}

BoundReport run_bound(const ExperimentConfig& config) {
  config.validate();
  set_default_threads(config.threads);
  const BoundInstance inst = bound_instance(config, bound_control(config));
  BoundOptions options;
  options.mode = config.bound.mode;
  options.samples = config.bound.samples;
  options.seed = config.seed;
  options.noise = config.bound.noise;
  const BoundReport report = upper_bound(inst, options);
  const auto dir = out_dir(config);
  {
    auto out = open_out(dir / "bound.csv");
    report.write_grid_csv(out);
  }
  {
    auto out = open_out(dir / "bound_summary.csv");
    report.write_summary_csv(out);
  }
  if (config.bound.mc_draws > 0) {
    std::vector<double> thresholds;
    for (const auto& g : report.grids) thresholds.push_back(g.rho_hat);
    const EmpiricalLoss emp =
        empirical_detector_loss(inst, thresholds, config.bound.mc_draws, Rng(config.seed).split(5), config.threads);
    auto out = open_out(dir / "bound_validation.csv");
    out << "L_ub,empirical_loss,empirical_std_error,draws\n"
        << fmt(report.loss_ub) << ',' << fmt(emp.mean) << ',' << fmt(emp.std_error) << ',' << emp.draws << '\n';
  }
  write_snapshot(config);
  return report;
}

BenchResult run_bench(const ExperimentConfig& config) {
  config.validate();
  const auto& b = config.bench;
  BenchResult result;
  const Rng root(config.seed);

  auto measure = [&](const std::string& sweep, int frames, int elements, int states, int grids, PolicyArch arch) {
    Rng rng = root.split(result.rows.size());
    CMatrix projection(static_cast<Eigen::Index>(elements) * states, grids);
    for (Eigen::Index i = 0; i < projection.size(); ++i) projection(i) = sample_complex_gaussian(1.0, rng);
    PolicyShape ps = config.training.policy;
    ps.frames = frames;
    ps.elements = elements;
    ps.states = states;
    ps.grids = grids;
    ps.arch = arch;
    SensingShape ss = config.training.sensing;
    ss.grids = grids;
    ss.frames = frames;
    const PolicyNet policy(ps, rng);
    const SensingNet sensing(ss, rng);
    const auto dist = SceneDistribution::uniform(static_cast<std::size_t>(grids));
    const auto scenes = enumerate_scene_set(static_cast<std::size_t>(grids), dist, {SceneSetMode::sampled, 16}, rng);
    MeasurementModel model;
    model.projection = projection;
    model.noise_variance = 1e-4;

    BenchRow row{sweep, frames, elements, states, grids, to_string(arch), policy.parameter_count(),
                 policy.feature_parameter_count(), sensing.parameter_count(), 0.0, 0.0};
    MdpState mid = initial_state(frames, elements, states);
    for (int i = 0; i < frames * elements / 2; ++i) mid = transition(mid, i % states);
    row.action_seconds = time_call(b.repeats, [&] { (void)policy.probabilities(mid, projection); });
    std::uint64_t epoch = 0;
    row.train_seconds = time_call(b.repeats, [&] {
      Rng act = rng.split(epoch++);
      const Rollout rollout = rollout_episode(policy, projection, act);
      const SensingBatch batch =
          make_sensing_batch(model, rollout.terminal.control, scenes, config.training.n_mc, act.split(1));
      auto [ce, grad_w] = sensing.loss_grad(batch, 1);
      (void)policy_gradient(policy, rollout.buffer, episode_return(rollout.buffer, -ce), 0.0, projection);
    });
    result.rows.push_back(row);
  };

  struct Sweep {
    std::string name;
    int BenchBlock::*field;
  };
  const Sweep sweeps[] = {{"K", &BenchBlock::frames},
                          {"N", &BenchBlock::elements},
                          {"N_S", &BenchBlock::states},
                          {"M", &BenchBlock::grids}};
  for (const auto& sw : sweeps) {
    std::vector<double> size, action, training;
    for (int d = 0; d <= b.doublings; ++d) {
      BenchBlock s = b;
      s.*sw.field = (b.*sw.field) << d;
      measure(sw.name, s.frames, s.elements, s.states, s.grids, PolicyArch::symmetric_groups);
      size.push_back(s.*sw.field);
      action.push_back(result.rows.back().action_seconds);
      training.push_back(result.rows.back().train_seconds);
    }
    result.fits.push_back({sw.name, "action_seconds", fit_exponent(size, action)});
    result.fits.push_back({sw.name, "train_seconds", fit_exponent(size, training)});
  }
  // Feature-stage comparison at K >= 8, M >= 8.
  const int k = std::max(8, b.frames), m = std::max(8, b.grids);
  measure("arch", k, b.elements, b.states, m, PolicyArch::symmetric_groups);
  measure("arch", k, b.elements, b.states, m, PolicyArch::single_mlp);

  const auto dir = out_dir(config);
  {
    auto out = open_out(dir / "bench.csv");
    out << "sweep,frames,elements,states,grids,policy_arch,policy_params,feature_params,sensing_params\n";
    for (const auto& r : result.rows)
      out << r.sweep << ',' << r.frames << ',' << r.elements << ',' << r.states << ',' << r.grids << ','
          << r.policy_arch << ',' << r.policy_params << ',' << r.feature_params << ',' << r.sensing_params << '\n';
  }
  {
    auto out = open_out(dir / "bench_timing.csv");
    out << "sweep,frames,elements,states,grids,policy_arch,action_seconds,train_seconds\n";
    for (const auto& r : result.rows)
      out << r.sweep << ',' << r.frames << ',' << r.elements << ',' << r.states << ',' << r.grids << ','
          << r.policy_arch << ',' << fmt(r.action_seconds) << ',' << fmt(r.train_seconds) << '\n';
  }
  {
    auto out = open_out(dir / "bench_fit.csv");
    out << "sweep,quantity,exponent\n";
    for (const auto& f : result.fits) out << f.sweep << ',' << f.quantity << ',' << fmt(f.exponent) << '\n';
  }
  write_snapshot(config);
  return result;
}

ComparisonReport run_compare(const ExperimentConfig& config, const std::vector<std::string>& algorithms) {
  if (algorithms.size() < 2) throw InvalidInput("compare: need at least two algorithms");
  std::vector<Algorithm> parsed;
  for (const auto& a : algorithms) parsed.push_back(Algorithm::parse(a));
  ComparisonReport report;
  for (const auto& a : parsed) {
    const auto start = Clock::now();
    TrainResult r = run_algorithm(config, a);
    ComparisonRow row;
    row.algorithm = a.name();
    row.seed = config.seed;
    row.initial_ce = r.trace.empty() ? 0.0 : r.trace.front().ce_eval;
    row.final_ce = r.trace.empty() ? 0.0 : r.trace.back().ce_eval;
    row.epochs = config.training.epochs;
    row.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    row.trace = std::move(r.trace);
    report.rows.push_back(std::move(row));
  }
  const auto dir = out_dir(config);
  {
    auto out = open_out(dir / "compare.csv");
    out << "algorithm,seed,initial_ce,final_ce,epochs\n";
    for (const auto& r : report.rows)
      out << r.algorithm << ',' << r.seed << ',' << fmt(r.initial_ce) << ',' << fmt(r.final_ce) << ',' << r.epochs
          << '\n';
  }
  {
    auto out = open_out(dir / "compare_traces.csv");
    out << "algorithm," << LossTrace::kHeader << '\n';
    for (const auto& r : report.rows) {
      std::ostringstream body;
      r.trace.write_csv(body);
      std::istringstream lines(body.str());
      std::string line;
      std::getline(lines, line);  // header
      while (std::getline(lines, line)) out << r.algorithm << ',' << line << '\n';
    }
  }
  {
    auto out = open_out(dir / "compare_timing.csv");
    out << "algorithm,wall_seconds\n";
    for (const auto& r : report.rows) out << r.algorithm << ',' << fmt(r.wall_seconds) << '\n';
  }
  write_snapshot(config);
  return report;
}

}  // namespace metasense
