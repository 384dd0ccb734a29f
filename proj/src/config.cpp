#include "metasense/config.hpp"

#include "metasense/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace metasense {

using json = nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Reads one JSON object and remembers which keys were consumed so that
// anything left over can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("expected an object", path_.empty() ? "<root>" : path_);
  }

  const json* find(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void get(const std::string& key, int& out) {
    if (auto v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError("expected an integer", at(key));
      out = v->get<int>();
    }
  }
  void get(const std::string& key, std::size_t& out) {
    if (auto v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError("expected a non-negative integer", at(key));
      out = v->get<std::size_t>();
    }
  }
  void get(const std::string& key, unsigned& out) {
    std::size_t v = out;
    get(key, v);
    out = static_cast<unsigned>(v);
  }
  void get(const std::string& key, double& out) {
    if (auto v = find(key)) {
      if (!v->is_number()) throw ConfigError("expected a number", at(key));
      out = v->get<double>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (auto v = find(key)) {
      if (!v->is_boolean()) throw ConfigError("expected true or false", at(key));
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (auto v = find(key)) {
      if (!v->is_string()) throw ConfigError("expected a string", at(key));
      out = v->get<std::string>();
    }
  }
  template <class T>
  void get(const std::string& key, std::vector<T>& out) {
    if (auto v = find(key)) {
      if (!v->is_array()) throw ConfigError("expected a list", at(key));
      std::vector<T> tmp;
      for (std::size_t i = 0; i < v->size(); ++i) {
        const json& e = (*v)[i];
        const std::string p = at(key) + "[" + std::to_string(i) + "]";
        if constexpr (std::is_same_v<T, std::string>) {
          if (!e.is_string()) throw ConfigError("expected a string", p);
        } else if constexpr (std::is_integral_v<T>) {
          if (!e.is_number_integer()) throw ConfigError("expected an integer", p);
        } else {
          if (!e.is_number()) throw ConfigError("expected a number", p);
        }
        tmp.push_back(e.get<T>());
      }
      out = std::move(tmp);
    }
  }
  void get(const std::string& key, Vec3& out) {
    if (auto v = find(key)) {
      if (!v->is_array() || v->size() != 3) throw ConfigError("expected [x, y, z]", at(key));
      for (int i = 0; i < 3; ++i) {
        if (!(*v)[i].is_number()) throw ConfigError("expected a number", at(key) + "[" + std::to_string(i) + "]");
        out(i) = (*v)[i].get<double>();
      }
    }
  }

  template <class E>
  void get_enum(const std::string& key, E& out, const std::vector<std::pair<std::string, E>>& names) {
    std::string s;
    get(key, s);
    if (!find(key)) return;
    for (const auto& [name, value] : names) {
      if (name == s) {
        out = value;
        return;
      }
    }
    std::string allowed;
    for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : ", ") + name;
    throw ConfigError("unknown value '" + s + "' (allowed: " + allowed + ")", at(key));
  }

  /// Runs `body` on the nested object `key` if present.
  template <class F>
  void child(const std::string& key, F&& body) {
    if (auto v = find(key)) {
      Reader r(*v, at(key));
      body(r);
      r.finish();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key", at(it.key()));
    }
  }

  std::string at(const std::string& key) const { return join(path_, key); }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const std::vector<std::pair<std::string, SceneSetMode>> kSceneModes{{"exhaustive", SceneSetMode::exhaustive},
                                                                    {"sampled", SceneSetMode::sampled}};
const std::vector<std::pair<std::string, TrainConfig::Reduction>> kReductions{
    {"sum", TrainConfig::Reduction::sum}, {"mean", TrainConfig::Reduction::mean}};
const std::vector<std::pair<std::string, TrainConfig::Baseline>> kBaselines{
    {"none", TrainConfig::Baseline::none},
    {"running_mean", TrainConfig::Baseline::running_mean},
    {"greedy", TrainConfig::Baseline::greedy}};
const std::vector<std::pair<std::string, PolicyArch>> kPolicyArchs{{"symmetric_groups", PolicyArch::symmetric_groups},
                                                                   {"single_mlp", PolicyArch::single_mlp}};
const std::vector<std::pair<std::string, SensingArch>> kSensingArchs{
    {"decoder_mlp", SensingArch::decoder_mlp},
    {"raw_mlp", SensingArch::raw_mlp},
    {"decoder_threshold", SensingArch::decoder_threshold}};
const std::vector<std::pair<std::string, BoundMode>> kBoundModes{{"exact", BoundMode::exact},
                                                                 {"sampled", BoundMode::sampled}};
const std::vector<std::pair<std::string, NoiseTerm>> kNoiseTerms{{"row", NoiseTerm::row},
                                                                 {"literal", NoiseTerm::literal}};

template <class E>
std::string name_of(E value, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [name, v] : names)
    if (v == value) return name;
  return "?";
}

void read_scene_set(Reader& r, SceneSetSpec& spec) {
  r.get_enum("mode", spec.mode, kSceneModes);
  r.get("count", spec.count);
}

json scene_set_json(const SceneSetSpec& spec) {
  return {{"mode", name_of(spec.mode, kSceneModes)}, {"count", spec.count}};
}

json vec3_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

void apply_json(const json& root, ExperimentConfig& c) {
  Reader r(root, "");
  std::string preset = c.preset;
  r.get("preset", preset);
  r.get("seed", c.seed);
  r.get("threads", c.threads);
  r.get("out", c.out);
  r.child("geometry", [&](Reader& g) {
    auto& b = c.geometry;
    g.get("tx", b.tx);
    g.get("rx", b.rx);
    g.get("surface_rows", b.surface_rows);
    g.get("surface_cols", b.surface_cols);
    g.get("element_spacing", b.element_spacing);
    g.get("group_rows", b.group_rows);
    g.get("group_cols", b.group_cols);
    g.get("tx_gain", b.tx_gain);
    g.get("rx_gain", b.rx_gain);
  });
  r.child("channel", [&](Reader& g) {
    auto& b = c.channel;
    g.get("wavelength", b.wavelength);
    g.get("transmit_power", b.transmit_power);
    g.get("noise_power", b.noise_power);
    g.get("env_noise_power", b.env_noise_power);
    g.get("n_states", b.n_states);
    g.get("table_path", b.table_path);
  });
  r.child("scene", [&](Reader& g) {
    auto& b = c.scene;
    g.get("grids", b.grids);
    g.get("layout", b.layout);
    g.get("cell", b.cell);
    g.get("center", b.center);
    g.get("priors", b.priors);
    g.get("reflection_variance", b.reflection_variance);
    g.get("scene_file", b.scene_file);
    g.child("train_set", [&](Reader& s) { read_scene_set(s, b.train_set); });
    g.child("eval_set", [&](Reader& s) { read_scene_set(s, b.eval_set); });
  });
  r.child("train", [&](Reader& g) {
    auto& t = c.training;
    g.get("frames", t.frames);
    g.get("n_mc", t.n_mc);
    g.get("epochs", t.epochs);
    g.get("lr0", t.lr0);
    g.get("resample_scenes", t.resample_scenes);
    g.get("eval_every", t.eval_every);
    g.get("eval_n_mc", t.eval_n_mc);
    g.get("eval_rollouts", t.eval_rollouts);
    g.get_enum("reduction", t.reduction, kReductions);
    g.get_enum("baseline", t.baseline, kBaselines);
    g.get("baseline_window", t.baseline_window);
    g.get("grad_clip", t.grad_clip);
    g.get("fixed_random_control", t.fixed_random_control);
    g.get("record_wall_time", t.record_wall_time);
    g.child("policy", [&](Reader& p) {
      p.get_enum("arch", t.policy.arch, kPolicyArchs);
      p.get("group_hidden", t.policy.group_hidden);
      p.get("group_out", t.policy.group_out);
      p.get("head_hidden", t.policy.head_hidden);
    });
    g.child("sensing", [&](Reader& p) {
      p.get_enum("arch", t.sensing.arch, kSensingArchs);
      p.get("hidden", t.sensing.hidden);
      p.get("input_scale", t.sensing.input_scale);
    });
  });
  r.child("bound", [&](Reader& g) {
    auto& b = c.bound;
    g.get("cost_cap", b.cost_cap);
    g.get_enum("mode", b.mode, kBoundModes);
    g.get("samples", b.samples);
    g.get_enum("noise", b.noise, kNoiseTerms);
    g.get("control", b.control);
    g.get("control_path", b.control_path);
    g.get("mc_draws", b.mc_draws);
  });
  r.child("bench", [&](Reader& g) {
    auto& b = c.bench;
    g.get("repeats", b.repeats);
    g.get("frames", b.frames);
    g.get("elements", b.elements);
    g.get("states", b.states);
    g.get("grids", b.grids);
    g.get("doublings", b.doublings);
    g.get("train_epochs", b.train_epochs);
  });
  r.child("compare", [&](Reader& g) { g.get("algorithms", c.compare.algorithms); });
  r.finish();
}

bool known_algorithm(const std::string& name) {
  static const std::set<std::string> names{"prpg", "random-control", "no-decoder", "decoder-only",
                                           "single-mlp-policy"};
  if (names.count(name)) return true;
  if (name.rfind("mimo-", 0) == 0) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(name.substr(5), &used);
      return used == name.size() - 5 && n >= 1;
    } catch (const std::exception&) {
      return false;
    }
  }
  return false;
}

void require(bool ok, const std::string& what, const std::string& field) {
  if (!ok) throw ConfigError(what, field);
}

void require_file(const std::string& path, const std::string& field) {
  if (!path.empty() && !std::filesystem::is_regular_file(path)) throw ConfigError("file not found: " + path, field);
}

void check_probability_list(const std::vector<double>& v, int grids, const std::string& field, bool positive) {
  require(v.size() == 1 || v.size() == static_cast<std::size_t>(grids), "needs 1 or M entries", field);
  for (double x : v) {
    if (positive)
      require(x > 0.0 && std::isfinite(x), "entries must be positive", field);
    else
      require(x >= 0.0 && x <= 1.0, "entries must lie in [0, 1]", field);
  }
}

RVector broadcast(const std::vector<double>& v, int grids) {
  RVector out(grids);
  for (int m = 0; m < grids; ++m) out(m) = v.size() == 1 ? v[0] : v[static_cast<std::size_t>(m)];
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(preset == "tiny" || preset == "paper", "unknown preset (allowed: tiny, paper)", "preset");
  const auto& g = geometry;
  require(g.surface_rows >= 1, "must be >= 1", "geometry.surface_rows");
  require(g.surface_cols >= 1, "must be >= 1", "geometry.surface_cols");
  require(g.element_spacing > 0.0, "must be positive", "geometry.element_spacing");
  require(g.group_rows >= 1 && g.surface_rows % g.group_rows == 0, "must divide surface_rows", "geometry.group_rows");
  require(g.group_cols >= 1 && g.surface_cols % g.group_cols == 0, "must divide surface_cols", "geometry.group_cols");
  require(g.tx_gain > 0.0, "must be positive", "geometry.tx_gain");
  require(g.rx_gain > 0.0, "must be positive", "geometry.rx_gain");

  const auto& ch = channel;
  require(ch.wavelength > 0.0, "must be positive", "channel.wavelength");
  require(ch.transmit_power > 0.0, "must be positive", "channel.transmit_power");
  require(ch.noise_power >= 0.0, "must be non-negative", "channel.noise_power");
  require(ch.env_noise_power >= 0.0, "must be non-negative", "channel.env_noise_power");
  require(ch.n_states >= 1, "must be >= 1", "channel.n_states");
  require_file(ch.table_path, "channel.table_path");

  const auto& s = scene;
  require(s.grids >= 1, "must be >= 1", "scene.grids");
  require(s.layout == "2d" || s.layout == "3d", "must be \"2d\" or \"3d\"", "scene.layout");
  require(s.cell > 0.0, "must be positive", "scene.cell");
  check_probability_list(s.priors, s.grids, "scene.priors", false);
  check_probability_list(s.reflection_variance, s.grids, "scene.reflection_variance", true);
  require_file(s.scene_file, "scene.scene_file");
  for (const auto& [set, name] : {std::pair{&s.train_set, "scene.train_set"}, {&s.eval_set, "scene.eval_set"}}) {
    if (set->mode == SceneSetMode::exhaustive)
      require(s.grids <= static_cast<int>(kMaxExhaustiveGrids), "exhaustive scene sets need M <= 16",
              std::string(name) + ".mode");
    else
      require(set->count >= 1, "sampled scene sets need count >= 1", std::string(name) + ".count");
  }

  make_train_config(*this).validate();
  require(training.policy.group_out >= 1, "must be >= 1", "train.policy.group_out");
  for (int h : training.policy.group_hidden) require(h >= 1, "layer sizes must be >= 1", "train.policy.group_hidden");
  for (int h : training.policy.head_hidden) require(h >= 1, "layer sizes must be >= 1", "train.policy.head_hidden");
  for (int h : training.sensing.hidden) require(h >= 1, "layer sizes must be >= 1", "train.sensing.hidden");
  require(training.sensing.input_scale > 0.0, "must be positive", "train.sensing.input_scale");

  const auto& b = bound;
  require(b.cost_cap > 0.0, "must be positive", "bound.cost_cap");
  require(b.samples >= 1, "must be >= 1", "bound.samples");
  require(b.control == "random" || b.control == "checkpoint" || b.control == "file",
          "must be \"random\", \"checkpoint\" or \"file\"", "bound.control");
  if (b.control == "file") require(!b.control_path.empty(), "required when control is \"file\"", "bound.control_path");
  if (b.control != "random") require_file(b.control_path, "bound.control_path");
  if (b.mode == BoundMode::exact)
    require(s.grids - 1 <= kMaxEnumeratedInterferers, "exact mode needs M <= 13", "bound.mode");

  require(bench.repeats >= 1, "must be >= 1", "bench.repeats");
  require(bench.frames >= 1 && bench.elements >= 1 && bench.states >= 1 && bench.grids >= 1,
          "base sizes must be >= 1", "bench");
  require(bench.doublings >= 1, "must be >= 1", "bench.doublings");
  require(bench.train_epochs >= 1, "must be >= 1", "bench.train_epochs");

  require(compare.algorithms.size() >= 2, "needs at least two algorithms", "compare.algorithms");
  for (std::size_t i = 0; i < compare.algorithms.size(); ++i)
    require(known_algorithm(compare.algorithms[i]), "unknown algorithm '" + compare.algorithms[i] + "'",
            "compare.algorithms[" + std::to_string(i) + "]");
  require(!out.empty(), "must not be empty", "out");
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  c.training.epochs = 2000;
  c.training.eval_every = 100;
  if (name == "tiny") return c;
  if (name != "paper") throw ConfigError("unknown preset '" + name + "' (allowed: tiny, paper)", "preset");

  // 16 groups of 12x12 elements on a 69 cm square board.
  c.geometry.surface_rows = 48;
  c.geometry.surface_cols = 48;
  c.geometry.element_spacing = 0.69 / 48.0;
  c.geometry.group_rows = 12;
  c.geometry.group_cols = 12;
  c.scene.grids = 64;
  c.scene.layout = "3d";
  c.scene.train_set = {SceneSetMode::sampled, 64};
  c.scene.eval_set = {SceneSetMode::sampled, 64};
  c.training.frames = 16;
  c.training.epochs = 10000;
  c.training.eval_every = 200;
  c.training.policy.group_hidden = {512};
  c.training.policy.group_out = 256;
  c.training.sensing.hidden = {512, 256};
  c.bound.mode = BoundMode::sampled;
  c.bench.grids = 8;
  return c;
}

ExperimentConfig parse_config(const std::string& json_text, const std::string& default_preset) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what(), "<root>");
  }
  if (!root.is_object()) throw ConfigError("expected an object", "<root>");
  std::string preset = default_preset;
  if (auto it = root.find("preset"); it != root.end()) {
    if (!it->is_string()) throw ConfigError("expected a string", "preset");
    preset = it->get<std::string>();
  }
  ExperimentConfig c = preset_config(preset);
  apply_json(root, c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::string& default_preset) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string(), "--config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), default_preset);
}

std::string dump_config(const ExperimentConfig& c) {
  const auto& t = c.training;
  json j;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out"] = c.out;
  j["geometry"] = {{"tx", vec3_json(c.geometry.tx)},
                   {"rx", vec3_json(c.geometry.rx)},
                   {"surface_rows", c.geometry.surface_rows},
                   {"surface_cols", c.geometry.surface_cols},
                   {"element_spacing", c.geometry.element_spacing},
                   {"group_rows", c.geometry.group_rows},
                   {"group_cols", c.geometry.group_cols},
                   {"tx_gain", c.geometry.tx_gain},
                   {"rx_gain", c.geometry.rx_gain}};
  j["channel"] = {{"wavelength", c.channel.wavelength},
                  {"transmit_power", c.channel.transmit_power},
                  {"noise_power", c.channel.noise_power},
                  {"env_noise_power", c.channel.env_noise_power},
                  {"n_states", c.channel.n_states},
                  {"table_path", c.channel.table_path}};
  j["scene"] = {{"grids", c.scene.grids},
                {"layout", c.scene.layout},
                {"cell", c.scene.cell},
                {"center", vec3_json(c.scene.center)},
                {"priors", c.scene.priors},
                {"reflection_variance", c.scene.reflection_variance},
                {"scene_file", c.scene.scene_file},
                {"train_set", scene_set_json(c.scene.train_set)},
                {"eval_set", scene_set_json(c.scene.eval_set)}};
  j["train"] = {{"frames", t.frames},
                {"n_mc", t.n_mc},
                {"epochs", t.epochs},
                {"lr0", t.lr0},
                {"resample_scenes", t.resample_scenes},
                {"eval_every", t.eval_every},
                {"eval_n_mc", t.eval_n_mc},
                {"eval_rollouts", t.eval_rollouts},
                {"reduction", name_of(t.reduction, kReductions)},
                {"baseline", name_of(t.baseline, kBaselines)},
                {"baseline_window", t.baseline_window},
                {"grad_clip", t.grad_clip},
                {"fixed_random_control", t.fixed_random_control},
                {"record_wall_time", t.record_wall_time},
                {"policy",
                 {{"arch", name_of(t.policy.arch, kPolicyArchs)},
                  {"group_hidden", t.policy.group_hidden},
                  {"group_out", t.policy.group_out},
                  {"head_hidden", t.policy.head_hidden}}},
                {"sensing",
                 {{"arch", name_of(t.sensing.arch, kSensingArchs)},
                  {"hidden", t.sensing.hidden},
                  {"input_scale", t.sensing.input_scale}}}};
  j["bound"] = {{"cost_cap", c.bound.cost_cap},
                {"mode", name_of(c.bound.mode, kBoundModes)},
                {"samples", c.bound.samples},
                {"noise", name_of(c.bound.noise, kNoiseTerms)},
                {"control", c.bound.control},
                {"control_path", c.bound.control_path},
                {"mc_draws", c.bound.mc_draws}};
  j["bench"] = {{"repeats", c.bench.repeats},   {"frames", c.bench.frames},
                {"elements", c.bench.elements}, {"states", c.bench.states},
                {"grids", c.bench.grids},       {"doublings", c.bench.doublings},
                {"train_epochs", c.bench.train_epochs}};
  j["compare"] = {{"algorithms", c.compare.algorithms}};
  return j.dump(2) + "\n";
}

std::vector<Vec3> tiled_array(const GeometryBlock& g) {
  if (g.surface_rows % g.group_rows != 0 || g.surface_cols % g.group_cols != 0)
    throw ConfigError("group tiles must divide the surface", "geometry.group_rows");
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(g.n_elements()));
  const double s = g.element_spacing;
  for (int tr = 0; tr < g.surface_rows / g.group_rows; ++tr)
    for (int tc = 0; tc < g.surface_cols / g.group_cols; ++tc)
      for (int i = 0; i < g.group_rows; ++i)
        for (int k = 0; k < g.group_cols; ++k) {
          const int r = tr * g.group_rows + i, c = tc * g.group_cols + k;
          out.emplace_back(0.0, (c - (g.surface_cols - 1) / 2.0) * s, ((g.surface_rows - 1) / 2.0 - r) * s);
        }
  return out;
}

Geometry make_geometry(const ExperimentConfig& c) {
  Geometry g;
  g.tx_position = c.geometry.tx;
  g.rx_position = c.geometry.rx;
  g.element_positions = tiled_array(c.geometry);
  const auto counts = c.scene.layout == "3d" ? packing_3d(c.scene.grids) : packing_2d(c.scene.grids);
  g.grid_centers = grid_layout(counts, c.scene.cell, c.scene.center);
  g.wavelength = c.channel.wavelength;
  g.tx_gain = c.geometry.tx_gain;
  g.rx_gain = c.geometry.rx_gain;
  g.transmit_power = c.channel.transmit_power;
  g.noise_power = c.channel.noise_power;
  g.env_noise_power = c.channel.env_noise_power;
  g.validate();
  return g;
}

ReflectionTable make_table(const ExperimentConfig& c) {
  if (c.channel.table_path.empty()) return ReflectionTable::uniform_phase(c.channel.n_states);
  require_file(c.channel.table_path, "channel.table_path");
  ReflectionTable t = ReflectionTable::load(c.channel.table_path);
  if (t.n_states() != c.channel.n_states)
    throw ConfigError("table has " + std::to_string(t.n_states()) + " states", "channel.n_states");
  return t;
}

SceneDistribution make_scene_distribution(const ExperimentConfig& c) {
  SceneDistribution d;
  d.priors = broadcast(c.scene.priors, c.scene.grids);
  d.reflection_variance = broadcast(c.scene.reflection_variance, c.scene.grids);
  d.validate();
  return d;
}

TrainEnv make_env(const ExperimentConfig& c) {
  const Geometry g = make_geometry(c);
  const ReflectionTable table = make_table(c);
  table.check_compatible(g.n_elements(), g.n_grids());
  const CMatrix full = build_projection_matrix(g, table);
  TrainEnv env;
  env.model.projection = ElementGrouping(c.geometry.n_elements(), c.geometry.group_size()).apply(full, table.n_states());
  env.model.amplitude = g.amplitude();
  env.model.noise_variance = g.measurement_noise_variance();
  env.scenes = make_scene_distribution(c);
  env.elements = c.geometry.n_groups();
  return env;
}

TrainConfig make_train_config(const ExperimentConfig& c) {
  TrainConfig t = c.training;
  t.n_states = c.channel.n_states;
  t.seed = c.seed;
  t.threads = c.threads;
  t.scene_set = c.scene.train_set;
  t.eval_scene_set = c.scene.eval_set;
  if (!c.scene.scene_file.empty() && std::filesystem::is_regular_file(c.scene.scene_file))
    t.scene_masks = read_scene_file(c.scene.scene_file, static_cast<std::size_t>(c.scene.grids));
  return t;
}

}  // namespace metasense
