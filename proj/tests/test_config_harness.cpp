#include "metasense/config.hpp"
#include "metasense/errors.hpp"
#include "metasense/harness.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

using namespace metasense;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("metasense_cfg_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(METASENSE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("presets validate") {
    CHECK_NOTHROW(preset_config("tiny").validate());
    CHECK_NOTHROW(preset_config("paper").validate());
    CHECK_THROWS_AS(preset_config("huge"), ConfigError);
    const ExperimentConfig tiny = preset_config("tiny");
    CHECK(tiny.scene.grids == 4);
    CHECK(tiny.geometry.n_elements() == 4);
    CHECK(tiny.training.frames == 4);
    CHECK(tiny.training.epochs == 2000);
    const ExperimentConfig full = preset_config("paper");
    CHECK(full.geometry.n_elements() == 2304);
    CHECK(full.geometry.n_groups() == 16);
  }

  TEST_CASE("unknown keys are rejected with their path") {
    try {
      parse_config(R"({"train": {"policy": {"bogus": 1}}})");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "train.policy.bogus");
    }
    CHECK_THROWS_AS(parse_config(R"({"seed": "x"})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"bound": {"mode": "fuzzy"}})"), ConfigError);
  }

  TEST_CASE("referenced files must exist") {
    ExperimentConfig c = preset_config("tiny");
    c.channel.table_path = "/nonexistent/table.csv";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = preset_config("tiny");
    c.scene.scene_file = "/nonexistent/scenes.csv";
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("range checks") {
    ExperimentConfig c = preset_config("tiny");
    c.geometry.group_rows = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = preset_config("tiny");
    c.scene.grids = 20;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = preset_config("tiny");
    c.compare.algorithms = {"prpg", "telepathy"};
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("dump and parse round-trip") {
    for (const char* name : {"tiny", "paper"}) {
      ExperimentConfig c = preset_config(name);
      c.seed = 17;
      c.training.lr0 = 0.0123;
      const std::string text = dump_config(c);
      CHECK(dump_config(parse_config(text)) == text);
    }
  }

  TEST_CASE("tiled arrays group neighbouring elements") {
    GeometryBlock g;
    g.surface_rows = 4;
    g.surface_cols = 4;
    g.group_rows = 2;
    g.group_cols = 2;
    const auto pts = tiled_array(g);
    REQUIRE(pts.size() == 16);
    for (int t = 0; t < 4; ++t)
      for (int i = 1; i < 4; ++i) CHECK((pts[t * 4 + i] - pts[t * 4]).norm() < 0.15);
  }

  TEST_CASE("environment dimensions follow grouping") {
    ExperimentConfig c = preset_config("tiny");
    c.geometry.group_rows = 2;
    c.geometry.group_cols = 2;
    const TrainEnv env = make_env(c);
    CHECK(env.elements == 1);
    CHECK(env.model.projection.rows() == 2);
    CHECK(env.model.projection.cols() == 4);
  }
}

TEST_SUITE("harness") {
  TEST_CASE("algorithm names") {
    CHECK(Algorithm::parse("prpg").kind == Algorithm::Kind::prpg);
    CHECK(Algorithm::parse("mimo-4").mimo_antennas == 4);
    CHECK(Algorithm::parse("mimo(2)").name() == "mimo-2");
    for (const char* n : {"random-control", "no-decoder", "decoder-only", "single-mlp-policy"})
      CHECK(Algorithm::parse(n).name() == n);
    CHECK_THROWS_AS(Algorithm::parse("mimo-0"), InvalidInput);
    CHECK_THROWS_AS(Algorithm::parse("random"), InvalidInput);
  }

  TEST_CASE("mimo measurement matrix") {
    const ExperimentConfig c = preset_config("tiny");
    const CMatrix g = mimo_gamma(c, 3);
    CHECK(g.rows() == 3);
    CHECK(g.cols() == 4);
    CHECK(g.allFinite());
    CHECK(g.norm() > 0.0);
  }

  TEST_CASE("control csv round-trip") {
    const fs::path dir = scratch("control");
    Rng rng(3);
    const ControlMatrix c = ControlMatrix::random(4, 3, 3, rng);
    write_control_csv(dir / "c.csv", c);
    CHECK(read_control_csv(dir / "c.csv", 3) == c);
    std::ifstream in(dir / "c.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "k,s_1,s_2,s_3");
    CHECK_THROWS(read_control_csv(dir / "c.csv", 2));
  }

  TEST_CASE("median") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK_THROWS(median({}));
  }

  TEST_CASE("bound instance uses the combined noise power") {
    ExperimentConfig c = preset_config("tiny");
    c.channel.noise_power = 1e-12;
    c.channel.env_noise_power = 3e-12;
    const BoundInstance inst = bound_instance(c, bound_control(c));
    CHECK(inst.noise_power == doctest::Approx(4e-12));
  }
}

TEST_SUITE("cli") {
  TEST_CASE("exit codes") {
    const fs::path dir = scratch("cli");
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("train --bogus") == 2);
    CHECK(run_cli("baseline telepathy --out " + dir.string()) == 2);
    CHECK(run_cli("compare --algorithms prpg,telepathy --out " + dir.string()) == 2);
    {
      std::ofstream f(dir / "bad.json");
      f << R"({"scene": {"grids": 4, "colour": 1}})";
    }
    CHECK(run_cli("bound --config " + (dir / "bad.json").string() + " --out " + dir.string()) == 2);
    {
      std::ofstream f(dir / "missing_table.json");
      f << R"({"channel": {"table_path": "/nonexistent/t.csv"}})";
    }
    CHECK(run_cli("bound --config " + (dir / "missing_table.json").string()) == 2);
    CHECK(run_cli("train --epochs 0 --out " + (dir / "zero").string()) == 0);
    CHECK(run_cli("bound --out " + (dir / "b").string()) == 0);
    CHECK(fs::exists(dir / "b" / "bound.csv"));
    CHECK(fs::exists(dir / "b" / "bound_summary.csv"));
  }
}
