#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mcs/scene_io.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "mcsynth_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run(const std::string& args) {
  const fs::path log = work_dir() / "cmd.log";
  const std::string cmd = std::string(MCSYNTH_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.code = WEXITSTATUS(status);
  std::ifstream in(log);
  std::stringstream buf;
  buf << in.rdbuf();
  result.output = buf.str();
  return result;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Shared tiny artifacts, built once through the CLI.
struct Artifacts {
  fs::path corpus, ckpt;
};

const Artifacts& artifacts() {
  static const Artifacts a = [] {
    Artifacts art;
    art.corpus = work_dir() / "tiny.corpus";
    art.ckpt = work_dir() / "tiny.ckpt";
    auto gen = run("gen-data --out " + art.corpus.string() +
                   " --episodes 40 --episode_steps 3 --stride 4 --w 8 --j 2 --fps 10 --seed 3");
    REQUIRE(gen.code == 0);
    auto train = run("train-gen --corpus " + art.corpus.string() + " --out " + art.ckpt.string() +
                     " --steps 400 --u 10 --hidden 48 --depth 2 --temb 8 --seed 4");
    REQUIRE(train.code == 0);
    return art;
  }();
  return a;
}

// key -> value for one CSV row
std::map<std::string, std::string> parse_csv_row(const std::string& csv, int row) {
  std::stringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  for (int r = 0; r <= row; ++r) std::getline(in, line);
  std::map<std::string, std::string> out;
  std::stringstream hs(header), ls(line);
  std::string key, value;
  while (std::getline(hs, key, ',')) {
    std::getline(ls, value, ',');
    out[key] = value;
  }
  return out;
}

}  // namespace

TEST_CASE("gen-data is byte-deterministic and validates paths") {
  const fs::path a = work_dir() / "det_a.corpus";
  const fs::path b = work_dir() / "det_b.corpus";
  const std::string flags = " --episodes 12 --episode_steps 2 --w 8 --j 2 --fps 10 --seed 77";
  CHECK(run("gen-data --out " + a.string() + flags).code == 0);
  CHECK(run("gen-data --out " + b.string() + flags).code == 0);
  CHECK(read_file(a) == read_file(b));
  CHECK(run("gen-data --out /nonexistent_dir/x.bin" + flags).code == 2);
}

TEST_CASE("train-gen refuses to save when the gradient check fails") {
  const fs::path bad = work_dir() / "bad.ckpt";
  auto result = run("train-gen --corpus " + artifacts().corpus.string() + " --out " +
                    bad.string() +
                    " --steps 30 --u 10 --hidden 48 --depth 2 --temb 8 --seed 4"
                    " --selftest_corrupt_gradient");
  CHECK(result.code == 3);
  CHECK(result.output.find("gradient check failed") != std::string::npos);
  CHECK_FALSE(fs::exists(bad));
}

TEST_CASE("train-gen writes a checkpoint and a loss curve") {
  CHECK(fs::exists(artifacts().ckpt));
  const std::string curve = read_file(artifacts().ckpt.string() + ".loss.csv");
  CHECK(curve.rfind("step,train_loss,val_loss", 0) == 0);
  // header + step-0 val row + one row per step
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 402);
}

TEST_CASE("train-planner requires the generator checkpoint") {
  auto result = run("train-planner --gen " + (work_dir() / "missing.ckpt").string() + " --out " +
                    (work_dir() / "p.ckpt").string());
  CHECK(result.code == 2);
}

TEST_CASE("synth pads odd requests, records virtuals and reproduces bytes") {
  const fs::path scene = work_dir() / "scene.json";
  const fs::path scene2 = work_dir() / "scene2.json";
  const std::string flags = " --policy random --n 5 --t 3 --overlap 3 --seed 9";
  REQUIRE(run("synth --gen " + artifacts().ckpt.string() + " --out " + scene.string() + flags)
              .code == 0);
  REQUIRE(run("synth --gen " + artifacts().ckpt.string() + " --out " + scene2.string() + flags)
              .code == 0);
  CHECK(read_file(scene) == read_file(scene2));
  CHECK(read_file(scene.string() + ".plans.json") == read_file(scene2.string() + ".plans.json"));

  const auto loaded = mcs::load_scene(scene.string());
  CHECK(loaded.timeline.character_count() == 8);
  CHECK(loaded.n_requested == 5);
  const auto& flags_v = loaded.timeline.steps.front().virtual_flags;
  CHECK(std::count(flags_v.begin(), flags_v.end(), true) == 3);
  CHECK(loaded.config.at("tau").get<double>() == 0.25);
}

TEST_CASE("synth maps spawn collisions to exit 4 and echoes the event") {
  auto result = run("synth --gen " + artifacts().ckpt.string() + " --out " +
                    (work_dir() / "s4.json").string() +
                    " --n 4 --t 3 --overlap 3 --seed 2 --add_character 1,0.0,0.0");
  CHECK(result.code == 4);
  CHECK(result.output.find("1,0.0,0.0") != std::string::npos);
}

TEST_CASE("synth add-character events succeed away from the crowd") {
  const fs::path scene = work_dir() / "added.json";
  auto result = run("synth --gen " + artifacts().ckpt.string() + " --out " + scene.string() +
                    " --n 4 --t 4 --overlap 3 --seed 2 --add_character 2,3.0,3.0");
  REQUIRE(result.code == 0);
  const auto loaded = mcs::load_scene(scene.string());
  CHECK(loaded.n_requested == 5);
  CHECK(loaded.timeline.character_count() == 8);
  CHECK(loaded.timeline.active_from[4] == 2);
}

TEST_CASE("eval reproduces the metric oracles through the CLI") {
  // hand-built static pair at distance 1, constant velocity
  auto timeline = testutil::build_timeline(
      2, 2, 8, 2, 10, [](int c, int g) { return mcs::Vec3{0.1 * g, 1.0 * c, 0.9}; });
  mcs::Scene scene;
  scene.timeline = timeline;
  scene.n_requested = 2;
  scene.style = "dance";
  const fs::path path = work_dir() / "handmade.json";
  mcs::save_scene(scene, path.string());

  const fs::path csv = work_dir() / "metrics.csv";
  auto result = run("eval --out " + csv.string() + " " + path.string());
  REQUIRE(result.code == 0);
  auto row = parse_csv_row(read_file(csv), 0);
  CHECK(std::stod(row.at("hd")) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::stod(row.at("ts")) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::stod(row.at("min_pairwise_hip_distance")) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(row.at("quads").empty());  // no plan log next to a handmade scene
}

TEST_CASE("eval rejects malformed scenes with exit 5") {
  const fs::path bad = work_dir() / "malformed.json";
  std::ofstream(bad) << "{\"not\": \"a scene\"}\n";
  CHECK(run("eval " + bad.string()).code == 5);
  CHECK(run("eval " + (work_dir() / "no_such.json").string()).code == 2);
}

TEST_CASE("config files merge under explicit flags and reject unknown keys") {
  const fs::path cfg = work_dir() / "cfg.json";
  std::ofstream(cfg) << R"({"episodes": 12, "episode_steps": 2, "w": 8, "j": 2, "fps": 10})";
  const fs::path out = work_dir() / "cfg.corpus";
  auto result = run("gen-data --out " + out.string() + " --config " + cfg.string() +
                    " --episodes 15");
  REQUIRE(result.code == 0);
  CHECK(result.output.find("episodes 15") != std::string::npos);

  const fs::path bad = work_dir() / "badcfg.json";
  std::ofstream(bad) << R"({"bogus_key": 1})";
  CHECK(run("gen-data --out " + out.string() + " --config " + bad.string()).code == 2);
}

TEST_CASE("unknown policies and missing checkpoints are input errors") {
  CHECK(run("synth --gen " + (work_dir() / "missing.ckpt").string() + " --out " +
            (work_dir() / "x.json").string())
            .code == 2);
  CHECK(run("synth --gen " + artifacts().ckpt.string() + " --out " +
            (work_dir() / "x.json").string() + " --policy bogus")
            .code == 2);
  CHECK(run("synth --gen " + artifacts().ckpt.string() + " --out " +
            (work_dir() / "x.json").string() + " --policy trained")
            .code == 2);  // trained policy needs --policy_ckpt
}
