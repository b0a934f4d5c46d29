// mcsynth: procedural paired-motion corpora, clip-diffusion training, guided
// multi-character scene synthesis, transition-planner training and metrics.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mcs/coordination.hpp"
#include "mcs/diffusion.hpp"
#include "mcs/errors.hpp"
#include "mcs/motion.hpp"
#include "mcs/planner.hpp"
#include "mcs/scene_io.hpp"
#include "mcs/synth_data.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitTrainingGate = 3;
constexpr int kExitSceneConstruction = 4;
constexpr int kExitValidation = 5;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Expands a --config JSON file into command-line tokens placed right after
// the subcommand, so explicitly given flags still win (TakeLast policy).
// Unknown keys are rejected.
std::vector<std::string> inject_config_tokens(const CLI::App& app,
                                              std::vector<std::string> tokens) {
  std::size_t sub_at = tokens.size();
  const CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const auto* candidate : app.get_subcommands([](const CLI::App*) { return true; }))
      if (candidate->get_name() == tokens[i]) {
        sub = candidate;
        sub_at = i;
        break;
      }
    if (sub) break;
  }
  if (!sub) return tokens;

  std::string path;
  for (std::size_t i = sub_at + 1; i < tokens.size(); ++i) {
    if (tokens[i] == "--config" && i + 1 < tokens.size()) path = tokens[i + 1];
    if (tokens[i].rfind("--config=", 0) == 0) path = tokens[i].substr(9);
  }
  if (path.empty()) return tokens;

  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  nlohmann::json config;
  try {
    in >> config;
  } catch (const nlohmann::json::exception& e) {
    throw mcs::SchemaError(std::string("config parse error: ") + e.what());
  }
  if (!config.is_object()) throw mcs::SchemaError("config file must hold a JSON object");

  std::vector<std::string> injected;
  for (const auto& [key, value] : config.items()) {
    const auto* option = sub->get_option_no_throw("--" + key);
    if (!option || key == "config")
      throw std::invalid_argument("unknown config key: " + key);
    if (value.is_boolean()) {
      if (value.get<bool>()) injected.push_back("--" + key);
    } else if (value.is_array()) {
      for (const auto& item : value) {
        injected.push_back("--" + key);
        injected.push_back(item.is_string() ? item.get<std::string>() : item.dump());
      }
    } else {
      injected.push_back("--" + key);
      injected.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  tokens.insert(tokens.begin() + sub_at + 1, injected.begin(), injected.end());
  return tokens;
}

nlohmann::ordered_json scene_config_json(const mcs::SceneConfig& config,
                                         const std::string& policy,
                                         const std::string& gen_path,
                                         const std::string& policy_path) {
  nlohmann::ordered_json j;
  j["n"] = config.n_requested;
  j["t"] = config.steps;
  j["seed"] = config.seed;
  j["style"] = config.style.name;
  j["tau"] = config.constraints.tau;
  j["lambda_smooth"] = config.constraints.lambda_smooth;
  j["w_dist"] = config.constraints.dist_weight;
  j["eta_guidance"] = config.eta;
  j["guidance"] = config.guidance_on;
  j["overlap"] = config.seam_overlap;
  j["spacing"] = mcs::resolved_spacing(config);
  j["policy"] = policy;
  j["generator"] = gen_path;
  if (!policy_path.empty()) j["policy_ckpt"] = policy_path;
  nlohmann::ordered_json events = nlohmann::ordered_json::array();
  for (const auto& e : config.add_events) events.push_back({e.step, e.x, e.y});
  j["add_character"] = events;
  return j;
}

mcs::StyleParams style_by_name(const std::string& name) {
  if (name == "dance") return mcs::StyleParams::dance();
  if (name == "boxing") return mcs::StyleParams::boxing();
  throw std::invalid_argument("unknown style: " + name + " (expected dance or boxing)");
}

void require_readable(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + what + ": " + path);
}

void require_writable(const std::string& path, const std::string& what) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::invalid_argument("cannot write " + what + ": " + path);
  out.close();
  // an empty probe file may have been created; remove it if it is empty
  std::error_code ec;
  if (std::filesystem::exists(path, ec) && std::filesystem::file_size(path, ec) == 0)
    std::filesystem::remove(path, ec);
}

int thread_count_override() {
  const char* env = std::getenv("MCSYNTH_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

// --- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  std::string out, style = "dance", config;
  int episodes = 64, episode_steps = 6, stride = 8;
  int w = 16, j = 8, fps = 20;
  std::uint64_t seed = 1;
};

int run_gen_data(const GenDataArgs& args) {
  require_writable(args.out, "corpus output");
  mcs::StyleParams style = style_by_name(args.style);
  style.clip_len = args.w;
  style.joints = args.j;
  style.fps = args.fps;
  const auto corpus = mcs::build_corpus(style, args.episodes, args.seed, args.episode_steps,
                                        args.stride);
  mcs::save_corpus(corpus, args.out);
  std::cout << "corpus written: " << args.out << "\n"
            << "  style " << style.name << ", episodes " << args.episodes << ", clips "
            << corpus.train.size() << " train / " << corpus.val.size() << " val, dim "
            << corpus.shape().dim() << "\n";
  return kExitOk;
}

// --- train-gen --------------------------------------------------------------

struct TrainGenArgs {
  std::string corpus, out, config;
  mcs::TrainGenConfig train;
  int u = 50;
  double beta_start = -1.0, beta_end = -1.0;
  bool corrupt_gradient = false;  // self-test of the gradcheck gate
};

int run_train_gen(const TrainGenArgs& args) {
  require_readable(args.corpus, "corpus");
  require_writable(args.out, "checkpoint output");
  const auto corpus = mcs::load_corpus(args.corpus);
  mcs::TrainGenConfig config = args.train;
  config.schedule = mcs::NoiseSchedule::linear(args.u, args.beta_start, args.beta_end);
  auto result = mcs::train_denoiser(corpus, config);

  mcs::GradcheckOptions check;
  if (args.corrupt_gradient) {
    check.corrupt_layer = 1;
    check.corrupt_scale = 1.05;
  }
  const double err = mcs::gradcheck_denoiser(result.model, corpus.train, 8, check,
                                             mcs::derive_seed(config.seed, 0x47415445ULL));
  if (err > 1e-3)
    throw mcs::TrainingGateError("gradient check failed (max relative error " +
                                 format_double(err) + " > 1e-3); checkpoint not saved");

  mcs::save_denoiser(result.model, args.out);
  std::ofstream curve(args.out + ".loss.csv");
  curve << "step,train_loss,val_loss\n";
  curve << "0,," << format_double(result.val_loss.front().second) << '\n';
  std::size_t val_at = 1;
  for (std::size_t s = 0; s < result.train_loss.size(); ++s) {
    curve << (s + 1) << ',' << format_double(result.train_loss[s]) << ',';
    while (val_at < result.val_loss.size() &&
           result.val_loss[val_at].first < static_cast<int>(s + 1))
      ++val_at;
    if (val_at < result.val_loss.size() && result.val_loss[val_at].first == static_cast<int>(s + 1))
      curve << format_double(result.val_loss[val_at].second);
    curve << '\n';
  }
  std::cout << "generator checkpoint written: " << args.out << "\n"
            << "  final train loss " << format_double(result.train_loss.back())
            << ", final val loss " << format_double(result.val_loss.back().second)
            << ", gradcheck " << format_double(err) << "\n";
  return kExitOk;
}

// --- train-planner ----------------------------------------------------------

struct TrainPlannerArgs {
  std::string gen, out, config;
  mcs::RLConfig rl;
  double tau = 0.25, lambda_smooth = 0.05, w_dist = 1.0, eta = 0.1;
  int overlap = 4;
};

mcs::SceneConfig scene_base_for(const mcs::Denoiser& model, double tau, double lambda,
                                double w_dist, double eta, int overlap) {
  mcs::SceneConfig scene;
  mcs::StyleParams style;
  try {
    style = style_by_name(model.style_name);
  } catch (const std::invalid_argument&) {
    style = mcs::StyleParams::dance();
  }
  style.clip_len = model.shape.clip_len;
  style.joints = model.shape.joints;
  style.fps = model.fps;
  scene.style = style;
  scene.constraints = mcs::ConstraintSet{tau, lambda, w_dist};
  scene.eta = eta;
  scene.seam_overlap = overlap;
  return scene;
}

int run_train_planner(const TrainPlannerArgs& args) {
  require_readable(args.gen, "generator checkpoint");
  require_writable(args.out, "policy output");
  const auto model = mcs::load_denoiser(args.gen);
  const auto base = scene_base_for(model, args.tau, args.lambda_smooth, args.w_dist, args.eta,
                                   args.overlap);
  auto result = mcs::train_policy(model, base, args.rl);
  mcs::save_policy(result.policy, args.out);
  std::ofstream curve(args.out + ".rewards.csv");
  curve << "episode,reward\n";
  for (std::size_t e = 0; e < result.episode_rewards.size(); ++e)
    curve << e << ',' << format_double(result.episode_rewards[e]) << '\n';
  const int n = static_cast<int>(result.episode_rewards.size());
  double first = 0.0, last = 0.0;
  const int decile = std::max(1, n / 10);
  for (int e = 0; e < decile; ++e) first += result.episode_rewards[e];
  for (int e = n - decile; e < n; ++e) last += result.episode_rewards[e];
  std::cout << "policy checkpoint written: " << args.out << "\n"
            << "  episodes " << n << ", first-decile mean reward "
            << format_double(first / decile) << ", final-decile mean reward "
            << format_double(last / decile) << "\n";
  return kExitOk;
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string gen, out, policy = "static", policy_ckpt, config;
  int n = 8, steps = 6, overlap = 4;
  std::uint64_t seed = 1;
  double tau = 0.25, lambda_smooth = 0.05, w_dist = 1.0, eta = 0.1, spacing = 0.0;
  bool no_guidance = false;
  std::vector<std::string> add_character;
};

mcs::SceneConfig::AddEvent parse_add_event(const std::string& text) {
  mcs::SceneConfig::AddEvent event;
  char extra;
  if (std::sscanf(text.c_str(), "%d,%lf,%lf%c", &event.step, &event.x, &event.y, &extra) != 3)
    throw std::invalid_argument("bad --add_character value (expected step,x,y): " + text);
  return event;
}

int run_synth(const SynthArgs& args) {
  require_readable(args.gen, "generator checkpoint");
  require_writable(args.out, "scene output");
  const auto model = mcs::load_denoiser(args.gen);

  mcs::SceneConfig config = scene_base_for(model, args.tau, args.lambda_smooth, args.w_dist,
                                           args.eta, args.overlap);
  config.n_requested = args.n;
  config.steps = args.steps;
  config.seed = args.seed;
  config.spacing = args.spacing;
  config.guidance_on = !args.no_guidance;
  for (const auto& text : args.add_character) config.add_events.push_back(parse_add_event(text));

  mcs::ActionChooser chooser;
  mcs::PolicyParams policy;
  if (args.policy == "static") {
    chooser = mcs::static_chooser();
  } else if (args.policy == "random") {
    chooser = mcs::random_chooser();
  } else if (args.policy == "trained") {
    if (args.policy_ckpt.empty())
      throw std::invalid_argument("--policy trained requires --policy_ckpt");
    require_readable(args.policy_ckpt, "policy checkpoint");
    policy = mcs::load_policy(args.policy_ckpt);
    chooser = mcs::trained_chooser(policy);
  } else {
    throw std::invalid_argument("unknown policy: " + args.policy);
  }

  mcs::SceneRunResult result;
  try {
    result = mcs::run_scene(config, model, chooser);
  } catch (const mcs::SpawnTooClose& e) {
    std::string events;
    for (const auto& t : args.add_character) events += " " + t;
    throw mcs::SpawnTooClose(std::string(e.what()) + " (add_character events:" + events + ")");
  }

  mcs::Scene scene;
  scene.timeline = std::move(result.timeline);
  scene.n_requested = result.n_requested;
  scene.style = config.style.name;
  scene.config = scene_config_json(config, args.policy, args.gen, args.policy_ckpt);
  mcs::save_scene(scene, args.out);

  nlohmann::ordered_json plans;
  plans["format"] = "mcs-plans-v1";
  plans["seed"] = config.seed;
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& record : result.plans) {
    nlohmann::ordered_json r;
    r["step"] = record.step;
    r["quad"] = record.quad;
    r["action"] = record.action;
    r["pairing"] = {{record.pairing[0].first, record.pairing[0].second},
                    {record.pairing[1].first, record.pairing[1].second}};
    records.push_back(std::move(r));
  }
  plans["plans"] = std::move(records);
  std::ofstream plan_out(args.out + ".plans.json");
  plan_out << plans.dump() << '\n';

  std::cout << "scene written: " << args.out << "\n"
            << "  characters " << scene.timeline.character_count() << " (requested "
            << scene.n_requested << "), steps " << scene.timeline.step_count() << ", policy "
            << args.policy << ", guidance warnings " << result.guidance_warnings << "\n";
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> scenes;
  std::string out, dir, config;
  double proximity_threshold = 0.25;
  int ts_window = 10;
};

struct EvalRowOut {
  std::string scene;
  bool ok = false;
  std::string error;
  double ts = -1.0;  // -1: undefined (single-step scene)
  double hd = 0.0, min_dist = 0.0, close_frac = 0.0;
  int frames = 0;
  bool has_plans = false;
  mcs::QuadDiversity diversity;
};

EvalRowOut eval_one(const std::string& path, const EvalArgs& args) {
  EvalRowOut row;
  row.scene = path;
  const auto scene = mcs::load_scene(path);
  const auto& t = scene.timeline;
  if (t.step_count() >= 2) row.ts = mcs::peak_jerk(t, args.ts_window);
  row.hd = mcs::hip_distance(t);
  row.min_dist = mcs::min_pairwise_hip_distance(t);
  row.close_frac = mcs::close_pair_fraction(t, args.proximity_threshold);
  row.frames = mcs::concat_length(t);

  const std::string plan_path = path + ".plans.json";
  std::ifstream plan_in(plan_path);
  if (plan_in) {
    nlohmann::json j;
    try {
      plan_in >> j;
      std::vector<mcs::PlanRecord> records;
      for (const auto& r : j.at("plans")) {
        mcs::PlanRecord record;
        record.step = r.at("step").get<int>();
        auto quad = r.at("quad").get<std::vector<int>>();
        if (quad.size() != 4) throw mcs::SchemaError("bad quad in plan log");
        std::copy(quad.begin(), quad.end(), record.quad.begin());
        record.action = r.at("action").get<int>();
        auto pairing = r.at("pairing").get<std::vector<std::vector<int>>>();
        if (pairing.size() != 2 || pairing[0].size() != 2 || pairing[1].size() != 2)
          throw mcs::SchemaError("bad pairing in plan log");
        record.pairing = {std::make_pair(pairing[0][0], pairing[0][1]),
                          std::make_pair(pairing[1][0], pairing[1][1])};
        records.push_back(record);
      }
      row.diversity = mcs::plan_diversity(records);
      row.has_plans = true;
    } catch (const nlohmann::json::exception& e) {
      throw mcs::SchemaError(std::string("plan log parse error: ") + e.what());
    }
  }
  row.ok = true;
  return row;
}

int run_eval(const EvalArgs& args) {
  std::vector<std::string> scenes = args.scenes;
  if (!args.dir.empty()) {
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(args.dir, ec)) {
      const auto& p = entry.path();
      if (p.extension() == ".json" && p.string().find(".plans.json") == std::string::npos)
        scenes.push_back(p.string());
    }
    if (ec) throw std::invalid_argument("cannot read directory: " + args.dir);
    std::sort(scenes.begin(), scenes.end());
  }
  if (scenes.empty()) throw std::invalid_argument("no scene files given");
  for (const auto& s : scenes) require_readable(s, "scene");
  if (!args.out.empty()) require_writable(args.out, "metrics output");

  std::vector<EvalRowOut> rows(scenes.size());
  const int threads = std::min<int>(thread_count_override(), static_cast<int>(scenes.size()));
  std::exception_ptr first_error;
  if (threads <= 1) {
    for (std::size_t i = 0; i < scenes.size(); ++i) rows[i] = eval_one(scenes[i], args);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= scenes.size()) return;
        try {
          rows[i] = eval_one(scenes[i], args);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  std::ostringstream csv;
  csv << "scene,ts,hd,min_pairwise_hip_distance,frames,close_frac,quads,mean_distinct_"
         "matchings,frac_quads_multi\n";
  for (const auto& row : rows) {
    csv << row.scene << ',' << (row.ts >= 0.0 ? format_double(row.ts) : "") << ','
        << format_double(row.hd) << ',' << format_double(row.min_dist) << ',' << row.frames << ','
        << format_double(row.close_frac) << ',';
    if (row.has_plans)
      csv << row.diversity.quads << ',' << format_double(row.diversity.mean_distinct) << ','
          << format_double(row.diversity.frac_multi);
    else
      csv << ",,";
    csv << '\n';
  }
  if (args.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(args.out);
    out << csv.str();
    std::cout << "metrics written: " << args.out << " (" << rows.size() << " scenes)\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coordinated multi-character motion synthesis"};
  app.require_subcommand(1);

  GenDataArgs gen_data;
  auto* cmd_gen_data = app.add_subcommand("gen-data", "generate a paired-motion corpus");
  cmd_gen_data->add_option("--out", gen_data.out, "corpus output path")->required();
  cmd_gen_data->add_option("--style", gen_data.style, "dance or boxing");
  cmd_gen_data->add_option("--episodes", gen_data.episodes, "episode count");
  cmd_gen_data->add_option("--episode_steps", gen_data.episode_steps, "clip steps per episode");
  cmd_gen_data->add_option("--stride", gen_data.stride, "window stride in frames");
  cmd_gen_data->add_option("--w", gen_data.w, "frames per clip");
  cmd_gen_data->add_option("--j", gen_data.j, "joints per character");
  cmd_gen_data->add_option("--fps", gen_data.fps, "frames per second");
  cmd_gen_data->add_option("--seed", gen_data.seed, "corpus seed");
  cmd_gen_data->add_option("--config", gen_data.config, "JSON config file");

  TrainGenArgs train_gen;
  auto* cmd_train_gen = app.add_subcommand("train-gen", "train the two-character clip generator");
  cmd_train_gen->add_option("--corpus", train_gen.corpus, "corpus path")->required();
  cmd_train_gen->add_option("--out", train_gen.out, "checkpoint output path")->required();
  cmd_train_gen->add_option("--steps", train_gen.train.steps, "optimizer steps");
  cmd_train_gen->add_option("--batch", train_gen.train.batch, "batch size");
  cmd_train_gen->add_option("--lr", train_gen.train.lr, "learning rate");
  cmd_train_gen->add_option("--seed", train_gen.train.seed, "training seed");
  cmd_train_gen->add_option("--val_every", train_gen.train.val_every, "validation interval");
  cmd_train_gen->add_option("--hidden", train_gen.train.arch.hidden, "hidden width");
  cmd_train_gen->add_option("--depth", train_gen.train.arch.depth, "hidden layer count");
  cmd_train_gen->add_option("--temb", train_gen.train.arch.time_embed, "timestep embedding dims");
  cmd_train_gen->add_option("--u", train_gen.u, "diffusion timesteps");
  cmd_train_gen->add_option("--beta_start", train_gen.beta_start, "first beta (default auto)");
  cmd_train_gen->add_option("--beta_end", train_gen.beta_end, "last beta (default auto)");
  cmd_train_gen->add_option("--config", train_gen.config, "JSON config file");
  cmd_train_gen
      ->add_flag("--selftest_corrupt_gradient", train_gen.corrupt_gradient,
                 "corrupt one layer's gradient to exercise the gradcheck gate")
      ->group("");

  TrainPlannerArgs train_planner;
  auto* cmd_train_planner =
      app.add_subcommand("train-planner", "train the transition-planning policy");
  cmd_train_planner->add_option("--gen", train_planner.gen, "generator checkpoint")->required();
  cmd_train_planner->add_option("--out", train_planner.out, "policy output path")->required();
  cmd_train_planner->add_option("--episodes", train_planner.rl.episodes, "training episodes");
  cmd_train_planner->add_option("--ep_steps", train_planner.rl.steps_per_episode,
                                "clip steps per episode");
  cmd_train_planner->add_option("--gamma", train_planner.rl.gamma, "discount factor");
  cmd_train_planner->add_option("--lr", train_planner.rl.lr, "learning rate");
  cmd_train_planner->add_option("--baseline_decay", train_planner.rl.baseline_decay,
                                "EMA baseline decay");
  cmd_train_planner->add_option("--history_window", train_planner.rl.history_window,
                                "novelty history length (H)");
  cmd_train_planner->add_option("--smooth_window", train_planner.rl.smooth_window,
                                "frames per side for the smoothness reward");
  cmd_train_planner->add_option("--batch_episodes", train_planner.rl.batch_episodes,
                                "episodes per policy update");
  cmd_train_planner->add_option("--policy_hidden", train_planner.rl.policy_hidden,
                                "policy hidden width");
  cmd_train_planner->add_option("--seed", train_planner.rl.seed, "training seed");
  cmd_train_planner->add_option("--tau", train_planner.tau, "squared-distance threshold (m^2)");
  cmd_train_planner->add_option("--lambda_smooth", train_planner.lambda_smooth,
                                "smoothness guidance weight");
  cmd_train_planner->add_option("--w_dist", train_planner.w_dist, "separation guidance weight");
  cmd_train_planner->add_option("--eta_guidance", train_planner.eta, "guidance step size");
  cmd_train_planner->add_option("--overlap", train_planner.overlap, "seam overlap frames");
  cmd_train_planner->add_option("--config", train_planner.config, "JSON config file");

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "synthesize a multi-character scene");
  cmd_synth->add_option("--gen", synth.gen, "generator checkpoint")->required();
  cmd_synth->add_option("--out", synth.out, "scene output path")->required();
  cmd_synth->add_option("--policy", synth.policy, "static, random or trained");
  cmd_synth->add_option("--policy_ckpt", synth.policy_ckpt, "policy checkpoint (for trained)");
  cmd_synth->add_option("--n", synth.n, "requested character count");
  cmd_synth->add_option("--t", synth.steps, "clip steps");
  cmd_synth->add_option("--seed", synth.seed, "scene seed");
  cmd_synth->add_option("--tau", synth.tau, "squared-distance threshold (m^2)");
  cmd_synth->add_option("--lambda_smooth", synth.lambda_smooth, "smoothness guidance weight");
  cmd_synth->add_option("--w_dist", synth.w_dist, "separation guidance weight");
  cmd_synth->add_option("--eta_guidance", synth.eta, "guidance step size");
  cmd_synth->add_option("--overlap", synth.overlap, "seam overlap frames");
  cmd_synth->add_option("--spacing", synth.spacing, "spawn grid spacing (0 = auto)");
  cmd_synth->add_flag("--no_guidance", synth.no_guidance, "disable classifier guidance");
  cmd_synth->add_option("--add_character", synth.add_character,
                        "step,x,y spawn event (repeatable)");
  cmd_synth->add_option("--config", synth.config, "JSON config file");

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "compute metrics for scene files");
  cmd_eval->add_option("scenes", eval.scenes, "scene files");
  cmd_eval->add_option("--dir", eval.dir, "directory of scene files");
  cmd_eval->add_option("--out", eval.out, "metrics CSV path (default stdout)");
  cmd_eval->add_option("--proximity_threshold", eval.proximity_threshold,
                       "close-pair distance threshold (m)");
  cmd_eval->add_option("--ts_window", eval.ts_window, "frames around each seam for peak jerk");
  cmd_eval->add_option("--config", eval.config, "JSON config file");

  // Single-valued options take the last occurrence, so explicit flags
  // override values injected from a --config file.
  for (CLI::App* sub : {cmd_gen_data, cmd_train_gen, cmd_train_planner, cmd_synth, cmd_eval})
    for (CLI::Option* opt : sub->get_options())
      if (opt->get_expected_max() == 1 && opt->nonpositional())
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  try {
    std::vector<std::string> tokens(argv + 1, argv + argc);
    tokens = inject_config_tokens(app, tokens);
    std::reverse(tokens.begin(), tokens.end());
    app.parse(tokens);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  } catch (const mcs::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (cmd_gen_data->parsed()) return run_gen_data(gen_data);
    if (cmd_train_gen->parsed()) return run_train_gen(train_gen);
    if (cmd_train_planner->parsed()) return run_train_planner(train_planner);
    if (cmd_synth->parsed()) return run_synth(synth);
    if (cmd_eval->parsed()) return run_eval(eval);
  } catch (const mcs::TrainingGateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTrainingGate;
  } catch (const mcs::SpawnTooClose& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSceneConstruction;
  } catch (const mcs::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitInput;
}
