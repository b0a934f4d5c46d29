#include "mcs/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "mcs/errors.hpp"
#include "mcs/rng.hpp"

namespace mcs {

Observation featurize(const std::array<const MotionClip*, 4>& clips, int current_action) {
  if (current_action < 0 || current_action > 2)
    throw std::invalid_argument("current_action out of range");
  std::array<Vec3, 4> pos, vel;
  std::array<double, 4> ext{};
  for (int m = 0; m < 4; ++m) {
    const MotionClip& clip = *clips[m];
    if (clip.frames.empty()) throw std::invalid_argument("empty clip in featurize");
    const Pose& last = clip.frames.back();
    pos[m] = last.positions[kHipJoint];
    vel[m] = last.velocities[kHipJoint];
    double sum = 0.0;
    for (int j = 1; j < last.joint_count(); ++j)
      sum += norm(last.positions[j] - last.positions[kHipJoint]);
    ext[m] = last.joint_count() > 1 ? sum / (last.joint_count() - 1) : 0.0;
  }
  Vec3 centroid{};
  for (const auto& p : pos) centroid += p;
  centroid = 0.25 * centroid;
  Vec3 mean_vel{};
  for (const auto& v : vel) mean_vel += v;
  mean_vel = 0.25 * mean_vel;
  double yaw = 0.0;
  const double planar = std::sqrt(mean_vel.x * mean_vel.x + mean_vel.y * mean_vel.y);
  if (planar >= 1e-8) yaw = std::atan2(mean_vel.y, mean_vel.x);

  Observation obs;
  obs.features.reserve(kObservationDim);
  for (int m = 0; m < 4; ++m) {
    const Vec3 p = rotate_z(pos[m] - centroid, -yaw);
    const Vec3 v = rotate_z(vel[m], -yaw);
    obs.features.insert(obs.features.end(), {p.x, p.y, p.z, v.x, v.y, v.z, ext[m]});
  }
  for (int a = 0; a < 3; ++a) obs.features.push_back(a == current_action ? 1.0 : 0.0);
  return obs;
}

PolicyParams make_policy(std::uint64_t seed, int hidden) {
  PolicyParams p;
  p.net = Mlp({kObservationDim, hidden, hidden, 3});
  p.net.init_weights(seed);
  p.train_seed = seed;
  return p;
}

std::array<double, 3> policy_forward(const PolicyParams& policy, const Observation& obs) {
  if (static_cast<int>(obs.features.size()) != kObservationDim)
    throw std::invalid_argument("observation dimension mismatch");
  std::vector<double> logits;
  policy.net.forward(obs.features, 1, logits);
  const double peak = std::max({logits[0], logits[1], logits[2]});
  std::array<double, 3> probs{};
  double total = 0.0;
  for (int a = 0; a < 3; ++a) {
    probs[a] = std::exp(logits[a] - peak);
    total += probs[a];
  }
  for (auto& p : probs) p /= total;
  return probs;
}

int sample_action(const std::array<double, 3>& probs, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x414354ULL));
  const double r = rng.uniform();
  double acc = 0.0;
  for (int a = 0; a < 3; ++a) {
    acc += probs[a];
    if (r < acc) return a;
  }
  return 2;
}

bool ActionHistory::contains(int action) const {
  return std::find(items_.begin(), items_.end(), action) != items_.end();
}

void ActionHistory::push(int action) {
  items_.push_back(action);
  while (static_cast<int>(items_.size()) > capacity_) items_.pop_front();
}

int reward_div(int action, ActionHistory& history) {
  const int novel = history.contains(action) ? 0 : 1;
  history.push(action);
  return novel;
}

int canonical_matching_id(const std::array<int, 4>& quad, const Pairing& pairing) {
  QuadKey key = quad;
  std::sort(key.begin(), key.end());
  int partner = -1;
  for (auto p : pairing) {
    if (p.first == key[0]) partner = p.second;
    if (p.second == key[0]) partner = p.first;
  }
  if (partner == key[1]) return 0;
  if (partner == key[2]) return 1;
  if (partner == key[3]) return 2;
  throw std::invalid_argument("pairing does not cover the quad");
}

double reward_smooth(const std::vector<std::vector<const Pose*>>& sequences, int seam, int window,
                     int fps) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  double total = 0.0;
  const double s2 = static_cast<double>(fps) * fps;
  for (const auto& seq : sequences) {
    const int len = static_cast<int>(seq.size());
    // acc(g) is defined for g in [1, len - 2]
    if (seam - window < 1 || seam + window > len - 1)
      throw std::invalid_argument("insufficient frames around the seam");
    const int joints = seq.front()->joint_count();
    auto acc = [&](int g, int j) {
      Vec3 fwd = seq[g + 1]->positions[j] - seq[g]->positions[j];
      Vec3 bwd = seq[g]->positions[j] - seq[g - 1]->positions[j];
      return s2 * (fwd - bwd);
    };
    // per character: acceleration averaged over the window frames and joints
    Vec3 before{}, after{};
    for (int j = 0; j < joints; ++j) {
      for (int f = seam - window; f < seam; ++f) before += acc(f, j);
      for (int f = seam; f < seam + window; ++f) after += acc(f, j);
    }
    before = (1.0 / (window * joints)) * before;
    after = (1.0 / (window * joints)) * after;
    total += norm2(before - after);
  }
  return std::exp(-total);
}

double quad_transition_reward_smooth(const SceneTimeline& timeline,
                                     const std::array<int, 4>& quad, int boundary, int window) {
  if (boundary < 1 || boundary >= timeline.step_count())
    throw std::invalid_argument("boundary out of range");
  const int w = timeline.clip_length();
  const int seam = w + (boundary - 1) * (w - timeline.seam_overlap);
  std::vector<std::vector<const Pose*>> sequences;
  sequences.reserve(4);
  for (int m : quad) sequences.push_back(concat_frames(timeline, m));
  return reward_smooth(sequences, seam, window, timeline.fps());
}

void validate(const RLConfig& config) {
  if (!(config.gamma > 0.0 && config.gamma <= 1.0))
    throw std::invalid_argument("gamma must lie in (0, 1]");
  if (config.episodes < 1 || config.steps_per_episode < 2)
    throw std::invalid_argument("bad episode configuration");
  if (config.history_window < 1) throw std::invalid_argument("history window must be >= 1");
  if (config.batch_episodes < 1) throw std::invalid_argument("batch_episodes must be >= 1");
}

StepEnvResult step_env(SceneRunner& runner, const ActionChooser& chooser,
                       std::map<QuadKey, ActionHistory>& histories, int window,
                       int history_window) {
  StepEnvResult result;
  result.records = runner.step(chooser);
  const int boundary = runner.steps_done() - 1;
  for (const auto& record : result.records) {
    QuadKey key = record.quad;
    std::sort(key.begin(), key.end());
    auto [it, inserted] = histories.try_emplace(key, ActionHistory(history_window));
    const double smooth =
        quad_transition_reward_smooth(runner.timeline(), record.quad, boundary, window);
    const double div = reward_div(canonical_matching_id(record.quad, record.pairing), it->second);
    result.rewards.push_back(smooth + div);
  }
  return result;
}

Mlp::Grads episode_policy_gradient(const PolicyParams& policy,
                                   const std::vector<Observation>& observations,
                                   const std::vector<int>& actions,
                                   const std::vector<double>& rewards, double gamma,
                                   double baseline) {
  if (observations.size() != actions.size() || actions.size() != rewards.size())
    throw std::invalid_argument("trajectory length mismatch");
  const int len = static_cast<int>(observations.size());
  std::vector<double> returns(len, 0.0);
  double g = 0.0;
  for (int t = len - 1; t >= 0; --t) {
    g = rewards[t] + gamma * g;
    returns[t] = g;
  }
  auto grads = policy.net.make_grads();
  Mlp::Cache cache;
  std::vector<double> logits;
  for (int t = 0; t < len; ++t) {
    policy.net.forward(observations[t].features, 1, logits, &cache);
    const double peak = std::max({logits[0], logits[1], logits[2]});
    std::array<double, 3> probs{};
    double total = 0.0;
    for (int a = 0; a < 3; ++a) {
      probs[a] = std::exp(logits[a] - peak);
      total += probs[a];
    }
    for (auto& p : probs) p /= total;
    const double advantage = returns[t] - baseline;
    std::vector<double> dlogits(3);
    for (int a = 0; a < 3; ++a)
      dlogits[a] = advantage * (probs[a] - (a == actions[t] ? 1.0 : 0.0));
    policy.net.backward(cache, dlogits, grads);
  }
  return grads;
}

ActionChooser trained_chooser(const PolicyParams& policy) {
  return [&policy](const DecisionContext& ctx) {
    const Observation obs = featurize(ctx.clips, ctx.current_action);
    const auto probs = policy_forward(policy, obs);
    return sample_action(probs, ctx.seed);
  };
}

TrainPolicyResult train_policy(const Denoiser& model, const SceneConfig& base,
                               const RLConfig& config) {
  validate(config);
  TrainPolicyResult result;
  result.policy = make_policy(derive_seed(config.seed, 0x504F4CULL), config.policy_hidden);
  result.policy.history_window = config.history_window;
  PolicyParams& policy = result.policy;

  Adam adam(policy.net, config.lr);
  auto batch_grads = policy.net.make_grads();
  int batch_count = 0;
  double baseline = 0.0;
  bool baseline_ready = false;

  for (int ep = 0; ep < config.episodes; ++ep) {
    SceneConfig scene = base;
    scene.n_requested = 4;
    scene.steps = config.steps_per_episode;
    scene.seed = derive_seed(config.seed, 0x45500000ULL + ep);
    SceneRunner runner(scene, model);
    runner.init();

    std::map<QuadKey, ActionHistory> histories;
    std::vector<Observation> observations;
    std::vector<int> actions;
    std::vector<double> rewards;
    auto chooser = [&](const DecisionContext& ctx) {
      const Observation obs = featurize(ctx.clips, ctx.current_action);
      const auto probs = policy_forward(policy, obs);
      for (double p : probs)
        if (!std::isfinite(p))
          throw std::runtime_error("policy training diverged: non-finite action probability");
      const int action = sample_action(probs, ctx.seed);
      observations.push_back(obs);
      actions.push_back(action);
      return action;
    };
    for (int t = 1; t < scene.steps; ++t) {
      auto step = step_env(runner, chooser, histories, config.smooth_window,
                           config.history_window);
      for (double r : step.rewards) rewards.push_back(r);
    }

    double episode_total = 0.0;
    for (double r : rewards) episode_total += r;
    result.episode_rewards.push_back(episode_total);

    std::vector<double> returns(rewards.size(), 0.0);
    double g = 0.0;
    for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
      g = rewards[t] + config.gamma * g;
      returns[t] = g;
    }
    double mean_return = 0.0;
    for (double r : returns) mean_return += r;
    mean_return /= static_cast<double>(returns.size());
    if (!baseline_ready) {
      baseline = mean_return;
      baseline_ready = true;
    }

    const auto grads = episode_policy_gradient(policy, observations, actions, rewards,
                                               config.gamma, baseline);
    batch_grads.add_scaled(grads, 1.0);
    ++batch_count;
    baseline = (1.0 - config.baseline_decay) * baseline + config.baseline_decay * mean_return;

    if (batch_count == config.batch_episodes || ep + 1 == config.episodes) {
      batch_grads.scale(1.0 / batch_count);
      adam.step(policy.net, batch_grads);
      batch_grads.zero();
      batch_count = 0;
    }
  }
  return result;
}

QuadDiversity plan_diversity(const std::vector<PlanRecord>& plans) {
  auto normalize_pairing = [](Pairing p) {
    for (auto& pr : p)
      if (pr.first > pr.second) std::swap(pr.first, pr.second);
    if (p[1] < p[0]) std::swap(p[0], p[1]);
    return p;
  };
  std::map<QuadKey, std::set<Pairing>> chosen;
  for (const auto& record : plans) {
    QuadKey key = record.quad;
    std::sort(key.begin(), key.end());
    chosen[key].insert(normalize_pairing(record.pairing));
  }
  QuadDiversity out;
  out.quads = static_cast<int>(chosen.size());
  if (out.quads == 0) return out;
  int multi = 0;
  for (const auto& [key, set] : chosen) {
    out.mean_distinct += static_cast<double>(set.size());
    if (set.size() >= 2) ++multi;
  }
  out.mean_distinct /= out.quads;
  out.frac_multi = static_cast<double>(multi) / out.quads;
  return out;
}

std::vector<EvalRow> evaluate_policy(const Denoiser& model, const PolicyParams* policy,
                                     const SceneConfig& base, int n_scenes,
                                     const std::vector<std::string>& policies) {
  std::vector<EvalRow> rows;
  for (const auto& name : policies) {
    ActionChooser chooser;
    if (name == "trained") {
      if (!policy) throw std::invalid_argument("trained evaluation needs a policy");
      chooser = trained_chooser(*policy);
    } else if (name == "random") {
      chooser = random_chooser();
    } else if (name == "static") {
      chooser = static_chooser();
    } else {
      throw std::invalid_argument("unknown policy: " + name);
    }
    for (int s = 0; s < n_scenes; ++s) {
      SceneConfig scene = base;
      scene.seed = derive_seed(base.seed, 0x4556414CULL + s);  // paired across policies
      const auto run = run_scene(scene, model, chooser);
      EvalRow row;
      row.policy = name;
      row.seed = scene.seed;
      row.ts = peak_jerk(run.timeline);
      row.hd = hip_distance(run.timeline);
      row.min_hip_distance = min_pairwise_hip_distance(run.timeline);
      row.diversity = plan_diversity(run.plans);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {
constexpr const char* kPolicyMagic = "MCS-POLICY-CKPT-V1\n";
}

void save_policy(const PolicyParams& policy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);
  nlohmann::ordered_json header;
  header["sizes"] = policy.net.sizes();
  header["history_window"] = policy.history_window;
  header["train_seed"] = policy.train_seed;
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  out << kPolicyMagic;
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto params = policy.net.flatten_params();
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw std::invalid_argument("write failed: " + path);
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  std::string magic(std::strlen(kPolicyMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kPolicyMagic) throw SchemaError("not a policy checkpoint (magic mismatch)");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ULL << 30)) throw SchemaError("bad policy header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw SchemaError("truncated policy header");
  PolicyParams policy;
  try {
    auto header = nlohmann::ordered_json::parse(text);
    policy.net = Mlp(header.at("sizes").get<std::vector<int>>());
    policy.history_window = header.at("history_window").get<int>();
    policy.train_seed = header.at("train_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("policy header parse error: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("invalid policy content: ") + e.what());
  }
  std::vector<double> params(policy.net.parameter_count());
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!in) throw SchemaError("truncated policy weights");
  policy.net.load_params(params);
  return policy;
}

}  // namespace mcs
