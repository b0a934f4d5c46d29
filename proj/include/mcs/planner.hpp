#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "mcs/coordination.hpp"
#include "mcs/net.hpp"

namespace mcs {

// Per quad character (canonical order): hip position (3), hip velocity (3),
// mean limb extension (1); plus a one-hot of the current pairing (3).
inline constexpr int kObservationDim = 4 * 7 + 3;

struct Observation {
  std::vector<double> features;
};

// Canonical frame: quad hip centroid at the origin, mean hip velocity facing
// +x (identity heading when the mean velocity is degenerate). Built from the
// last frame of each clip.
Observation featurize(const std::array<const MotionClip*, 4>& clips, int current_action);

struct PolicyParams {
  Mlp net;  // kObservationDim -> hidden -> hidden -> 3 logits
  int history_window = 3;
  std::uint64_t train_seed = 0;
};

PolicyParams make_policy(std::uint64_t seed, int hidden = 64);

// Softmax over the 3 logits.
std::array<double, 3> policy_forward(const PolicyParams& policy, const Observation& obs);

int sample_action(const std::array<double, 3>& probs, std::uint64_t seed);

// Ring buffer of the last H actions of one quad; an action is novel iff it is
// not in the buffer.
class ActionHistory {
 public:
  explicit ActionHistory(int capacity = 3) : capacity_(capacity) {}
  bool contains(int action) const;
  void push(int action);
  int size() const { return static_cast<int>(items_.size()); }

 private:
  int capacity_;
  std::deque<int> items_;
};

// 1 iff `action` is novel; pushes it either way.
int reward_div(int action, ActionHistory& history);

// Order-independent id of a quad matching: the partner of the lowest member
// decides (second-lowest -> 0, third -> 1, highest -> 2). Novelty is judged
// on this id, so re-labelling the quad's canonical order cannot fake novelty.
int canonical_matching_id(const std::array<int, 4>& quad, const Pairing& pairing);

// exp(-sum over characters and joints of ||mean acc before - mean acc after||^2),
// with means taken over `window` frames on each side of `seam` (the index of
// the first post-seam frame). Throws on insufficient frames.
double reward_smooth(const std::vector<std::vector<const Pose*>>& sequences, int seam, int window,
                     int fps);

// reward_smooth for one quad at timeline boundary `boundary` (1-based step junction).
double quad_transition_reward_smooth(const SceneTimeline& timeline,
                                     const std::array<int, 4>& quad, int boundary, int window);

struct RLConfig {
  int episodes = 300;
  int steps_per_episode = 6;
  double gamma = 0.95;
  double lr = 3e-3;
  double baseline_decay = 0.05;
  int history_window = 3;
  int smooth_window = 10;
  int batch_episodes = 8;
  int policy_hidden = 64;
  std::uint64_t seed = 7;
};

void validate(const RLConfig& config);

using QuadKey = std::array<int, 4>;  // sorted member indices

struct StepEnvResult {
  std::vector<PlanRecord> records;
  std::vector<double> rewards;  // r_smooth + r_div per quad, same order
};

// One environment transition: plan + synthesize through the runner, then score
// each quad's transition. Fresh quads get a history of `history_window` slots.
StepEnvResult step_env(SceneRunner& runner, const ActionChooser& chooser,
                       std::map<QuadKey, ActionHistory>& histories, int window,
                       int history_window = 3);

// REINFORCE gradient of one episode for a minimizing optimizer:
// sum_t (G_t - baseline) * (probs_t - onehot(a_t)) backpropagated.
Mlp::Grads episode_policy_gradient(const PolicyParams& policy,
                                   const std::vector<Observation>& observations,
                                   const std::vector<int>& actions,
                                   const std::vector<double>& rewards, double gamma,
                                   double baseline);

struct TrainPolicyResult {
  PolicyParams policy;
  std::vector<double> episode_rewards;  // undiscounted per-episode sum
};

// Likelihood-ratio policy gradient with an EMA baseline over 4-character
// scenes; deterministic given the config seeds. `base` supplies style,
// constraints and sampler settings; n_requested/steps are overridden.
TrainPolicyResult train_policy(const Denoiser& model, const SceneConfig& base,
                               const RLConfig& config);

ActionChooser trained_chooser(const PolicyParams& policy);

struct QuadDiversity {
  int quads = 0;
  double mean_distinct = 0.0;
  double frac_multi = 0.0;  // fraction of quads choosing >= 2 distinct matchings
};
QuadDiversity plan_diversity(const std::vector<PlanRecord>& plans);

struct EvalRow {
  std::string policy;
  std::uint64_t seed = 0;
  double ts = 0.0;
  double hd = 0.0;
  double min_hip_distance = 0.0;
  QuadDiversity diversity;
};

// Seeded, paired evaluation of the given policies ("trained", "random",
// "static") over n_scenes scenes.
std::vector<EvalRow> evaluate_policy(const Denoiser& model, const PolicyParams* policy,
                                     const SceneConfig& base, int n_scenes,
                                     const std::vector<std::string>& policies);

void save_policy(const PolicyParams& policy, const std::string& path);
PolicyParams load_policy(const std::string& path);  // throws SchemaError

}  // namespace mcs
