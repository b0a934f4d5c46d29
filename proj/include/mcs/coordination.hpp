#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mcs/diffusion.hpp"
#include "mcs/guidance.hpp"
#include "mcs/motion.hpp"
#include "mcs/synth_data.hpp"

namespace mcs {

// A perfect matching over character indices; pairs are (i < j), sorted by
// first member. The lowest member of a pair decides generation order.
struct GroupAssignment {
  std::vector<std::pair<int, int>> pairs;

  void validate(int n_characters) const;  // throws std::invalid_argument
  void sort_pairs();
};

// Smallest multiple of 4 >= n_requested, plus the virtual-character flags.
std::pair<int, std::vector<bool>> pad_virtual(int n_requested);

// Greedy pairing: repeatedly join the globally closest unpaired characters,
// ties broken by lowest index pair.
GroupAssignment initial_grouping(const std::vector<Vec3>& hips);

struct Quad {
  std::pair<int, int> pair_a, pair_b;  // pair_a.first < pair_b.first
  std::array<int, 4> members() const {
    return {pair_a.first, pair_a.second, pair_b.first, pair_b.second};
  }
};

// Greedy quad formation: repeatedly join the two pairs with the closest hip
// centroids, ties broken by lowest pair index.
std::vector<Quad> form_quads(const GroupAssignment& assignment, const std::vector<Vec3>& hips);

using Pairing = std::array<std::pair<int, int>, 2>;

// The 3 perfect matchings of a quad over its member slots as given:
// keep {(0,1),(2,3)}, cross {(0,2),(1,3)}, swap {(0,3),(1,2)}.
std::array<Pairing, 3> enumerate_actions(const std::array<int, 4>& quad);

// Quad members sorted by distance to the quad's hip centroid, ties by index.
std::array<int, 4> canonical_quad_order(const std::array<int, 4>& members,
                                        const std::vector<Vec3>& hips);

struct TransitionPlan {
  std::array<int, 4> quad;
  Pairing new_pairing;
  int action = -1;  // index into enumerate_actions(quad)
};

// Replaces each planned quad's two pairs with the plan's new pairing. Plans
// must cover disjoint quads; the result is validated as a perfect matching.
GroupAssignment apply_plan(const GroupAssignment& assignment,
                           const std::vector<TransitionPlan>& plans);

struct SceneConfig {
  int n_requested = 8;
  int steps = 6;  // T
  StyleParams style;
  ConstraintSet constraints;
  double eta = 0.1;
  bool guidance_on = true;
  int seam_overlap = 4;  // frames pinned from the previous clip
  double spacing = 0.0;  // placement grid spacing; 0 = max(1, 2 sqrt(tau))
  double max_guidance_step = 0.5;  // per-element guidance cap, normalized units
  bool tilde_variance = false;     // tighter re-noising variance
  std::uint64_t seed = 1;

  struct AddEvent {
    int step = 0;  // applied before planning this step
    double x = 0.0, y = 0.0;
  };
  std::vector<AddEvent> add_events;
};

void validate(const SceneConfig& config, const Denoiser& model);
double resolved_spacing(const SceneConfig& config);

// Everything a transition chooser may look at for one quad decision.
struct DecisionContext {
  std::array<int, 4> quad;                  // canonical member order
  std::array<const MotionClip*, 4> clips;   // previous clips, same order
  int current_action = 0;                   // index of the current pairing
  std::uint64_t seed = 0;                   // per-decision stream
};
using ActionChooser = std::function<int(const DecisionContext&)>;

ActionChooser static_chooser();  // always keeps the current pairing
ActionChooser random_chooser();  // uniform over the 3 matchings, seeded

struct PlanRecord {
  int step = 0;
  std::array<int, 4> quad;
  int action = 0;
  Pairing pairing;
};

// Test hook: how many already-generated groups each group's guidance could
// see, in generation order.
struct StepInstrumentation {
  std::vector<int> visible_groups;
};

// One autoregressive step: groups are generated sequentially in ascending
// order of lowest member index; each group's sampler pins the first
// seam_overlap frames to the previous clip and its guidance closes over the
// groups generated so far. With prev == nullptr the step is unconditional and
// pairs are placed on the spawn grid (centroid to pair midpoint, partner axis
// along +x).
ClipSet synthesize_step(const ClipSet* prev, const GroupAssignment& assignment,
                        const Denoiser& model, const SceneConfig& config, std::uint64_t seed,
                        StepInstrumentation* instrumentation = nullptr,
                        int* guidance_warnings = nullptr);

// Deterministic spawn grid for n characters.
std::vector<Vec3> spawn_grid(int n, double spacing);

// Owns the evolving scene: assignment, conditioning clips, timeline, plan
// records and add-character bookkeeping.
class SceneRunner {
 public:
  SceneRunner(SceneConfig config, const Denoiser& model);

  void init();                                            // synthesizes step 0
  std::vector<PlanRecord> step(const ActionChooser& chooser);  // plans + synthesizes
  void add_character(double x, double y);                 // throws SpawnTooClose

  const SceneTimeline& timeline() const { return timeline_; }
  const GroupAssignment& assignment() const { return assignment_; }
  const std::vector<PlanRecord>& plans() const { return plans_; }
  const ClipSet& conditioning() const { return prev_; }
  int steps_done() const { return timeline_.step_count(); }
  int guidance_warnings() const { return guidance_warnings_; }
  int n_requested() const { return n_requested_; }
  int n_padded() const { return n_padded_; }
  std::vector<Vec3> current_hips() const;

 private:
  void stamp_flags();

  SceneConfig config_;
  const Denoiser& model_;
  int n_requested_ = 0;
  int n_padded_ = 0;
  std::vector<bool> virtual_flags_;
  std::vector<int> active_from_;
  GroupAssignment assignment_;
  ClipSet prev_;  // conditioning state; diverges from the timeline on adds
  SceneTimeline timeline_;
  std::vector<PlanRecord> plans_;
  int guidance_warnings_ = 0;
};

struct SceneRunResult {
  SceneTimeline timeline;
  std::vector<PlanRecord> plans;
  int n_requested = 0;
  int guidance_warnings = 0;
};

// Full scene loop: step 0, then (add events, plan, synthesize) per step.
SceneRunResult run_scene(const SceneConfig& config, const Denoiser& model,
                         const ActionChooser& chooser);

}  // namespace mcs
