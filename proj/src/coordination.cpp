#include "mcs/coordination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "mcs/errors.hpp"
#include "mcs/rng.hpp"

namespace mcs {

void GroupAssignment::validate(int n_characters) const {
  if (n_characters % 2 != 0) throw std::invalid_argument("character count must be even");
  std::vector<char> seen(n_characters, 0);
  if (static_cast<int>(pairs.size()) * 2 != n_characters)
    throw std::invalid_argument("assignment is not a perfect matching");
  for (auto [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= n_characters || j >= n_characters || i >= j)
      throw std::invalid_argument("bad pair indices");
    if (seen[i] || seen[j]) throw std::invalid_argument("character appears in two pairs");
    seen[i] = seen[j] = 1;
  }
}

void GroupAssignment::sort_pairs() {
  for (auto& p : pairs)
    if (p.first > p.second) std::swap(p.first, p.second);
  std::sort(pairs.begin(), pairs.end());
}

std::pair<int, std::vector<bool>> pad_virtual(int n_requested) {
  if (n_requested < 2) throw std::invalid_argument("need at least 2 characters");
  const int n_padded = ((n_requested + 3) / 4) * 4;
  std::vector<bool> flags(n_padded, false);
  for (int c = n_requested; c < n_padded; ++c) flags[c] = true;
  return {n_padded, flags};
}

GroupAssignment initial_grouping(const std::vector<Vec3>& hips) {
  const int n = static_cast<int>(hips.size());
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("need an even character count");
  std::vector<char> used(n, 0);
  GroupAssignment out;
  for (int round = 0; round < n / 2; ++round) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<int, int> pick{-1, -1};
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (used[j]) continue;
        const double d2 = norm2(hips[i] - hips[j]);
        if (d2 < best) {
          best = d2;
          pick = {i, j};
        }
      }
    }
    used[pick.first] = used[pick.second] = 1;
    out.pairs.push_back(pick);
  }
  out.sort_pairs();
  return out;
}

std::vector<Quad> form_quads(const GroupAssignment& assignment, const std::vector<Vec3>& hips) {
  const auto& pairs = assignment.pairs;
  if (pairs.size() % 2 != 0) throw std::invalid_argument("pair count must be even");
  std::vector<Vec3> centroids;
  centroids.reserve(pairs.size());
  for (auto [i, j] : pairs) centroids.push_back(0.5 * (hips.at(i) + hips.at(j)));

  std::vector<char> used(pairs.size(), 0);
  std::vector<Quad> quads;
  for (std::size_t round = 0; round < pairs.size() / 2; ++round) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<int, int> pick{-1, -1};
    for (int a = 0; a < static_cast<int>(pairs.size()); ++a) {
      if (used[a]) continue;
      for (int b = a + 1; b < static_cast<int>(pairs.size()); ++b) {
        if (used[b]) continue;
        const double d2 = norm2(centroids[a] - centroids[b]);
        if (d2 < best) {
          best = d2;
          pick = {a, b};
        }
      }
    }
    used[pick.first] = used[pick.second] = 1;
    quads.push_back(Quad{pairs[pick.first], pairs[pick.second]});
  }
  return quads;
}

std::array<Pairing, 3> enumerate_actions(const std::array<int, 4>& quad) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (quad[i] == quad[j]) throw std::invalid_argument("quad indices must be distinct");
  auto mk = [](int a, int b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); };
  return {Pairing{mk(quad[0], quad[1]), mk(quad[2], quad[3])},
          Pairing{mk(quad[0], quad[2]), mk(quad[1], quad[3])},
          Pairing{mk(quad[0], quad[3]), mk(quad[1], quad[2])}};
}

std::array<int, 4> canonical_quad_order(const std::array<int, 4>& members,
                                        const std::vector<Vec3>& hips) {
  Vec3 centroid{};
  for (int m : members) centroid += hips.at(m);
  centroid = 0.25 * centroid;
  std::array<int, 4> out = members;
  std::sort(out.begin(), out.end(), [&](int a, int b) {
    const double da = norm2(hips[a] - centroid), db = norm2(hips[b] - centroid);
    if (da != db) return da < db;
    return a < b;
  });
  return out;
}

GroupAssignment apply_plan(const GroupAssignment& assignment,
                           const std::vector<TransitionPlan>& plans) {
  std::set<int> touched;
  for (const auto& plan : plans)
    for (int m : plan.quad)
      if (!touched.insert(m).second) throw std::invalid_argument("overlapping plan quads");

  GroupAssignment out = assignment;
  for (const auto& plan : plans) {
    std::set<int> quad_set(plan.quad.begin(), plan.quad.end());
    if (quad_set.size() != 4) throw std::invalid_argument("quad indices must be distinct");
    // Remove the two pairs currently inside the quad.
    int removed = 0;
    for (auto it = out.pairs.begin(); it != out.pairs.end();) {
      const bool inside = quad_set.count(it->first) && quad_set.count(it->second);
      const bool partial = quad_set.count(it->first) != quad_set.count(it->second);
      if (partial) throw std::invalid_argument("plan quad does not match assignment pairs");
      if (inside) {
        it = out.pairs.erase(it);
        ++removed;
      } else {
        ++it;
      }
    }
    if (removed != 2) throw std::invalid_argument("plan quad does not cover two pairs");
    for (auto p : plan.new_pairing) {
      if (!quad_set.count(p.first) || !quad_set.count(p.second))
        throw std::invalid_argument("new pairing leaves the quad");
      out.pairs.push_back(p.first < p.second ? p : std::make_pair(p.second, p.first));
    }
  }
  out.sort_pairs();
  out.validate(static_cast<int>(out.pairs.size()) * 2);
  return out;
}

double resolved_spacing(const SceneConfig& config) {
  if (config.spacing > 0.0) return config.spacing;
  return std::max(1.0, 2.0 * std::sqrt(config.constraints.tau));
}

void validate(const SceneConfig& config, const Denoiser& model) {
  if (config.n_requested < 2) throw std::invalid_argument("n_requested must be >= 2");
  if (config.steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (config.seam_overlap < 0 || config.seam_overlap >= model.shape.clip_len)
    throw std::invalid_argument("seam_overlap must lie in [0, clip_len)");
  if (config.style.clip_len != model.shape.clip_len || config.style.joints != model.shape.joints ||
      config.style.fps != model.fps)
    throw std::invalid_argument("scene style shape does not match the generator checkpoint");
  validate(config.constraints);
  for (const auto& event : config.add_events)
    if (event.step < 1 || event.step >= config.steps)
      throw std::invalid_argument("add-character step out of range");
}

std::vector<Vec3> spawn_grid(int n, double spacing) {
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int rows = (n + cols - 1) / cols;
  std::vector<Vec3> out(n);
  for (int c = 0; c < n; ++c) {
    const int col = c % cols, row = c / cols;
    out[c] = {spacing * (col - 0.5 * (cols - 1)), spacing * (row - 0.5 * (rows - 1)), 0.0};
  }
  return out;
}

ClipSet synthesize_step(const ClipSet* prev, const GroupAssignment& assignment,
                        const Denoiser& model, const SceneConfig& config, std::uint64_t seed,
                        StepInstrumentation* instrumentation, int* guidance_warnings) {
  const PairShape shape = model.shape;
  const int n = static_cast<int>(assignment.pairs.size()) * 2;
  assignment.validate(n);
  if (prev && prev->character_count() != n)
    throw std::invalid_argument("previous step character count mismatch");

  const int w = shape.clip_len;
  const int k = config.seam_overlap;
  ClipSet out;
  out.clips.resize(n);
  out.virtual_flags.assign(n, false);

  std::vector<std::vector<double>> generated;
  generated.reserve(assignment.pairs.size());
  std::vector<const std::vector<double>*> others;

  const auto grid = spawn_grid(n, resolved_spacing(config));

  for (std::size_t g = 0; g < assignment.pairs.size(); ++g) {
    const auto [i, j] = assignment.pairs[g];
    const std::uint64_t group_seed = derive_seed(seed, g);
    SampleResult res;
    try {
      if (!prev) {
        res = sample(model, nullptr, nullptr, nullptr, group_seed,
                     SampleOptions{config.eta, config.max_guidance_step, config.tilde_variance});
        // Deterministic placement: pair centroid to the members' spawn
        // midpoint; partner axis rotated onto +x.
        const Vec3 h0 = hip_position(res.clip, shape, 0, 0);
        const Vec3 h1 = hip_position(res.clip, shape, 1, 0);
        const Vec3 centroid = 0.5 * (h0 + h1);
        const double yaw = std::atan2(h1.y - h0.y, h1.x - h0.x);
        const Vec3 target = 0.5 * (grid[i] + grid[j]);
        transform_pair(res.clip, shape, centroid, -yaw,
                       Vec3{target.x - centroid.x, target.y - centroid.y, 0.0});
        if (instrumentation) instrumentation->visible_groups.push_back(0);
      } else {
        std::vector<double> observed(shape.dim(), 0.0);
        std::vector<double> mask(shape.dim(), 0.0);
        const MotionClip* members[2] = {&prev->clips[i], &prev->clips[j]};
        for (int c = 0; c < 2; ++c)
          for (int f = 0; f < k; ++f) {
            const Pose& pose = members[c]->frames[w - k + f];
            for (int jo = 0; jo < shape.joints; ++jo) {
              double* at = observed.data() + shape.index(c, f, jo, 0);
              at[0] = pose.positions[jo].x;
              at[1] = pose.positions[jo].y;
              at[2] = pose.positions[jo].z;
              at[3] = pose.rotations[jo].w;
              at[4] = pose.rotations[jo].x;
              at[5] = pose.rotations[jo].y;
              at[6] = pose.rotations[jo].z;
              at[7] = pose.velocities[jo].x;
              at[8] = pose.velocities[jo].y;
              at[9] = pose.velocities[jo].z;
              for (int ch = 0; ch < kChannels; ++ch) mask[shape.index(c, f, jo, ch)] = 1.0;
            }
          }
        // The model works in the canonical frame (seam pair centroid at the
        // origin, partner axis on +x); the anchor restores world coordinates.
        const PairAnchor anchor = pair_anchor(observed, shape);
        std::vector<double> observed_canonical = observed;
        canonicalize_pair(observed_canonical, shape);

        // Smoothness context: the frames immediately before the pinned seam.
        const int ctx_end = w - k;
        const int ctx_start = std::max(0, ctx_end - 3);
        const int ctx_len = ctx_end - ctx_start;
        PairShape ctx_shape{ctx_len, shape.joints};
        std::vector<double> context;
        if (ctx_len > 0) {
          MotionClip tail[2];
          for (int c = 0; c < 2; ++c) {
            tail[c].fps = members[c]->fps;
            tail[c].frames.assign(members[c]->frames.begin() + ctx_start,
                                  members[c]->frames.begin() + ctx_end);
          }
          context = pack_pair(tail[0], tail[1]);
        }
        GuidanceFn guidance;
        if (config.guidance_on) {
          auto visible = others;  // snapshot: later groups are not visible
          const ConstraintSet constraints = config.constraints;
          const int fps = model.fps;
          guidance = [visible, context, ctx_shape, constraints, fps, shape,
                      anchor](const std::vector<double>& candidate_canonical) {
            // constraints live in world coordinates; the gradient rotates back
            // into the canonical frame the sampler works in
            std::vector<double> candidate = candidate_canonical;
            anchor_pair(candidate, shape, anchor);
            GuidanceEval eval =
                total_guidance(candidate, shape, visible, context, ctx_shape, constraints, fps);
            rotate_position_gradients(eval.grad, shape, -anchor.yaw);
            return eval;
          };
        }
        if (instrumentation) instrumentation->visible_groups.push_back(static_cast<int>(others.size()));
        res = sample(model, &observed_canonical, &mask, guidance, group_seed,
                     SampleOptions{config.eta, config.max_guidance_step, config.tilde_variance});
        if (guidance_warnings) *guidance_warnings += res.guidance_warnings;
        anchor_pair(res.clip, shape, anchor);
        // restore the world seam bitwise (the canonical round trip may round)
        for (int d = 0; d < shape.dim(); ++d)
          if (mask[d] != 0.0) res.clip[d] = observed[d];
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("group (" + std::to_string(i) + "," + std::to_string(j) +
                               ") generation failed: " + e.what());
    }
    generated.push_back(std::move(res.clip));
    others.push_back(&generated.back());
    auto [clip_a, clip_b] = unpack_pair(generated.back(), shape, model.fps);
    out.clips[i] = std::move(clip_a);
    out.clips[j] = std::move(clip_b);
  }
  return out;
}

ActionChooser static_chooser() {
  return [](const DecisionContext& ctx) { return ctx.current_action; };
}

ActionChooser random_chooser() {
  return [](const DecisionContext& ctx) {
    Rng rng(derive_seed(ctx.seed, 0x52414E44ULL));
    return static_cast<int>(rng.uniform_index(3));
  };
}

SceneRunner::SceneRunner(SceneConfig config, const Denoiser& model)
    : config_(std::move(config)), model_(model) {
  validate(config_, model_);
  n_requested_ = config_.n_requested;
  auto [padded, flags] = pad_virtual(n_requested_);
  n_padded_ = padded;
  virtual_flags_ = std::move(flags);
  active_from_.assign(n_padded_, 0);
  timeline_.seed = config_.seed;
  timeline_.seam_overlap = config_.seam_overlap;
}

void SceneRunner::stamp_flags() {
  timeline_.active_from = active_from_;
  for (auto& step : timeline_.steps) step.virtual_flags = virtual_flags_;
  prev_.virtual_flags = virtual_flags_;
}

void SceneRunner::init() {
  if (!timeline_.steps.empty()) throw std::logic_error("scene already initialized");
  const auto grid = spawn_grid(n_padded_, resolved_spacing(config_));
  assignment_ = initial_grouping(grid);
  ClipSet first = synthesize_step(nullptr, assignment_, model_, config_,
                                  derive_seed(config_.seed, 0x53544550ULL), nullptr,
                                  &guidance_warnings_);
  prev_ = first;
  timeline_.steps.push_back(std::move(first));
  stamp_flags();
}

std::vector<Vec3> SceneRunner::current_hips() const {
  std::vector<Vec3> hips(prev_.character_count());
  for (int c = 0; c < prev_.character_count(); ++c)
    hips[c] = prev_.clips[c].frames.back().positions[kHipJoint];
  return hips;
}

std::vector<PlanRecord> SceneRunner::step(const ActionChooser& chooser) {
  if (timeline_.steps.empty()) throw std::logic_error("scene not initialized");
  const int t = steps_done();
  const auto hips = current_hips();
  const auto quads = form_quads(assignment_, hips);

  std::vector<TransitionPlan> plans;
  std::vector<PlanRecord> records;
  for (std::size_t q = 0; q < quads.size(); ++q) {
    const auto order = canonical_quad_order(quads[q].members(), hips);
    const auto actions = enumerate_actions(order);
    // Which action matches the current pairing of this quad.
    auto normalized = [](std::pair<int, int> p) {
      return p.first < p.second ? p : std::make_pair(p.second, p.first);
    };
    const std::set<std::pair<int, int>> current{normalized(quads[q].pair_a),
                                                normalized(quads[q].pair_b)};
    int current_action = -1;
    for (int a = 0; a < 3; ++a) {
      const std::set<std::pair<int, int>> candidate{actions[a][0], actions[a][1]};
      if (candidate == current) current_action = a;
    }
    if (current_action < 0) throw std::logic_error("current pairing not among quad matchings");

    DecisionContext ctx;
    ctx.quad = order;
    for (int m = 0; m < 4; ++m) ctx.clips[m] = &prev_.clips[order[m]];
    ctx.current_action = current_action;
    ctx.seed = derive_seed(derive_seed(config_.seed, 0x504C414EULL),
                           static_cast<std::uint64_t>(t) * 1024 + q);
    const int action = chooser(ctx);
    if (action < 0 || action > 2) throw std::invalid_argument("chooser returned a bad action");
    plans.push_back(TransitionPlan{order, actions[action], action});
    records.push_back(PlanRecord{t, order, action, actions[action]});
  }

  assignment_ = apply_plan(assignment_, plans);
  ClipSet next = synthesize_step(&prev_, assignment_, model_, config_,
                                 derive_seed(derive_seed(config_.seed, 0x53544550ULL), t), nullptr,
                                 &guidance_warnings_);
  prev_ = next;
  timeline_.steps.push_back(std::move(next));
  stamp_flags();
  plans_.insert(plans_.end(), records.begin(), records.end());
  return records;
}

void SceneRunner::add_character(double x, double y) {
  if (timeline_.steps.empty()) throw std::logic_error("scene not initialized");
  const double radius = std::sqrt(config_.constraints.tau);
  const auto hips = current_hips();
  for (int c = 0; c < static_cast<int>(hips.size()); ++c) {
    if (virtual_flags_[c] || active_from_[c] > steps_done() - 1) continue;
    const double dx = hips[c].x - x, dy = hips[c].y - y;
    if (std::sqrt(dx * dx + dy * dy) < radius)
      throw SpawnTooClose("spawn too close to character " + std::to_string(c));
  }

  const int t = steps_done();
  if (n_requested_ < n_padded_) {
    // Reuse the lowest virtual slot.
    int slot = -1;
    for (int c = 0; c < n_padded_; ++c)
      if (virtual_flags_[c]) {
        slot = c;
        break;
      }
    virtual_flags_[slot] = false;
    active_from_[slot] = t;
    prev_.clips[slot] = rest_clip(config_.style, Vec3{x, y, 0.0});
    ++n_requested_;
  } else {
    // Grow by one quad slot block: the new character plus three virtuals.
    // The new character's virtual partner stands next to it so the pair is
    // coherent; the remaining virtual pair starts just outside the scene.
    const int base = n_padded_;
    double max_x = -1e9, max_y = -1e9;
    for (const auto& h : hips) {
      max_x = std::max(max_x, h.x);
      max_y = std::max(max_y, h.y);
    }
    const double s = resolved_spacing(config_);
    const double d = config_.style.partner_distance_mean;
    const Vec3 spawns[4] = {{x, y, 0.0},
                            {x + d, y, 0.0},
                            {max_x + s, max_y + s, 0.0},
                            {max_x + s + d, max_y + s, 0.0}};
    for (int k = 0; k < 4; ++k) {
      const MotionClip rest = rest_clip(config_.style, spawns[k]);
      virtual_flags_.push_back(k != 0);
      active_from_.push_back(t);
      prev_.clips.push_back(rest);
      for (auto& step : timeline_.steps) step.clips.push_back(rest);
    }
    assignment_.pairs.emplace_back(base, base + 1);
    assignment_.pairs.emplace_back(base + 2, base + 3);
    assignment_.sort_pairs();
    n_padded_ += 4;
    ++n_requested_;
  }
  assignment_.validate(n_padded_);
  stamp_flags();
}

SceneRunResult run_scene(const SceneConfig& config, const Denoiser& model,
                         const ActionChooser& chooser) {
  SceneRunner runner(config, model);
  runner.init();
  for (int t = 1; t < config.steps; ++t) {
    for (const auto& event : config.add_events)
      if (event.step == t) runner.add_character(event.x, event.y);
    runner.step(chooser);
  }
  SceneRunResult result;
  result.timeline = runner.timeline();
  result.plans = runner.plans();
  result.n_requested = runner.n_requested();
  result.guidance_warnings = runner.guidance_warnings();
  return result;
}

}  // namespace mcs
