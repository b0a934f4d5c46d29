#include "mcs/motion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mcs {

namespace {

bool finite(Vec3 v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }
bool finite(Quat q) {
  return std::isfinite(q.w) && std::isfinite(q.x) && std::isfinite(q.y) && std::isfinite(q.z);
}

// Characters eligible for metrics: not virtual, and already active at `step`.
bool eligible(const SceneTimeline& t, int character, int step) {
  if (t.steps.front().virtual_flags.size() > static_cast<std::size_t>(character) &&
      t.steps.front().virtual_flags[character])
    return false;
  if (!t.active_from.empty() && t.active_from[character] > step) return false;
  return true;
}

}  // namespace

void validate_pose(const Pose& pose, int expected_joints) {
  if (pose.joint_count() != expected_joints ||
      static_cast<int>(pose.rotations.size()) != expected_joints ||
      static_cast<int>(pose.velocities.size()) != expected_joints)
    throw std::invalid_argument("pose joint count mismatch");
  for (const auto& p : pose.positions)
    if (!finite(p)) throw std::invalid_argument("non-finite joint position");
  for (const auto& q : pose.rotations) {
    if (!finite(q)) throw std::invalid_argument("non-finite joint rotation");
    if (std::abs(norm(q) - 1.0) > 1e-6) throw std::invalid_argument("rotation not unit norm");
  }
  for (const auto& v : pose.velocities)
    if (!finite(v)) throw std::invalid_argument("non-finite joint velocity");
}

void validate_clip(const MotionClip& clip, int expected_len, int expected_joints, int expected_fps) {
  if (clip.length() != expected_len) throw std::invalid_argument("clip length mismatch");
  if (clip.fps != expected_fps || clip.fps <= 0) throw std::invalid_argument("clip fps mismatch");
  for (const auto& f : clip.frames) validate_pose(f, expected_joints);
}

void validate_timeline(const SceneTimeline& t) {
  if (t.steps.empty()) throw std::invalid_argument("timeline has no steps");
  const int n = t.character_count();
  if (n < 2) throw std::invalid_argument("timeline needs at least 2 characters");
  const int w = t.clip_length();
  const int j = t.steps.front().clips.front().joint_count();
  const int fps = t.fps();
  if (t.seam_overlap < 0 || t.seam_overlap >= w) throw std::invalid_argument("bad seam overlap");
  if (!t.active_from.empty() && static_cast<int>(t.active_from.size()) != n)
    throw std::invalid_argument("active_from size mismatch");
  for (const auto& step : t.steps) {
    if (step.character_count() != n) throw std::invalid_argument("character count varies per step");
    if (static_cast<int>(step.virtual_flags.size()) != n)
      throw std::invalid_argument("virtual_flags size mismatch");
    for (const auto& clip : step.clips) validate_clip(clip, w, j, fps);
  }
}

std::vector<std::vector<Vec3>> acceleration(const std::vector<Pose>& frames, int fps) {
  if (frames.size() < 3) throw std::invalid_argument("insufficient frames");
  if (fps <= 0) throw std::invalid_argument("fps must be positive");
  const double s = static_cast<double>(fps) * static_cast<double>(fps);
  const int joints = frames.front().joint_count();
  std::vector<std::vector<Vec3>> acc(frames.size() - 2, std::vector<Vec3>(joints));
  for (std::size_t f = 1; f + 1 < frames.size(); ++f) {
    for (int j = 0; j < joints; ++j) {
      Vec3 fwd = frames[f + 1].positions[j] - frames[f].positions[j];
      Vec3 bwd = frames[f].positions[j] - frames[f - 1].positions[j];
      acc[f - 1][j] = s * (fwd - bwd);
    }
  }
  return acc;
}

int concat_length(const SceneTimeline& t) {
  const int w = t.clip_length();
  return w + (t.step_count() - 1) * (w - t.seam_overlap);
}

std::vector<int> step_of_frame(const SceneTimeline& t) {
  const int w = t.clip_length();
  const int per = w - t.seam_overlap;
  std::vector<int> owner(concat_length(t));
  for (std::size_t f = 0; f < owner.size(); ++f)
    owner[f] = f < static_cast<std::size_t>(w) ? 0 : 1 + (static_cast<int>(f) - w) / per;
  return owner;
}

std::vector<const Pose*> concat_frames(const SceneTimeline& t, int character) {
  const int w = t.clip_length();
  std::vector<const Pose*> out;
  out.reserve(concat_length(t));
  for (int s = 0; s < t.step_count(); ++s) {
    const auto& frames = t.steps[s].clips[character].frames;
    for (int f = (s == 0 ? 0 : t.seam_overlap); f < w; ++f) out.push_back(&frames[f]);
  }
  return out;
}

double peak_jerk(const SceneTimeline& t, int boundary_window) {
  validate_timeline(t);
  if (t.step_count() < 2) throw std::invalid_argument("no transitions");
  if (boundary_window < 2) throw std::invalid_argument("boundary window too small");

  const int w = t.clip_length();
  const int per = w - t.seam_overlap;
  const int total = concat_length(t);
  const int joints = t.steps.front().clips.front().joint_count();
  const double fps = t.fps();
  const auto owner = step_of_frame(t);
  const int half = boundary_window / 2;

  double peak = 0.0;
  for (int c = 0; c < t.character_count(); ++c) {
    bool any_step_eligible = false;
    for (int s = 0; s < t.step_count(); ++s) any_step_eligible |= eligible(t, c, s);
    if (!any_step_eligible) continue;
    const auto frames = concat_frames(t, c);
    for (int boundary = 1; boundary < t.step_count(); ++boundary) {
      const int seam = w + (boundary - 1) * per;  // first new frame of step `boundary`
      for (int f = seam - half; f < seam + half; ++f) {
        // jerk between acc(f) and acc(f+1) needs positions f-1 .. f+2
        if (f < 1 || f + 2 > total - 1) continue;
        bool ok = true;
        for (int g = f - 1; g <= f + 2; ++g) ok &= eligible(t, c, owner[g]);
        if (!ok) continue;
        for (int j = 0; j < joints; ++j) {
          auto second = [&](int g) {
            Vec3 fwd = frames[g + 1]->positions[j] - frames[g]->positions[j];
            Vec3 bwd = frames[g]->positions[j] - frames[g - 1]->positions[j];
            return (fps * fps) * (fwd - bwd);
          };
          Vec3 jerk = fps * (second(f + 1) - second(f));
          peak = std::max(peak, norm(jerk));
        }
      }
    }
  }
  return peak;
}

namespace {

// Shared pair scan for the distance metrics.
template <typename Fn>
void for_each_eligible_pair(const SceneTimeline& t, Fn&& fn) {
  const auto owner = step_of_frame(t);
  const int n = t.character_count();
  std::vector<std::vector<const Pose*>> frames(n);
  for (int c = 0; c < n; ++c) frames[c] = concat_frames(t, c);
  const int total = concat_length(t);
  for (int f = 0; f < total; ++f) {
    const int step = owner[f];
    for (int i = 0; i < n; ++i) {
      if (!eligible(t, i, step)) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!eligible(t, j, step)) continue;
        fn(f, frames[i][f]->positions[kHipJoint], frames[j][f]->positions[kHipJoint]);
      }
    }
  }
}

int eligible_character_count(const SceneTimeline& t) {
  int count = 0;
  for (int c = 0; c < t.character_count(); ++c)
    for (int s = 0; s < t.step_count(); ++s)
      if (eligible(t, c, s)) {
        ++count;
        break;
      }
  return count;
}

}  // namespace

double hip_distance(const SceneTimeline& t) {
  validate_timeline(t);
  if (eligible_character_count(t) < 2)
    throw std::invalid_argument("need at least 2 non-virtual characters");
  double sum = 0.0;
  long long pairs = 0;
  for_each_eligible_pair(t, [&](int, Vec3 a, Vec3 b) {
    sum += norm2(a - b);
    ++pairs;
  });
  if (pairs == 0) throw std::invalid_argument("no eligible character pairs");
  return sum / static_cast<double>(pairs);
}

double min_pairwise_hip_distance(const SceneTimeline& t) {
  validate_timeline(t);
  if (eligible_character_count(t) < 2)
    throw std::invalid_argument("need at least 2 non-virtual characters");
  double best = std::numeric_limits<double>::infinity();
  for_each_eligible_pair(t, [&](int, Vec3 a, Vec3 b) { best = std::min(best, norm(a - b)); });
  return best;
}

double close_pair_fraction(const SceneTimeline& t, double threshold) {
  validate_timeline(t);
  const int total = concat_length(t);
  std::vector<char> close(total, 0), counted(total, 0);
  for_each_eligible_pair(t, [&](int f, Vec3 a, Vec3 b) {
    counted[f] = 1;
    if (norm(a - b) < threshold) close[f] = 1;
  });
  int frames = 0, hits = 0;
  for (int f = 0; f < total; ++f) {
    frames += counted[f];
    hits += close[f];
  }
  if (frames == 0) throw std::invalid_argument("no eligible character pairs");
  return static_cast<double>(hits) / static_cast<double>(frames);
}

double stitch(const ClipSet& prev, const ClipSet& next) {
  if (prev.character_count() != next.character_count())
    throw std::invalid_argument("character count mismatch");
  double gap = 0.0;
  for (int c = 0; c < prev.character_count(); ++c) {
    const auto& a = prev.clips[c];
    const auto& b = next.clips[c];
    if (a.frames.empty() || b.frames.empty()) throw std::invalid_argument("empty clip");
    if (a.joint_count() != b.joint_count()) throw std::invalid_argument("joint count mismatch");
    for (int j = 0; j < a.joint_count(); ++j)
      gap = std::max(gap, norm(b.frames.front().positions[j] - a.frames.back().positions[j]));
  }
  return gap;
}

}  // namespace mcs
