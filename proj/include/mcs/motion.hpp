#pragma once

#include <cstdint>
#include <vector>

#include "mcs/vec.hpp"

namespace mcs {

// Joint 0 is the hip by convention, everywhere.
inline constexpr int kHipJoint = 0;

struct Pose {
  std::vector<Vec3> positions;   // global joint positions, meters
  std::vector<Quat> rotations;   // local joint rotations, unit quaternions
  std::vector<Vec3> velocities;  // joint velocities, m/s

  int joint_count() const { return static_cast<int>(positions.size()); }
};

struct MotionClip {
  std::vector<Pose> frames;
  int fps = 0;

  int length() const { return static_cast<int>(frames.size()); }
  int joint_count() const { return frames.empty() ? 0 : frames.front().joint_count(); }
};

struct ClipSet {
  std::vector<MotionClip> clips;    // one per character
  std::vector<bool> virtual_flags;  // padding characters, excluded from metrics

  int character_count() const { return static_cast<int>(clips.size()); }
};

// An ordered sequence of clip steps for N characters. Consecutive steps may
// share `seam_overlap` frames: the first seam_overlap frames of step t >= 1
// repeat the last seam_overlap frames of step t-1 (the inpainting anchor).
// Deduplicated playback order is step 0 in full, then frames
// [seam_overlap, w) of each following step.
struct SceneTimeline {
  std::vector<ClipSet> steps;
  std::uint64_t seed = 0;
  int seam_overlap = 0;
  // First step at which each character carries real content. Characters added
  // mid-scene hold a rest clip before this step; metrics skip those frames.
  // Empty means every character is active from step 0.
  std::vector<int> active_from;

  int step_count() const { return static_cast<int>(steps.size()); }
  int character_count() const { return steps.empty() ? 0 : steps.front().character_count(); }
  int clip_length() const {
    return steps.empty() || steps.front().clips.empty() ? 0 : steps.front().clips.front().length();
  }
  int fps() const {
    return steps.empty() || steps.front().clips.empty() ? 0 : steps.front().clips.front().fps;
  }
};

// All throw std::invalid_argument on violated invariants.
void validate_pose(const Pose& pose, int expected_joints);
void validate_clip(const MotionClip& clip, int expected_len, int expected_joints, int expected_fps);
void validate_timeline(const SceneTimeline& timeline);

// Central second difference of positions, in m/s^2. Output covers interior
// frames only: length = frames.size() - 2. Throws on fewer than 3 frames.
std::vector<std::vector<Vec3>> acceleration(const std::vector<Pose>& frames, int fps);

// Peak jerk around clip seams (the TS metric): the maximum Euclidean norm of
// the per-joint change of acceleration, over a window of +-boundary_window/2
// frames around every step boundary, across all non-virtual characters.
double peak_jerk(const SceneTimeline& timeline, int boundary_window = 10);

// Mean squared pairwise hip distance over frames (the HD metric). Virtual and
// not-yet-active characters are excluded. Throws if fewer than two characters
// are ever eligible.
double hip_distance(const SceneTimeline& timeline);

// Smallest pairwise hip distance (plain meters, not squared) over the same
// domain as hip_distance.
double min_pairwise_hip_distance(const SceneTimeline& timeline);

// Fraction of playback frames where some eligible hip pair is closer than
// `threshold` meters.
double close_pair_fraction(const SceneTimeline& timeline, double threshold);

// Max per-joint position gap between the last frame of `prev` and the first
// frame of `next`. Throws on mismatched character/joint counts.
double stitch(const ClipSet& prev, const ClipSet& next);

// Deduplicated frame sequence for one character (honours seam_overlap).
std::vector<const Pose*> concat_frames(const SceneTimeline& timeline, int character);

// Total deduplicated frame count and the step owning each deduplicated frame.
int concat_length(const SceneTimeline& timeline);
std::vector<int> step_of_frame(const SceneTimeline& timeline);

}  // namespace mcs
