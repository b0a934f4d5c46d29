#pragma once

#include <utility>
#include <vector>

#include "mcs/motion.hpp"

namespace mcs {

// Flattened two-character clip tensor: [character][frame][joint][channel].
// Channels per joint: position xyz (0-2), rotation wxyz (3-6), velocity xyz (7-9).
inline constexpr int kChannels = 10;
inline constexpr int kPosOffset = 0;
inline constexpr int kRotOffset = 3;
inline constexpr int kVelOffset = 7;

struct PairShape {
  int clip_len = 0;
  int joints = 0;

  int dim() const { return 2 * clip_len * joints * kChannels; }
  int character_stride() const { return clip_len * joints * kChannels; }
  int frame_stride() const { return joints * kChannels; }
  int index(int character, int frame, int joint, int channel) const {
    return ((character * clip_len + frame) * joints + joint) * kChannels + channel;
  }
  bool operator==(const PairShape&) const = default;
};

// Flat tensor index -> (joint, channel) statistics slot. Stats are shared
// across the two characters and across frames: J * kChannels entries.
inline int stat_index(const PairShape& shape, int flat) {
  return flat % shape.frame_stride();
}
inline int stat_count(const PairShape& shape) { return shape.frame_stride(); }

struct ChannelStats {
  std::vector<double> mean;   // per (joint, channel)
  std::vector<double> stdev;  // per (joint, channel), clamped >= 1e-8
  bool clamped = false;       // true if any channel hit the clamp
};

std::vector<double> pack_pair(const MotionClip& a, const MotionClip& b);
std::pair<MotionClip, MotionClip> unpack_pair(const std::vector<double>& tensor,
                                              const PairShape& shape, int fps);

ChannelStats compute_channel_stats(const std::vector<std::vector<double>>& clips,
                                   const PairShape& shape);

void normalize(std::vector<double>& tensor, const PairShape& shape, const ChannelStats& stats);
void denormalize(std::vector<double>& tensor, const PairShape& shape, const ChannelStats& stats);

// Post-sampling cleanup: velocity channels rebuilt as fps * forward position
// difference (last frame copies its predecessor), rotation channels rescaled
// to unit quaternions.
void rebuild_velocities(std::vector<double>& tensor, const PairShape& shape, int fps);
void renormalize_rotations(std::vector<double>& tensor, const PairShape& shape);

Vec3 hip_position(const std::vector<double>& tensor, const PairShape& shape, int character,
                  int frame);

// Rigid in-plane motion of the whole pair: rotate by yaw about `pivot`, then
// translate by `offset`. Positions, velocities, and rotations stay consistent.
void transform_pair(std::vector<double>& tensor, const PairShape& shape, Vec3 pivot, double yaw,
                    Vec3 offset);

// The pair's pose anchor: first-frame hip centroid (z = 0) and partner-axis
// yaw. canonicalize_pair moves the anchor to the origin/+x; anchor_pair
// undoes it for a given anchor.
struct PairAnchor {
  Vec3 position;  // xy centroid, z = 0
  double yaw = 0.0;
};
PairAnchor pair_anchor(const std::vector<double>& tensor, const PairShape& shape);
void canonicalize_pair(std::vector<double>& tensor, const PairShape& shape);
void anchor_pair(std::vector<double>& tensor, const PairShape& shape, const PairAnchor& anchor);
// Rotates every position-gradient 3-vector by `angle` about the vertical
// axis; other channels are untouched. Chain rule companion of anchor_pair:
// a gradient in world coordinates maps to the canonical frame with
// angle = -anchor.yaw.
void rotate_position_gradients(std::vector<double>& grad, const PairShape& shape, double angle);

}  // namespace mcs
