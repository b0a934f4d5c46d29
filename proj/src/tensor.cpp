#include "mcs/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mcs {

std::vector<double> pack_pair(const MotionClip& a, const MotionClip& b) {
  if (a.length() != b.length() || a.joint_count() != b.joint_count())
    throw std::invalid_argument("pair clips must share shape");
  PairShape shape{a.length(), a.joint_count()};
  std::vector<double> out(shape.dim());
  const MotionClip* clips[2] = {&a, &b};
  for (int c = 0; c < 2; ++c) {
    for (int f = 0; f < shape.clip_len; ++f) {
      const Pose& pose = clips[c]->frames[f];
      for (int j = 0; j < shape.joints; ++j) {
        double* at = out.data() + shape.index(c, f, j, 0);
        at[0] = pose.positions[j].x;
        at[1] = pose.positions[j].y;
        at[2] = pose.positions[j].z;
        at[3] = pose.rotations[j].w;
        at[4] = pose.rotations[j].x;
        at[5] = pose.rotations[j].y;
        at[6] = pose.rotations[j].z;
        at[7] = pose.velocities[j].x;
        at[8] = pose.velocities[j].y;
        at[9] = pose.velocities[j].z;
      }
    }
  }
  return out;
}

std::pair<MotionClip, MotionClip> unpack_pair(const std::vector<double>& tensor,
                                              const PairShape& shape, int fps) {
  if (static_cast<int>(tensor.size()) != shape.dim())
    throw std::invalid_argument("tensor size does not match shape");
  std::pair<MotionClip, MotionClip> out;
  MotionClip* clips[2] = {&out.first, &out.second};
  for (int c = 0; c < 2; ++c) {
    clips[c]->fps = fps;
    clips[c]->frames.resize(shape.clip_len);
    for (int f = 0; f < shape.clip_len; ++f) {
      Pose& pose = clips[c]->frames[f];
      pose.positions.resize(shape.joints);
      pose.rotations.resize(shape.joints);
      pose.velocities.resize(shape.joints);
      for (int j = 0; j < shape.joints; ++j) {
        const double* at = tensor.data() + shape.index(c, f, j, 0);
        pose.positions[j] = {at[0], at[1], at[2]};
        pose.rotations[j] = {at[3], at[4], at[5], at[6]};
        pose.velocities[j] = {at[7], at[8], at[9]};
      }
    }
  }
  return out;
}

ChannelStats compute_channel_stats(const std::vector<std::vector<double>>& clips,
                                   const PairShape& shape) {
  if (clips.empty()) throw std::invalid_argument("no clips to compute statistics from");
  const int slots = stat_count(shape);
  ChannelStats stats;
  stats.mean.assign(slots, 0.0);
  stats.stdev.assign(slots, 0.0);
  std::vector<long long> counts(slots, 0);
  for (const auto& clip : clips) {
    if (static_cast<int>(clip.size()) != shape.dim())
      throw std::invalid_argument("clip size does not match shape");
    for (int d = 0; d < shape.dim(); ++d) {
      const int s = stat_index(shape, d);
      stats.mean[s] += clip[d];
      ++counts[s];
    }
  }
  for (int s = 0; s < slots; ++s) stats.mean[s] /= static_cast<double>(counts[s]);
  for (const auto& clip : clips)
    for (int d = 0; d < shape.dim(); ++d) {
      const int s = stat_index(shape, d);
      const double delta = clip[d] - stats.mean[s];
      stats.stdev[s] += delta * delta;
    }
  for (int s = 0; s < slots; ++s) {
    stats.stdev[s] = std::sqrt(stats.stdev[s] / static_cast<double>(counts[s]));
    if (stats.stdev[s] < 1e-8) {
      stats.stdev[s] = 1e-8;
      stats.clamped = true;
    }
  }
  return stats;
}

void normalize(std::vector<double>& tensor, const PairShape& shape, const ChannelStats& stats) {
  for (int d = 0; d < shape.dim(); ++d) {
    const int s = stat_index(shape, d);
    tensor[d] = (tensor[d] - stats.mean[s]) / stats.stdev[s];
  }
}

void denormalize(std::vector<double>& tensor, const PairShape& shape, const ChannelStats& stats) {
  for (int d = 0; d < shape.dim(); ++d) {
    const int s = stat_index(shape, d);
    tensor[d] = tensor[d] * stats.stdev[s] + stats.mean[s];
  }
}

void rebuild_velocities(std::vector<double>& tensor, const PairShape& shape, int fps) {
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < shape.joints; ++j)
      for (int f = 0; f < shape.clip_len; ++f) {
        const int src = std::min(f, shape.clip_len - 2);
        for (int axis = 0; axis < 3; ++axis) {
          const double next = tensor[shape.index(c, src + 1, j, kPosOffset + axis)];
          const double here = tensor[shape.index(c, src, j, kPosOffset + axis)];
          tensor[shape.index(c, f, j, kVelOffset + axis)] = fps * (next - here);
        }
      }
}

void renormalize_rotations(std::vector<double>& tensor, const PairShape& shape) {
  for (int c = 0; c < 2; ++c)
    for (int f = 0; f < shape.clip_len; ++f)
      for (int j = 0; j < shape.joints; ++j) {
        double* q = tensor.data() + shape.index(c, f, j, kRotOffset);
        const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        if (n < 1e-12) {
          q[0] = 1.0;
          q[1] = q[2] = q[3] = 0.0;
        } else {
          for (int k = 0; k < 4; ++k) q[k] /= n;
        }
      }
}

Vec3 hip_position(const std::vector<double>& tensor, const PairShape& shape, int character,
                  int frame) {
  const double* at = tensor.data() + shape.index(character, frame, kHipJoint, kPosOffset);
  return {at[0], at[1], at[2]};
}

PairAnchor pair_anchor(const std::vector<double>& tensor, const PairShape& shape) {
  const Vec3 h0 = hip_position(tensor, shape, 0, 0);
  const Vec3 h1 = hip_position(tensor, shape, 1, 0);
  PairAnchor anchor;
  anchor.position = {0.5 * (h0.x + h1.x), 0.5 * (h0.y + h1.y), 0.0};
  anchor.yaw = std::atan2(h1.y - h0.y, h1.x - h0.x);
  return anchor;
}

void canonicalize_pair(std::vector<double>& tensor, const PairShape& shape) {
  const PairAnchor anchor = pair_anchor(tensor, shape);
  transform_pair(tensor, shape, anchor.position, -anchor.yaw, -anchor.position);
}

void anchor_pair(std::vector<double>& tensor, const PairShape& shape, const PairAnchor& anchor) {
  transform_pair(tensor, shape, Vec3{}, anchor.yaw, anchor.position);
}

void rotate_position_gradients(std::vector<double>& grad, const PairShape& shape, double angle) {
  for (int c = 0; c < 2; ++c)
    for (int f = 0; f < shape.clip_len; ++f)
      for (int j = 0; j < shape.joints; ++j) {
        double* g = grad.data() + shape.index(c, f, j, kPosOffset);
        const Vec3 r = rotate_z({g[0], g[1], g[2]}, angle);
        g[0] = r.x;
        g[1] = r.y;
        g[2] = r.z;
      }
}

void transform_pair(std::vector<double>& tensor, const PairShape& shape, Vec3 pivot, double yaw,
                    Vec3 offset) {
  const Quat spin = yaw_quat(yaw);
  for (int c = 0; c < 2; ++c)
    for (int f = 0; f < shape.clip_len; ++f)
      for (int j = 0; j < shape.joints; ++j) {
        double* at = tensor.data() + shape.index(c, f, j, 0);
        Vec3 p = rotate_z(Vec3{at[0], at[1], at[2]} - pivot, yaw) + pivot + offset;
        at[0] = p.x;
        at[1] = p.y;
        at[2] = p.z;
        Quat q = spin * Quat{at[3], at[4], at[5], at[6]};
        at[3] = q.w;
        at[4] = q.x;
        at[5] = q.y;
        at[6] = q.z;
        Vec3 v = rotate_z({at[7], at[8], at[9]}, yaw);
        at[7] = v.x;
        at[8] = v.y;
        at[9] = v.z;
      }
}

}  // namespace mcs
