#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mcs/diffusion.hpp"
#include "mcs/motion.hpp"
#include "mcs/synth_data.hpp"
#include "mcs/tensor.hpp"

namespace testutil {

using HipFn = std::function<mcs::Vec3(int character, int global_frame)>;

// Timeline whose hips follow `hip(c, g)` over deduplicated global frames;
// other joints ride at fixed offsets, rotations identity, velocities forward
// differences. With seam_overlap k, step s covers global frames
// [s*(w-k), s*(w-k)+w), so shared frames are bitwise identical.
inline mcs::SceneTimeline build_timeline(int n, int steps, int w, int joints, int fps,
                                         const HipFn& hip, int seam_overlap = 0) {
  mcs::SceneTimeline timeline;
  timeline.seam_overlap = seam_overlap;
  const int per = w - seam_overlap;
  auto pose_at = [&](int c, int g) {
    mcs::Pose pose;
    pose.positions.resize(joints);
    pose.rotations.assign(joints, mcs::Quat{});
    pose.velocities.resize(joints);
    for (int j = 0; j < joints; ++j) {
      mcs::Vec3 offset{0.0, 0.1 * j, 0.2 * j};
      pose.positions[j] = hip(c, g) + offset;
      pose.velocities[j] = static_cast<double>(fps) * (hip(c, g + 1) - hip(c, g));
    }
    return pose;
  };
  for (int s = 0; s < steps; ++s) {
    mcs::ClipSet set;
    set.virtual_flags.assign(n, false);
    for (int c = 0; c < n; ++c) {
      mcs::MotionClip clip;
      clip.fps = fps;
      for (int f = 0; f < w; ++f) clip.frames.push_back(pose_at(c, s * per + f));
      set.clips.push_back(std::move(clip));
    }
    timeline.steps.push_back(std::move(set));
  }
  return timeline;
}

// Independent HD oracle: the literal averaged double sum over ordered pairs,
// computed straight from the construction function.
inline double hd_oracle(int n, int frames, const HipFn& hip) {
  double sum = 0.0;
  for (int f = 0; f < frames; ++f)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        sum += mcs::norm2(hip(i, f) - hip(j, f));
      }
  return 2.0 * sum / (2.0 * n * (n - 1) * frames);
}

// Independent TS oracle: jerk as the direct third difference
// p[f+2] - 3 p[f+1] + 3 p[f] - p[f-1], maximized over seam windows.
inline double ts_oracle(int n, int steps, int w, int seam_overlap, int fps, int window,
                        const HipFn& hip) {
  const int per = w - seam_overlap;
  const int total = w + (steps - 1) * per;
  double peak = 0.0;
  for (int boundary = 1; boundary < steps; ++boundary) {
    const int seam = w + (boundary - 1) * per;
    for (int f = seam - window / 2; f < seam + window / 2; ++f) {
      if (f < 1 || f + 2 > total - 1) continue;
      for (int c = 0; c < n; ++c) {
        mcs::Vec3 third = hip(c, f + 2) - 3.0 * hip(c, f + 1) + 3.0 * hip(c, f) - hip(c, f - 1);
        double mag = std::pow(static_cast<double>(fps), 3.0) * mcs::norm(third);
        peak = std::max(peak, mag);
      }
    }
  }
  return peak;
}

// A random but smooth two-character clip tensor for gradient checks: random
// walks with bounded increments, valid unit rotations.
inline std::vector<double> random_smooth_clip(const mcs::PairShape& shape, mcs::Rng& rng,
                                              double scale = 1.0) {
  std::vector<double> clip(shape.dim(), 0.0);
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < shape.joints; ++j) {
      mcs::Vec3 p{rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(0.5, 1.5)};
      for (int f = 0; f < shape.clip_len; ++f) {
        p += mcs::Vec3{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.02, 0.02)};
        const int at = shape.index(c, f, j, mcs::kPosOffset);
        clip[at] = p.x;
        clip[at + 1] = p.y;
        clip[at + 2] = p.z;
        mcs::Quat q = mcs::normalized(
            mcs::Quat{rng.normal(), 0.2 * rng.normal(), 0.2 * rng.normal(), 0.2 * rng.normal()});
        clip[shape.index(c, f, j, mcs::kRotOffset)] = q.w;
        clip[shape.index(c, f, j, mcs::kRotOffset) + 1] = q.x;
        clip[shape.index(c, f, j, mcs::kRotOffset) + 2] = q.y;
        clip[shape.index(c, f, j, mcs::kRotOffset) + 3] = q.z;
        for (int a = 0; a < 3; ++a)
          clip[shape.index(c, f, j, mcs::kVelOffset) + a] = rng.uniform(-1.0, 1.0);
      }
    }
  return clip;
}

// Small style/model pair shared by coordination and planner tests: trained
// once per test binary, a few seconds of work.
inline mcs::StyleParams tiny_style() {
  mcs::StyleParams style = mcs::StyleParams::dance();
  style.clip_len = 8;
  style.joints = 2;
  style.fps = 10;
  return style;
}

inline const mcs::Denoiser& tiny_model() {
  static const mcs::Denoiser model = [] {
    auto corpus = mcs::build_corpus(tiny_style(), 24, 2024, 4, 4);
    mcs::TrainGenConfig config;
    config.steps = 500;
    config.batch = 32;
    config.lr = 2e-3;
    config.seed = 5;
    config.val_every = 0;
    config.arch = mcs::DenoiserArch{64, 2, 8};
    config.schedule = mcs::NoiseSchedule::linear(10);
    return mcs::train_denoiser(corpus, config).model;
  }();
  return model;
}

}  // namespace testutil
