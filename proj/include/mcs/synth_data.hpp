#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcs/motion.hpp"
#include "mcs/tensor.hpp"

namespace mcs {

// Parameters of the procedural paired-motion generator. Two characters orbit
// a shared, slowly drifting center while their limbs oscillate in phase.
struct StyleParams {
  std::string name = "dance";
  double partner_distance_mean = 0.8;    // m
  double partner_distance_jitter = 0.1;  // m
  double orbit_speed_min = 0.3;          // rad/s
  double orbit_speed_max = 0.9;          // rad/s
  double limb_amplitude = 0.15;          // m
  int fps = 20;
  int clip_len = 16;  // frames per step
  int joints = 8;

  static StyleParams dance();
  static StyleParams boxing();
};

void validate(const StyleParams& style);  // throws std::invalid_argument

// Neutral skeleton offsets (relative to the hip) for `joints` joints at the
// default standing pose; joint 0 is the hip itself. Also used for rest clips.
std::vector<Vec3> skeleton_offsets(int joints);
double hip_height();

// A standing character at `hip_xy` with zero velocity, identity facing.
MotionClip rest_clip(const StyleParams& style, Vec3 hip_xy);

struct PairEpisode {
  SceneTimeline timeline;  // N = 2, seam_overlap = 0
  StyleParams style;
  std::uint64_t seed = 0;
};

PairEpisode generate_pair_episode(const StyleParams& style, std::uint64_t seed, int steps);

struct Corpus {
  StyleParams style;
  std::vector<std::vector<double>> train;  // flattened two-character clips
  std::vector<std::vector<double>> val;
  ChannelStats stats;  // computed on the train split only

  PairShape shape() const { return {style.clip_len, style.joints}; }
};

// Slices seeded episodes into overlapping clip windows and splits train/val
// by episode. Throws std::invalid_argument on fewer than 10 episodes.
Corpus build_corpus(const StyleParams& style, int n_episodes, std::uint64_t seed,
                    int episode_steps = 6, int stride = 8);

void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);  // throws SchemaError / std::invalid_argument

}  // namespace mcs
