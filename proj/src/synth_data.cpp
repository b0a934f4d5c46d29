#include "mcs/synth_data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "json.hpp"
#include "mcs/errors.hpp"
#include "mcs/rng.hpp"

namespace mcs {

namespace {
constexpr double kTau = 6.283185307179586476925286766559;
constexpr double kHipHeight = 0.9;
}  // namespace

StyleParams StyleParams::dance() { return StyleParams{}; }

StyleParams StyleParams::boxing() {
  StyleParams s;
  s.name = "boxing";
  s.partner_distance_mean = 1.4;
  s.partner_distance_jitter = 0.15;
  s.orbit_speed_min = 0.2;
  s.orbit_speed_max = 0.7;
  s.limb_amplitude = 0.25;
  return s;
}

void validate(const StyleParams& style) {
  if (style.partner_distance_mean <= 0.0)
    throw std::invalid_argument("partner_distance_mean must be positive");
  if (style.partner_distance_jitter < 0.0) throw std::invalid_argument("jitter must be >= 0");
  if (style.orbit_speed_min < 0.0 || style.orbit_speed_max < style.orbit_speed_min)
    throw std::invalid_argument("bad orbit speed range");
  if (style.limb_amplitude < 0.0) throw std::invalid_argument("limb_amplitude must be >= 0");
  if (style.fps <= 0) throw std::invalid_argument("fps must be positive");
  if (style.clip_len < 8) throw std::invalid_argument("clip_len must be >= 8");
  if (style.joints < 2) throw std::invalid_argument("joints must be >= 2");
}

double hip_height() { return kHipHeight; }

std::vector<Vec3> skeleton_offsets(int joints) {
  // Local frame: +x forward, +y left, +z up. Joint 0 is the hip.
  static const Vec3 base[8] = {
      {0.0, 0.0, 0.0},      // hip
      {0.0, 0.0, 0.35},     // chest
      {0.0, 0.0, 0.5},      // neck
      {0.0, 0.0, 0.65},     // head
      {0.05, 0.35, 0.3},    // left hand
      {0.05, -0.35, 0.3},   // right hand
      {0.0, 0.12, -0.85},   // left foot
      {0.0, -0.12, -0.85},  // right foot
  };
  std::vector<Vec3> out(joints);
  for (int j = 0; j < joints; ++j) {
    if (j < 8) {
      out[j] = base[j];
    } else {
      // Extra joints fan out around the chest.
      double a = kTau * (j - 8) / 8.0;
      out[j] = {0.2 * std::cos(a), 0.2 * std::sin(a), 0.25};
    }
  }
  return out;
}

namespace {

// Oscillation gain per joint; zero for the torso chain.
double limb_gain(int joint) {
  switch (joint) {
    case 0:
    case 1:
    case 2:
    case 3:
      return 0.0;
    case 4:
      return 1.0;
    case 5:
      return -1.0;
    case 6:
      return -0.4;
    case 7:
      return 0.4;
    default:
      return (joint % 2 == 0) ? 0.5 : -0.5;
  }
}

Pose make_pose(const StyleParams& style, const std::vector<Vec3>& offsets, Vec3 hip, double yaw,
               double osc) {
  Pose pose;
  pose.positions.resize(style.joints);
  pose.rotations.resize(style.joints);
  pose.velocities.assign(style.joints, Vec3{});
  for (int j = 0; j < style.joints; ++j) {
    Vec3 local = offsets[j];
    local.x += style.limb_amplitude * limb_gain(j) * osc;
    pose.positions[j] = hip + rotate_z(local, yaw);
    double pitch = 0.8 * style.limb_amplitude * limb_gain(j) * osc;
    pose.rotations[j] =
        pitch == 0.0 ? yaw_quat(yaw) : normalized(yaw_quat(yaw) * pitch_quat(pitch));
  }
  return pose;
}

}  // namespace

MotionClip rest_clip(const StyleParams& style, Vec3 hip_xy) {
  const auto offsets = skeleton_offsets(style.joints);
  Vec3 hip{hip_xy.x, hip_xy.y, kHipHeight};
  Pose pose = make_pose(style, offsets, hip, 0.0, 0.0);
  MotionClip clip;
  clip.fps = style.fps;
  clip.frames.assign(style.clip_len, pose);
  return clip;
}

PairEpisode generate_pair_episode(const StyleParams& style, std::uint64_t seed, int steps) {
  validate(style);
  if (steps < 1) throw std::invalid_argument("episode needs at least one step");

  Rng rng(derive_seed(seed, 0x45505349ULL));
  const int total = steps * style.clip_len;
  const double dt = 1.0 / style.fps;

  // All randomness drawn up front, in a fixed order.
  const Vec3 center0{rng.uniform(-3.5, 3.5), rng.uniform(-3.5, 3.5), 0.0};
  const double drift_dir = rng.uniform(0.0, kTau);
  const double drift_speed = rng.uniform(0.02, 0.12);
  const double sway_amp = rng.uniform(0.05, 0.25);
  const double sway_freq = rng.uniform(0.02, 0.08);
  const double theta0 = rng.uniform(0.0, kTau);
  const double omega = rng.uniform(style.orbit_speed_min, style.orbit_speed_max) *
                       (rng.uniform() < 0.5 ? -1.0 : 1.0);
  const double jitter_freq = rng.uniform(0.05, 0.2);
  const double jitter_phase = rng.uniform(0.0, kTau);
  const double limb_freq = rng.uniform(0.5, 1.2);
  const double limb_phase = rng.uniform(0.0, kTau);
  const double hip_z = kHipHeight + rng.uniform(-0.03, 0.03);

  const auto offsets = skeleton_offsets(style.joints);
  std::vector<Pose> frames[2];
  frames[0].reserve(total);
  frames[1].reserve(total);
  for (int f = 0; f < total; ++f) {
    const double t = f * dt;
    Vec3 center = center0 + (drift_speed * t) * Vec3{std::cos(drift_dir), std::sin(drift_dir), 0.0};
    center.x += sway_amp * std::sin(kTau * sway_freq * t);
    center.y += sway_amp * 0.7 * std::cos(kTau * sway_freq * 1.3 * t);
    const double dist = std::max(
        0.05, style.partner_distance_mean +
                  style.partner_distance_jitter * std::sin(kTau * jitter_freq * t + jitter_phase));
    const double theta = theta0 + omega * t;
    const Vec3 radial{std::cos(theta), std::sin(theta), 0.0};
    const Vec3 hip_a = center + (0.5 * dist) * radial + Vec3{0.0, 0.0, hip_z};
    const Vec3 hip_b = center - (0.5 * dist) * radial + Vec3{0.0, 0.0, hip_z};
    // atan2 of the partner direction; the pair faces each other
    const double yaw_a = std::atan2(hip_b.y - hip_a.y, hip_b.x - hip_a.x);
    const double yaw_b = std::atan2(hip_a.y - hip_b.y, hip_a.x - hip_b.x);
    const double osc = std::sin(kTau * limb_freq * t + limb_phase);
    frames[0].push_back(make_pose(style, offsets, hip_a, yaw_a, osc));
    frames[1].push_back(make_pose(style, offsets, hip_b, yaw_b, -osc));
  }
  // Velocity channel: forward difference; last frame repeats its predecessor.
  for (auto& chain : frames)
    for (int f = 0; f < total; ++f) {
      const int src = std::min(f, total - 2);
      for (int j = 0; j < style.joints; ++j)
        chain[f].velocities[j] =
            static_cast<double>(style.fps) * (chain[src + 1].positions[j] - chain[src].positions[j]);
    }

  PairEpisode episode;
  episode.style = style;
  episode.seed = seed;
  episode.timeline.seed = seed;
  episode.timeline.seam_overlap = 0;
  for (int s = 0; s < steps; ++s) {
    ClipSet set;
    set.virtual_flags = {false, false};
    for (int c = 0; c < 2; ++c) {
      MotionClip clip;
      clip.fps = style.fps;
      clip.frames.assign(frames[c].begin() + s * style.clip_len,
                         frames[c].begin() + (s + 1) * style.clip_len);
      set.clips.push_back(std::move(clip));
    }
    episode.timeline.steps.push_back(std::move(set));
  }
  return episode;
}

Corpus build_corpus(const StyleParams& style, int n_episodes, std::uint64_t seed,
                    int episode_steps, int stride) {
  validate(style);
  if (n_episodes < 10) throw std::invalid_argument("need at least 10 episodes");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");

  Corpus corpus;
  corpus.style = style;
  const int val_episodes = std::max(1, n_episodes / 10);
  const int w = style.clip_len;

  for (int e = 0; e < n_episodes; ++e) {
    PairEpisode episode = generate_pair_episode(style, derive_seed(seed, 1000 + e), episode_steps);
    // Episode frames are contiguous; flatten per character.
    std::vector<const Pose*> chain[2];
    for (int c = 0; c < 2; ++c) chain[c] = concat_frames(episode.timeline, c);
    const int total = static_cast<int>(chain[0].size());
    auto& split = (e >= n_episodes - val_episodes) ? corpus.val : corpus.train;
    const PairShape shape = corpus.shape();
    for (int a = 0; a + w <= total; a += stride) {
      MotionClip clips[2];
      for (int c = 0; c < 2; ++c) {
        clips[c].fps = style.fps;
        for (int f = 0; f < w; ++f) clips[c].frames.push_back(*chain[c][a + f]);
      }
      auto tensor = pack_pair(clips[0], clips[1]);
      // Canonical frame: the pair's first-frame hip centroid moves to the
      // origin and the partner axis onto +x. The scene layer re-anchors
      // samples to world coordinates, so the model never has to represent
      // absolute position or heading.
      canonicalize_pair(tensor, shape);
      split.push_back(std::move(tensor));
    }
  }
  corpus.stats = compute_channel_stats(corpus.train, corpus.shape());
  if (corpus.stats.clamped)
    std::cerr << "warning: degenerate channel standard deviation clamped to 1e-8\n";
  return corpus;
}

namespace {

constexpr const char* kCorpusMagic = "MCS-CORPUS-V1\n";

nlohmann::ordered_json style_to_json(const StyleParams& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["partner_distance_mean"] = s.partner_distance_mean;
  j["partner_distance_jitter"] = s.partner_distance_jitter;
  j["orbit_speed_min"] = s.orbit_speed_min;
  j["orbit_speed_max"] = s.orbit_speed_max;
  j["limb_amplitude"] = s.limb_amplitude;
  j["fps"] = s.fps;
  j["clip_len"] = s.clip_len;
  j["joints"] = s.joints;
  return j;
}

StyleParams style_from_json(const nlohmann::ordered_json& j) {
  StyleParams s;
  s.name = j.at("name").get<std::string>();
  s.partner_distance_mean = j.at("partner_distance_mean").get<double>();
  s.partner_distance_jitter = j.at("partner_distance_jitter").get<double>();
  s.orbit_speed_min = j.at("orbit_speed_min").get<double>();
  s.orbit_speed_max = j.at("orbit_speed_max").get<double>();
  s.limb_amplitude = j.at("limb_amplitude").get<double>();
  s.fps = j.at("fps").get<int>();
  s.clip_len = j.at("clip_len").get<int>();
  s.joints = j.at("joints").get<int>();
  return s;
}

void write_blob(std::ofstream& out, const std::vector<std::vector<double>>& clips) {
  for (const auto& clip : clips)
    out.write(reinterpret_cast<const char*>(clip.data()),
              static_cast<std::streamsize>(clip.size() * sizeof(double)));
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);
  nlohmann::ordered_json header;
  header["style"] = style_to_json(corpus.style);
  header["dim"] = corpus.shape().dim();
  header["n_train"] = corpus.train.size();
  header["n_val"] = corpus.val.size();
  header["mean"] = corpus.stats.mean;
  header["stdev"] = corpus.stats.stdev;
  header["stats_clamped"] = corpus.stats.clamped;
  const std::string header_text = header.dump();
  const std::uint64_t header_len = header_text.size();
  out << kCorpusMagic;
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  write_blob(out, corpus.train);
  write_blob(out, corpus.val);
  if (!out) throw std::invalid_argument("write failed: " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  std::string magic(std::strlen(kCorpusMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kCorpusMagic) throw SchemaError("not a corpus file (magic mismatch)");
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len > (1ULL << 30)) throw SchemaError("bad corpus header length");
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw SchemaError("truncated corpus header");

  Corpus corpus;
  std::size_t n_train = 0, n_val = 0;
  try {
    auto header = nlohmann::ordered_json::parse(header_text);
    corpus.style = style_from_json(header.at("style"));
    n_train = header.at("n_train").get<std::size_t>();
    n_val = header.at("n_val").get<std::size_t>();
    corpus.stats.mean = header.at("mean").get<std::vector<double>>();
    corpus.stats.stdev = header.at("stdev").get<std::vector<double>>();
    corpus.stats.clamped = header.at("stats_clamped").get<bool>();
    if (header.at("dim").get<int>() != corpus.shape().dim())
      throw SchemaError("corpus dim does not match style shape");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("corpus header parse error: ") + e.what());
  }
  const int dim = corpus.shape().dim();
  auto read_split = [&](std::size_t count) {
    std::vector<std::vector<double>> clips(count, std::vector<double>(dim));
    for (auto& clip : clips) {
      in.read(reinterpret_cast<char*>(clip.data()),
              static_cast<std::streamsize>(clip.size() * sizeof(double)));
      if (!in) throw SchemaError("truncated corpus blob");
    }
    return clips;
  };
  corpus.train = read_split(n_train);
  corpus.val = read_split(n_val);
  return corpus;
}

}  // namespace mcs
