#include "mcs/scene_io.hpp"

#include <fstream>

namespace mcs {

using nlohmann::ordered_json;

ordered_json scene_to_json(const Scene& scene) {
  const SceneTimeline& t = scene.timeline;
  ordered_json j;
  j["format"] = kSceneFormat;
  j["n"] = t.character_count();
  j["n_requested"] = scene.n_requested;
  j["t"] = t.step_count();
  j["w"] = t.clip_length();
  j["j"] = t.steps.empty() ? 0 : t.steps.front().clips.front().joint_count();
  j["fps"] = t.fps();
  j["seed"] = t.seed;
  j["seam_overlap"] = t.seam_overlap;
  j["virtual_flags"] = t.steps.empty() ? std::vector<bool>{} : t.steps.front().virtual_flags;
  j["active_from"] =
      t.active_from.empty() ? std::vector<int>(t.character_count(), 0) : t.active_from;
  j["style"] = scene.style;
  j["config"] = scene.config.is_null() ? ordered_json::object() : scene.config;

  ordered_json steps = ordered_json::array();
  for (const auto& step : t.steps) {
    ordered_json characters = ordered_json::array();
    for (const auto& clip : step.clips) {
      ordered_json frames = ordered_json::array();
      for (const auto& pose : clip.frames) {
        ordered_json joints = ordered_json::array();
        for (int jo = 0; jo < pose.joint_count(); ++jo) {
          ordered_json entry;
          entry["pos"] = {pose.positions[jo].x, pose.positions[jo].y, pose.positions[jo].z};
          entry["rot"] = {pose.rotations[jo].w, pose.rotations[jo].x, pose.rotations[jo].y,
                          pose.rotations[jo].z};
          entry["vel"] = {pose.velocities[jo].x, pose.velocities[jo].y, pose.velocities[jo].z};
          joints.push_back(std::move(entry));
        }
        frames.push_back(std::move(joints));
      }
      characters.push_back(std::move(frames));
    }
    steps.push_back(std::move(characters));
  }
  j["steps"] = std::move(steps);
  return j;
}

namespace {

Vec3 vec3_from(const ordered_json& a, const char* what) {
  if (!a.is_array() || a.size() != 3) throw SchemaError(std::string("bad ") + what);
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

Quat quat_from(const ordered_json& a) {
  if (!a.is_array() || a.size() != 4) throw SchemaError("bad rot");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>()};
}

template <typename T>
T field(const ordered_json& j, const char* key) {
  if (!j.contains(key)) throw SchemaError(std::string("missing field: ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(std::string("bad field: ") + key);
  }
}

}  // namespace

Scene scene_from_json(const ordered_json& j) {
  if (!j.is_object() || field<std::string>(j, "format") != kSceneFormat)
    throw SchemaError("not a scene file (format mismatch)");
  Scene scene;
  const int n = field<int>(j, "n");
  const int steps = field<int>(j, "t");
  const int w = field<int>(j, "w");
  const int joints = field<int>(j, "j");
  scene.n_requested = field<int>(j, "n_requested");
  scene.style = field<std::string>(j, "style");
  if (j.contains("config")) scene.config = j.at("config");

  SceneTimeline& t = scene.timeline;
  t.seed = field<std::uint64_t>(j, "seed");
  t.seam_overlap = field<int>(j, "seam_overlap");
  auto virtual_flags = field<std::vector<bool>>(j, "virtual_flags");
  t.active_from = field<std::vector<int>>(j, "active_from");
  if (static_cast<int>(virtual_flags.size()) != n || static_cast<int>(t.active_from.size()) != n)
    throw SchemaError("per-character arrays do not match n");

  const int fps = field<int>(j, "fps");
  const auto& steps_json = j.at("steps");
  if (!steps_json.is_array() || static_cast<int>(steps_json.size()) != steps)
    throw SchemaError("steps array does not match t");
  for (const auto& step_json : steps_json) {
    if (!step_json.is_array() || static_cast<int>(step_json.size()) != n)
      throw SchemaError("step does not have n characters");
    ClipSet step;
    step.virtual_flags = virtual_flags;
    for (const auto& char_json : step_json) {
      if (!char_json.is_array() || static_cast<int>(char_json.size()) != w)
        throw SchemaError("clip does not have w frames");
      MotionClip clip;
      clip.fps = fps;
      for (const auto& frame_json : char_json) {
        if (!frame_json.is_array() || static_cast<int>(frame_json.size()) != joints)
          throw SchemaError("frame does not have j joints");
        Pose pose;
        for (const auto& joint_json : frame_json) {
          pose.positions.push_back(vec3_from(joint_json.at("pos"), "pos"));
          pose.rotations.push_back(quat_from(joint_json.at("rot")));
          pose.velocities.push_back(vec3_from(joint_json.at("vel"), "vel"));
        }
        clip.frames.push_back(std::move(pose));
      }
      step.clips.push_back(std::move(clip));
    }
    t.steps.push_back(std::move(step));
  }
  try {
    validate_timeline(t);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("invalid scene content: ") + e.what());
  }
  return scene;
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);
  out << scene_to_json(scene).dump() << '\n';
  if (!out) throw std::invalid_argument("write failed: " + path);
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("scene parse error: ") + e.what());
  }
  return scene_from_json(j);
}

}  // namespace mcs
