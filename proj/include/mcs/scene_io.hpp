#pragma once

#include <string>

#include "json.hpp"
#include "mcs/errors.hpp"
#include "mcs/motion.hpp"

namespace mcs {

// A timeline plus the bookkeeping that travels with it on disk. The embedded
// config makes every exported number traceable to the run that produced it.
struct Scene {
  SceneTimeline timeline;
  int n_requested = 0;
  std::string style;
  nlohmann::ordered_json config;  // resolved run configuration
};

inline constexpr const char* kSceneFormat = "mcs-scene-v1";

nlohmann::ordered_json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::ordered_json& j);  // throws SchemaError

void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);  // throws SchemaError / std::invalid_argument

}  // namespace mcs
