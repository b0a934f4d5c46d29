#pragma once

#include <stdexcept>
#include <string>

namespace mcs {

// Malformed or version-mismatched files (scenes, corpora, checkpoints, configs).
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// A character spawn request inside another character's personal radius.
struct SpawnTooClose : std::runtime_error {
  explicit SpawnTooClose(const std::string& what) : std::runtime_error(what) {}
};

// A training-quality gate (e.g. the gradient check before saving) failed.
struct TrainingGateError : std::runtime_error {
  explicit TrainingGateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mcs
