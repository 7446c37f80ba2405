#pragma once

// Run configuration documents.
//
// A config is a JSON object with schema "dpa.run" and version 1. Every field
// has a default, so "{}" is a valid config. Unknown keys are rejected.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpa/trainer.hpp"

namespace dpa::config {

inline constexpr const char* kSchema = "dpa.run";
inline constexpr int kVersion = 1;

// Carries one diagnostic per offending field, e.g. "trainer.gamma: must be >= 0".
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

struct ScenarioSpec {
  double beta = 0.5;
  std::size_t n_union = 8;
  std::size_t dim = 16;
  std::size_t instances_per_image = 8;
  double shift = 2.0;
  double spacing = 4.0;
  double global_noise = 0.05;
  double cluster_std = 1.0;
  bool operator==(const ScenarioSpec&) const = default;
};

enum class Ablation { kFull, kNoGdpa, kNoIdsa, kNoPcc, kBaseline };

std::string ablation_name(Ablation a);  // "full", "no-GDPA", ...
// Throws ConfigError for unknown names.
Ablation parse_ablation(const std::string& name);
train::Modules modules_for(Ablation a);

enum class SweepAxis { kNone, kBeta, kAblation };

struct SweepSpec {
  SweepAxis axis = SweepAxis::kNone;
  std::vector<double> betas;
  std::vector<Ablation> ablations;
  bool operator==(const SweepSpec&) const = default;
};

struct RunConfig {
  ScenarioSpec scenario;
  std::vector<std::uint64_t> seeds{0};
  train::TrainerConfig trainer;  // model_seed is taken from each run seed
  SweepSpec sweep;
  std::string output_dir = "runs";
  std::size_t eval_images = 64;
  bool operator==(const RunConfig&) const = default;
};

// Parses and validates. Throws ConfigError listing every problem found.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string to_json(const RunConfig& config);

// Field-level checks; returns an empty list when the config is usable.
std::vector<std::string> validate(const RunConfig& config);

}  // namespace dpa::config
