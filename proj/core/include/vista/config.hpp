#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "vista/frontend.hpp"
#include "vista/inference.hpp"
#include "vista/tasks.hpp"

namespace vista {

/// Flat experiment description. Text form is one `key = value` per line,
/// `#` starts a comment. `task` and `seed` are required, everything else
/// has a default.
///
///   key              default      meaning
///   task             (required)   depth | segmentation | normals
///   seed             (required)   base seed, unsigned 64-bit
///   image_size       32           square input side, multiple of 2^(scales-1) and 4
///   classes          4            K for segmentation
///   scales           3            S, number of front-end stages
///   rank             1            T
///   variant          structured   none | spatial-only | channel-only |
///                                 structured | deterministic-low-rank
///   iterations       1            mean-field iterations
///   optimizer        sgd          sgd | adam
///   learning_rate    0.05
///   momentum         0.9
///   epochs           20
///   steps_per_epoch  10
///   batch_size       4
///   eval_samples     8            held-out images for the final report
///   noise            0.35         synthetic image noise
///   timing_reps      5            forward passes timed, min reported
///   output_dir       runs
struct ExperimentConfig {
  TaskKind task = TaskKind::kSegmentation;
  std::uint64_t seed = 0;
  std::size_t image_size = 32;
  std::size_t classes = 4;
  std::size_t scales = 3;
  int rank = 1;
  AttentionVariant variant = AttentionVariant::kStructured;
  int iterations = 1;
  OptimizerKind optimizer = OptimizerKind::kSgdMomentum;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t epochs = 20;
  std::size_t steps_per_epoch = 10;
  std::size_t batch_size = 4;
  std::size_t eval_samples = 8;
  double noise = 0.35;
  std::size_t timing_reps = 5;
  std::string output_dir = "runs";

  void validate() const;
  ModelConfig model() const;
  OptimizerConfig optimizer_config() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses config text. `source` names the origin in error messages.
ExperimentConfig parse_config_text(std::string_view text,
                                   std::string_view source = "<config>");
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Canonical text form; parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// FNV-1a of the canonical text without output_dir, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace vista
