#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vista/losses.hpp"
#include "vista/tensor.hpp"

namespace vista {

enum class TaskKind { kDepth, kSegmentation, kNormals };

std::string_view to_string(TaskKind kind);
TaskKind parse_task(std::string_view text);

/// One synthetic training/evaluation example.
struct SyntheticSample {
  TaskKind kind = TaskKind::kSegmentation;
  Tensor image;       ///< [Cin, H, W]
  Tensor target;      ///< depth [1,H,W] or normals [3,H,W]; empty for segmentation
  LabelMap labels;    ///< segmentation only
  Tensor valid_mask;  ///< [H, W], 1 = valid
};

struct TaskOptions {
  std::size_t classes = 4;
  std::size_t in_channels = 3;
  double noise = 0.35;
};

/// Deterministic synthetic sample. Depth: positive smooth field whose value
/// and a nonlinear transform appear in the image. Segmentation: K-region
/// Voronoi partition, each class painted with a fixed palette colour plus
/// noise. Normals: unit normals of a random smooth height field whose
/// gradients appear in the image.
SyntheticSample gen_task(TaskKind kind, std::size_t height, std::size_t width,
                         std::uint64_t seed, const TaskOptions& options = {});

/// Named scalar metrics in a fixed order, plus a count of clamped inputs.
struct MetricReport {
  std::vector<std::pair<std::string, double>> values;
  std::size_t warnings = 0;

  double at(std::string_view name) const;
  bool contains(std::string_view name) const;
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Column order of MetricReport::values per task.
std::vector<std::string> metric_names(TaskKind kind);

inline constexpr double kDepthFloor = 1e-6;

/// abs-rel, sq-rel, rms, log-rms (log10), delta<1.25, delta<1.25^2,
/// delta<1.25^3. Thresholds are strict. Non-positive predictions are clamped
/// to kDepthFloor and counted as warnings. mask [H,W] or [1,H,W] or empty.
MetricReport eval_depth(const Tensor& pred, const Tensor& gt, const Tensor& mask);

/// pixAcc and mIoU. Classes absent from both gt and prediction (over valid
/// pixels) are left out of the mean.
MetricReport eval_seg(const LabelMap& pred, const LabelMap& gt, std::size_t classes,
                      int ignore_label = kDefaultIgnoreLabel);

/// Mean, median (lower median), and strict fractions below 11.25, 22.5, 30
/// degrees. Zero-norm predictions count as 90 degrees with a warning.
MetricReport eval_normals(const Tensor& pred, const Tensor& gt, const Tensor& mask);

/// Accumulates per-sample evaluations into one report: depth and normal
/// errors are pooled over all pixels, segmentation uses one confusion matrix.
class MetricAccumulator {
 public:
  MetricAccumulator(TaskKind kind, std::size_t classes,
                    int ignore_label = kDefaultIgnoreLabel);
  void add_depth(const Tensor& pred, const Tensor& gt, const Tensor& mask);
  void add_seg(const LabelMap& pred, const LabelMap& gt);
  void add_normals(const Tensor& pred, const Tensor& gt, const Tensor& mask);
  MetricReport report() const;

 private:
  TaskKind kind_;
  std::size_t classes_;
  int ignore_label_;
  std::vector<double> pred_;  // pooled depth predictions / normal angles
  std::vector<double> gt_;
  std::vector<std::uint64_t> confusion_;
  std::size_t warnings_ = 0;
};

/// Per-pixel argmax over the channel axis of [K,H,W] logits.
LabelMap argmax_labels(const Tensor& logits);

}  // namespace vista
