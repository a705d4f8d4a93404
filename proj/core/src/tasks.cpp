#include "vista/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vista/error.hpp"
#include "vista/random.hpp"

namespace vista {
namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kDepthThresholds[] = {1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25};
constexpr double kAngleThresholds[] = {11.25, 22.5, 30.0};

// Palette is seed-independent so that class colours are learnable.
Tensor class_palette(std::size_t classes, std::size_t channels) {
  Rng rng(0x70616c65747465ULL);
  Tensor palette(Shape{classes, channels});
  for (std::size_t k = 0; k < classes; ++k) {
    double norm = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      palette[k * channels + c] = rng.normal();
      norm += palette[k * channels + c] * palette[k * channels + c];
    }
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < channels; ++c) {
      palette[k * channels + c] *= 1.5 / norm;
    }
  }
  return palette;
}

// Sum of a few random separable sinusoids, normalised coordinates in [0,1).
struct SmoothField {
  struct Wave {
    double amp, fx, fy, px, py;
  };
  std::vector<Wave> waves;

  explicit SmoothField(Rng& rng, std::size_t count = 3) {
    for (std::size_t i = 0; i < count; ++i) {
      waves.push_back({rng.uniform(0.3, 1.0), rng.uniform(1.0, 6.0),
                       rng.uniform(1.0, 6.0), rng.uniform(0.0, 6.283),
                       rng.uniform(0.0, 6.283)});
    }
  }
  double value(double x, double y) const {
    double s = 0.0;
    for (const Wave& w : waves) {
      s += w.amp * std::sin(w.fx * x + w.px) * std::cos(w.fy * y + w.py);
    }
    return s;
  }
  double dx(double x, double y) const {
    double s = 0.0;
    for (const Wave& w : waves) {
      s += w.amp * w.fx * std::cos(w.fx * x + w.px) * std::cos(w.fy * y + w.py);
    }
    return s;
  }
  double dy(double x, double y) const {
    double s = 0.0;
    for (const Wave& w : waves) {
      s -= w.amp * w.fy * std::sin(w.fx * x + w.px) * std::sin(w.fy * y + w.py);
    }
    return s;
  }
};

std::size_t mask_count_check(const Tensor& mask, std::size_t pixels) {
  if (!mask.empty() && mask.size() != pixels) {
    throw Error(ErrorCode::kShapeMismatch,
                "mask " + mask.shape().to_string() + " does not cover " +
                    std::to_string(pixels) + " pixels");
  }
  return pixels;
}

MetricReport depth_report(const std::vector<double>& pred,
                          const std::vector<double>& gt, std::size_t warnings) {
  if (gt.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "eval_depth: no valid pixels");
  }
  double abs_rel = 0, sq_rel = 0, sq = 0, log_sq = 0;
  std::size_t within[3] = {0, 0, 0};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double d = pred[i], g = gt[i];
    const double diff = d - g;
    abs_rel += std::abs(diff) / g;
    sq_rel += diff * diff / g;
    sq += diff * diff;
    const double ld = std::log10(d) - std::log10(g);
    log_sq += ld * ld;
    const double ratio = std::max(g / d, d / g);
    for (int k = 0; k < 3; ++k) within[k] += ratio < kDepthThresholds[k];
  }
  const auto n = static_cast<double>(gt.size());
  MetricReport r;
  r.values = {{"abs_rel", abs_rel / n},
              {"sq_rel", sq_rel / n},
              {"rms", std::sqrt(sq / n)},
              {"log_rms", std::sqrt(log_sq / n)},
              {"delta1", static_cast<double>(within[0]) / n},
              {"delta2", static_cast<double>(within[1]) / n},
              {"delta3", static_cast<double>(within[2]) / n}};
  r.warnings = warnings;
  return r;
}

MetricReport seg_report(const std::vector<std::uint64_t>& confusion,
                        std::size_t classes) {
  std::uint64_t total = 0, correct = 0;
  for (std::size_t g = 0; g < classes; ++g) {
    for (std::size_t p = 0; p < classes; ++p) {
      total += confusion[g * classes + p];
      if (g == p) correct += confusion[g * classes + p];
    }
  }
  if (total == 0) {
    throw Error(ErrorCode::kInvalidArgument, "eval_seg: no valid pixels");
  }
  double iou_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    std::uint64_t gt_k = 0, pred_k = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      gt_k += confusion[k * classes + j];
      pred_k += confusion[j * classes + k];
    }
    const std::uint64_t inter = confusion[k * classes + k];
    const std::uint64_t uni = gt_k + pred_k - inter;
    if (uni == 0) continue;
    iou_sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++present;
  }
  MetricReport r;
  r.values = {{"pix_acc", static_cast<double>(correct) / static_cast<double>(total)},
              {"miou", iou_sum / static_cast<double>(present)}};
  return r;
}

MetricReport normals_report(std::vector<double> angles, std::size_t warnings) {
  if (angles.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "eval_normals: no valid pixels");
  }
  double total = 0.0;
  std::size_t below[3] = {0, 0, 0};
  for (double a : angles) {
    total += a;
    for (int k = 0; k < 3; ++k) below[k] += a < kAngleThresholds[k];
  }
  const auto n = static_cast<double>(angles.size());
  const std::size_t mid = (angles.size() - 1) / 2;
  std::nth_element(angles.begin(), angles.begin() + static_cast<std::ptrdiff_t>(mid),
                   angles.end());
  MetricReport r;
  r.values = {{"mean_angle", total / n},
              {"median_angle", angles[mid]},
              {"within_11_25", static_cast<double>(below[0]) / n},
              {"within_22_5", static_cast<double>(below[1]) / n},
              {"within_30", static_cast<double>(below[2]) / n}};
  r.warnings = warnings;
  return r;
}

void collect_depth(const Tensor& pred, const Tensor& gt, const Tensor& mask,
                   std::vector<double>& pv, std::vector<double>& gv,
                   std::size_t& warnings) {
  if (pred.shape() != gt.shape()) {
    throw Error(ErrorCode::kShapeMismatch,
                "eval_depth: pred " + pred.shape().to_string() + " vs gt " +
                    gt.shape().to_string());
  }
  mask_count_check(mask, gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask.empty() && mask[i] == 0.0) continue;
    if (!(gt[i] > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "eval_depth: ground truth must be > 0 on the mask");
    }
    double d = pred[i];
    if (!(d > 0.0)) {
      d = kDepthFloor;
      ++warnings;
    }
    pv.push_back(d);
    gv.push_back(gt[i]);
  }
}

void collect_angles(const Tensor& pred, const Tensor& gt, const Tensor& mask,
                    std::vector<double>& angles, std::size_t& warnings) {
  if (pred.shape() != gt.shape() || pred.rank() != 3 || pred.dim(0) != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                "eval_normals: pred " + pred.shape().to_string() + " vs gt " +
                    gt.shape().to_string());
  }
  const std::size_t n = pred.dim(1) * pred.dim(2);
  mask_count_check(mask, n);
  for (std::size_t p = 0; p < n; ++p) {
    if (!mask.empty() && mask[p] == 0.0) continue;
    const double a[3] = {pred[p], pred[n + p], pred[2 * n + p]};
    const double b[3] = {gt[p], gt[n + p], gt[2 * n + p]};
    if (a[0] == 0.0 && a[1] == 0.0 && a[2] == 0.0) {
      angles.push_back(90.0);
      ++warnings;
      continue;
    }
    // atan2(|a x b|, a.b) equals the clamped arccos of the normalised dot
    // product but stays accurate near 0 and 180 degrees.
    const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    const double cross = std::hypot(a[1] * b[2] - a[2] * b[1],
                                     a[2] * b[0] - a[0] * b[2],
                                     a[0] * b[1] - a[1] * b[0]);
    angles.push_back(std::atan2(cross, dot) * kRadToDeg);
  }
}

void accumulate_confusion(const LabelMap& pred, const LabelMap& gt,
                          std::size_t classes, int ignore_label,
                          std::vector<std::uint64_t>& confusion) {
  if (pred.labels.size() != gt.labels.size() || pred.height != gt.height ||
      pred.width != gt.width) {
    throw Error(ErrorCode::kShapeMismatch, "eval_seg: label maps differ in size");
  }
  const auto k = static_cast<int>(classes);
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i];
    if (g == ignore_label) continue;
    const int p = pred.labels[i];
    if (g < 0 || g >= k || p < 0 || p >= k) {
      throw Error(ErrorCode::kInvalidArgument,
                  "eval_seg: label outside [0," + std::to_string(k) + ")");
    }
    ++confusion[static_cast<std::size_t>(g) * classes + static_cast<std::size_t>(p)];
  }
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kDepth: return "depth";
    case TaskKind::kSegmentation: return "segmentation";
    case TaskKind::kNormals: return "normals";
  }
  return "unknown";
}

TaskKind parse_task(std::string_view text) {
  for (TaskKind k : {TaskKind::kDepth, TaskKind::kSegmentation, TaskKind::kNormals}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::kParse, "unknown task kind '" + std::string(text) +
                                     "' (expected depth, segmentation or normals)");
}

SyntheticSample gen_task(TaskKind kind, std::size_t height, std::size_t width,
                         std::uint64_t seed, const TaskOptions& options) {
  if (height % 4 != 0 || width % 4 != 0 || height == 0 || width == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "gen_task: image size must be a positive multiple of 4");
  }
  if (options.in_channels < 1 || options.classes < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "gen_task: channel and class counts must be >= 1");
  }
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(kind), height, width}));
  const std::size_t cin = options.in_channels;
  SyntheticSample s;
  s.kind = kind;
  s.image = Tensor(Shape{cin, height, width});
  s.valid_mask = Tensor::ones(Shape{height, width});
  auto coord = [](std::size_t i, std::size_t n) {
    return (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  };

  switch (kind) {
    case TaskKind::kDepth: {
      SmoothField field(rng);
      s.target = Tensor(Shape{1, height, width});
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double g = field.value(coord(x, width), coord(y, height));
          const double depth = 0.5 + std::exp(0.6 * g);
          s.target.at(0, y, x) = depth;
          for (std::size_t c = 0; c < cin; ++c) {
            const double clean = c % 2 == 0 ? depth : std::log(depth);
            s.image.at(c, y, x) = clean + options.noise * rng.normal();
          }
        }
      }
      break;
    }
    case TaskKind::kSegmentation: {
      const std::size_t classes = options.classes;
      const std::size_t regions = classes + 2;
      std::vector<double> sx(regions), sy(regions);
      std::vector<int> region_class(regions);
      for (std::size_t i = 0; i < regions; ++i) {
        sx[i] = rng.uniform();
        sy[i] = rng.uniform();
        region_class[i] = i < classes ? static_cast<int>(i)
                                      : static_cast<int>(rng.index(classes));
      }
      const Tensor palette = class_palette(classes, cin);
      s.labels = LabelMap{height, width, std::vector<int>(height * width)};
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double px = coord(x, width), py = coord(y, height);
          std::size_t best = 0;
          double best_d = 1e300;
          for (std::size_t i = 0; i < regions; ++i) {
            const double d = (px - sx[i]) * (px - sx[i]) + (py - sy[i]) * (py - sy[i]);
            if (d < best_d) {
              best_d = d;
              best = i;
            }
          }
          const int label = region_class[best];
          s.labels.labels[y * width + x] = label;
          for (std::size_t c = 0; c < cin; ++c) {
            s.image.at(c, y, x) =
                palette[static_cast<std::size_t>(label) * cin + c] +
                options.noise * rng.normal();
          }
        }
      }
      break;
    }
    case TaskKind::kNormals: {
      SmoothField field(rng);
      s.target = Tensor(Shape{3, height, width});
      const double amp = 0.25;
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double px = coord(x, width), py = coord(y, height);
          const double gx = amp * field.dx(px, py);
          const double gy = amp * field.dy(px, py);
          const double inv = 1.0 / std::sqrt(gx * gx + gy * gy + 1.0);
          s.target.at(0, y, x) = -gx * inv;
          s.target.at(1, y, x) = -gy * inv;
          s.target.at(2, y, x) = inv;
          const double clean[3] = {gx, gy, amp * field.value(px, py)};
          for (std::size_t c = 0; c < cin; ++c) {
            s.image.at(c, y, x) = clean[c % 3] + options.noise * rng.normal();
          }
        }
      }
      break;
    }
  }
  return s;
}

double MetricReport::at(std::string_view name) const {
  for (const auto& [k, v] : values) {
    if (k == name) return v;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "metric '" + std::string(name) + "' not in report");
}

bool MetricReport::contains(std::string_view name) const {
  return std::any_of(values.begin(), values.end(),
                     [&](const auto& kv) { return kv.first == name; });
}

std::vector<std::string> metric_names(TaskKind kind) {
  switch (kind) {
    case TaskKind::kDepth:
      return {"abs_rel", "sq_rel", "rms", "log_rms", "delta1", "delta2", "delta3"};
    case TaskKind::kSegmentation:
      return {"pix_acc", "miou"};
    case TaskKind::kNormals:
      return {"mean_angle", "median_angle", "within_11_25", "within_22_5",
              "within_30"};
  }
  return {};
}

MetricReport eval_depth(const Tensor& pred, const Tensor& gt, const Tensor& mask) {
  std::vector<double> pv, gv;
  std::size_t warnings = 0;
  collect_depth(pred, gt, mask, pv, gv, warnings);
  return depth_report(pv, gv, warnings);
}

MetricReport eval_seg(const LabelMap& pred, const LabelMap& gt,
                      std::size_t classes, int ignore_label) {
  std::vector<std::uint64_t> confusion(classes * classes, 0);
  accumulate_confusion(pred, gt, classes, ignore_label, confusion);
  return seg_report(confusion, classes);
}

MetricReport eval_normals(const Tensor& pred, const Tensor& gt,
                          const Tensor& mask) {
  std::vector<double> angles;
  std::size_t warnings = 0;
  collect_angles(pred, gt, mask, angles, warnings);
  return normals_report(std::move(angles), warnings);
}

MetricAccumulator::MetricAccumulator(TaskKind kind, std::size_t classes,
                                     int ignore_label)
    : kind_(kind),
      classes_(classes),
      ignore_label_(ignore_label),
      confusion_(classes * classes, 0) {}

void MetricAccumulator::add_depth(const Tensor& pred, const Tensor& gt,
                                  const Tensor& mask) {
  collect_depth(pred, gt, mask, pred_, gt_, warnings_);
}

void MetricAccumulator::add_seg(const LabelMap& pred, const LabelMap& gt) {
  accumulate_confusion(pred, gt, classes_, ignore_label_, confusion_);
}

void MetricAccumulator::add_normals(const Tensor& pred, const Tensor& gt,
                                    const Tensor& mask) {
  collect_angles(pred, gt, mask, pred_, warnings_);
}

MetricReport MetricAccumulator::report() const {
  switch (kind_) {
    case TaskKind::kDepth: return depth_report(pred_, gt_, warnings_);
    case TaskKind::kSegmentation: return seg_report(confusion_, classes_);
    case TaskKind::kNormals: return normals_report(pred_, warnings_);
  }
  return {};
}

LabelMap argmax_labels(const Tensor& logits) {
  if (logits.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                "argmax_labels: logits must be [K,H,W], got " +
                    logits.shape().to_string());
  }
  const std::size_t k = logits.dim(0), n = logits.dim(1) * logits.dim(2);
  LabelMap out{logits.dim(1), logits.dim(2), std::vector<int>(n, 0)};
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (logits[c * n + p] > logits[best * n + p]) best = c;
    }
    out.labels[p] = static_cast<int>(best);
  }
  return out;
}

}  // namespace vista
