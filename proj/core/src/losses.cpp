#include "vista/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vista/error.hpp"

namespace vista {
namespace {

void check_l2_args(const Tensor& pred, const Tensor& target,
                   const Tensor& mask) {
  if (pred.shape() != target.shape()) {
    throw Error(ErrorCode::kShapeMismatch,
                "loss_l2: pred " + pred.shape().to_string() + " vs target " +
                    target.shape().to_string());
  }
  if (!mask.empty() && mask.size() != pred.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "loss_l2: mask " + mask.shape().to_string() + " vs pred " +
                    pred.shape().to_string());
  }
}

std::size_t l2_count(const Tensor& pred, const Tensor& mask) {
  if (mask.empty()) return pred.size();
  std::size_t n = 0;
  for (double m : mask.data()) n += (m != 0.0);
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "loss_l2: empty mask");
  return n;
}

void check_ce_args(const Tensor& logits, const LabelMap& labels,
                   int ignore_label) {
  if (logits.rank() != 3 || logits.dim(1) != labels.height ||
      logits.dim(2) != labels.width ||
      labels.labels.size() != labels.height * labels.width) {
    throw Error(ErrorCode::kShapeMismatch,
                "loss_cross_entropy: logits " + logits.shape().to_string() +
                    " vs labels " + std::to_string(labels.height) + "x" +
                    std::to_string(labels.width));
  }
  const auto k = static_cast<int>(logits.dim(0));
  for (int l : labels.labels) {
    if (l == ignore_label) continue;
    if (l < 0 || l >= k) {
      throw Error(ErrorCode::kInvalidArgument,
                  "loss_cross_entropy: label " + std::to_string(l) +
                      " outside [0," + std::to_string(k) + ")");
    }
  }
}

// Log-sum-exp over the channel column at pixel p.
double column_lse(const Tensor& logits, std::size_t p) {
  const std::size_t k = logits.dim(0), n = logits.dim(1) * logits.dim(2);
  double mx = logits[p];
  for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits[c * n + p]);
  double s = 0.0;
  for (std::size_t c = 0; c < k; ++c) s += std::exp(logits[c * n + p] - mx);
  return mx + std::log(s);
}

void check_cos_args(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape() || pred.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                "loss_cosine: pred " + pred.shape().to_string() +
                    " vs target " + target.shape().to_string());
  }
}

}  // namespace

double loss_l2(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  check_l2_args(pred, target, mask);
  const std::size_t n = l2_count(pred, mask);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && mask[i] == 0.0) continue;
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(n);
}

Tensor loss_l2_grad(const Tensor& pred, const Tensor& target,
                    const Tensor& mask) {
  check_l2_args(pred, target, mask);
  const double inv = 1.0 / static_cast<double>(l2_count(pred, mask));
  Tensor g(pred.shape());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && mask[i] == 0.0) continue;
    g[i] = 2.0 * (pred[i] - target[i]) * inv;
  }
  return g;
}

double loss_cross_entropy(const Tensor& logits, const LabelMap& labels,
                          int ignore_label) {
  check_ce_args(logits, labels, ignore_label);
  const std::size_t n = labels.labels.size();
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const int l = labels.labels[p];
    if (l == ignore_label) continue;
    s += column_lse(logits, p) - logits[static_cast<std::size_t>(l) * n + p];
    ++count;
  }
  if (count == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "loss_cross_entropy: every pixel is ignored");
  }
  return s / static_cast<double>(count);
}

Tensor loss_cross_entropy_grad(const Tensor& logits, const LabelMap& labels,
                               int ignore_label) {
  check_ce_args(logits, labels, ignore_label);
  const std::size_t k = logits.dim(0), n = labels.labels.size();
  std::size_t count = 0;
  for (int l : labels.labels) count += (l != ignore_label);
  if (count == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "loss_cross_entropy: every pixel is ignored");
  }
  const double inv = 1.0 / static_cast<double>(count);
  Tensor g(logits.shape());
  for (std::size_t p = 0; p < n; ++p) {
    const int l = labels.labels[p];
    if (l == ignore_label) continue;
    const double lse = column_lse(logits, p);
    for (std::size_t c = 0; c < k; ++c) {
      g[c * n + p] = std::exp(logits[c * n + p] - lse) * inv;
    }
    g[static_cast<std::size_t>(l) * n + p] -= inv;
  }
  return g;
}

double loss_cosine(const Tensor& pred, const Tensor& target) {
  check_cos_args(pred, target);
  const std::size_t c = pred.dim(0), n = pred.dim(1) * pred.dim(2);
  double s = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double dot = 0.0, pp = 0.0, tt = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      dot += pred[ch * n + p] * target[ch * n + p];
      pp += pred[ch * n + p] * pred[ch * n + p];
      tt += target[ch * n + p] * target[ch * n + p];
    }
    const double np = std::max(std::sqrt(pp), kCosineNormFloor);
    const double nt = std::max(std::sqrt(tt), kCosineNormFloor);
    s += 1.0 - dot / (np * nt);
  }
  return s / static_cast<double>(n);
}

Tensor loss_cosine_grad(const Tensor& pred, const Tensor& target) {
  check_cos_args(pred, target);
  const std::size_t c = pred.dim(0), n = pred.dim(1) * pred.dim(2);
  const double inv = 1.0 / static_cast<double>(n);
  Tensor g(pred.shape());
  for (std::size_t p = 0; p < n; ++p) {
    double dot = 0.0, pp = 0.0, tt = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      dot += pred[ch * n + p] * target[ch * n + p];
      pp += pred[ch * n + p] * pred[ch * n + p];
      tt += target[ch * n + p] * target[ch * n + p];
    }
    const double np_raw = std::sqrt(pp);
    const double np = std::max(np_raw, kCosineNormFloor);
    const double nt = std::max(std::sqrt(tt), kCosineNormFloor);
    const bool clamped = np_raw < kCosineNormFloor;
    for (std::size_t ch = 0; ch < c; ++ch) {
      // d/dp of -dot/(|p||t|); the norm term vanishes while clamped.
      double d = target[ch * n + p] / (np * nt);
      if (!clamped) d -= dot * pred[ch * n + p] / (np * np * np * nt);
      g[ch * n + p] = -d * inv;
    }
  }
  return g;
}

}  // namespace vista
