#pragma once

#include <cstddef>
#include <vector>

#include "vista/tensor.hpp"

namespace vista {

/// Integer class map of H x W pixels, row-major.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<int> labels;

  int at(std::size_t h, std::size_t w) const { return labels[h * width + w]; }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

inline constexpr int kDefaultIgnoreLabel = 255;
inline constexpr double kCosineNormFloor = 1e-12;

/// Mean of (pred - target)^2 over entries where valid_mask != 0. The mask has
/// the shape of pred, or is empty to select every entry.
double loss_l2(const Tensor& pred, const Tensor& target, const Tensor& valid_mask);
Tensor loss_l2_grad(const Tensor& pred, const Tensor& target,
                    const Tensor& valid_mask);

/// Mean over non-ignored pixels of -log softmax(logits[:, p])[label[p]].
double loss_cross_entropy(const Tensor& logits, const LabelMap& labels,
                          int ignore_label = kDefaultIgnoreLabel);
Tensor loss_cross_entropy_grad(const Tensor& logits, const LabelMap& labels,
                               int ignore_label = kDefaultIgnoreLabel);

/// Mean over pixels of 1 - cos(angle(pred[:, p], target[:, p])) for [3,H,W]
/// fields. Prediction norms are clamped at kCosineNormFloor.
double loss_cosine(const Tensor& pred, const Tensor& target);
Tensor loss_cosine_grad(const Tensor& pred, const Tensor& target);

}  // namespace vista
