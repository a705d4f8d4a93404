#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vista/autodiff.hpp"
#include "vista/tensor.hpp"

namespace vista {

/// Rank-T attention tensor a = sum_t m^t (x) v^t, held in factored form.
/// maps[t] is an [H,W] spatial map of posterior means, vectors[t] a [C]
/// channel vector on the probability simplex.
class StructuredAttention {
 public:
  StructuredAttention() = default;
  /// Validates that both lists have equal length and consistent shapes.
  StructuredAttention(std::vector<Tensor> maps, std::vector<Tensor> vectors);

  std::size_t rank() const noexcept { return maps_.size(); }
  const std::vector<Tensor>& maps() const noexcept { return maps_; }
  const std::vector<Tensor>& vectors() const noexcept { return vectors_; }

 private:
  std::vector<Tensor> maps_;
  std::vector<Tensor> vectors_;
};

/// Sum of the T outer products as a dense [C,H,W] tensor. Throws for T = 0;
/// rank-zero attention means the caller takes the ungated path.
Tensor assemble(const StructuredAttention& att);

/// message (.) assemble(att).
Tensor apply_gate(const Tensor& message, const StructuredAttention& att);

namespace ad {

Var assemble(std::span<const Var> maps, std::span<const Var> vectors);

}  // namespace ad
}  // namespace vista
