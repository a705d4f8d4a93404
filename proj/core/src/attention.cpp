#include "vista/attention.hpp"

#include <string>

#include "vista/error.hpp"

namespace vista {

StructuredAttention::StructuredAttention(std::vector<Tensor> maps,
                                         std::vector<Tensor> vectors)
    : maps_(std::move(maps)), vectors_(std::move(vectors)) {
  if (maps_.size() != vectors_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "attention has " + std::to_string(maps_.size()) + " maps but " +
                    std::to_string(vectors_.size()) + " vectors");
  }
  for (std::size_t t = 0; t < maps_.size(); ++t) {
    if (maps_[t].rank() != 2 || maps_[t].shape() != maps_[0].shape()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "attention map " + std::to_string(t) + " has shape " +
                      maps_[t].shape().to_string());
    }
    if (vectors_[t].rank() != 1 || vectors_[t].shape() != vectors_[0].shape()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "attention vector " + std::to_string(t) + " has shape " +
                      vectors_[t].shape().to_string());
    }
  }
}

Tensor assemble(const StructuredAttention& att) {
  if (att.rank() == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "assemble needs rank >= 1; use the ungated path for rank 0");
  }
  Tensor out = outer_map_vec(att.maps()[0], att.vectors()[0]);
  for (std::size_t t = 1; t < att.rank(); ++t) {
    out = add(out, outer_map_vec(att.maps()[t], att.vectors()[t]));
  }
  return out;
}

Tensor apply_gate(const Tensor& message, const StructuredAttention& att) {
  const Tensor gate = assemble(att);
  if (gate.shape() != message.shape()) {
    throw Error(ErrorCode::kShapeMismatch,
                "apply_gate: message " + message.shape().to_string() +
                    " vs attention " + gate.shape().to_string());
  }
  return mul(message, gate);
}

namespace ad {

Var assemble(std::span<const Var> maps, std::span<const Var> vectors) {
  if (maps.empty() || maps.size() != vectors.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "assemble needs matching non-empty map and vector lists");
  }
  Var out = outer_map_vec(maps[0], vectors[0]);
  for (std::size_t t = 1; t < maps.size(); ++t) {
    out = add(out, outer_map_vec(maps[t], vectors[t]));
  }
  return out;
}

}  // namespace ad
}  // namespace vista
