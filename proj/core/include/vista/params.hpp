#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vista/autodiff.hpp"
#include "vista/tensor.hpp"

namespace vista {

/// Ordered collection of named learnable tensors.
class ParamSet {
 public:
  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const noexcept {
    return entries_;
  }
  std::vector<std::pair<std::string, Tensor>>& entries() noexcept {
    return entries_;
  }
  std::vector<std::string> names() const;

  /// Exact number of learnable scalars.
  std::size_t parameter_count() const;

  /// Same names, all-zero values.
  ParamSet zeros_like() const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// A ParamSet registered as leaves on one tape.
class BoundParams {
 public:
  BoundParams(ad::Tape& tape, const ParamSet& params);

  const ad::Var& operator[](std::string_view name) const;
  bool contains(std::string_view name) const;
  /// Gradients after tape.backward(), in ParamSet order.
  ParamSet gradients(const ParamSet& like) const;

 private:
  std::vector<std::pair<std::string, ad::Var>> vars_;
};

}  // namespace vista
