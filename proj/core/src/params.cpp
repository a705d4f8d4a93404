#include "vista/params.hpp"

#include <algorithm>

#include "vista/error.hpp"

namespace vista {

void ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate parameter '" + name + "'");
  }
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

Tensor& ParamSet::at(std::string_view name) {
  for (auto& [k, v] : entries_) {
    if (k == name) return v;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "no parameter named '" + std::string(name) + "'");
}

const Tensor& ParamSet::at(std::string_view name) const {
  for (const auto& [k, v] : entries_) {
    if (k == name) return v;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "no parameter named '" + std::string(name) + "'");
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

std::size_t ParamSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& [k, v] : entries_) out.add(k, Tensor::zeros(v.shape()));
  return out;
}

BoundParams::BoundParams(ad::Tape& tape, const ParamSet& params) {
  vars_.reserve(params.size());
  for (const auto& [k, v] : params.entries()) {
    vars_.emplace_back(k, tape.leaf(v));
  }
}

const ad::Var& BoundParams::operator[](std::string_view name) const {
  for (const auto& [k, v] : vars_) {
    if (k == name) return v;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "no bound parameter named '" + std::string(name) + "'");
}

bool BoundParams::contains(std::string_view name) const {
  return std::any_of(vars_.begin(), vars_.end(),
                     [&](const auto& e) { return e.first == name; });
}

ParamSet BoundParams::gradients(const ParamSet& like) const {
  ParamSet out;
  for (const auto& [k, v] : like.entries()) out.add(k, (*this)[k].grad());
  return out;
}

}  // namespace vista
