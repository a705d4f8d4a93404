#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "vista/losses.hpp"
#include "vista/tensor.hpp"

// Tape-based reverse-mode differentiation over the tensor operations in
// tensor.hpp and the task losses in losses.hpp.

namespace vista::ad {

using NodeId = std::size_t;

enum class OpKind : int {
  kLeaf = 0,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kAddChannelBias,
  kRelu,
  kSigmoid,
  kSoftmax,
  kConv2d,
  kResize,
  kOuterMapVec,
  kContractChannels,
  kContractPixels,
  kConcatChannels,
  kSum,
  kLossL2,
  kLossCrossEntropy,
  kLossCosine,
};

/// Static attributes of a recorded op that its backward rule needs.
struct OpAttrs {
  int stride = 1;
  int pad = -1;
  double factor = 1.0;
  std::shared_ptr<const Tensor> target;
  std::shared_ptr<const Tensor> mask;
  std::shared_ptr<const LabelMap> labels;
  int ignore_label = kDefaultIgnoreLabel;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Tensor grad() const;
  const Shape& shape() const { return value().shape(); }
  NodeId id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (parameter or input whose gradient is wanted).
  Var leaf(Tensor value);
  /// Input that never receives a gradient.
  Var constant(Tensor value);

  /// Appends an op whose forward result has already been computed. The
  /// backward rule is the vector-Jacobian product of `kind`.
  Var record(OpKind kind, std::vector<NodeId> inputs, Tensor value,
             OpAttrs attrs = {});

  /// Accumulates d loss / d value into every node reachable from `loss`.
  /// `loss` must have shape [1].
  void backward(const Var& loss);
  void zero_grad();

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  /// Gradient of the last backward pass; zeros if the node was unreachable.
  Tensor grad(NodeId id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;  // empty until reached by backward
    OpAttrs attrs;
    bool needs_grad = false;
  };

  void accumulate(NodeId id, const Tensor& g);
  void backward_node(const Node& node);

  std::vector<Node> nodes_;
};

// Differentiable counterparts of the tensor_core operations. All inputs must
// live on the same tape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a + s, with s a [1] variable broadcast to every entry.
Var add_scalar(const Var& a, const Var& s);
/// x[c,h,w] + bias[c].
Var add_channel_bias(const Var& x, const Var& bias);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var softmax(const Var& a);
Var conv2d(const Var& input, const Var& kernels, int stride = 1, int pad = -1);
Var resize_bilinear(const Var& input, std::size_t out_h, std::size_t out_w);
Var outer_map_vec(const Var& m, const Var& v);
Var contract_channels(const Var& x, const Var& v);
Var contract_pixels(const Var& x, const Var& m);
Var concat_channels(std::span<const Var> parts);
Var sum(const Var& a);
/// Sum of several same-shape variables (left fold of add).
Var add_n(std::span<const Var> terms);

Var loss_l2(const Var& pred, const Tensor& target, const Tensor& valid_mask);
Var loss_cross_entropy(const Var& logits, const LabelMap& labels,
                       int ignore_label = kDefaultIgnoreLabel);
Var loss_cosine(const Var& pred, const Tensor& target);

/// Scalar function of the given parameters, built on a fresh tape.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares reverse-mode gradients of `f` against central differences with
/// step h. Returns max over every parameter entry of
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const ScalarFn& f, std::span<const Tensor> params,
                  double h = 1e-5);

}  // namespace vista::ad
