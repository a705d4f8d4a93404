#include "vista/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vista/error.hpp"

namespace vista::ad {
namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw Error(ErrorCode::kInvalidArgument,
                "variables must be registered on the same tape");
  }
  return *a.tape();
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) {
    throw Error(ErrorCode::kInvalidArgument, "variable is not on a tape");
  }
  return *a.tape();
}

struct ConvGeometry {
  std::size_t cin, h, w, cout, kh, kw, oh, ow;
  std::ptrdiff_t pad_h, pad_w, stride;
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& k, const Tensor& y,
                           int stride, int pad) {
  ConvGeometry g{};
  g.cin = x.dim(0);
  g.h = x.dim(1);
  g.w = x.dim(2);
  g.cout = k.dim(0);
  g.kh = k.dim(2);
  g.kw = k.dim(3);
  g.oh = y.dim(1);
  g.ow = y.dim(2);
  g.pad_h = static_cast<std::ptrdiff_t>(pad < 0 ? g.kh / 2 : static_cast<std::size_t>(pad));
  g.pad_w = static_cast<std::ptrdiff_t>(pad < 0 ? g.kw / 2 : static_cast<std::size_t>(pad));
  g.stride = stride;
  return g;
}

// Visits every (output, input, kernel) index triple that contributes to a
// convolution, calling fn(out_index, in_index, kernel_index).
template <typename Fn>
void for_each_conv_tap(const ConvGeometry& g, Fn&& fn) {
  for (std::size_t co = 0; co < g.cout; ++co) {
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const std::size_t kidx = ((co * g.cin + ci) * g.kh + ky) * g.kw + kx;
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * g.stride -
                                      g.pad_h + static_cast<std::ptrdiff_t>(ky);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
            const std::size_t obase = (co * g.oh + oy) * g.ow;
            const std::size_t ibase = (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
            const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kx) - g.pad_w;
            const std::ptrdiff_t lim = static_cast<std::ptrdiff_t>(g.w) - 1 - off;
            if (lim < 0) continue;
            std::ptrdiff_t lo = off < 0 ? (-off + g.stride - 1) / g.stride : 0;
            std::ptrdiff_t hi = std::min(static_cast<std::ptrdiff_t>(g.ow),
                                         lim / g.stride + 1);
            fn(obase, ibase, kidx, lo, hi, off);
          }
        }
      }
    }
  }
}

Tensor conv2d_grad_input(const Tensor& x, const Tensor& k, const Tensor& gy,
                         int stride, int pad) {
  const ConvGeometry g = conv_geometry(x, k, gy, stride, pad);
  Tensor gx(x.shape());
  auto out = gx.data();
  auto kd = k.data();
  auto gd = gy.data();
  for_each_conv_tap(g, [&](std::size_t obase, std::size_t ibase,
                           std::size_t kidx, std::ptrdiff_t lo,
                           std::ptrdiff_t hi, std::ptrdiff_t off) {
    const double wgt = kd[kidx];
    for (std::ptrdiff_t ox = lo; ox < hi; ++ox) {
      out[ibase + static_cast<std::size_t>(ox * g.stride + off)] +=
          wgt * gd[obase + static_cast<std::size_t>(ox)];
    }
  });
  return gx;
}

Tensor conv2d_grad_kernel(const Tensor& x, const Tensor& k, const Tensor& gy,
                          int stride, int pad) {
  const ConvGeometry g = conv_geometry(x, k, gy, stride, pad);
  Tensor gk(k.shape());
  auto out = gk.data();
  auto xd = x.data();
  auto gd = gy.data();
  for_each_conv_tap(g, [&](std::size_t obase, std::size_t ibase,
                           std::size_t kidx, std::ptrdiff_t lo,
                           std::ptrdiff_t hi, std::ptrdiff_t off) {
    double s = 0.0;
    for (std::ptrdiff_t ox = lo; ox < hi; ++ox) {
      s += xd[ibase + static_cast<std::size_t>(ox * g.stride + off)] *
           gd[obase + static_cast<std::size_t>(ox)];
    }
    out[kidx] += s;
  });
  return gk;
}

}  // namespace

const Tensor& Var::value() const { return tape_of(*this).value(id_); }

Tensor Var::grad() const { return tape_of(*this).grad(id_); }

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = false;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::vector<NodeId> inputs, Tensor value,
                 OpAttrs attrs) {
  if (static_cast<int>(kind) <= static_cast<int>(OpKind::kLeaf) ||
      static_cast<int>(kind) > static_cast<int>(OpKind::kLossCosine)) {
    throw Error(ErrorCode::kUnknownOp,
                "op kind " + std::to_string(static_cast<int>(kind)));
  }
  Node n;
  n.kind = kind;
  for (NodeId id : inputs) {
    if (id >= nodes_.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "input node " + std::to_string(id) + " is not on this tape");
    }
    n.needs_grad = n.needs_grad || nodes_[id].needs_grad;
  }
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.attrs = std::move(attrs);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(NodeId id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.empty()) return Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad = Tensor();
}

void Tape::accumulate(NodeId id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  auto dst = n.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) {
    throw Error(ErrorCode::kInvalidArgument, "loss is not on this tape");
  }
  if (loss.value().size() != 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "backward needs a scalar loss, got " +
                    loss.value().shape().to_string());
  }
  zero_grad();
  accumulate(loss.id(), Tensor::ones(loss.value().shape()));
  for (NodeId i = loss.id() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.grad.empty() || n.kind == OpKind::kLeaf) continue;
    backward_node(n);
  }
}

void Tape::backward_node(const Node& n) {
  const Tensor& g = n.grad;
  const auto& in = n.inputs;
  auto val = [&](std::size_t k) -> const Tensor& { return nodes_[in[k]].value; };
  auto wants = [&](std::size_t k) { return nodes_[in[k]].needs_grad; };

  switch (n.kind) {
    case OpKind::kAdd:
      accumulate(in[0], g);
      accumulate(in[1], g);
      break;
    case OpKind::kSub:
      accumulate(in[0], g);
      if (wants(1)) accumulate(in[1], vista::scale(g, -1.0));
      break;
    case OpKind::kMul:
      if (wants(0)) accumulate(in[0], vista::mul(g, val(1)));
      if (wants(1)) accumulate(in[1], vista::mul(g, val(0)));
      break;
    case OpKind::kScale:
      accumulate(in[0], vista::scale(g, n.attrs.factor));
      break;
    case OpKind::kAddScalar:
      accumulate(in[0], g);
      if (wants(1)) accumulate(in[1], Tensor::scalar(vista::sum(g)));
      break;
    case OpKind::kAddChannelBias: {
      accumulate(in[0], g);
      if (wants(1)) {
        const std::size_t c = g.dim(0), p = g.dim(1) * g.dim(2);
        Tensor gb(Shape{c});
        for (std::size_t ch = 0; ch < c; ++ch) {
          double s = 0.0;
          for (std::size_t i = 0; i < p; ++i) s += g[ch * p + i];
          gb[ch] = s;
        }
        accumulate(in[1], gb);
      }
      break;
    }
    case OpKind::kRelu: {
      Tensor gx = g;
      const Tensor& x = val(0);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        if (x[i] <= 0.0) gx[i] = 0.0;
      }
      accumulate(in[0], gx);
      break;
    }
    case OpKind::kSigmoid: {
      Tensor gx = g;
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const double s = n.value[i];
        gx[i] *= s * (1.0 - s);
      }
      accumulate(in[0], gx);
      break;
    }
    case OpKind::kSoftmax: {
      const Tensor& s = n.value;
      double dot = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) dot += g[i] * s[i];
      Tensor gx(s.shape());
      for (std::size_t i = 0; i < s.size(); ++i) gx[i] = s[i] * (g[i] - dot);
      accumulate(in[0], gx);
      break;
    }
    case OpKind::kConv2d:
      if (wants(0)) {
        accumulate(in[0], conv2d_grad_input(val(0), val(1), g, n.attrs.stride,
                                            n.attrs.pad));
      }
      if (wants(1)) {
        accumulate(in[1], conv2d_grad_kernel(val(0), val(1), g,
                                             n.attrs.stride, n.attrs.pad));
      }
      break;
    case OpKind::kResize:
      accumulate(in[0],
                 resize_bilinear_transpose(g, val(0).dim(1), val(0).dim(2)));
      break;
    case OpKind::kOuterMapVec:
      // out[c,p] = m[p] v[c]
      if (wants(0)) accumulate(in[0], vista::contract_channels(g, val(1)));
      if (wants(1)) accumulate(in[1], vista::contract_pixels(g, val(0)));
      break;
    case OpKind::kContractChannels:
      // out[p] = sum_c v[c] x[c,p]
      if (wants(0)) accumulate(in[0], vista::outer_map_vec(g, val(1)));
      if (wants(1)) accumulate(in[1], vista::contract_pixels(val(0), g));
      break;
    case OpKind::kContractPixels:
      // out[c] = sum_p m[p] x[c,p]
      if (wants(0)) accumulate(in[0], vista::outer_map_vec(val(1), g));
      if (wants(1)) accumulate(in[1], vista::contract_channels(val(0), g));
      break;
    case OpKind::kConcatChannels: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < in.size(); ++k) {
        const Tensor& part = val(k);
        if (wants(k)) {
          std::vector<double> slice(g.data().begin() + static_cast<std::ptrdiff_t>(offset),
                                    g.data().begin() + static_cast<std::ptrdiff_t>(offset + part.size()));
          accumulate(in[k], Tensor(part.shape(), std::move(slice)));
        }
        offset += part.size();
      }
      break;
    }
    case OpKind::kSum:
      accumulate(in[0], Tensor(val(0).shape(), g[0]));
      break;
    case OpKind::kLossL2:
      accumulate(in[0], vista::scale(loss_l2_grad(val(0), *n.attrs.target,
                                                  *n.attrs.mask),
                                     g[0]));
      break;
    case OpKind::kLossCrossEntropy:
      accumulate(in[0],
                 vista::scale(loss_cross_entropy_grad(val(0), *n.attrs.labels,
                                                      n.attrs.ignore_label),
                              g[0]));
      break;
    case OpKind::kLossCosine:
      accumulate(in[0],
                 vista::scale(loss_cosine_grad(val(0), *n.attrs.target), g[0]));
      break;
    case OpKind::kLeaf:
      break;
    default:
      throw Error(ErrorCode::kUnknownOp,
                  "no backward rule for op kind " +
                      std::to_string(static_cast<int>(n.kind)));
  }
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  return t.record(OpKind::kAdd, {a.id(), b.id()},
                  vista::add(a.value(), b.value()));
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  return t.record(OpKind::kSub, {a.id(), b.id()},
                  vista::sub(a.value(), b.value()));
}

Var mul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  return t.record(OpKind::kMul, {a.id(), b.id()},
                  vista::mul(a.value(), b.value()));
}

Var scale(const Var& a, double s) {
  OpAttrs attrs;
  attrs.factor = s;
  return tape_of(a).record(OpKind::kScale, {a.id()},
                           vista::scale(a.value(), s), attrs);
}

Var add_scalar(const Var& a, const Var& s) {
  Tape& t = same_tape(a, s);
  const double shift = s.value().item();
  Tensor out = a.value();
  for (double& x : out.data()) x += shift;
  return t.record(OpKind::kAddScalar, {a.id(), s.id()}, std::move(out));
}

Var add_channel_bias(const Var& x, const Var& bias) {
  Tape& t = same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 3 || bv.rank() != 1 || bv.dim(0) != xv.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch,
                "add_channel_bias: " + xv.shape().to_string() + " vs " +
                    bv.shape().to_string());
  }
  Tensor out = xv;
  const std::size_t p = xv.dim(1) * xv.dim(2);
  for (std::size_t c = 0; c < xv.dim(0); ++c) {
    for (std::size_t i = 0; i < p; ++i) out[c * p + i] += bv[c];
  }
  return t.record(OpKind::kAddChannelBias, {x.id(), bias.id()}, std::move(out));
}

Var relu(const Var& a) {
  return tape_of(a).record(OpKind::kRelu, {a.id()}, vista::relu(a.value()));
}

Var sigmoid(const Var& a) {
  return tape_of(a).record(OpKind::kSigmoid, {a.id()},
                           vista::sigmoid_map(a.value()));
}

Var softmax(const Var& a) {
  return tape_of(a).record(OpKind::kSoftmax, {a.id()},
                           vista::softmax(a.value()));
}

Var conv2d(const Var& input, const Var& kernels, int stride, int pad) {
  Tape& t = same_tape(input, kernels);
  OpAttrs attrs;
  attrs.stride = stride;
  attrs.pad = pad;
  return t.record(OpKind::kConv2d, {input.id(), kernels.id()},
                  vista::conv2d(input.value(), kernels.value(), stride, pad),
                  attrs);
}

Var resize_bilinear(const Var& input, std::size_t out_h, std::size_t out_w) {
  return tape_of(input).record(
      OpKind::kResize, {input.id()},
      vista::resize_bilinear(input.value(), out_h, out_w));
}

Var outer_map_vec(const Var& m, const Var& v) {
  Tape& t = same_tape(m, v);
  return t.record(OpKind::kOuterMapVec, {m.id(), v.id()},
                  vista::outer_map_vec(m.value(), v.value()));
}

Var contract_channels(const Var& x, const Var& v) {
  Tape& t = same_tape(x, v);
  return t.record(OpKind::kContractChannels, {x.id(), v.id()},
                  vista::contract_channels(x.value(), v.value()));
}

Var contract_pixels(const Var& x, const Var& m) {
  Tape& t = same_tape(x, m);
  return t.record(OpKind::kContractPixels, {x.id(), m.id()},
                  vista::contract_pixels(x.value(), m.value()));
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "concat_channels: no inputs");
  }
  std::vector<Tensor> values;
  std::vector<NodeId> ids;
  for (const Var& v : parts) {
    same_tape(parts[0], v);
    values.push_back(v.value());
    ids.push_back(v.id());
  }
  return tape_of(parts[0]).record(OpKind::kConcatChannels, std::move(ids),
                                  vista::concat_channels(values));
}

Var sum(const Var& a) {
  return tape_of(a).record(OpKind::kSum, {a.id()},
                           Tensor::scalar(vista::sum(a.value())));
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "add_n: no terms");
  }
  Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

Var loss_l2(const Var& pred, const Tensor& target, const Tensor& valid_mask) {
  OpAttrs attrs;
  attrs.target = std::make_shared<const Tensor>(target);
  attrs.mask = std::make_shared<const Tensor>(valid_mask);
  return tape_of(pred).record(
      OpKind::kLossL2, {pred.id()},
      Tensor::scalar(vista::loss_l2(pred.value(), target, valid_mask)), attrs);
}

Var loss_cross_entropy(const Var& logits, const LabelMap& labels,
                       int ignore_label) {
  OpAttrs attrs;
  attrs.labels = std::make_shared<const LabelMap>(labels);
  attrs.ignore_label = ignore_label;
  return tape_of(logits).record(
      OpKind::kLossCrossEntropy, {logits.id()},
      Tensor::scalar(
          vista::loss_cross_entropy(logits.value(), labels, ignore_label)),
      attrs);
}

Var loss_cosine(const Var& pred, const Tensor& target) {
  OpAttrs attrs;
  attrs.target = std::make_shared<const Tensor>(target);
  return tape_of(pred).record(
      OpKind::kLossCosine, {pred.id()},
      Tensor::scalar(vista::loss_cosine(pred.value(), target)), attrs);
}

double grad_check(const ScalarFn& f, std::span<const Tensor> params, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) {
    throw Error(ErrorCode::kInvalidArgument,
                "grad_check: step must lie in [1e-7, 1e-3]");
  }
  auto evaluate = [&](std::span<const Tensor> values) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(values.size());
    for (const Tensor& v : values) vars.push_back(tape.leaf(v));
    const double out = f(tape, vars).value().item();
    if (!std::isfinite(out)) {
      throw Error(ErrorCode::kNonFinite, "grad_check: f returned " +
                                             std::to_string(out));
    }
    return out;
  };

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& v : params) vars.push_back(tape.leaf(v));
    Var out = f(tape, vars);
    if (!out.value().all_finite()) {
      throw Error(ErrorCode::kNonFinite, "grad_check: f returned non-finite");
    }
    tape.backward(out);
    for (const Var& v : vars) analytic.push_back(v.grad());
  }

  std::vector<Tensor> probe(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t i = 0; i < probe[k].size(); ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + h;
      const double up = evaluate(probe);
      probe[k][i] = orig - h;
      const double down = evaluate(probe);
      probe[k][i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace vista::ad
