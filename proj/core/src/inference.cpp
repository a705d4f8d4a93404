#include "vista/inference.hpp"

#include <cmath>
#include <string>

#include "vista/error.hpp"
#include "vista/random.hpp"

namespace vista {
namespace {

void require(bool ok, ErrorCode code, const std::string& message) {
  if (!ok) throw Error(code, message);
}

bool updates_maps(AttentionVariant v) {
  return v == AttentionVariant::kStructured ||
         v == AttentionVariant::kSpatialOnly;
}

bool updates_vectors(AttentionVariant v) {
  return v == AttentionVariant::kStructured ||
         v == AttentionVariant::kChannelOnly;
}

Tensor uniform_vector(std::size_t c) {
  return Tensor(Shape{c}, 1.0 / static_cast<double>(c));
}

// Every tensor-level entry point below runs the differentiable version on a
// throwaway tape, so the two paths cannot drift apart.

}  // namespace

std::string_view to_string(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::kNone: return "none";
    case AttentionVariant::kSpatialOnly: return "spatial-only";
    case AttentionVariant::kChannelOnly: return "channel-only";
    case AttentionVariant::kStructured: return "structured";
    case AttentionVariant::kDeterministicLowRank: return "deterministic-low-rank";
  }
  return "unknown";
}

AttentionVariant parse_variant(std::string_view text) {
  for (AttentionVariant v : kAllVariants) {
    if (to_string(v) == text) return v;
  }
  throw Error(ErrorCode::kParse,
              "unknown attention variant '" + std::string(text) +
                  "' (expected none, spatial-only, channel-only, structured "
                  "or deterministic-low-rank)");
}

void InferenceConfig::validate() const {
  require(rank >= 0, ErrorCode::kInvalidArgument, "rank must be >= 0");
  require(iterations >= 1, ErrorCode::kInvalidArgument,
          "iterations must be >= 1");
  require(kernel_size >= 1 && kernel_size % 2 == 1,
          ErrorCode::kInvalidArgument, "kernel size must be a positive odd integer");
  require(precision > 0.0 && std::isfinite(precision),
          ErrorCode::kInvalidArgument, "precision weight must be > 0");
}

void MultiScaleFeatures::validate() const {
  require(!features.empty(), ErrorCode::kInvalidArgument,
          "multi-scale features need at least one scale");
  require(receiving < features.size(), ErrorCode::kInvalidArgument,
          "receiving index " + std::to_string(receiving) + " out of range");
  for (const Tensor& f : features) {
    require(f.rank() == 3, ErrorCode::kShapeMismatch,
            "feature maps must be [C,H,W], got " + f.shape().to_string());
  }
}

std::vector<std::vector<Tensor>> initial_map_guess(std::uint64_t seed,
                                                   std::size_t emitting,
                                                   std::size_t rank,
                                                   std::size_t height,
                                                   std::size_t width) {
  Rng rng(derive_seed(seed, {0x4d494e4954ULL}));
  std::vector<std::vector<Tensor>> maps(emitting);
  for (auto& per_e : maps) {
    for (std::size_t t = 0; t < rank; ++t) {
      per_e.push_back(rng.uniform_tensor(Shape{height, width}, 0.0, 1.0));
    }
  }
  return maps;
}

KernelBank make_kernel_bank(std::span<const std::size_t> channels,
                            std::size_t receiving, int kernel_size, Rng& rng) {
  require(receiving < channels.size(), ErrorCode::kInvalidArgument,
          "receiving index out of range");
  const auto k = static_cast<std::size_t>(kernel_size);
  const std::size_t cr = channels[receiving];
  auto init = [&](std::size_t cout, std::size_t cin, double gain) {
    return rng.normal_tensor(Shape{cout, cin, k, k},
                             gain / std::sqrt(static_cast<double>(cin * k * k)));
  };
  KernelBank bank;
  for (std::size_t ce : channels) {
    bank.self_kernels.push_back(init(cr, ce, 1.0));
    bank.cross_kernels.push_back(init(cr, cr, 1.0));
    bank.kstep_kernels.push_back(init(cr, 2 * cr, 0.1));
  }
  bank.out_kernel = init(cr, cr, 1.0);
  return bank;
}

AttentionParams make_attention_params(std::size_t emitting, std::size_t channels,
                                      std::size_t height, std::size_t width,
                                      const InferenceConfig& cfg, Rng& rng) {
  AttentionParams p;
  if (!cfg.gated()) return p;
  const auto rank = static_cast<std::size_t>(cfg.rank);
  if (cfg.variant == AttentionVariant::kDeterministicLowRank) {
    p.lowrank_maps.resize(emitting);
    p.lowrank_vectors.resize(emitting);
    for (std::size_t e = 0; e < emitting; ++e) {
      for (std::size_t t = 0; t < rank; ++t) {
        p.lowrank_maps[e].push_back(rng.normal_tensor(Shape{height, width}, 0.5));
        p.lowrank_vectors[e].push_back(rng.normal_tensor(Shape{channels}, 0.5));
      }
    }
    return p;
  }
  if (updates_maps(cfg.variant)) {
    p.map_bias.assign(emitting, std::vector<Tensor>(rank, Tensor::scalar(0.0)));
  }
  if (updates_vectors(cfg.variant)) {
    p.vector_bias.assign(emitting,
                         std::vector<Tensor>(rank, Tensor::zeros(Shape{channels})));
  }
  return p;
}

namespace ad {

KernelBankVars bind(Tape& tape, const KernelBank& bank) {
  KernelBankVars v;
  for (const Tensor& k : bank.self_kernels) v.self_kernels.push_back(tape.leaf(k));
  for (const Tensor& k : bank.cross_kernels) v.cross_kernels.push_back(tape.leaf(k));
  for (const Tensor& k : bank.kstep_kernels) v.kstep_kernels.push_back(tape.leaf(k));
  if (!bank.out_kernel.empty()) v.out_kernel = tape.leaf(bank.out_kernel);
  return v;
}

AttentionParamVars bind(Tape& tape, const AttentionParams& params) {
  auto bind_grid = [&](const std::vector<std::vector<Tensor>>& grid) {
    std::vector<std::vector<Var>> out(grid.size());
    for (std::size_t e = 0; e < grid.size(); ++e) {
      for (const Tensor& t : grid[e]) out[e].push_back(tape.leaf(t));
    }
    return out;
  };
  AttentionParamVars v;
  v.map_bias = bind_grid(params.map_bias);
  v.vector_bias = bind_grid(params.vector_bias);
  v.lowrank_maps = bind_grid(params.lowrank_maps);
  v.lowrank_vectors = bind_grid(params.lowrank_vectors);
  return v;
}

MessageVars message_pass(const Var& feature_e, const Var& self_kernel,
                         const Var& cross_kernel, std::size_t out_h,
                         std::size_t out_w, const Var& kernel_field) {
  MessageVars out;
  out.emitted = resize_bilinear(conv2d(feature_e, self_kernel), out_h, out_w);
  out.message = conv2d(out.emitted, cross_kernel);
  if (kernel_field.valid()) {
    out.message = mul(out.message, scale(sigmoid(kernel_field), 2.0));
  }
  return out;
}

Var z_step(const Var& f_r, std::span<const Var> messages,
           std::span<const Var> gates, const Var& inv_precision) {
  if (messages.size() != gates.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "z_step: " + std::to_string(messages.size()) + " messages but " +
                    std::to_string(gates.size()) + " gates");
  }
  if (messages.empty()) return f_r;
  std::vector<Var> gated;
  gated.reserve(messages.size());
  for (std::size_t e = 0; e < messages.size(); ++e) {
    if (messages[e].shape() != f_r.shape()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "z_step: message " + std::to_string(e) + " has shape " +
                      messages[e].shape().to_string() + ", receiving is " +
                      f_r.shape().to_string());
    }
    gated.push_back(gates[e].valid() ? mul(messages[e], gates[e]) : messages[e]);
  }
  // b^-1 (b f + s) = f + b^-1 s
  return add(f_r, mul(inv_precision, add_n(gated)));
}

Var m_step(const Var& product, const Var& v_bar, const Var& bias) {
  Var arg = contract_channels(product, v_bar);
  if (bias.valid()) arg = add_scalar(arg, bias);
  return sigmoid(arg);
}

Var v_step(const Var& product, const Var& m_bar, const Var& bias) {
  Var arg = contract_pixels(product, m_bar);
  if (bias.valid()) arg = add(arg, bias);
  return softmax(arg);
}

Var k_step_conv(const Var& f_r, const Var& z_r, const Var& gate,
                const Var& z_e, const Var& weights) {
  const std::size_t cin = f_r.shape()[0] + z_e.shape()[0];
  if (weights.shape().rank() != 4 || weights.shape()[1] != cin) {
    throw Error(ErrorCode::kShapeMismatch,
                "k_step_conv: weights " + weights.shape().to_string() +
                    " need " + std::to_string(cin) + " input channels");
  }
  Var mixed = add(f_r, gate.valid() ? mul(z_r, gate) : z_r);
  const Var parts[] = {mixed, z_e};
  return conv2d(concat_channels(parts), weights);
}

RefineVars refine_scale(std::span<const Var> features, std::size_t receiving,
                        const KernelBankVars& bank,
                        const AttentionParamVars& params,
                        const InferenceConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  require(!features.empty() && receiving < features.size(),
          ErrorCode::kInvalidArgument, "refine_scale: bad receiving index");
  const std::size_t emitting = features.size();
  require(bank.self_kernels.size() == emitting &&
              bank.cross_kernels.size() == emitting &&
              (!cfg.gated() || (bank.kstep_kernels.size() == emitting &&
                                bank.out_kernel.valid())),
          ErrorCode::kInvalidArgument,
          "refine_scale: kernel bank covers " +
              std::to_string(bank.self_kernels.size()) + " scales, features have " +
              std::to_string(emitting));

  Tape& tape = *features[0].tape();
  const Var& f_r = features[receiving];
  const std::size_t cr = f_r.shape()[0], hr = f_r.shape()[1], wr = f_r.shape()[2];
  const auto rank = static_cast<std::size_t>(cfg.gated() ? cfg.rank : 0);
  const AttentionVariant variant = cfg.variant;

  RefineVars out;
  out.maps.resize(emitting);
  out.vectors.resize(emitting);
  if (rank > 0) {
    if (variant == AttentionVariant::kDeterministicLowRank) {
      require(params.lowrank_maps.size() == emitting &&
                  params.lowrank_vectors.size() == emitting,
              ErrorCode::kInvalidArgument,
              "refine_scale: low-rank factors missing");
      for (std::size_t e = 0; e < emitting; ++e) {
        require(params.lowrank_maps[e].size() == rank &&
                    params.lowrank_vectors[e].size() == rank,
                ErrorCode::kInvalidArgument,
                "refine_scale: low-rank factors do not match rank");
        for (std::size_t t = 0; t < rank; ++t) {
          out.maps[e].push_back(sigmoid(params.lowrank_maps[e][t]));
          out.vectors[e].push_back(softmax(params.lowrank_vectors[e][t]));
        }
      }
    } else {
      const auto guess = initial_map_guess(seed, emitting, rank, hr, wr);
      const Var ones_map = tape.constant(Tensor::ones(Shape{hr, wr}));
      const Var flat = tape.constant(uniform_vector(cr));
      for (std::size_t e = 0; e < emitting; ++e) {
        for (std::size_t t = 0; t < rank; ++t) {
          out.maps[e].push_back(variant == AttentionVariant::kChannelOnly
                                    ? ones_map
                                    : tape.constant(guess[e][t]));
          out.vectors[e].push_back(flat);
        }
      }
    }
    if (updates_maps(variant)) {
      require(params.map_bias.size() == emitting, ErrorCode::kInvalidArgument,
              "refine_scale: map priors missing");
    }
    if (updates_vectors(variant)) {
      require(params.vector_bias.size() == emitting, ErrorCode::kInvalidArgument,
              "refine_scale: vector priors missing");
    }
  }

  auto gate_of = [&](std::size_t e) {
    return rank > 0 ? assemble(out.maps[e], out.vectors[e]) : Var();
  };
  auto prior = [](const std::vector<std::vector<Var>>& grid, std::size_t e,
                  std::size_t t) {
    return e < grid.size() && t < grid[e].size() ? grid[e][t] : Var();
  };

  const Var inv_precision =
      tape.constant(Tensor(f_r.shape(), 1.0 / cfg.precision));
  std::vector<Var> fields(emitting);
  Var hidden;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<MessageVars> msgs;
    std::vector<Var> messages, gates;
    for (std::size_t e = 0; e < emitting; ++e) {
      msgs.push_back(message_pass(features[e], bank.self_kernels[e],
                                  bank.cross_kernels[e], hr, wr, fields[e]));
      messages.push_back(msgs.back().message);
      gates.push_back(gate_of(e));
    }

    hidden = z_step(f_r, messages, gates, inv_precision);

    if (rank > 0 && (updates_maps(variant) || updates_vectors(variant))) {
      for (std::size_t e = 0; e < emitting; ++e) {
        const Var product = mul(hidden, messages[e]);
        for (std::size_t t = 0; t < rank; ++t) {
          if (updates_maps(variant)) {
            out.maps[e][t] = m_step(product, out.vectors[e][t],
                                    prior(params.map_bias, e, t));
          }
          if (updates_vectors(variant)) {
            out.vectors[e][t] = v_step(product, out.maps[e][t],
                                       prior(params.vector_bias, e, t));
          }
        }
      }
    }

    if (rank == 0) break;  // ungated: z_r is already the refined feature
    for (std::size_t e = 0; e < emitting; ++e) {
      fields[e] = k_step_conv(f_r, hidden, gate_of(e), msgs[e].emitted,
                              bank.kstep_kernels[e]);
    }
  }

  if (rank == 0) {
    out.refined = hidden;
    out.hidden = hidden;
    return out;
  }
  const Var gain = scale(sigmoid(add_n(fields)), 2.0);
  out.refined = add(f_r, conv2d(mul(hidden, gain), bank.out_kernel));
  out.hidden = hidden;
  out.kernel_fields = std::move(fields);
  return out;
}

}  // namespace ad

namespace {

std::vector<ad::Var> constants(ad::Tape& tape, std::span<const Tensor> ts) {
  std::vector<ad::Var> out;
  out.reserve(ts.size());
  for (const Tensor& t : ts) out.push_back(tape.constant(t));
  return out;
}

ad::Var gate_constant(ad::Tape& tape, const StructuredAttention& att) {
  if (att.rank() == 0) return ad::Var();
  return tape.constant(assemble(att));
}

}  // namespace

Tensor message_pass(const Tensor& z_e, const KernelBank& bank, std::size_t e,
                    const Shape& target_shape) {
  if (e >= bank.self_kernels.size() || e >= bank.cross_kernels.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "message_pass: no kernels for emitting scale " +
                    std::to_string(e));
  }
  require(target_shape.rank() == 3, ErrorCode::kShapeMismatch,
          "message_pass: target shape must be [C,H,W]");
  ad::Tape tape;
  auto m = ad::message_pass(tape.constant(z_e), tape.constant(bank.self_kernels[e]),
                            tape.constant(bank.cross_kernels[e]), target_shape[1],
                            target_shape[2]);
  require(m.message.shape() == target_shape, ErrorCode::kShapeMismatch,
          "message_pass: kernels produce " + m.message.shape().to_string() +
              ", expected " + target_shape.to_string());
  return m.message.value();
}

Tensor z_step(const Tensor& f_r, std::span<const Tensor> messages,
              std::span<const StructuredAttention> atts,
              const Tensor& precision) {
  require(precision.shape() == f_r.shape(), ErrorCode::kShapeMismatch,
          "z_step: precision " + precision.shape().to_string() + " vs " +
              f_r.shape().to_string());
  Tensor inv(precision.shape());
  for (std::size_t i = 0; i < precision.size(); ++i) {
    require(precision[i] > 0.0, ErrorCode::kInvalidArgument,
            "z_step: precision weights must be > 0");
    inv[i] = 1.0 / precision[i];
  }
  require(messages.size() == atts.size(), ErrorCode::kInvalidArgument,
          "z_step: messages and attentions differ in count");
  ad::Tape tape;
  std::vector<ad::Var> gates;
  for (const auto& a : atts) gates.push_back(gate_constant(tape, a));
  for (std::size_t e = 0; e < gates.size(); ++e) {
    if (gates[e].valid()) {
      require(gates[e].shape() == f_r.shape(), ErrorCode::kShapeMismatch,
              "z_step: attention " + std::to_string(e) + " assembles to " +
                  gates[e].shape().to_string());
    }
  }
  const auto msg = constants(tape, messages);
  return ad::z_step(tape.constant(f_r), msg, gates, tape.constant(inv)).value();
}

Tensor m_step(const Tensor& z_r, const Tensor& message, const Tensor& v_bar,
              double bias) {
  ad::Tape tape;
  const ad::Var product = ad::mul(tape.constant(z_r), tape.constant(message));
  return ad::m_step(product, tape.constant(v_bar),
                    tape.constant(Tensor::scalar(bias)))
      .value();
}

Tensor v_step(const Tensor& z_r, const Tensor& message, const Tensor& m_bar) {
  return v_step(z_r, message, m_bar, Tensor::zeros(Shape{z_r.dim(0)}));
}

Tensor v_step(const Tensor& z_r, const Tensor& message, const Tensor& m_bar,
              const Tensor& bias) {
  ad::Tape tape;
  const ad::Var product = ad::mul(tape.constant(z_r), tape.constant(message));
  return ad::v_step(product, tape.constant(m_bar), tape.constant(bias)).value();
}

Tensor k_step_closed(const Tensor& f_r, const Tensor& f_e, const Tensor& z_r,
                     const Tensor& z_e, const StructuredAttention& att) {
  require(f_r.shape() == z_r.shape() && f_e.shape() == z_e.shape() &&
              f_r.rank() == 3 && f_e.rank() == 3,
          ErrorCode::kShapeMismatch, "k_step_closed: inconsistent shapes");
  const std::size_t nr = f_r.size(), ne = f_e.size();
  if (nr > kClosedKernelCap / ne) {
    throw Error(ErrorCode::kBudgetExceeded,
                "k_step_closed: " + std::to_string(nr) + " x " +
                    std::to_string(ne) +
                    " kernel entries exceed the cap; use k_step_conv");
  }
  Tensor gate = att.rank() == 0 ? Tensor::zeros(f_r.shape()) : assemble(att);
  require(gate.shape() == f_r.shape(), ErrorCode::kShapeMismatch,
          "k_step_closed: attention does not match the receiving shape");
  Tensor out(Shape{f_r.dim(0), f_r.dim(1), f_r.dim(2), f_e.dim(0), f_e.dim(1),
                   f_e.dim(2)});
  auto o = out.data();
  for (std::size_t i = 0; i < nr; ++i) {
    const double a = f_r[i];
    const double b = gate[i] * z_r[i];
    double* row = o.data() + i * ne;
    for (std::size_t j = 0; j < ne; ++j) row[j] = a * f_e[j] + b * z_e[j];
  }
  return out;
}

Tensor k_step_conv(const Tensor& f_r, const Tensor& z_r,
                   const StructuredAttention& att, const Tensor& z_e,
                   const Tensor& weights) {
  require(f_r.shape() == z_r.shape(), ErrorCode::kShapeMismatch,
          "k_step_conv: f_r " + f_r.shape().to_string() + " vs z_r " +
              z_r.shape().to_string());
  ad::Tape tape;
  const ad::Var gate = gate_constant(tape, att);
  return ad::k_step_conv(tape.constant(f_r), tape.constant(z_r), gate,
                         tape.constant(z_e), tape.constant(weights))
      .value();
}

RefineResult refine_scale(const MultiScaleFeatures& f, const KernelBank& bank,
                          const AttentionParams& params,
                          const InferenceConfig& cfg, std::uint64_t seed) {
  f.validate();
  ad::Tape tape;
  const auto features = constants(tape, f.features);
  const auto bank_vars = ad::bind(tape, bank);
  const auto param_vars = ad::bind(tape, params);
  const auto r = ad::refine_scale(features, f.receiving, bank_vars, param_vars,
                                  cfg, seed);
  RefineResult out;
  out.refined = r.refined.value();
  out.hidden = r.hidden.value();
  for (std::size_t e = 0; e < r.maps.size(); ++e) {
    std::vector<Tensor> maps, vectors;
    for (const auto& m : r.maps[e]) maps.push_back(m.value());
    for (const auto& v : r.vectors[e]) vectors.push_back(v.value());
    out.attention.emplace_back(std::move(maps), std::move(vectors));
  }
  for (const auto& k : r.kernel_fields) out.kernel_fields.push_back(k.value());
  return out;
}

double energy_at_means(const Tensor& f_r, std::span<const Tensor> f_e,
                       const Tensor& z_r, std::span<const Tensor> z_e,
                       std::span<const StructuredAttention> atts,
                       std::span<const Tensor> kernels,
                       const Tensor& precision) {
  require(f_r.shape() == z_r.shape() && precision.shape() == f_r.shape(),
          ErrorCode::kShapeMismatch, "energy_at_means: receiving shapes differ");
  require(f_e.size() == z_e.size() && f_e.size() == atts.size() &&
              f_e.size() == kernels.size(),
          ErrorCode::kInvalidArgument,
          "energy_at_means: per-scale inputs differ in count");
  double neg_energy = 0.0;
  for (std::size_t i = 0; i < f_r.size(); ++i) {
    const double d = z_r[i] - f_r[i];
    neg_energy -= 0.5 * precision[i] * d * d;
  }
  const std::size_t nr = f_r.size();
  for (std::size_t e = 0; e < f_e.size(); ++e) {
    const std::size_t ne = f_e[e].size();
    require(kernels[e].size() == nr * ne && z_e[e].shape() == f_e[e].shape(),
            ErrorCode::kShapeMismatch,
            "energy_at_means: kernel " + std::to_string(e) + " has shape " +
                kernels[e].shape().to_string());
    const Tensor gate =
        atts[e].rank() == 0 ? Tensor::zeros(f_r.shape()) : assemble(atts[e]);
    for (std::size_t i = 0; i < nr; ++i) {
      const double* row = kernels[e].data().data() + i * ne;
      double pair = 0.0, unary = 0.0;
      for (std::size_t j = 0; j < ne; ++j) {
        pair += row[j] * z_e[e][j];
        const double d = row[j] - f_r[i] * f_e[e][j];
        unary += d * d;
      }
      neg_energy += gate[i] * z_r[i] * pair - 0.5 * unary;
    }
  }
  return neg_energy;
}

std::uint64_t refine_flops(std::span<const Shape> shapes, std::size_t receiving,
                           const InferenceConfig& cfg) {
  require(receiving < shapes.size(), ErrorCode::kInvalidArgument,
          "refine_flops: bad receiving index");
  const std::uint64_t cr = shapes[receiving][0];
  const std::uint64_t p = shapes[receiving][1] * shapes[receiving][2];
  const std::uint64_t n = cr * p;
  const auto k2 = static_cast<std::uint64_t>(cfg.kernel_size) *
                  static_cast<std::uint64_t>(cfg.kernel_size);
  const std::uint64_t rank = cfg.gated() ? static_cast<std::uint64_t>(cfg.rank) : 0;
  const std::uint64_t iters = static_cast<std::uint64_t>(cfg.iterations);
  const bool m_upd = rank > 0 && updates_maps(cfg.variant);
  const bool v_upd = rank > 0 && updates_vectors(cfg.variant);

  auto conv = [&](std::uint64_t cout, std::uint64_t cin, std::uint64_t pixels) {
    return 2 * cout * cin * k2 * pixels;
  };
  // sum_t m^t (x) v^t: one multiply per entry per t, adds between terms.
  const std::uint64_t assemble_cost = rank > 0 ? n * (2 * rank - 1) : 0;

  std::uint64_t total = 0;
  if (cfg.variant == AttentionVariant::kDeterministicLowRank && rank > 0) {
    total += shapes.size() * rank * (4 * p + 4 * cr);  // sigmoid / softmax
  }
  for (std::uint64_t it = 0; it < iters; ++it) {
    for (const Shape& s : shapes) {
      const std::uint64_t pe = s[1] * s[2];
      total += conv(cr, s[0], pe) + 4 * n;  // self conv + resize
      total += conv(cr, cr, p);             // cross conv
      if (it > 0) total += 6 * n;           // 2 sigma(field) modulation
      total += assemble_cost;
      if (rank > 0) total += n;  // gating product
      total += n;                // accumulate into the Z sum
    }
    total += 2 * n;  // b^-1 scaling and residual
    if (rank == 0) return total;  // ungated: z_r is the output
    for (std::size_t e = 0; e < shapes.size(); ++e) {
      if (m_upd || v_upd) total += n;  // z_r (.) message
      if (m_upd) total += rank * (2 * n + 5 * p);
      if (v_upd) total += rank * (2 * n + 5 * cr);
      total += assemble_cost + (rank > 0 ? 2 * n : n);
      total += conv(cr, 2 * cr, p);  // K-step conv
    }
  }
  // field sum, 2 sigma(.), gain product, output conv, residual
  total += shapes.size() * n + 5 * n + n + conv(cr, cr, p) + n;
  return total;
}

}  // namespace vista
