#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vista/attention.hpp"
#include "vista/autodiff.hpp"
#include "vista/tensor.hpp"

namespace vista {

class Rng;

enum class AttentionVariant {
  kNone,
  kSpatialOnly,
  kChannelOnly,
  kStructured,
  kDeterministicLowRank,
};

std::string_view to_string(AttentionVariant v);
AttentionVariant parse_variant(std::string_view text);
inline constexpr AttentionVariant kAllVariants[] = {
    AttentionVariant::kNone, AttentionVariant::kSpatialOnly,
    AttentionVariant::kChannelOnly, AttentionVariant::kStructured,
    AttentionVariant::kDeterministicLowRank};

struct InferenceConfig {
  int rank = 1;
  int iterations = 1;
  AttentionVariant variant = AttentionVariant::kStructured;
  int kernel_size = 3;
  /// Constant precision weight b used for every receiving entry.
  double precision = 1.0;

  /// False for variant kNone and for rank 0, which both take the ungated path.
  bool gated() const noexcept {
    return variant != AttentionVariant::kNone && rank > 0;
  }
  void validate() const;
};

/// Feature maps f_1..f_S plus the index of the scale being refined.
struct MultiScaleFeatures {
  std::vector<Tensor> features;
  std::size_t receiving = 0;

  const Tensor& receiving_feature() const { return features.at(receiving); }
  void validate() const;
};

/// Learned convolutions standing in for the pairwise CRF kernels. Every
/// scale emits towards the receiving scale r (including r itself).
struct KernelBank {
  std::vector<Tensor> self_kernels;   ///< [C_r, C_e, k, k] per emitting scale
  std::vector<Tensor> cross_kernels;  ///< [C_r, C_r, k, k] per emitting scale
  std::vector<Tensor> kstep_kernels;  ///< [C_r, 2 C_r, k, k] per emitting scale
  Tensor out_kernel;                  ///< [C_r, C_r, k, k]

  std::size_t emitting_count() const noexcept { return self_kernels.size(); }
};

/// Learnable attention parameters indexed [emitting scale][t].
///
/// map_bias / vector_bias are prior logits of the Bernoulli gates and the
/// categorical channel vectors; they enter the M- and V-step arguments
/// additively and are zero-initialised. lowrank_* hold the directly learned
/// factors of the deterministic low-rank variant.
struct AttentionParams {
  std::vector<std::vector<Tensor>> map_bias;         ///< [1]
  std::vector<std::vector<Tensor>> vector_bias;      ///< [C_r]
  std::vector<std::vector<Tensor>> lowrank_maps;     ///< [H_r, W_r]
  std::vector<std::vector<Tensor>> lowrank_vectors;  ///< [C_r]
};

/// Output of one receiving-scale refinement.
struct RefineResult {
  Tensor refined;                              ///< f_r + output conv
  Tensor hidden;                               ///< last Z-step mean
  std::vector<StructuredAttention> attention;  ///< per emitting scale
  std::vector<Tensor> kernel_fields;           ///< last K-step estimates
};

/// Random M guess, uniform in (0,1), indexed [e][t]; V starts at 1/C.
std::vector<std::vector<Tensor>> initial_map_guess(std::uint64_t seed,
                                                   std::size_t emitting,
                                                   std::size_t rank,
                                                   std::size_t height,
                                                   std::size_t width);

KernelBank make_kernel_bank(std::span<const std::size_t> channels,
                            std::size_t receiving, int kernel_size, Rng& rng);
AttentionParams make_attention_params(std::size_t emitting, std::size_t channels,
                                      std::size_t height, std::size_t width,
                                      const InferenceConfig& cfg, Rng& rng);

/// Self-kernel conv at the emitting resolution, resize to (out_h, out_w),
/// then cross-kernel conv. The self-kernel also maps C_e to C_r channels.
Tensor message_pass(const Tensor& z_e, const KernelBank& bank, std::size_t e,
                    const Shape& target_shape);

/// z_r = b^-1 (b f_r + sum_e message_e (.) assemble(att_e)). A rank-0
/// attention passes its message ungated.
Tensor z_step(const Tensor& f_r, std::span<const Tensor> messages,
              std::span<const StructuredAttention> atts,
              const Tensor& precision);

/// m[p] = sigmoid(bias + sum_c v[c] (z_r (.) message)[c,p]).
Tensor m_step(const Tensor& z_r, const Tensor& message, const Tensor& v_bar,
              double bias = 0.0);

/// v = softmax(bias + sum_p m[p] (z_r (.) message)[:,p]).
Tensor v_step(const Tensor& z_r, const Tensor& message, const Tensor& m_bar);
Tensor v_step(const Tensor& z_r, const Tensor& message, const Tensor& m_bar,
              const Tensor& bias);

/// Largest pairwise kernel k_step_closed will materialise (P_r C_r P_e C_e).
inline constexpr std::size_t kClosedKernelCap = 65536;

/// Closed-form kernel mean, shape [C_r, H_r, W_r, C_e, H_e, W_e]:
/// k = f_r f_e + assemble(att) z_r z_e entrywise over receiving/emitting pairs.
Tensor k_step_closed(const Tensor& f_r, const Tensor& f_e, const Tensor& z_r,
                     const Tensor& z_e, const StructuredAttention& att);

/// Learned kernel estimate: conv of concat[f_r + z_r (.) assemble(att); z_e]
/// with weights [C_out, C_r + C_z, k, k]. z_e must already be at f_r's
/// spatial size. Rank-0 attention stands for an all-ones gate.
Tensor k_step_conv(const Tensor& f_r, const Tensor& z_r,
                   const StructuredAttention& att, const Tensor& z_e,
                   const Tensor& weights);

/// One full refinement of the receiving scale (message passing, Z-, M-, V-,
/// K-steps, output conv with residual), repeated cfg.iterations times.
/// Deterministic given seed.
RefineResult refine_scale(const MultiScaleFeatures& f, const KernelBank& bank,
                          const AttentionParams& params,
                          const InferenceConfig& cfg, std::uint64_t seed);

/// Negative energy -E evaluated at posterior means (diagnostic). kernels[e]
/// is the full pairwise kernel as produced by k_step_closed.
double energy_at_means(const Tensor& f_r, std::span<const Tensor> f_e,
                       const Tensor& z_r, std::span<const Tensor> z_e,
                       std::span<const StructuredAttention> atts,
                       std::span<const Tensor> kernels,
                       const Tensor& precision);

/// Analytic floating-point operation count of refine_scale.
std::uint64_t refine_flops(std::span<const Shape> feature_shapes,
                           std::size_t receiving, const InferenceConfig& cfg);

namespace ad {

struct KernelBankVars {
  std::vector<Var> self_kernels;
  std::vector<Var> cross_kernels;
  std::vector<Var> kstep_kernels;
  Var out_kernel;
};

struct AttentionParamVars {
  std::vector<std::vector<Var>> map_bias;
  std::vector<std::vector<Var>> vector_bias;
  std::vector<std::vector<Var>> lowrank_maps;
  std::vector<std::vector<Var>> lowrank_vectors;
};

struct MessageVars {
  Var emitted;  ///< self-kernel output resized to the receiving grid
  Var message;  ///< after the cross-kernel (and kernel-field modulation)
};

struct RefineVars {
  Var refined;
  Var hidden;
  std::vector<std::vector<Var>> maps;
  std::vector<std::vector<Var>> vectors;
  std::vector<Var> kernel_fields;
};

KernelBankVars bind(Tape& tape, const KernelBank& bank);
AttentionParamVars bind(Tape& tape, const AttentionParams& params);

/// kernel_field, when valid, multiplies the message by (1 + field).
MessageVars message_pass(const Var& feature_e, const Var& self_kernel,
                         const Var& cross_kernel, std::size_t out_h,
                         std::size_t out_w, const Var& kernel_field = Var());

/// gates[e] invalid means message e is ungated.
Var z_step(const Var& f_r, std::span<const Var> messages,
           std::span<const Var> gates, const Var& inv_precision);
/// product = z_r (.) message. bias may be invalid (zero prior).
Var m_step(const Var& product, const Var& v_bar, const Var& bias = Var());
Var v_step(const Var& product, const Var& m_bar, const Var& bias = Var());
/// gate invalid stands for an all-ones gate.
Var k_step_conv(const Var& f_r, const Var& z_r, const Var& gate,
                const Var& z_e, const Var& weights);

RefineVars refine_scale(std::span<const Var> features, std::size_t receiving,
                        const KernelBankVars& bank,
                        const AttentionParamVars& params,
                        const InferenceConfig& cfg, std::uint64_t seed);

}  // namespace ad
}  // namespace vista
