#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vista/autodiff.hpp"
#include "vista/inference.hpp"
#include "vista/losses.hpp"
#include "vista/params.hpp"
#include "vista/tasks.hpp"

namespace vista {

/// Toy multi-scale CNN: stage s is a 3x3 conv (+bias, relu); stages after
/// the first use stride 2.
struct FrontEndParams {
  std::vector<Tensor> weights;  ///< [C_s, C_{s-1}, 3, 3]
  std::vector<Tensor> biases;   ///< [C_s]

  std::size_t stages() const noexcept { return weights.size(); }
};

FrontEndParams make_frontend(std::size_t in_channels,
                             std::span<const std::size_t> stage_channels,
                             std::uint64_t seed);

/// S feature maps at strides 1, 2, 4, ...; the coarsest is the receiving
/// scale. H and W must be divisible by 2^(S-1).
MultiScaleFeatures forward_multiscale(const Tensor& image,
                                      const FrontEndParams& params);

/// Everything needed to build the model.
struct ModelConfig {
  TaskKind task = TaskKind::kSegmentation;
  std::size_t in_channels = 3;
  std::vector<std::size_t> stage_channels = {8, 16, 16};
  std::size_t classes = 4;
  InferenceConfig inference;

  std::size_t output_channels() const;
};

/// Parameters of front-end, attention block and head, with names
/// frontend.*, vista.*, head.*.
ParamSet init_model(const ModelConfig& cfg, std::size_t height,
                    std::size_t width, std::uint64_t seed);

FrontEndParams frontend_from(const ParamSet& params, std::size_t stages);
KernelBank kernel_bank_from(const ParamSet& params, std::size_t stages);
AttentionParams attention_params_from(const ParamSet& params,
                                      std::size_t stages,
                                      const InferenceConfig& cfg);

/// Analytic per-image forward FLOPs of the full model.
std::uint64_t model_flops(const ModelConfig& cfg, std::size_t height,
                          std::size_t width);

namespace ad {

std::vector<Var> forward_multiscale(const Var& image, const BoundParams& params,
                                    std::size_t stages);

struct ModelOutput {
  Var prediction;  ///< [out_channels, H, W] at input resolution
  RefineVars refine;
};

ModelOutput forward_model(const Var& image, const BoundParams& params,
                          const ModelConfig& cfg, std::uint64_t seed);

/// Task loss of one sample: L2 (depth), cross-entropy (segmentation) or
/// cosine (normals).
Var task_loss(const Var& prediction, const SyntheticSample& sample);

}  // namespace ad

/// Inference-only forward pass returning the prediction tensor.
Tensor predict(const ParamSet& params, const ModelConfig& cfg,
               const Tensor& image, std::uint64_t seed);

enum class OptimizerKind { kSgdMomentum, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgdMomentum;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct OptimizerState {
  ParamSet first;   ///< momentum buffer / Adam first moment
  ParamSet second;  ///< Adam second moment
  std::int64_t steps = 0;
};

/// One optimizer update. A zero learning rate leaves params bitwise unchanged.
void apply_update(ParamSet& params, const ParamSet& grads, OptimizerState& state,
                  const OptimizerConfig& cfg);

/// Builds a scalar loss on the tape from the bound parameters.
using LossBuilder = std::function<ad::Var(ad::Tape&, const BoundParams&)>;

/// Forward, backward and update. Throws Error(kDiverged) carrying the step
/// index if the loss is not finite.
double train_step(ParamSet& params, OptimizerState& state,
                  const OptimizerConfig& opt, const LossBuilder& loss,
                  std::int64_t step_index);

/// Model training step: mean task loss over the batch.
double train_step(ParamSet& params, OptimizerState& state,
                  std::span<const SyntheticSample> batch, const ModelConfig& cfg,
                  const OptimizerConfig& opt, std::uint64_t seed,
                  std::int64_t step_index);

}  // namespace vista
