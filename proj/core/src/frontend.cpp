#include "vista/frontend.hpp"

#include <cmath>
#include <string>

#include "vista/error.hpp"
#include "vista/random.hpp"

namespace vista {
namespace {

std::string stage_name(std::size_t s, const char* part) {
  return "frontend.conv" + std::to_string(s) + "." + part;
}

std::string indexed(const char* prefix, std::size_t e) {
  return std::string(prefix) + "." + std::to_string(e);
}

std::string indexed(const char* prefix, std::size_t e, std::size_t t) {
  return std::string(prefix) + "." + std::to_string(e) + "." + std::to_string(t);
}

void check_divisible(std::size_t h, std::size_t w, std::size_t stages) {
  const std::size_t factor = std::size_t{1} << (stages - 1);
  if (h % factor != 0 || w % factor != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "image size " + std::to_string(h) + "x" + std::to_string(w) +
                    " is not divisible by " + std::to_string(factor) + " for " +
                    std::to_string(stages) + " stages");
  }
}

std::vector<std::vector<Tensor>> grid_from(const ParamSet& params,
                                           const char* prefix,
                                           std::size_t stages, std::size_t rank) {
  std::vector<std::vector<Tensor>> out(stages);
  for (std::size_t e = 0; e < stages; ++e) {
    for (std::size_t t = 0; t < rank; ++t) {
      out[e].push_back(params.at(indexed(prefix, e, t)));
    }
  }
  return out;
}

std::vector<std::vector<ad::Var>> grid_vars(const BoundParams& params,
                                            const char* prefix,
                                            std::size_t stages) {
  std::vector<std::vector<ad::Var>> out;
  if (!params.contains(indexed(prefix, 0, 0))) return out;
  out.resize(stages);
  for (std::size_t e = 0; e < stages; ++e) {
    for (std::size_t t = 0; params.contains(indexed(prefix, e, t)); ++t) {
      out[e].push_back(params[indexed(prefix, e, t)]);
    }
  }
  return out;
}

}  // namespace

FrontEndParams make_frontend(std::size_t in_channels,
                             std::span<const std::size_t> stage_channels,
                             std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x66726f6e74ULL}));
  FrontEndParams p;
  std::size_t cin = in_channels;
  for (std::size_t c : stage_channels) {
    p.weights.push_back(rng.normal_tensor(
        Shape{c, cin, 3, 3}, std::sqrt(2.0 / static_cast<double>(cin * 9))));
    p.biases.push_back(Tensor::zeros(Shape{c}));
    cin = c;
  }
  return p;
}

MultiScaleFeatures forward_multiscale(const Tensor& image,
                                      const FrontEndParams& params) {
  if (params.stages() == 0 || params.biases.size() != params.stages()) {
    throw Error(ErrorCode::kInvalidArgument, "front-end needs >= 1 stage");
  }
  ad::Tape tape;
  ParamSet named;
  for (std::size_t s = 0; s < params.stages(); ++s) {
    named.add(stage_name(s, "weight"), params.weights[s]);
    named.add(stage_name(s, "bias"), params.biases[s]);
  }
  BoundParams bound(tape, named);
  const auto feats =
      ad::forward_multiscale(tape.constant(image), bound, params.stages());
  MultiScaleFeatures out;
  for (const auto& f : feats) out.features.push_back(f.value());
  out.receiving = feats.size() - 1;
  return out;
}

std::size_t ModelConfig::output_channels() const {
  switch (task) {
    case TaskKind::kDepth: return 1;
    case TaskKind::kSegmentation: return classes;
    case TaskKind::kNormals: return 3;
  }
  return 1;
}

ParamSet init_model(const ModelConfig& cfg, std::size_t height,
                    std::size_t width, std::uint64_t seed) {
  cfg.inference.validate();
  const std::size_t stages = cfg.stage_channels.size();
  if (stages == 0) {
    throw Error(ErrorCode::kInvalidArgument, "model needs >= 1 stage");
  }
  check_divisible(height, width, stages);
  ParamSet p;
  const FrontEndParams fe = make_frontend(cfg.in_channels, cfg.stage_channels, seed);
  for (std::size_t s = 0; s < stages; ++s) {
    p.add(stage_name(s, "weight"), fe.weights[s]);
    p.add(stage_name(s, "bias"), fe.biases[s]);
  }

  Rng rng(derive_seed(seed, {0x7669737461ULL}));
  const std::size_t receiving = stages - 1;
  const std::size_t cr = cfg.stage_channels[receiving];
  const std::size_t hr = height >> receiving, wr = width >> receiving;
  const KernelBank bank =
      make_kernel_bank(cfg.stage_channels, receiving, cfg.inference.kernel_size, rng);
  for (std::size_t e = 0; e < stages; ++e) {
    p.add(indexed("vista.self", e), bank.self_kernels[e]);
    p.add(indexed("vista.cross", e), bank.cross_kernels[e]);
  }
  // The ungated path stops at z_r, so it owns no K-step or output kernels.
  if (cfg.inference.gated()) {
    for (std::size_t e = 0; e < stages; ++e) {
      p.add(indexed("vista.kstep", e), bank.kstep_kernels[e]);
    }
    p.add("vista.out", bank.out_kernel);
  }

  const AttentionParams att =
      make_attention_params(stages, cr, hr, wr, cfg.inference, rng);
  auto add_grid = [&](const std::vector<std::vector<Tensor>>& grid,
                      const char* prefix) {
    for (std::size_t e = 0; e < grid.size(); ++e) {
      for (std::size_t t = 0; t < grid[e].size(); ++t) {
        p.add(indexed(prefix, e, t), grid[e][t]);
      }
    }
  };
  add_grid(att.map_bias, "vista.map_bias");
  add_grid(att.vector_bias, "vista.vector_bias");
  add_grid(att.lowrank_maps, "vista.lowrank_map");
  add_grid(att.lowrank_vectors, "vista.lowrank_vector");

  const std::size_t out = cfg.output_channels();
  p.add("head.weight", rng.normal_tensor(Shape{out, cr, 1, 1},
                                         1.0 / std::sqrt(static_cast<double>(cr))));
  p.add("head.bias", Tensor::zeros(Shape{out}));
  return p;
}

FrontEndParams frontend_from(const ParamSet& params, std::size_t stages) {
  FrontEndParams fe;
  for (std::size_t s = 0; s < stages; ++s) {
    fe.weights.push_back(params.at(stage_name(s, "weight")));
    fe.biases.push_back(params.at(stage_name(s, "bias")));
  }
  return fe;
}

KernelBank kernel_bank_from(const ParamSet& params, std::size_t stages) {
  KernelBank bank;
  for (std::size_t e = 0; e < stages; ++e) {
    bank.self_kernels.push_back(params.at(indexed("vista.self", e)));
    bank.cross_kernels.push_back(params.at(indexed("vista.cross", e)));
    if (params.contains(indexed("vista.kstep", e))) {
      bank.kstep_kernels.push_back(params.at(indexed("vista.kstep", e)));
    }
  }
  if (params.contains("vista.out")) bank.out_kernel = params.at("vista.out");
  return bank;
}

AttentionParams attention_params_from(const ParamSet& params, std::size_t stages,
                                      const InferenceConfig& cfg) {
  AttentionParams att;
  if (!cfg.gated()) return att;
  const auto rank = static_cast<std::size_t>(cfg.rank);
  auto maybe = [&](const char* prefix) {
    return params.contains(indexed(prefix, 0, 0))
               ? grid_from(params, prefix, stages, rank)
               : std::vector<std::vector<Tensor>>{};
  };
  att.map_bias = maybe("vista.map_bias");
  att.vector_bias = maybe("vista.vector_bias");
  att.lowrank_maps = maybe("vista.lowrank_map");
  att.lowrank_vectors = maybe("vista.lowrank_vector");
  return att;
}

std::uint64_t model_flops(const ModelConfig& cfg, std::size_t height,
                          std::size_t width) {
  const std::size_t stages = cfg.stage_channels.size();
  check_divisible(height, width, stages);
  std::uint64_t total = 0;
  std::vector<Shape> shapes;
  std::size_t cin = cfg.in_channels;
  for (std::size_t s = 0; s < stages; ++s) {
    const std::size_t h = height >> s, w = width >> s;
    const std::uint64_t c = cfg.stage_channels[s];
    total += 2 * c * cin * 9 * h * w + 2 * c * h * w;  // conv, bias, relu
    shapes.push_back(Shape{c, h, w});
    cin = c;
  }
  const std::size_t receiving = stages - 1;
  total += refine_flops(shapes, receiving, cfg.inference);
  const std::uint64_t cr = cfg.stage_channels[receiving];
  const std::uint64_t pr = shapes[receiving][1] * shapes[receiving][2];
  const std::uint64_t out = cfg.output_channels();
  total += 2 * out * cr * pr + out * pr;       // 1x1 head + bias
  total += 7 * out * height * width;           // bilinear upsample
  return total;
}

namespace ad {

std::vector<Var> forward_multiscale(const Var& image, const BoundParams& params,
                                    std::size_t stages) {
  const Shape& s = image.shape();
  if (s.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                "image must be [C,H,W], got " + s.to_string());
  }
  check_divisible(s[1], s[2], stages);
  std::vector<Var> out;
  Var x = image;
  for (std::size_t st = 0; st < stages; ++st) {
    const int stride = st == 0 ? 1 : 2;
    x = relu(add_channel_bias(
        conv2d(x, params[stage_name(st, "weight")], stride, 1),
        params[stage_name(st, "bias")]));
    out.push_back(x);
  }
  return out;
}

ModelOutput forward_model(const Var& image, const BoundParams& params,
                          const ModelConfig& cfg, std::uint64_t seed) {
  const std::size_t stages = cfg.stage_channels.size();
  const auto feats = forward_multiscale(image, params, stages);

  KernelBankVars bank;
  for (std::size_t e = 0; e < stages; ++e) {
    bank.self_kernels.push_back(params[indexed("vista.self", e)]);
    bank.cross_kernels.push_back(params[indexed("vista.cross", e)]);
    if (params.contains(indexed("vista.kstep", e))) {
      bank.kstep_kernels.push_back(params[indexed("vista.kstep", e)]);
    }
  }
  if (params.contains("vista.out")) bank.out_kernel = params["vista.out"];
  AttentionParamVars att;
  att.map_bias = grid_vars(params, "vista.map_bias", stages);
  att.vector_bias = grid_vars(params, "vista.vector_bias", stages);
  att.lowrank_maps = grid_vars(params, "vista.lowrank_map", stages);
  att.lowrank_vectors = grid_vars(params, "vista.lowrank_vector", stages);

  ModelOutput out;
  out.refine = refine_scale(feats, stages - 1, bank, att, cfg.inference, seed);
  const Var logits = add_channel_bias(
      conv2d(out.refine.refined, params["head.weight"], 1, 0), params["head.bias"]);
  out.prediction = resize_bilinear(logits, image.shape()[1], image.shape()[2]);
  return out;
}

Var task_loss(const Var& prediction, const SyntheticSample& sample) {
  switch (sample.kind) {
    case TaskKind::kDepth:
      return loss_l2(prediction, sample.target,
                     sample.valid_mask.reshaped(sample.target.shape()));
    case TaskKind::kSegmentation:
      return loss_cross_entropy(prediction, sample.labels);
    case TaskKind::kNormals:
      return loss_cosine(prediction, sample.target);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown task kind");
}

}  // namespace ad

Tensor predict(const ParamSet& params, const ModelConfig& cfg,
               const Tensor& image, std::uint64_t seed) {
  ad::Tape tape;
  BoundParams bound(tape, params);
  return ad::forward_model(tape.constant(image), bound, cfg, seed)
      .prediction.value();
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::kSgdMomentum;
  if (text == "adam") return OptimizerKind::kAdam;
  throw Error(ErrorCode::kParse,
              "unknown optimizer '" + std::string(text) + "' (expected sgd or adam)");
}

void apply_update(ParamSet& params, const ParamSet& grads, OptimizerState& state,
                  const OptimizerConfig& cfg) {
  if (state.first.size() != params.size()) state.first = params.zeros_like();
  if (cfg.kind == OptimizerKind::kAdam && state.second.size() != params.size()) {
    state.second = params.zeros_like();
  }
  ++state.steps;

  double clip = 1.0;
  if (cfg.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [name, g] : grads.entries()) {
      for (double x : g.data()) sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm) clip = cfg.clip_norm / norm;
  }

  auto& pe = params.entries();
  for (std::size_t i = 0; i < pe.size(); ++i) {
    Tensor& p = pe[i].second;
    const Tensor& g = grads.at(pe[i].first);
    Tensor& m = state.first.entries()[i].second;
    if (cfg.kind == OptimizerKind::kSgdMomentum) {
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = cfg.momentum * m[j] + clip * g[j];
        if (cfg.learning_rate != 0.0) p[j] -= cfg.learning_rate * m[j];
      }
    } else {
      Tensor& v = state.second.entries()[i].second;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.steps));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.steps));
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double gj = clip * g[j];
        m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
        v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
        if (cfg.learning_rate != 0.0) {
          p[j] -= cfg.learning_rate * (m[j] / bc1) /
                  (std::sqrt(v[j] / bc2) + cfg.epsilon);
        }
      }
    }
  }
}

double train_step(ParamSet& params, OptimizerState& state,
                  const OptimizerConfig& opt, const LossBuilder& loss,
                  std::int64_t step_index) {
  ad::Tape tape;
  BoundParams bound(tape, params);
  const ad::Var l = loss(tape, bound);
  const double value = l.value().item();
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kDiverged,
                "non-finite loss at step " + std::to_string(step_index));
  }
  tape.backward(l);
  apply_update(params, bound.gradients(params), state, opt);
  return value;
}

double train_step(ParamSet& params, OptimizerState& state,
                  std::span<const SyntheticSample> batch, const ModelConfig& cfg,
                  const OptimizerConfig& opt, std::uint64_t seed,
                  std::int64_t step_index) {
  if (batch.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "train_step: empty batch");
  }
  return train_step(
      params, state, opt,
      [&](ad::Tape& tape, const BoundParams& bound) {
        std::vector<ad::Var> losses;
        for (std::size_t i = 0; i < batch.size(); ++i) {
          if (batch[i].kind != cfg.task) {
            throw Error(ErrorCode::kInvalidArgument,
                        "train_step: sample task does not match the model head");
          }
          const auto out = ad::forward_model(
              tape.constant(batch[i].image), bound, cfg,
              derive_seed(seed, {static_cast<std::uint64_t>(step_index), i}));
          losses.push_back(ad::task_loss(out.prediction, batch[i]));
        }
        return ad::scale(ad::sum(ad::add_n(losses)),
                         1.0 / static_cast<double>(batch.size()));
      },
      step_index);
}

}  // namespace vista
