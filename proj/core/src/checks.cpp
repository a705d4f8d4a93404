#include "vista/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "vista/attention.hpp"
#include "vista/autodiff.hpp"
#include "vista/error.hpp"
#include "vista/inference.hpp"
#include "vista/losses.hpp"
#include "vista/oracle.hpp"
#include "vista/random.hpp"

namespace vista {
namespace {

constexpr double kOracleTol = 1e-9;
constexpr double kGradTol = 1e-5;
constexpr double kSimplexTol = 1e-9;

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t count_or(const CheckOptions& o, std::size_t fallback) {
  return o.instances == 0 ? fallback : o.instances;
}

double rel(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  return relative_error(a.data(), b.data());
}

struct Tracker {
  CheckResult result;
  std::filesystem::path replay_dir;
  bool failed_once = false;

  // Records one comparison; the first failing instance is written for replay.
  void record(double err, double tol, const std::vector<Tensor>& instance) {
    ++result.cases;
    if (!(err <= result.worst)) result.worst = err;
    if (err < tol) return;
    if (failed_once) return;
    failed_once = true;
    std::filesystem::path dir = replay_dir.empty()
                                    ? std::filesystem::temp_directory_path() / "vista_replay"
                                    : replay_dir;
    std::filesystem::create_directories(dir);
    const auto file = dir / (result.name + "_" + std::to_string(result.cases) + ".tensors");
    std::ofstream out(file, std::ios::binary);
    for (const Tensor& t : instance) write_tensor(out, t);
    result.detail = "instance " + std::to_string(result.cases) + " error " +
                    std::to_string(err) + ", replay: " + file.string();
  }

  CheckResult finish(double tol) {
    result.passed = result.cases > 0 && result.worst < tol;
    return result;
  }
};

Tracker tracker(std::string name, const CheckOptions& opts) {
  Tracker t;
  t.result.name = std::move(name);
  t.replay_dir = opts.replay_dir;
  return t;
}

StructuredAttention random_attention(Rng& rng, std::size_t rank, std::size_t c,
                                     std::size_t h, std::size_t w) {
  std::vector<Tensor> maps, vecs;
  for (std::size_t t = 0; t < rank; ++t) {
    maps.push_back(rng.uniform_tensor(Shape{h, w}, 0.0, 1.0));
    vecs.push_back(softmax(rng.normal_tensor(Shape{c}, 1.0)));
  }
  return StructuredAttention(std::move(maps), std::move(vecs));
}

std::vector<Tensor> flatten(const StructuredAttention& a) {
  std::vector<Tensor> out = a.maps();
  out.insert(out.end(), a.vectors().begin(), a.vectors().end());
  return out;
}

// Random refine_scale instance within the oracle budget.
struct RefineInstance {
  MultiScaleFeatures f;
  KernelBank bank;
  AttentionParams params;
  InferenceConfig cfg;
  std::uint64_t seed = 0;

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out = f.features;
    out.insert(out.end(), bank.self_kernels.begin(), bank.self_kernels.end());
    out.insert(out.end(), bank.cross_kernels.begin(), bank.cross_kernels.end());
    out.insert(out.end(), bank.kstep_kernels.begin(), bank.kstep_kernels.end());
    out.push_back(bank.out_kernel);
    for (const auto* grid : {&params.map_bias, &params.vector_bias, &params.lowrank_maps,
                             &params.lowrank_vectors}) {
      for (const auto& row : *grid) out.insert(out.end(), row.begin(), row.end());
    }
    return out;
  }
};

RefineInstance random_refine_instance(Rng& rng, std::size_t max_scales = 3) {
  RefineInstance in;
  const std::size_t s = 1 + rng.index(max_scales);
  std::vector<std::size_t> channels;
  for (std::size_t e = 0; e < s; ++e) {
    const std::size_t c = 1 + rng.index(4);
    channels.push_back(c);
    in.f.features.push_back(
        rng.normal_tensor(Shape{c, 1 + rng.index(4), 1 + rng.index(4)}, 1.0));
  }
  in.f.receiving = rng.index(s);
  in.cfg.rank = static_cast<int>(rng.index(4));
  in.cfg.variant = kAllVariants[rng.index(std::size(kAllVariants))];
  in.cfg.iterations = 1 + static_cast<int>(rng.index(2));
  in.cfg.precision = rng.uniform(0.5, 2.0);
  in.bank = make_kernel_bank(channels, in.f.receiving, 3, rng);
  const Tensor& fr = in.f.receiving_feature();
  in.params = make_attention_params(s, fr.dim(0), fr.dim(1), fr.dim(2), in.cfg, rng);
  for (auto& row : in.params.map_bias) {
    for (auto& b : row) b = rng.normal_tensor(b.shape(), 0.5);
  }
  for (auto& row : in.params.vector_bias) {
    for (auto& b : row) b = rng.normal_tensor(b.shape(), 0.5);
  }
  in.seed = rng.next();
  return in;
}

CheckResult check_conv(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {1}));
  Tracker tr = tracker("conv2d", opts);
  const std::size_t n = count_or(opts, 100);
  while (tr.result.cases < n) {
    const std::size_t cin = 1 + rng.index(4), cout = 1 + rng.index(4);
    const std::size_t h = 1 + rng.index(6), w = 1 + rng.index(6);
    const std::size_t k = 1 + 2 * rng.index(3);
    const int stride = 1 + static_cast<int>(rng.index(2));
    const int pad = static_cast<int>(rng.index(4)) - 1;
    const long eff = pad < 0 ? static_cast<long>(k / 2) : pad;
    if (static_cast<long>(h) + 2 * eff < static_cast<long>(k) ||
        static_cast<long>(w) + 2 * eff < static_cast<long>(k)) {
      continue;
    }
    const Tensor x = rng.normal_tensor(Shape{cin, h, w}, 1.0);
    const Tensor kk = rng.normal_tensor(Shape{cout, cin, k, k}, 1.0);
    tr.record(rel(conv2d(x, kk, stride, pad), oracle::naive_conv2d(x, kk, stride, pad)),
              kOracleTol * opts.tolerance_scale, {x, kk});
  }
  return tr.finish(kOracleTol * opts.tolerance_scale);
}

CheckResult check_resize(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {2}));
  Tracker tr = tracker("resize_bilinear", opts);
  for (std::size_t i = 0, n = count_or(opts, 100); i < n; ++i) {
    const Tensor x =
        rng.normal_tensor(Shape{1 + rng.index(3), 1 + rng.index(5), 1 + rng.index(5)}, 1.0);
    const std::size_t oh = 1 + rng.index(8), ow = 1 + rng.index(8);
    tr.record(rel(resize_bilinear(x, oh, ow), oracle::naive_resize_bilinear(x, oh, ow)),
              kOracleTol * opts.tolerance_scale, {x});
  }
  return tr.finish(kOracleTol * opts.tolerance_scale);
}

CheckResult check_z_step(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {3}));
  Tracker tr = tracker("z_step", opts);
  for (std::size_t i = 0, n = count_or(opts, 100); i < n; ++i) {
    const std::size_t c = 1 + rng.index(4), h = 1 + rng.index(4), w = 1 + rng.index(4);
    const std::size_t s = 1 + rng.index(3);
    const Tensor f = rng.normal_tensor(Shape{c, h, w}, 1.0);
    const Tensor b = rng.uniform_tensor(Shape{c, h, w}, 0.5, 2.0);
    std::vector<Tensor> msgs;
    std::vector<StructuredAttention> atts;
    std::vector<Tensor> inst{f, b};
    for (std::size_t e = 0; e < s; ++e) {
      msgs.push_back(rng.normal_tensor(Shape{c, h, w}, 1.0));
      atts.push_back(random_attention(rng, rng.index(4), c, h, w));
      inst.push_back(msgs.back());
      for (const auto& t : flatten(atts.back())) inst.push_back(t);
    }
    tr.record(rel(z_step(f, msgs, atts, b), oracle::naive_z_step(f, msgs, atts, b)),
              kOracleTol * opts.tolerance_scale, inst);
  }
  return tr.finish(kOracleTol * opts.tolerance_scale);
}

CheckResult check_m_step(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {4}));
  Tracker tr = tracker("m_step", opts);
  for (std::size_t i = 0, n = count_or(opts, 100); i < n; ++i) {
    const std::size_t c = 1 + rng.index(4), h = 1 + rng.index(4), w = 1 + rng.index(4);
    const Tensor z = rng.normal_tensor(Shape{c, h, w}, 1.0);
    const Tensor msg = rng.normal_tensor(Shape{c, h, w}, 1.0);
    const Tensor v = softmax(rng.normal_tensor(Shape{c}, 1.0));
    const double bias = rng.uniform(-1.0, 1.0);
    tr.record(rel(m_step(z, msg, v, bias), oracle::naive_m_step(z, msg, v, bias)),
              kOracleTol * opts.tolerance_scale, {z, msg, v, Tensor::scalar(bias)});
  }
  return tr.finish(kOracleTol * opts.tolerance_scale);
}

CheckResult check_v_step(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {5}));
  Tracker tr = tracker("v_step", opts);
  for (std::size_t i = 0, n = count_or(opts, 100); i < n; ++i) {
    const std::size_t c = 1 + rng.index(4), h = 1 + rng.index(4), w = 1 + rng.index(4);
    const Tensor z = rng.normal_tensor(Shape{c, h, w}, 1.0);
    const Tensor msg = rng.normal_tensor(Shape{c, h, w}, 1.0);
    const Tensor m = rng.uniform_tensor(Shape{h, w}, 0.0, 1.0);
    const Tensor bias = rng.normal_tensor(Shape{c}, 0.5);
    tr.record(rel(v_step(z, msg, m, bias), oracle::naive_v_step(z, msg, m, bias)),
              kOracleTol * opts.tolerance_scale, {z, msg, m, bias});
  }
  return tr.finish(kOracleTol * opts.tolerance_scale);
}

CheckResult check_k_step(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {6}));
  Tracker tr = tracker("k_step_closed", opts);
  for (std::size_t i = 0, n = count_or(opts, 100); i < n; ++i) {
    const std::size_t c = 1 + rng.index(4), h = 1 + rng.index(4), w = 1 + rng.index(4);
    const Shape se{1 + rng.index(4), 1 + rng.index(4), 1 + rng.index(4)};
    const Tensor fr = rng.normal_tensor(Shape{c, h, w}, 1.0);
    const Tensor zr = rng.normal_tensor(Shape{c, h, w}, 1.0);
    const Tensor fe = rng.normal_tensor(se, 1.0);
    const Tensor ze = rng.normal_tensor(se, 1.0);
    const auto att = random_attention(rng, 1 + rng.index(3), c, h, w);
    std::vector<Tensor> inst{fr, fe, zr, ze};
    for (const auto& t : flatten(att)) inst.push_back(t);
    tr.record(rel(k_step_closed(fr, fe, zr, ze, att),
                  oracle::naive_k_step(fr, fe, zr, ze, att)),
              kOracleTol * opts.tolerance_scale, inst);
  }
  return tr.finish(kOracleTol * opts.tolerance_scale);
}

CheckResult check_refine(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {7}));
  Tracker tr = tracker("refine_scale", opts);
  for (std::size_t i = 0, n = count_or(opts, 100); i < n; ++i) {
    const RefineInstance in = random_refine_instance(rng);
    const Tensor& fr = in.f.receiving_feature();
    const RefineResult got = refine_scale(in.f, in.bank, in.params, in.cfg, in.seed);
    const std::size_t t = in.cfg.gated() ? static_cast<std::size_t>(in.cfg.rank) : 0;
    const auto guess =
        initial_map_guess(in.seed, in.f.features.size(), t, fr.dim(1), fr.dim(2));
    const auto want = oracle::naive_refine_scale(in.f, in.bank, in.params, in.cfg, guess);
    double err = std::max(rel(got.refined, want.refined), rel(got.hidden, want.hidden));
    for (std::size_t e = 0; e < got.attention.size() && t > 0; ++e) {
      for (std::size_t k = 0; k < t; ++k) {
        err = std::max(err, rel(got.attention[e].maps()[k], want.maps[e][k]));
        err = std::max(err, rel(got.attention[e].vectors()[k], want.vectors[e][k]));
      }
    }
    tr.record(err, kOracleTol * opts.tolerance_scale, in.tensors());
  }
  return tr.finish(kOracleTol * opts.tolerance_scale);
}

// Binds flat parameter Vars back into the refine_scale inputs.
struct RefineLayout {
  RefineInstance base;
  std::vector<Tensor> flat;
  Tensor readout;
  std::vector<Tensor> map_weights;
  std::vector<Tensor> vector_weights;

  ad::Var loss(ad::Tape& tape, std::span<const ad::Var> p) const {
    std::size_t i = 0;
    const std::size_t s = base.f.features.size();
    std::vector<ad::Var> feats(p.begin(), p.begin() + static_cast<long>(s));
    i = s;
    ad::KernelBankVars bank;
    for (std::size_t e = 0; e < s; ++e) bank.self_kernels.push_back(p[i++]);
    for (std::size_t e = 0; e < s; ++e) bank.cross_kernels.push_back(p[i++]);
    for (std::size_t e = 0; e < s; ++e) bank.kstep_kernels.push_back(p[i++]);
    bank.out_kernel = p[i++];
    ad::AttentionParamVars att;
    auto take = [&](const std::vector<std::vector<Tensor>>& grid) {
      std::vector<std::vector<ad::Var>> out(grid.size());
      for (std::size_t e = 0; e < grid.size(); ++e) {
        for (std::size_t t = 0; t < grid[e].size(); ++t) out[e].push_back(p[i++]);
      }
      return out;
    };
    att.map_bias = take(base.params.map_bias);
    att.vector_bias = take(base.params.vector_bias);
    att.lowrank_maps = take(base.params.lowrank_maps);
    att.lowrank_vectors = take(base.params.lowrank_vectors);

    const auto r = ad::refine_scale(feats, base.f.receiving, bank, att, base.cfg, base.seed);
    std::vector<ad::Var> terms{ad::sum(ad::mul(r.refined, tape.constant(readout)))};
    std::size_t k = 0;
    for (std::size_t e = 0; e < r.maps.size(); ++e) {
      for (std::size_t t = 0; t < r.maps[e].size(); ++t, ++k) {
        terms.push_back(ad::sum(ad::mul(r.maps[e][t], tape.constant(map_weights[k]))));
        terms.push_back(ad::sum(ad::mul(r.vectors[e][t], tape.constant(vector_weights[k]))));
      }
    }
    return ad::add_n(terms);
  }
};

RefineLayout refine_layout(Rng& rng, std::size_t index) {
  RefineLayout l;
  // Two scales, receiving the coarser one, cycling through the variants.
  std::vector<std::size_t> channels{2, 3};
  l.base.f.features = {rng.normal_tensor(Shape{2, 4, 4}, 1.0),
                       rng.normal_tensor(Shape{3, 2, 2}, 1.0)};
  l.base.f.receiving = 1;
  l.base.cfg.variant = kAllVariants[index % std::size(kAllVariants)];
  l.base.cfg.rank = 1 + static_cast<int>(index % 2);
  l.base.cfg.iterations = 2;
  l.base.bank = make_kernel_bank(channels, 1, 3, rng);
  l.base.params = make_attention_params(2, 3, 2, 2, l.base.cfg, rng);
  for (auto& row : l.base.params.map_bias) {
    for (auto& b : row) b = rng.normal_tensor(b.shape(), 0.5);
  }
  for (auto& row : l.base.params.vector_bias) {
    for (auto& b : row) b = rng.normal_tensor(b.shape(), 0.5);
  }
  l.base.seed = rng.next();
  l.flat = l.base.tensors();
  l.readout = rng.normal_tensor(Shape{3, 2, 2}, 1.0);
  for (std::size_t k = 0; k < 2 * static_cast<std::size_t>(l.base.cfg.rank); ++k) {
    l.map_weights.push_back(rng.normal_tensor(Shape{2, 2}, 1.0));
    l.vector_weights.push_back(rng.normal_tensor(Shape{3}, 1.0));
  }
  return l;
}

CheckResult grad_refine(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {20}));
  Tracker tr = tracker("grad_refine_scale", opts);
  for (std::size_t i = 0, n = count_or(opts, 20); i < n; ++i) {
    const RefineLayout l = refine_layout(rng, i);
    const double err = ad::grad_check(
        [&](ad::Tape& tape, std::span<const ad::Var> p) { return l.loss(tape, p); }, l.flat);
    tr.record(err, kGradTol * opts.tolerance_scale, l.flat);
  }
  return tr.finish(kGradTol * opts.tolerance_scale);
}

CheckResult grad_l2(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {21}));
  Tracker tr = tracker("grad_loss_l2", opts);
  for (std::size_t i = 0, n = count_or(opts, 20); i < n; ++i) {
    const Tensor pred = rng.normal_tensor(Shape{1, 4, 4}, 1.0);
    const Tensor target = rng.normal_tensor(Shape{1, 4, 4}, 1.0);
    Tensor mask(Shape{1, 4, 4});
    for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = k == 0 || rng.uniform() < 0.7;
    const std::vector<Tensor> params{pred};
    const double err = ad::grad_check(
        [&](ad::Tape&, std::span<const ad::Var> p) { return ad::loss_l2(p[0], target, mask); },
        params);
    tr.record(err, kGradTol * opts.tolerance_scale, {pred, target, mask});
  }
  return tr.finish(kGradTol * opts.tolerance_scale);
}

CheckResult grad_cross_entropy(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {22}));
  Tracker tr = tracker("grad_loss_cross_entropy", opts);
  for (std::size_t i = 0, n = count_or(opts, 20); i < n; ++i) {
    const std::size_t k = 2 + rng.index(3);
    const Tensor logits = rng.normal_tensor(Shape{k, 4, 4}, 2.0);
    LabelMap labels{4, 4, std::vector<int>(16)};
    for (std::size_t p = 0; p < 16; ++p) {
      labels.labels[p] = p > 0 && rng.uniform() < 0.15 ? kDefaultIgnoreLabel
                                                       : static_cast<int>(rng.index(k));
    }
    const std::vector<Tensor> params{logits};
    const double err = ad::grad_check(
        [&](ad::Tape&, std::span<const ad::Var> p) {
          return ad::loss_cross_entropy(p[0], labels);
        },
        params);
    tr.record(err, kGradTol * opts.tolerance_scale, {logits});
  }
  return tr.finish(kGradTol * opts.tolerance_scale);
}

CheckResult grad_cosine(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {23}));
  Tracker tr = tracker("grad_loss_cosine", opts);
  for (std::size_t i = 0, n = count_or(opts, 20); i < n; ++i) {
    const Tensor pred = rng.normal_tensor(Shape{3, 4, 4}, 1.0);
    const Tensor target = rng.normal_tensor(Shape{3, 4, 4}, 1.0);
    const std::vector<Tensor> params{pred};
    const double err = ad::grad_check(
        [&](ad::Tape&, std::span<const ad::Var> p) { return ad::loss_cosine(p[0], target); },
        params);
    tr.record(err, kGradTol * opts.tolerance_scale, {pred, target});
  }
  return tr.finish(kGradTol * opts.tolerance_scale);
}

}  // namespace

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double diff = 0.0, mag = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (!(d <= diff)) diff = d;  // NaN propagates
    mag = std::max(mag, std::abs(b[i]));
  }
  return diff / mag;
}

std::vector<CheckResult> oracle_checks(const CheckOptions& opts) {
  return {check_conv(opts),   check_resize(opts), check_z_step(opts), check_m_step(opts),
          check_v_step(opts), check_k_step(opts), check_refine(opts)};
}

CheckResult rank_structure_check(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {10}));
  CheckResult r;
  r.name = "rank_structure";
  r.passed = true;
  for (std::size_t i = 0, n = count_or(opts, 60); i < n; ++i) {
    const std::size_t t = 1 + i % 3;
    const std::size_t c = 3 + rng.index(2), h = 2 + rng.index(3), w = 2 + rng.index(3);
    const auto att = random_attention(rng, t, c, h, w);
    const std::size_t got = oracle::matricization_rank(assemble(att), 1e-9);
    ++r.cases;
    if (got != t) {
      r.passed = false;
      r.worst = std::max(r.worst, std::abs(static_cast<double>(got) - static_cast<double>(t)));
      if (r.detail.empty()) {
        r.detail = "case " + std::to_string(i) + ": rank " + std::to_string(got) +
                   ", expected " + std::to_string(t);
      }
    }
  }
  return r;
}

CheckResult posterior_constraint_check(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, {11}));
  CheckResult r;
  r.name = "posterior_constraints";
  r.passed = true;
  for (std::size_t i = 0, n = count_or(opts, 1000); i < n; ++i) {
    RefineInstance in = random_refine_instance(rng);
    if (!in.cfg.gated()) {
      in.cfg.rank = 1 + static_cast<int>(rng.index(3));
      in.cfg.variant = AttentionVariant::kStructured;
      const Tensor& fr = in.f.receiving_feature();
      in.params = make_attention_params(in.f.features.size(), fr.dim(0), fr.dim(1),
                                        fr.dim(2), in.cfg, rng);
    }
    const RefineResult out = refine_scale(in.f, in.bank, in.params, in.cfg, in.seed);
    ++r.cases;
    std::string bad;
    // Channel-only keeps the all-ones spatial gate; it is not inferred.
    const bool maps_inferred = in.cfg.variant != AttentionVariant::kChannelOnly;
    for (const auto& att : out.attention) {
      for (const auto& m : att.maps()) {
        if (!maps_inferred) break;
        for (double x : m.data()) {
          if (!(x > 0.0 && x < 1.0)) bad = "map entry " + exact(x);
        }
      }
      for (const auto& v : att.vectors()) {
        double total = 0.0;
        for (double x : v.data()) {
          total += x;
          if (!(x > 0.0)) bad = "vector entry " + exact(x);
        }
        const double dev = std::abs(total - 1.0);
        r.worst = std::max(r.worst, dev);
        if (!(dev <= kSimplexTol * opts.tolerance_scale)) bad = "vector sum off by " + exact(dev);
      }
    }
    if (!bad.empty()) {
      r.passed = false;
      if (r.detail.empty()) r.detail = "instance " + std::to_string(i) + ": " + bad;
    }
  }
  return r;
}

std::vector<CheckResult> gradient_checks(const CheckOptions& opts) {
  return {grad_refine(opts), grad_l2(opts), grad_cross_entropy(opts), grad_cosine(opts)};
}

std::vector<CheckResult> run_check_suite(std::string_view suite, std::ostream& log,
                                         const CheckOptions& opts) {
  std::vector<CheckResult> results;
  if (suite == "oracle") {
    results = oracle_checks(opts);
  } else if (suite == "grad") {
    results = gradient_checks(opts);
  } else if (suite == "invariants") {
    results = {rank_structure_check(opts), posterior_constraint_check(opts)};
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown suite '" + std::string(suite) +
                    "' (expected oracle, grad or invariants)");
  }
  for (const auto& r : results) {
    log << (r.passed ? "PASS " : "FAIL ") << r.name << " cases=" << r.cases
        << " worst=" << r.worst;
    if (!r.detail.empty()) log << " (" << r.detail << ")";
    log << "\n";
  }
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return !results.empty() && std::all_of(results.begin(), results.end(),
                                         [](const CheckResult& r) { return r.passed; });
}

}  // namespace vista
