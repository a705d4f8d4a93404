#include <gtest/gtest.h>

#include <cmath>

#include "vista/error.hpp"
#include "vista/inference.hpp"
#include "vista/oracle.hpp"
#include "vista/random.hpp"

using namespace vista;

namespace {

Tensor identity_kernel(std::size_t c) {
  Tensor k(Shape{c, c, 1, 1});
  for (std::size_t i = 0; i < c; ++i) k[i * c + i] = 1.0;
  return k;
}

StructuredAttention random_att(Rng& rng, std::size_t t, std::size_t c, std::size_t h,
                               std::size_t w) {
  std::vector<Tensor> maps, vecs;
  for (std::size_t i = 0; i < t; ++i) {
    maps.push_back(rng.uniform_tensor(Shape{h, w}, 0.0, 1.0));
    vecs.push_back(softmax(rng.normal_tensor(Shape{c}, 1.0)));
  }
  return {maps, vecs};
}

StructuredAttention open_gate(std::size_t c, std::size_t h, std::size_t w) {
  return StructuredAttention({Tensor(Shape{h, w}, 1.0)}, {Tensor(Shape{c}, 1.0)});
}

double rel(const Tensor& a, const Tensor& b) {
  double scale = 1.0;
  for (double v : b.data()) scale = std::max(scale, std::abs(v));
  return max_abs_diff(a, b) / scale;
}

struct Instance {
  MultiScaleFeatures f;
  KernelBank bank;
  AttentionParams params;
  InferenceConfig cfg;
};

Instance two_scale(std::uint64_t seed, AttentionVariant variant, int rank) {
  Rng rng(seed);
  Instance in;
  in.f.features = {rng.normal_tensor(Shape{2, 4, 4}, 1.0), rng.normal_tensor(Shape{3, 2, 2}, 1.0)};
  in.f.receiving = 1;
  in.cfg.variant = variant;
  in.cfg.rank = rank;
  const std::vector<std::size_t> ch{2, 3};
  in.bank = make_kernel_bank(ch, 1, 3, rng);
  in.params = make_attention_params(2, 3, 2, 2, in.cfg, rng);
  return in;
}

}  // namespace

TEST(MessagePass, IdentityChain) {
  Rng rng(1);
  KernelBank bank;
  bank.self_kernels = {identity_kernel(3)};
  bank.cross_kernels = {identity_kernel(3)};
  const Tensor z = rng.normal_tensor(Shape{3, 4, 4}, 1.0);
  EXPECT_LT(max_abs_diff(message_pass(z, bank, 0, z.shape()), z), 1e-15);
}

TEST(MessagePass, ZeroCrossKernel) {
  Rng rng(2);
  KernelBank bank;
  bank.self_kernels = {rng.normal_tensor(Shape{3, 2, 3, 3}, 1.0)};
  bank.cross_kernels = {Tensor(Shape{3, 3, 3, 3})};
  const Tensor m = message_pass(rng.normal_tensor(Shape{2, 4, 4}, 1.0), bank, 0, Shape{3, 2, 2});
  for (double v : m.data()) EXPECT_EQ(v, 0.0);
}

TEST(MessagePass, ComposesOracles) {
  Rng rng(3);
  KernelBank bank;
  bank.self_kernels = {rng.normal_tensor(Shape{3, 2, 3, 3}, 1.0)};
  bank.cross_kernels = {rng.normal_tensor(Shape{3, 3, 3, 3}, 1.0)};
  const Tensor z = rng.normal_tensor(Shape{2, 4, 5}, 1.0);
  const Tensor want = oracle::naive_conv2d(
      oracle::naive_resize_bilinear(oracle::naive_conv2d(z, bank.self_kernels[0], 1, -1), 3, 2),
      bank.cross_kernels[0], 1, -1);
  EXPECT_LT(rel(message_pass(z, bank, 0, Shape{3, 3, 2}), want), 1e-10);
}

TEST(MessagePass, MissingKernel) {
  KernelBank bank;
  try {
    message_pass(Tensor(Shape{1, 2, 2}), bank, 0, Shape{1, 2, 2});
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(ZStep, NoEmittersReturnsFeature) {
  Rng rng(4);
  const Tensor f = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
  const Tensor b = rng.uniform_tensor(Shape{2, 3, 3}, 0.5, 2.0);
  EXPECT_EQ(z_step(f, {}, {}, b), f);
}

TEST(ZStep, OpenGateAddsMessage) {
  Rng rng(5);
  const Tensor f = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
  const Tensor msg = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
  const std::vector<Tensor> msgs{msg};
  const std::vector<StructuredAttention> atts{open_gate(2, 3, 3)};
  EXPECT_LT(max_abs_diff(z_step(f, msgs, atts, Tensor(Shape{2, 3, 3}, 1.0)), add(f, msg)),
            1e-15);
}

TEST(ZStep, TwoScalesRankTwoMatchesOracle) {
  Rng rng(6);
  const Tensor f = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
  const Tensor b = rng.uniform_tensor(Shape{2, 3, 3}, 0.5, 2.0);
  const std::vector<Tensor> msgs{rng.normal_tensor(Shape{2, 3, 3}, 1.0),
                                 rng.normal_tensor(Shape{2, 3, 3}, 1.0)};
  const std::vector<StructuredAttention> atts{random_att(rng, 2, 2, 3, 3),
                                              random_att(rng, 2, 2, 3, 3)};
  EXPECT_LT(rel(z_step(f, msgs, atts, b), oracle::naive_z_step(f, msgs, atts, b)), 1e-10);
}

TEST(ZStep, NonPositivePrecisionRejected) {
  Tensor b(Shape{1, 2, 2}, 1.0);
  b[3] = 0.0;
  try {
    z_step(Tensor(Shape{1, 2, 2}), {}, {}, b);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(MStep, ZeroProductGivesHalf) {
  Rng rng(7);
  const Tensor m = m_step(Tensor(Shape{3, 2, 2}), rng.normal_tensor(Shape{3, 2, 2}, 1.0),
                          softmax(rng.normal_tensor(Shape{3}, 1.0)));
  for (double v : m.data()) EXPECT_EQ(v, 0.5);
}

TEST(MStep, PositiveScalingKeepsOrdering) {
  Rng rng(8);
  const Tensor z = rng.normal_tensor(Shape{3, 3, 3}, 1.0);
  const Tensor msg = rng.normal_tensor(Shape{3, 3, 3}, 1.0);
  const Tensor v = softmax(rng.normal_tensor(Shape{3}, 1.0));
  const Tensor a = m_step(z, msg, v), b = m_step(scale(z, 2.5), msg, v);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (a[i] < a[j]) EXPECT_LT(b[i], b[j]);
    }
}

TEST(MStep, MatchesOracle) {
  Rng rng(9);
  const Tensor z = rng.normal_tensor(Shape{3, 2, 2}, 1.0);
  const Tensor msg = rng.normal_tensor(Shape{3, 2, 2}, 1.0);
  const Tensor v = softmax(rng.normal_tensor(Shape{3}, 1.0));
  EXPECT_LT(max_abs_diff(m_step(z, msg, v), oracle::naive_m_step(z, msg, v)), 1e-12);
  EXPECT_LT(max_abs_diff(m_step(z, msg, v, 0.3), oracle::naive_m_step(z, msg, v, 0.3)), 1e-12);
}

TEST(VStep, ZeroProductGivesUniform) {
  Rng rng(10);
  const Tensor v = v_step(Tensor(Shape{4, 2, 2}), rng.normal_tensor(Shape{4, 2, 2}, 1.0),
                          rng.uniform_tensor(Shape{2, 2}, 0.0, 1.0));
  for (double x : v.data()) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(VStep, IdenticalChannelsEqual) {
  Rng rng(11);
  Tensor z = rng.normal_tensor(Shape{3, 2, 2}, 1.0);
  Tensor msg = rng.normal_tensor(Shape{3, 2, 2}, 1.0);
  for (std::size_t p = 0; p < 4; ++p) {
    z[4 + p] = z[p];
    msg[4 + p] = msg[p];
  }
  const Tensor v = v_step(z, msg, rng.uniform_tensor(Shape{2, 2}, 0.0, 1.0));
  EXPECT_NEAR(v[0], v[1], 1e-12);
}

TEST(VStep, MatchesOracle) {
  Rng rng(12);
  const Tensor z = rng.normal_tensor(Shape{3, 2, 3}, 1.0);
  const Tensor msg = rng.normal_tensor(Shape{3, 2, 3}, 1.0);
  const Tensor m = rng.uniform_tensor(Shape{2, 3}, 0.0, 1.0);
  const Tensor bias = rng.normal_tensor(Shape{3}, 1.0);
  EXPECT_LT(max_abs_diff(v_step(z, msg, m), oracle::naive_v_step(z, msg, m, Tensor(Shape{3}))),
            1e-12);
  EXPECT_LT(max_abs_diff(v_step(z, msg, m, bias), oracle::naive_v_step(z, msg, m, bias)), 1e-12);
}

TEST(KStepClosed, VanishingSecondTerm) {
  Rng rng(13);
  const Tensor fr = rng.normal_tensor(Shape{2, 2, 2}, 1.0);
  const Tensor fe = rng.normal_tensor(Shape{1, 2, 1}, 1.0);
  const Tensor ze = rng.normal_tensor(Shape{1, 2, 1}, 1.0);
  const auto att = random_att(rng, 1, 2, 2, 2);
  const StructuredAttention closed({Tensor(Shape{2, 2})}, {Tensor(Shape{2}, 0.5)});
  const Tensor zr = rng.normal_tensor(Shape{2, 2, 2}, 1.0);
  for (const Tensor& k : {k_step_closed(fr, fe, Tensor(Shape{2, 2, 2}), ze, att),
                          k_step_closed(fr, fe, zr, ze, closed)}) {
    std::size_t i = 0;
    for (std::size_t a = 0; a < fr.size(); ++a)
      for (std::size_t b = 0; b < fe.size(); ++b) EXPECT_EQ(k[i++], fr[a] * fe[b]);
  }
}

TEST(KStepClosed, MatchesOracle) {
  Rng rng(14);
  const Tensor fr = rng.normal_tensor(Shape{2, 2, 2}, 1.0);
  const Tensor fe = rng.normal_tensor(Shape{2, 2, 2}, 1.0);
  const Tensor zr = rng.normal_tensor(Shape{2, 2, 2}, 1.0);
  const Tensor ze = rng.normal_tensor(Shape{2, 2, 2}, 1.0);
  const auto att = random_att(rng, 2, 2, 2, 2);
  const Tensor k = k_step_closed(fr, fe, zr, ze, att);
  EXPECT_EQ(k.shape(), (Shape{2, 2, 2, 2, 2, 2}));
  EXPECT_LT(max_abs_diff(k, oracle::naive_k_step(fr, fe, zr, ze, att)), 1e-12);
}

TEST(KStepClosed, SizeCap) {
  const Tensor big(Shape{4, 16, 16});
  const auto att = StructuredAttention({Tensor(Shape{16, 16})}, {Tensor(Shape{4})});
  try {
    k_step_closed(big, big, big, big, att);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBudgetExceeded);
    EXPECT_NE(std::string(e.what()).find("k_step_conv"), std::string::npos) << e.what();
  }
}

TEST(KStepConv, ZeroWeights) {
  Rng rng(15);
  const Tensor f = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
  const Tensor out = k_step_conv(f, f, random_att(rng, 1, 2, 3, 3), f, Tensor(Shape{2, 4, 3, 3}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(KStepConv, SelectsFirstChannel) {
  Rng rng(16);
  const Tensor f = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
  const StructuredAttention zero({Tensor(Shape{3, 3})}, {Tensor(Shape{2}, 0.5)});
  Tensor w(Shape{1, 4, 1, 1});
  w[0] = 1.0;
  const Tensor out = k_step_conv(f, rng.normal_tensor(Shape{2, 3, 3}, 1.0), zero,
                                 Tensor(Shape{2, 3, 3}), w);
  for (std::size_t p = 0; p < 9; ++p) EXPECT_EQ(out[p], f[p]);
}

TEST(KStepConv, MatchesExplicitConcatenation) {
  Rng rng(17);
  const Tensor fr = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
  const Tensor zr = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
  const Tensor ze = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
  const Tensor w = rng.normal_tensor(Shape{2, 4, 3, 3}, 1.0);
  const auto att = random_att(rng, 2, 2, 3, 3);
  const std::vector<Tensor> parts{add(fr, mul(zr, assemble(att))), ze};
  const Tensor want = oracle::naive_conv2d(concat_channels(parts), w, 1, -1);
  EXPECT_LT(rel(k_step_conv(fr, zr, att, ze, w), want), 1e-10);
}

TEST(KStepConv, ChannelMismatch) {
  const Tensor f(Shape{2, 3, 3});
  EXPECT_THROW(k_step_conv(f, f, StructuredAttention(), f, Tensor(Shape{2, 3, 3, 3})), Error);
}

TEST(RefineScale, NoneWithZeroKernelsIsIdentity) {
  Instance in = two_scale(20, AttentionVariant::kNone, 1);
  for (auto* ks : {&in.bank.self_kernels, &in.bank.cross_kernels, &in.bank.kstep_kernels}) {
    for (auto& k : *ks) k = Tensor(k.shape());
  }
  in.bank.out_kernel = Tensor(in.bank.out_kernel.shape());
  const auto r = refine_scale(in.f, in.bank, in.params, in.cfg, 1);
  EXPECT_EQ(r.refined, in.f.receiving_feature());
}

TEST(RefineScale, NoneIdentityPathSumsFeatures) {
  Rng rng(21);
  MultiScaleFeatures f;
  f.features = {rng.normal_tensor(Shape{2, 4, 4}, 1.0), rng.normal_tensor(Shape{2, 2, 2}, 1.0),
                rng.normal_tensor(Shape{2, 1, 1}, 1.0)};
  f.receiving = 1;
  KernelBank bank;
  for (int e = 0; e < 3; ++e) {
    bank.self_kernels.push_back(identity_kernel(2));
    bank.cross_kernels.push_back(identity_kernel(2));
    bank.kstep_kernels.push_back(Tensor(Shape{2, 4, 1, 1}));
  }
  bank.out_kernel = identity_kernel(2);
  InferenceConfig cfg;
  cfg.variant = AttentionVariant::kNone;
  const auto r = refine_scale(f, bank, {}, cfg, 0);
  Tensor want = f.features[1];
  for (const auto& x : f.features) want = add(want, resize_bilinear(x, 2, 2));
  EXPECT_LT(max_abs_diff(r.hidden, want), 1e-12);
  EXPECT_LT(max_abs_diff(r.refined, want), 1e-12);
}

TEST(RefineScale, DefaultRankPosteriorsValid) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Instance in = two_scale(100 + s, AttentionVariant::kStructured, 1);
    const auto r = refine_scale(in.f, in.bank, in.params, in.cfg, s);
    EXPECT_TRUE(r.refined.all_finite());
    ASSERT_EQ(r.attention.size(), 2u);
    for (const auto& att : r.attention) {
      ASSERT_EQ(att.rank(), 1u);
      for (double m : att.maps()[0].data()) {
        EXPECT_GT(m, 0.0);
        EXPECT_LT(m, 1.0);
      }
      double total = 0.0;
      for (double v : att.vectors()[0].data()) {
        EXPECT_GT(v, 0.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(RefineScale, OneScaleTwoByTwoMatchesOracle) {
  Rng rng(22);
  MultiScaleFeatures f;
  f.features = {rng.normal_tensor(Shape{2, 2, 2}, 1.0)};
  const std::vector<std::size_t> ch{2};
  InferenceConfig cfg;
  const KernelBank bank = make_kernel_bank(ch, 0, 3, rng);
  const AttentionParams ap = make_attention_params(1, 2, 2, 2, cfg, rng);
  const auto got = refine_scale(f, bank, ap, cfg, 9);
  const auto want =
      oracle::naive_refine_scale(f, bank, ap, cfg, initial_map_guess(9, 1, 1, 2, 2));
  EXPECT_LT(rel(got.refined, want.refined), 1e-9);
  EXPECT_LT(rel(got.attention[0].maps()[0], want.maps[0][0]), 1e-9);
  EXPECT_LT(rel(got.attention[0].vectors()[0], want.vectors[0][0]), 1e-9);
}

TEST(RefineScale, EveryVariantMatchesOracle) {
  for (AttentionVariant v : kAllVariants) {
    for (int iters : {1, 3}) {
      Instance in = two_scale(30 + static_cast<int>(v), v, 2);
      in.cfg.iterations = iters;
      const auto got = refine_scale(in.f, in.bank, in.params, in.cfg, 4);
      const auto want = oracle::naive_refine_scale(in.f, in.bank, in.params, in.cfg,
                                                   initial_map_guess(4, 2, 2, 2, 2));
      EXPECT_LT(rel(got.refined, want.refined), 1e-9) << to_string(v) << " iters " << iters;
    }
  }
}

TEST(RefineScale, VariantsFixTheirFactors) {
  const Instance sp = two_scale(40, AttentionVariant::kSpatialOnly, 1);
  for (const auto& att : refine_scale(sp.f, sp.bank, sp.params, sp.cfg, 1).attention) {
    for (double x : att.vectors()[0].data()) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
  }
  const Instance ch = two_scale(41, AttentionVariant::kChannelOnly, 1);
  for (const auto& att : refine_scale(ch.f, ch.bank, ch.params, ch.cfg, 1).attention) {
    for (double x : att.maps()[0].data()) EXPECT_EQ(x, 1.0);
  }
}

TEST(RefineScale, DeterministicGivenSeed) {
  const Instance in = two_scale(50, AttentionVariant::kStructured, 3);
  const auto a = refine_scale(in.f, in.bank, in.params, in.cfg, 77);
  const auto b = refine_scale(in.f, in.bank, in.params, in.cfg, 77);
  EXPECT_EQ(a.refined, b.refined);
  EXPECT_EQ(a.hidden, b.hidden);
}

TEST(RefineScale, BadReceivingIndex) {
  Instance in = two_scale(51, AttentionVariant::kStructured, 1);
  in.f.receiving = 5;
  EXPECT_THROW(refine_scale(in.f, in.bank, in.params, in.cfg, 1), Error);
}

TEST(InferenceConfig, Validation) {
  InferenceConfig cfg;
  cfg.rank = -1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.kernel_size = 2;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.precision = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Variant, NamesRoundTrip) {
  for (AttentionVariant v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("attention"), Error);
}

TEST(Energy, GroundConfigurationIsZero) {
  Rng rng(60);
  const Tensor fr = rng.normal_tensor(Shape{2, 2, 2}, 1.0);
  const std::vector<Tensor> fe{rng.normal_tensor(Shape{1, 2, 2}, 1.0)};
  const std::vector<Tensor> ze{rng.normal_tensor(Shape{1, 2, 2}, 1.0)};
  const std::vector<StructuredAttention> closed{
      StructuredAttention({Tensor(Shape{2, 2})}, {Tensor(Shape{2}, 0.5)})};
  const std::vector<Tensor> k{k_step_closed(fr, fe[0], Tensor(Shape{2, 2, 2}), ze[0], closed[0])};
  const Tensor b(Shape{2, 2, 2}, 1.0);
  EXPECT_EQ(energy_at_means(fr, fe, fr, ze, closed, k, b), 0.0);
  Tensor moved = fr;
  moved[3] += 0.1;
  EXPECT_LT(energy_at_means(fr, fe, moved, ze, closed, k, b), 0.0);
}

TEST(Energy, MatchesOracle) {
  Rng rng(61);
  const Tensor fr = rng.normal_tensor(Shape{2, 2, 2}, 1.0);
  const Tensor zr = rng.normal_tensor(Shape{2, 2, 2}, 1.0);
  const std::vector<Tensor> fe{rng.normal_tensor(Shape{2, 1, 2}, 1.0),
                               rng.normal_tensor(Shape{1, 2, 2}, 1.0)};
  const std::vector<Tensor> ze{rng.normal_tensor(Shape{2, 1, 2}, 1.0),
                               rng.normal_tensor(Shape{1, 2, 2}, 1.0)};
  const std::vector<StructuredAttention> atts{random_att(rng, 2, 2, 2, 2),
                                              random_att(rng, 1, 2, 2, 2)};
  std::vector<Tensor> k;
  for (std::size_t e = 0; e < 2; ++e) {
    Tensor kk = k_step_closed(fr, fe[e], zr, ze[e], atts[e]);
    for (double& x : kk.data()) x += rng.normal();
    k.push_back(kk);
  }
  const Tensor b = rng.uniform_tensor(Shape{2, 2, 2}, 0.5, 2.0);
  const double got = energy_at_means(fr, fe, zr, ze, atts, k, b);
  const double want = oracle::naive_energy(fr, fe, zr, ze, atts, k, b);
  EXPECT_LT(std::abs(got - want) / std::max(1.0, std::abs(want)), 1e-10);
}

TEST(RefineFlops, GrowsWithRank) {
  const std::vector<Shape> shapes{Shape{8, 32, 32}, Shape{16, 16, 16}, Shape{16, 8, 8}};
  InferenceConfig cfg;
  std::uint64_t prev = 0;
  for (int t : {0, 1, 3, 5, 7, 9}) {
    cfg.rank = t;
    const auto f = refine_flops(shapes, 2, cfg);
    EXPECT_GT(f, prev) << t;
    prev = f;
  }
}

TEST(InitialGuess, OpenUnitIntervalAndDeterministic) {
  const auto a = initial_map_guess(5, 2, 3, 4, 4);
  const auto b = initial_map_guess(5, 2, 3, 4, 4);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t e = 0; e < 2; ++e) {
    ASSERT_EQ(a[e].size(), 3u);
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_EQ(a[e][t], b[e][t]);
      for (double x : a[e][t].data()) {
        EXPECT_GT(x, 0.0);
        EXPECT_LT(x, 1.0);
      }
    }
  }
}
