#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vista/error.hpp"
#include "vista/random.hpp"
#include "vista/tasks.hpp"

using namespace vista;

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

// Scalar-loop reference metrics, written straight from the definitions.
std::vector<double> ref_depth(const Tensor& pred, const Tensor& gt) {
  double ar = 0, sr = 0, sq = 0, lg = 0, d1 = 0, d2 = 0, d3 = 0;
  const double n = static_cast<double>(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double d = pred[i], g = gt[i];
    ar += std::fabs(d - g) / g;
    sr += (d - g) * (d - g) / g;
    sq += (d - g) * (d - g);
    lg += std::pow(std::log10(d) - std::log10(g), 2);
    const double r = std::max(d / g, g / d);
    d1 += r < 1.25;
    d2 += r < 1.25 * 1.25;
    d3 += r < 1.25 * 1.25 * 1.25;
  }
  return {ar / n, sr / n, std::sqrt(sq / n), std::sqrt(lg / n), d1 / n, d2 / n, d3 / n};
}

std::vector<double> ref_normals(const Tensor& pred, const Tensor& gt) {
  const std::size_t n = pred.dim(1) * pred.dim(2);
  std::vector<double> ang;
  for (std::size_t p = 0; p < n; ++p) {
    const double a[3] = {pred[p], pred[n + p], pred[2 * n + p]};
    const double b[3] = {gt[p], gt[n + p], gt[2 * n + p]};
    const double na = std::hypot(a[0], a[1], a[2]);
    double c = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / na;
    c = std::min(1.0, std::max(-1.0, c));
    ang.push_back(std::acos(c) * kDeg);
  }
  double mean = 0, f1 = 0, f2 = 0, f3 = 0;
  for (double x : ang) {
    mean += x;
    f1 += x < 11.25;
    f2 += x < 22.5;
    f3 += x < 30.0;
  }
  std::vector<double> sorted = ang;
  std::sort(sorted.begin(), sorted.end());
  const double k = static_cast<double>(n);
  return {mean / k, sorted[(n - 1) / 2], f1 / k, f2 / k, f3 / k};
}

std::vector<double> values(const MetricReport& r) {
  std::vector<double> v;
  for (const auto& [name, x] : r.values) v.push_back(x);
  return v;
}

Tensor unit_field(Rng& rng, std::size_t h, std::size_t w) {
  Tensor t = rng.normal_tensor(Shape{3, h, w}, 1.0);
  const std::size_t n = h * w;
  for (std::size_t p = 0; p < n; ++p) {
    const double s = std::hypot(t[p], t[n + p], t[2 * n + p]);
    for (std::size_t c = 0; c < 3; ++c) t[c * n + p] /= s;
  }
  return t;
}

}  // namespace

TEST(GenTask, Deterministic) {
  for (auto kind : {TaskKind::kDepth, TaskKind::kSegmentation, TaskKind::kNormals}) {
    const auto a = gen_task(kind, 16, 16, 42);
    const auto b = gen_task(kind, 16, 16, 42);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.target, b.target);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(a.image, gen_task(kind, 16, 16, 43).image);
  }
}

TEST(GenTask, DepthPositive) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto d = gen_task(TaskKind::kDepth, 16, 16, s);
    EXPECT_GT(*std::min_element(d.target.data().begin(), d.target.data().end()), 0.0);
  }
}

TEST(GenTask, NormalsUnitNorm) {
  const auto d = gen_task(TaskKind::kNormals, 16, 16, 3);
  const std::size_t n = 256;
  for (std::size_t p = 0; p < n; ++p) {
    const double s = std::hypot(d.target[p], d.target[n + p], d.target[2 * n + p]);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(GenTask, LabelsInRange) {
  TaskOptions opt;
  opt.classes = 5;
  const auto d = gen_task(TaskKind::kSegmentation, 16, 20, 4, opt);
  EXPECT_EQ(d.labels.labels.size(), 320u);
  for (int l : d.labels.labels) {
    EXPECT_GE(l, 0);
    EXPECT_LT(l, 5);
  }
}

TEST(GenTask, IndivisibleSizeRejected) {
  EXPECT_THROW(gen_task(TaskKind::kDepth, 10, 16, 1), Error);
  EXPECT_THROW(parse_task("stereo"), Error);
}

TEST(EvalDepth, Perfect) {
  Rng rng(1);
  const Tensor gt = rng.uniform_tensor(Shape{1, 4, 4}, 0.5, 3.0);
  const auto r = eval_depth(gt, gt, Tensor());
  for (const char* e : {"abs_rel", "sq_rel", "rms", "log_rms"}) EXPECT_EQ(r.at(e), 0.0);
  for (const char* d : {"delta1", "delta2", "delta3"}) EXPECT_EQ(r.at(d), 1.0);
}

TEST(EvalDepth, ScaledByBoundaryRatio) {
  // Integer depths keep 1.25 * gt and the ratio exact.
  Tensor gt(Shape{1, 2, 4}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor pred = scale(gt, 1.25);
  const auto r = eval_depth(pred, gt, Tensor());
  EXPECT_EQ(r.at("delta1"), 0.0);
  EXPECT_EQ(r.at("delta2"), 1.0);
  EXPECT_EQ(r.at("delta3"), 1.0);
  EXPECT_NEAR(r.at("abs_rel"), 0.25, 1e-12);
}

TEST(EvalDepth, MatchesScalarLoop) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Tensor gt = rng.uniform_tensor(Shape{1, 4, 5}, 0.1, 5.0);
    const Tensor pred = rng.uniform_tensor(Shape{1, 4, 5}, 0.1, 5.0);
    const auto got = values(eval_depth(pred, gt, Tensor()));
    const auto want = ref_depth(pred, gt);
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
  }
}

TEST(EvalDepth, NonPositivePredictionClamped) {
  const Tensor gt(Shape{1, 1, 2}, std::vector<double>{1.0, 2.0});
  const Tensor pred(Shape{1, 1, 2}, std::vector<double>{-1.0, 2.0});
  const auto r = eval_depth(pred, gt, Tensor());
  EXPECT_EQ(r.warnings, 1u);
  EXPECT_TRUE(std::isfinite(r.at("log_rms")));
  EXPECT_EQ(r.at("delta1"), 0.5);
}

TEST(EvalDepth, MaskSelectsPixels) {
  const Tensor gt(Shape{1, 1, 3}, std::vector<double>{1, 1, 1});
  const Tensor pred(Shape{1, 1, 3}, std::vector<double>{1, 9, 1});
  const Tensor mask(Shape{1, 3}, std::vector<double>{1, 0, 1});
  EXPECT_EQ(eval_depth(pred, gt, mask).at("abs_rel"), 0.0);
  EXPECT_THROW(eval_depth(pred, gt, Tensor(Shape{1, 3})), Error);
}

TEST(EvalSeg, Perfect) {
  const LabelMap gt{2, 3, {0, 1, 2, 3, 0, 1}};
  const auto r = eval_seg(gt, gt, 4);
  EXPECT_EQ(r.at("pix_acc"), 1.0);
  EXPECT_EQ(r.at("miou"), 1.0);
}

TEST(EvalSeg, Disjoint) {
  const LabelMap pred{2, 2, {0, 0, 0, 0}}, gt{2, 2, {1, 1, 1, 1}};
  const auto r = eval_seg(pred, gt, 2);
  EXPECT_EQ(r.at("pix_acc"), 0.0);
  EXPECT_EQ(r.at("miou"), 0.0);
}

TEST(EvalSeg, HandEnumeratedSevenTwelfths) {
  const LabelMap gt{2, 2, {0, 0, 1, 1}}, pred{2, 2, {0, 1, 1, 1}};
  const auto r = eval_seg(pred, gt, 2);
  EXPECT_NEAR(r.at("pix_acc"), 0.75, 1e-12);
  EXPECT_NEAR(r.at("miou"), 7.0 / 12.0, 1e-12);
  // an unused third class stays out of the mean
  EXPECT_NEAR(eval_seg(pred, gt, 3).at("miou"), 7.0 / 12.0, 1e-12);
}

TEST(EvalSeg, IgnoreAndErrors) {
  const LabelMap gt{1, 3, {0, kDefaultIgnoreLabel, 1}}, pred{1, 3, {0, 1, 1}};
  EXPECT_EQ(eval_seg(pred, gt, 2).at("pix_acc"), 1.0);
  const LabelMap none{1, 2, {kDefaultIgnoreLabel, kDefaultIgnoreLabel}};
  EXPECT_THROW(eval_seg(LabelMap{1, 2, {0, 0}}, none, 2), Error);
  EXPECT_THROW(eval_seg(LabelMap{1, 1, {2}}, LabelMap{1, 1, {0}}, 2), Error);
}

TEST(EvalNormals, Aligned) {
  Rng rng(3);
  const Tensor gt = unit_field(rng, 3, 3);
  const auto r = eval_normals(scale(gt, 2.0), gt, Tensor());
  EXPECT_NEAR(r.at("mean_angle"), 0.0, 1e-6);
  EXPECT_NEAR(r.at("median_angle"), 0.0, 1e-6);
  for (const char* f : {"within_11_25", "within_22_5", "within_30"}) EXPECT_EQ(r.at(f), 1.0);
}

TEST(EvalNormals, RotatedThirtyDegrees) {
  // gt along z, pred tilted 30 degrees about the y axis.
  const std::size_t n = 4;
  Tensor gt(Shape{3, 2, 2}), pred(Shape{3, 2, 2});
  for (std::size_t p = 0; p < n; ++p) {
    gt[2 * n + p] = 1.0;
    pred[p] = 0.5;
    pred[2 * n + p] = std::sqrt(3.0) / 2.0;
  }
  const auto r = eval_normals(pred, gt, Tensor());
  EXPECT_NEAR(r.at("mean_angle"), 30.0, 1e-9);
  EXPECT_EQ(r.at("within_30"), 0.0);
  EXPECT_EQ(r.at("within_11_25"), 0.0);
  EXPECT_EQ(r.at("within_22_5"), 0.0);
}

TEST(EvalNormals, ZeroNormIsNinetyDegrees) {
  Tensor gt(Shape{3, 1, 2});
  gt[4] = gt[5] = 1.0;
  Tensor pred = gt;
  pred[4] = 0.0;
  const auto r = eval_normals(pred, gt, Tensor());
  EXPECT_EQ(r.warnings, 1u);
  EXPECT_NEAR(r.at("mean_angle"), 45.0, 1e-12);
  EXPECT_EQ(r.at("median_angle"), 0.0);  // lower median of {0, 90}
}

TEST(EvalNormals, MatchesScalarLoop) {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const Tensor gt = unit_field(rng, 4, 4);
    const Tensor pred = rng.normal_tensor(Shape{3, 4, 4}, 1.0);
    const auto got = values(eval_normals(pred, gt, Tensor()));
    const auto want = ref_normals(pred, gt);
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-9);
  }
}

TEST(Metrics, PermutationInvariant) {
  Rng rng(5);
  const std::size_t n = 12;
  const Tensor gd = rng.uniform_tensor(Shape{1, 3, 4}, 0.5, 2.0);
  const Tensor pd = rng.uniform_tensor(Shape{1, 3, 4}, 0.5, 2.0);
  const Tensor gn = unit_field(rng, 3, 4);
  const Tensor pn = rng.normal_tensor(Shape{3, 3, 4}, 1.0);
  LabelMap gl{3, 4, {}}, pl{3, 4, {}};
  for (std::size_t i = 0; i < n; ++i) {
    gl.labels.push_back(static_cast<int>(rng.index(3)));
    pl.labels.push_back(static_cast<int>(rng.index(3)));
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = (i * 5 + 3) % n;
  Tensor gd2 = gd, pd2 = pd, gn2 = gn, pn2 = pn;
  LabelMap gl2 = gl, pl2 = pl;
  for (std::size_t i = 0; i < n; ++i) {
    gd2[i] = gd[perm[i]];
    pd2[i] = pd[perm[i]];
    gl2.labels[i] = gl.labels[perm[i]];
    pl2.labels[i] = pl.labels[perm[i]];
    for (std::size_t c = 0; c < 3; ++c) {
      gn2[c * n + i] = gn[c * n + perm[i]];
      pn2[c * n + i] = pn[c * n + perm[i]];
    }
  }
  const auto close = [](const MetricReport& a, const MetricReport& b) {
    for (std::size_t k = 0; k < a.values.size(); ++k)
      EXPECT_NEAR(a.values[k].second, b.values[k].second, 1e-12) << a.values[k].first;
  };
  close(eval_depth(pd, gd, Tensor()), eval_depth(pd2, gd2, Tensor()));
  close(eval_normals(pn, gn, Tensor()), eval_normals(pn2, gn2, Tensor()));
  close(eval_seg(pl, gl, 3), eval_seg(pl2, gl2, 3));
}

TEST(Metrics, ThresholdMonotoneAndBounded) {
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const auto d = eval_depth(rng.uniform_tensor(Shape{1, 4, 4}, 0.1, 3.0),
                              rng.uniform_tensor(Shape{1, 4, 4}, 0.1, 3.0), Tensor());
    EXPECT_LE(d.at("delta1"), d.at("delta2"));
    EXPECT_LE(d.at("delta2"), d.at("delta3"));
    const Tensor gt = unit_field(rng, 4, 4);
    const auto a = eval_normals(rng.normal_tensor(Shape{3, 4, 4}, 1.0), gt, Tensor());
    EXPECT_LE(a.at("within_11_25"), a.at("within_22_5"));
    EXPECT_LE(a.at("within_22_5"), a.at("within_30"));
    for (const auto& r : {d, a})
      for (const auto& [name, v] : r.values) EXPECT_GE(v, 0.0) << name;
  }
}

TEST(MetricAccumulator, PoolsLikeOneBigSample) {
  Rng rng(7);
  const Tensor g = rng.uniform_tensor(Shape{1, 2, 4}, 0.5, 2.0);
  const Tensor p = rng.uniform_tensor(Shape{1, 2, 4}, 0.5, 2.0);
  MetricAccumulator acc(TaskKind::kDepth, 0);
  Tensor g1(Shape{1, 1, 4}), g2(Shape{1, 1, 4}), p1(Shape{1, 1, 4}), p2(Shape{1, 1, 4});
  for (std::size_t i = 0; i < 4; ++i) {
    g1[i] = g[i];
    g2[i] = g[4 + i];
    p1[i] = p[i];
    p2[i] = p[4 + i];
  }
  acc.add_depth(p1, g1, Tensor());
  acc.add_depth(p2, g2, Tensor());
  const auto pooled = acc.report(), whole = eval_depth(p, g, Tensor());
  for (std::size_t k = 0; k < whole.values.size(); ++k)
    EXPECT_NEAR(pooled.values[k].second, whole.values[k].second, 1e-12);
}

TEST(ArgmaxLabels, PicksFirstMaximum) {
  const Tensor logits(Shape{3, 1, 2}, std::vector<double>{1, 5, 3, 5, 3, 0});
  EXPECT_EQ(argmax_labels(logits).labels, (std::vector<int>{1, 0}));
}
