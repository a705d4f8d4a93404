#include <gtest/gtest.h>

#include "vista/attention.hpp"
#include "vista/error.hpp"
#include "vista/oracle.hpp"
#include "vista/random.hpp"

using namespace vista;

namespace {

StructuredAttention random_att(Rng& rng, std::size_t t, std::size_t c, std::size_t h,
                               std::size_t w) {
  std::vector<Tensor> maps, vecs;
  for (std::size_t i = 0; i < t; ++i) {
    maps.push_back(rng.uniform_tensor(Shape{h, w}, 0.0, 1.0));
    vecs.push_back(softmax(rng.normal_tensor(Shape{c}, 1.0)));
  }
  return {maps, vecs};
}

}  // namespace

TEST(Assemble, OneHotVector) {
  const Tensor m(Shape{2, 2}, std::vector<double>{1, 0, 0, 1});
  const StructuredAttention att({m}, {Tensor(Shape{2}, std::vector<double>{1, 0})});
  const Tensor a = assemble(att);
  for (std::size_t p = 0; p < 4; ++p) {
    EXPECT_EQ(a[p], m[p]);
    EXPECT_EQ(a[4 + p], 0.0);
  }
}

TEST(Assemble, DuplicateFactorsDouble) {
  Rng rng(1);
  const Tensor m = rng.uniform_tensor(Shape{3, 2}, 0.0, 1.0);
  const Tensor v = softmax(rng.normal_tensor(Shape{4}, 1.0));
  const Tensor one = assemble(StructuredAttention({m}, {v}));
  const Tensor two = assemble(StructuredAttention({m, m}, {v, v}));
  EXPECT_LT(max_abs_diff(two, scale(one, 2.0)), 1e-15);
}

TEST(Assemble, RankThreeGeneric) {
  Rng rng(2);
  const Tensor a = assemble(random_att(rng, 3, 5, 4, 4));
  EXPECT_EQ(oracle::matricization_rank(a, 1e-10), 3u);
  std::vector<double> mat(16 * 5);
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t p = 0; p < 16; ++p) mat[p * 5 + c] = a[c * 16 + p];
  const auto sv = oracle::singular_values(mat, 16, 5);
  EXPECT_LT(sv[3], 1e-10 * sv[0]);
}

TEST(Assemble, RankZeroRejected) {
  try {
    assemble(StructuredAttention());
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(Assemble, RankBoundProperty) {
  Rng rng(3);
  for (int i = 0; i < 60; ++i) {
    const std::size_t c = 2 + rng.index(4), h = 2 + rng.index(3), w = 2 + rng.index(3);
    const std::size_t t = 1 + rng.index(std::min<std::size_t>(c, h * w) - 1);
    const Tensor a = assemble(random_att(rng, t, c, h, w));
    std::vector<double> mat(h * w * c);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < h * w; ++p) mat[p * c + ch] = a[ch * h * w + p];
    const auto sv = oracle::singular_values(mat, h * w, c);
    if (t < sv.size()) EXPECT_LT(sv[t], 1e-9 * sv[0]);
  }
}

TEST(Assemble, OneHotVectorTouchesOneChannel) {
  Rng rng(4);
  const Tensor m = rng.uniform_tensor(Shape{3, 3}, 0.1, 1.0);
  Tensor v(Shape{5});
  v[2] = 1.0;
  const Tensor a = assemble(StructuredAttention({m}, {v}));
  for (std::size_t c = 0; c < 5; ++c) {
    double mass = 0.0;
    for (std::size_t p = 0; p < 9; ++p) mass += std::abs(a[c * 9 + p]);
    if (c == 2) {
      EXPECT_GT(mass, 0.0);
    } else {
      EXPECT_EQ(mass, 0.0);
    }
  }
}

TEST(Assemble, LinearInEachFactor) {
  Rng rng(5);
  const Tensor m1 = rng.normal_tensor(Shape{2, 3}, 1.0), m2 = rng.normal_tensor(Shape{2, 3}, 1.0);
  const Tensor v1 = rng.normal_tensor(Shape{4}, 1.0), v2 = rng.normal_tensor(Shape{4}, 1.0);
  const auto a = [](const Tensor& m, const Tensor& v) {
    return assemble(StructuredAttention({m}, {v}));
  };
  EXPECT_LT(max_abs_diff(a(add(m1, m2), v1), add(a(m1, v1), a(m2, v1))), 1e-14);
  EXPECT_LT(max_abs_diff(a(m1, add(v1, v2)), add(a(m1, v1), a(m1, v2))), 1e-14);
  EXPECT_LT(max_abs_diff(a(scale(m1, 3.5), v1), scale(a(m1, v1), 3.5)), 1e-14);
  EXPECT_LT(max_abs_diff(a(m1, scale(v1, -2.0)), scale(a(m1, v1), -2.0)), 1e-14);
}

TEST(StructuredAttention, InconsistentFactorsRejected) {
  EXPECT_THROW(StructuredAttention({Tensor(Shape{2, 2})}, {}), Error);
  EXPECT_THROW(StructuredAttention({Tensor(Shape{2, 2}), Tensor(Shape{2, 3})},
                                   {Tensor(Shape{3}), Tensor(Shape{3})}),
               Error);
  EXPECT_THROW(StructuredAttention({Tensor(Shape{2, 2}), Tensor(Shape{2, 2})},
                                   {Tensor(Shape{3}), Tensor(Shape{4})}),
               Error);
}

TEST(ApplyGate, AllOnesIsIdentity) {
  Rng rng(6);
  const Tensor msg = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
  const StructuredAttention att({Tensor(Shape{3, 3}, 1.0)}, {Tensor(Shape{2}, 1.0)});
  EXPECT_EQ(apply_gate(msg, att), msg);
}

TEST(ApplyGate, ClosedGateZeroes) {
  Rng rng(7);
  const Tensor msg = rng.normal_tensor(Shape{2, 3, 3}, 1.0);
  const StructuredAttention att({Tensor(Shape{3, 3})}, {Tensor(Shape{2}, 0.5)});
  const Tensor out = apply_gate(msg, att);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(ApplyGate, MatchesScalarLoop) {
  Rng rng(8);
  const Tensor msg = rng.normal_tensor(Shape{3, 2, 4}, 1.0);
  const auto att = random_att(rng, 2, 3, 2, 4);
  const Tensor out = apply_gate(msg, att);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < 8; ++p) {
      double g = 0.0;
      for (std::size_t t = 0; t < 2; ++t) g += att.maps()[t][p] * att.vectors()[t][c];
      EXPECT_NEAR(out[c * 8 + p], msg[c * 8 + p] * g, 1e-12);
    }
}

TEST(ApplyGate, ShapeMismatch) {
  const StructuredAttention att({Tensor(Shape{3, 3})}, {Tensor(Shape{2})});
  try {
    apply_gate(Tensor(Shape{2, 3, 4}), att);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(MatricizationRank, Trivial) {
  EXPECT_EQ(oracle::matricization_rank(Tensor(Shape{3, 2, 2}), 1e-9), 0u);
  Rng rng(9);
  const Tensor m = rng.uniform_tensor(Shape{2, 2}, 0.5, 1.0);
  const Tensor v = rng.uniform_tensor(Shape{3}, 0.5, 1.0);
  EXPECT_EQ(oracle::matricization_rank(outer_map_vec(m, v), 1e-9), 1u);
}

TEST(MatricizationRank, BudgetEnforced) {
  oracle::OracleBudget small{10};
  try {
    oracle::matricization_rank(Tensor(Shape{3, 2, 2}), 1e-9, small);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBudgetExceeded);
  }
}

TEST(SingularValues, KnownDiagonal) {
  const std::vector<double> m{3, 0, 0, 0, -5, 0, 0, 0, 0, 0, 0, 1};
  const auto sv = oracle::singular_values(m, 4, 3);
  ASSERT_EQ(sv.size(), 3u);
  EXPECT_NEAR(sv[0], 5.0, 1e-14);
  EXPECT_NEAR(sv[1], 3.0, 1e-14);
  EXPECT_NEAR(sv[2], 1.0, 1e-14);
}
