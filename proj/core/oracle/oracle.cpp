#include "vista/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vista/error.hpp"

namespace vista::oracle {
namespace {

void check_budget(const Tensor& t, OracleBudget budget) {
  if (t.size() > budget.max_elements) {
    throw Error(ErrorCode::kBudgetExceeded,
                "oracle input " + t.shape().to_string() + " exceeds " +
                    std::to_string(budget.max_elements) + " elements");
  }
}

// Minimal owning 3-D array so the oracle never calls production arithmetic.
struct Grid {
  std::size_t c = 0, h = 0, w = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(std::size_t c_, std::size_t h_, std::size_t w_)
      : c(c_), h(h_), w(w_), v(c_ * h_ * w_, 0.0) {}
  explicit Grid(const Tensor& t)
      : c(t.dim(0)), h(t.dim(1)), w(t.dim(2)),
        v(t.data().begin(), t.data().end()) {}

  double& operator()(std::size_t i, std::size_t y, std::size_t x) {
    return v[(i * h + y) * w + x];
  }
  double operator()(std::size_t i, std::size_t y, std::size_t x) const {
    return v[(i * h + y) * w + x];
  }
  Tensor tensor() const { return Tensor(Shape{c, h, w}, v); }
};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Grid conv(const Grid& in, const Tensor& k, int stride, int pad) {
  const std::size_t cout = k.dim(0), cin = k.dim(1), kh = k.dim(2), kw = k.dim(3);
  if (cin != in.c) {
    throw Error(ErrorCode::kShapeMismatch, "naive_conv2d: channel mismatch");
  }
  const long ph = pad < 0 ? static_cast<long>(kh / 2) : pad;
  const long pw = pad < 0 ? static_cast<long>(kw / 2) : pad;
  const long oh = (static_cast<long>(in.h) + 2 * ph - static_cast<long>(kh)) / stride + 1;
  const long ow = (static_cast<long>(in.w) + 2 * pw - static_cast<long>(kw)) / stride + 1;
  Grid out(cout, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow));
  for (std::size_t o = 0; o < cout; ++o)
    for (long y = 0; y < oh; ++y)
      for (long x = 0; x < ow; ++x) {
        double s = 0.0;
        for (std::size_t i = 0; i < cin; ++i)
          for (std::size_t a = 0; a < kh; ++a)
            for (std::size_t b = 0; b < kw; ++b) {
              const long iy = y * stride - ph + static_cast<long>(a);
              const long ix = x * stride - pw + static_cast<long>(b);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) ||
                  ix >= static_cast<long>(in.w))
                continue;
              s += k[((o * cin + i) * kh + a) * kw + b] *
                   in(i, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
        out(o, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s;
      }
  return out;
}

// Source coordinate of output index i under the half-pixel convention.
double source_coord(std::size_t i, std::size_t in, std::size_t out) {
  const double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in) /
                       static_cast<double>(out) - 0.5;
  return s < 0.0 ? 0.0 : s;
}

Grid resize(const Grid& in, std::size_t oh, std::size_t ow) {
  Grid out(in.c, oh, ow);
  for (std::size_t ch = 0; ch < in.c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const double sy = source_coord(y, in.h, oh);
        const double sx = source_coord(x, in.w, ow);
        const std::size_t y0 = std::min(static_cast<std::size_t>(std::floor(sy)), in.h - 1);
        const std::size_t x0 = std::min(static_cast<std::size_t>(std::floor(sx)), in.w - 1);
        const std::size_t y1 = y0 + 1 < in.h ? y0 + 1 : y0;
        const std::size_t x1 = x0 + 1 < in.w ? x0 + 1 : x0;
        const double dy = y1 == y0 ? 0.0 : sy - static_cast<double>(y0);
        const double dx = x1 == x0 ? 0.0 : sx - static_cast<double>(x0);
        out(ch, y, x) = in(ch, y0, x0) * (1 - dy) * (1 - dx) +
                        in(ch, y0, x1) * (1 - dy) * dx +
                        in(ch, y1, x0) * dy * (1 - dx) +
                        in(ch, y1, x1) * dy * dx;
      }
  return out;
}

// a[c,y,x] = sum_t m_t[y,x] v_t[c]
Grid gate_grid(const std::vector<Tensor>& maps, const std::vector<Tensor>& vecs,
               std::size_t c, std::size_t h, std::size_t w) {
  Grid g(c, h, w);
  for (std::size_t t = 0; t < maps.size(); ++t)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          g(ch, y, x) += maps[t][y * w + x] * vecs[t][ch];
  return g;
}

std::vector<double> softmax_loop(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (double& x : out) x /= z;
  return out;
}

Tensor m_update(const Grid& z, const Grid& msg, const Tensor& v, double bias) {
  Tensor m(Shape{z.h, z.w});
  for (std::size_t y = 0; y < z.h; ++y)
    for (std::size_t x = 0; x < z.w; ++x) {
      double s = bias;
      for (std::size_t ch = 0; ch < z.c; ++ch) s += v[ch] * z(ch, y, x) * msg(ch, y, x);
      m[y * z.w + x] = logistic(s);
    }
  return m;
}

Tensor v_update(const Grid& z, const Grid& msg, const Tensor& m, const Tensor& bias) {
  std::vector<double> logits(z.c);
  for (std::size_t ch = 0; ch < z.c; ++ch) {
    double s = bias.empty() ? 0.0 : bias[ch];
    for (std::size_t y = 0; y < z.h; ++y)
      for (std::size_t x = 0; x < z.w; ++x)
        s += m[y * z.w + x] * z(ch, y, x) * msg(ch, y, x);
    logits[ch] = s;
  }
  return Tensor(Shape{z.c}, softmax_loop(logits));
}

}  // namespace

Tensor naive_conv2d(const Tensor& input, const Tensor& kernels, int stride,
                    int pad, OracleBudget budget) {
  check_budget(input, budget);
  check_budget(kernels, budget);
  return conv(Grid(input), kernels, stride, pad).tensor();
}

Tensor naive_resize_bilinear(const Tensor& input, std::size_t out_h,
                             std::size_t out_w, OracleBudget budget) {
  check_budget(input, budget);
  return resize(Grid(input), out_h, out_w).tensor();
}

Tensor naive_z_step(const Tensor& f_r, std::span<const Tensor> messages,
                    std::span<const StructuredAttention> atts,
                    const Tensor& precision, OracleBudget budget) {
  check_budget(f_r, budget);
  const Grid f(f_r);
  Grid z(f.c, f.h, f.w);
  for (std::size_t ch = 0; ch < f.c; ++ch)
    for (std::size_t y = 0; y < f.h; ++y)
      for (std::size_t x = 0; x < f.w; ++x) {
        const std::size_t p = y * f.w + x;
        const double b = precision[(ch * f.h + y) * f.w + x];
        double s = b * f(ch, y, x);
        for (std::size_t e = 0; e < messages.size(); ++e) {
          const double msg = messages[e][(ch * f.h + y) * f.w + x];
          if (atts[e].rank() == 0) {
            s += msg;
            continue;
          }
          for (std::size_t t = 0; t < atts[e].rank(); ++t) {
            s += atts[e].maps()[t][p] * atts[e].vectors()[t][ch] * msg;
          }
        }
        z(ch, y, x) = s / b;
      }
  return z.tensor();
}

Tensor naive_m_step(const Tensor& z_r, const Tensor& message, const Tensor& v_bar,
                    double bias, OracleBudget budget) {
  check_budget(z_r, budget);
  return m_update(Grid(z_r), Grid(message), v_bar, bias);
}

Tensor naive_v_step(const Tensor& z_r, const Tensor& message, const Tensor& m_bar,
                    const Tensor& bias, OracleBudget budget) {
  check_budget(z_r, budget);
  return v_update(Grid(z_r), Grid(message), m_bar, bias);
}

Tensor naive_k_step(const Tensor& f_r, const Tensor& f_e, const Tensor& z_r,
                    const Tensor& z_e, const StructuredAttention& att,
                    OracleBudget budget) {
  if (f_r.size() * f_e.size() > budget.max_elements) {
    throw Error(ErrorCode::kBudgetExceeded, "naive_k_step: kernel too large");
  }
  const Grid fr(f_r), fe(f_e), zr(z_r), ze(z_e);
  Tensor out(Shape{fr.c, fr.h, fr.w, fe.c, fe.h, fe.w});
  std::size_t idx = 0;
  for (std::size_t c = 0; c < fr.c; ++c)
    for (std::size_t y = 0; y < fr.h; ++y)
      for (std::size_t x = 0; x < fr.w; ++x) {
        double gate = 0.0;
        for (std::size_t t = 0; t < att.rank(); ++t)
          gate += att.maps()[t][y * fr.w + x] * att.vectors()[t][c];
        for (std::size_t c2 = 0; c2 < fe.c; ++c2)
          for (std::size_t y2 = 0; y2 < fe.h; ++y2)
            for (std::size_t x2 = 0; x2 < fe.w; ++x2)
              out[idx++] = fr(c, y, x) * fe(c2, y2, x2) +
                           gate * zr(c, y, x) * ze(c2, y2, x2);
      }
  return out;
}

double naive_energy(const Tensor& f_r, std::span<const Tensor> f_e,
                    const Tensor& z_r, std::span<const Tensor> z_e,
                    std::span<const StructuredAttention> atts,
                    std::span<const Tensor> kernels, const Tensor& precision,
                    OracleBudget budget) {
  check_budget(f_r, budget);
  double unary_z = 0.0;
  for (std::size_t i = 0; i < f_r.size(); ++i) {
    unary_z += -0.5 * precision[i] * (z_r[i] - f_r[i]) * (z_r[i] - f_r[i]);
  }
  const Grid fr(f_r);
  double pairwise = 0.0, unary_k = 0.0;
  for (std::size_t e = 0; e < f_e.size(); ++e) {
    const std::size_t ne = f_e[e].size();
    for (std::size_t c = 0; c < fr.c; ++c)
      for (std::size_t y = 0; y < fr.h; ++y)
        for (std::size_t x = 0; x < fr.w; ++x) {
          const std::size_t i = (c * fr.h + y) * fr.w + x;
          for (std::size_t j = 0; j < ne; ++j) {
            const double k = kernels[e][i * ne + j];
            for (std::size_t t = 0; t < atts[e].rank(); ++t) {
              pairwise += atts[e].maps()[t][y * fr.w + x] * atts[e].vectors()[t][c] *
                          z_r[i] * k * z_e[e][j];
            }
            const double d = k - f_r[i] * f_e[e][j];
            unary_k += -0.5 * d * d;
          }
        }
  }
  return unary_z + pairwise + unary_k;
}

NaiveRefineResult naive_refine_scale(
    const MultiScaleFeatures& f, const KernelBank& bank,
    const AttentionParams& params, const InferenceConfig& cfg,
    const std::vector<std::vector<Tensor>>& initial_maps, OracleBudget budget) {
  for (const Tensor& t : f.features) check_budget(t, budget);
  const std::size_t S = f.features.size();
  const Grid fr(f.receiving_feature());
  const std::size_t C = fr.c, H = fr.h, W = fr.w;
  const bool gated = cfg.variant != AttentionVariant::kNone && cfg.rank > 0;
  const std::size_t T = gated ? static_cast<std::size_t>(cfg.rank) : 0;
  const auto variant = cfg.variant;
  const bool upd_m = variant == AttentionVariant::kStructured ||
                     variant == AttentionVariant::kSpatialOnly;
  const bool upd_v = variant == AttentionVariant::kStructured ||
                     variant == AttentionVariant::kChannelOnly;

  NaiveRefineResult res;
  res.maps.assign(S, {});
  res.vectors.assign(S, {});
  for (std::size_t e = 0; e < S; ++e) {
    for (std::size_t t = 0; t < T; ++t) {
      if (variant == AttentionVariant::kDeterministicLowRank) {
        Tensor m(Shape{H, W});
        for (std::size_t p = 0; p < H * W; ++p) {
          m[p] = logistic(params.lowrank_maps[e][t][p]);
        }
        std::vector<double> logits(C);
        for (std::size_t c = 0; c < C; ++c) logits[c] = params.lowrank_vectors[e][t][c];
        res.maps[e].push_back(m);
        res.vectors[e].push_back(Tensor(Shape{C}, softmax_loop(logits)));
      } else {
        res.maps[e].push_back(variant == AttentionVariant::kChannelOnly
                                  ? Tensor(Shape{H, W}, 1.0)
                                  : initial_maps[e][t]);
        res.vectors[e].push_back(Tensor(Shape{C}, 1.0 / static_cast<double>(C)));
      }
    }
  }

  std::vector<Grid> fields(S);
  Grid z;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<Grid> emitted(S), msgs(S);
    for (std::size_t e = 0; e < S; ++e) {
      emitted[e] = resize(conv(Grid(f.features[e]), bank.self_kernels[e], 1, -1), H, W);
      msgs[e] = conv(emitted[e], bank.cross_kernels[e], 1, -1);
      if (it > 0) {
        for (std::size_t i = 0; i < msgs[e].v.size(); ++i) {
          msgs[e].v[i] *= 2.0 * logistic(fields[e].v[i]);
        }
      }
    }

    z = Grid(C, H, W);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          double s = 0.0;
          for (std::size_t e = 0; e < S; ++e) {
            double gate = gated ? 0.0 : 1.0;
            for (std::size_t t = 0; t < T; ++t)
              gate += res.maps[e][t][y * W + x] * res.vectors[e][t][c];
            s += gate * msgs[e](c, y, x);
          }
          z(c, y, x) = fr(c, y, x) + s / cfg.precision;
        }

    if (gated && (upd_m || upd_v)) {
      for (std::size_t e = 0; e < S; ++e) {
        for (std::size_t t = 0; t < T; ++t) {
          if (upd_m) {
            res.maps[e][t] = m_update(z, msgs[e], res.vectors[e][t],
                                      params.map_bias[e][t][0]);
          }
          if (upd_v) {
            res.vectors[e][t] = v_update(z, msgs[e], res.maps[e][t],
                                         params.vector_bias[e][t]);
          }
        }
      }
    }

    if (!gated) break;
    for (std::size_t e = 0; e < S; ++e) {
      const Grid gate = gated ? gate_grid(res.maps[e], res.vectors[e], C, H, W)
                              : Grid();
      Grid input(2 * C, H, W);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y)
          for (std::size_t x = 0; x < W; ++x) {
            const double a = gated ? gate(c, y, x) : 1.0;
            input(c, y, x) = fr(c, y, x) + z(c, y, x) * a;
            input(C + c, y, x) = emitted[e](c, y, x);
          }
      fields[e] = conv(input, bank.kstep_kernels[e], 1, -1);
    }
  }

  res.hidden = z.tensor();
  if (!gated) {
    res.refined = z.tensor();
    return res;
  }
  Grid modulated(C, H, W);
  for (std::size_t i = 0; i < modulated.v.size(); ++i) {
    double g = 0.0;
    for (std::size_t e = 0; e < S; ++e) g += fields[e].v[i];
    modulated.v[i] = z.v[i] * 2.0 * logistic(g);
  }
  const Grid out = conv(modulated, bank.out_kernel, 1, -1);
  Grid refined(C, H, W);
  for (std::size_t i = 0; i < refined.v.size(); ++i) refined.v[i] = fr.v[i] + out.v[i];
  res.refined = refined.tensor();
  res.hidden = z.tensor();
  return res;
}

std::vector<double> singular_values(std::vector<double> a, std::size_t rows,
                                    std::size_t cols) {
  // One-sided Jacobi: rotate column pairs until mutually orthogonal; the
  // column norms are then the singular values.
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i + 1 < cols; ++i) {
      for (std::size_t j = i + 1; j < cols; ++j) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
          const double ai = a[r * cols + i], aj = a[r * cols + j];
          alpha += ai * ai;
          beta += aj * aj;
          gamma += ai * aj;
        }
        if (gamma == 0.0) continue;
        const double scale = std::sqrt(alpha * beta);
        if (scale == 0.0) continue;
        off = std::max(off, std::abs(gamma) / scale);
        if (std::abs(gamma) <= 1e-15 * scale) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < rows; ++r) {
          const double ai = a[r * cols + i], aj = a[r * cols + j];
          a[r * cols + i] = c * ai - s * aj;
          a[r * cols + j] = s * ai + c * aj;
        }
      }
    }
    if (off <= 1e-15) break;
  }
  std::vector<double> sv(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double n = 0.0;
    for (std::size_t r = 0; r < rows; ++r) n += a[r * cols + j] * a[r * cols + j];
    sv[j] = std::sqrt(n);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

std::size_t matricization_rank(const Tensor& a, double tol, OracleBudget budget) {
  check_budget(a, budget);
  if (a.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                "matricization_rank needs [C,H,W], got " + a.shape().to_string());
  }
  const std::size_t c = a.dim(0), p = a.dim(1) * a.dim(2);
  std::vector<double> m(p * c);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < p; ++i) m[i * c + ch] = a[ch * p + i];
  const auto sv = singular_values(std::move(m), p, c);
  if (sv.empty() || sv[0] == 0.0) return 0;
  std::size_t rank = 0;
  for (double s : sv) rank += s > tol * sv[0];
  return rank;
}

}  // namespace vista::oracle
