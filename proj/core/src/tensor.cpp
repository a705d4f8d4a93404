#include "vista/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "vista/error.hpp"

namespace vista {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kBudgetExceeded: return "budget exceeded";
    case ErrorCode::kUnknownOp: return "unknown op";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kCorrupt: return "corrupt data";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kManifestMismatch: return "manifest mismatch";
    case ErrorCode::kDiverged: return "diverged";
  }
  return "error";
}

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) {
    if (d == 0) {
      throw Error(ErrorCode::kInvalidArgument, "shape extents must be >= 1");
    }
    if (n > std::numeric_limits<std::size_t>::max() / d) {
      throw Error(ErrorCode::kInvalidArgument, "shape element count overflows");
    }
    n *= d;
  }
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": " +
                                               a.shape().to_string() + " vs " +
                                               b.shape().to_string());
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(what) + " must have rank " + std::to_string(rank) +
                    ", got " + t.shape().to_string());
  }
}

// One output coordinate of a bilinear resize: two taps and the weight of the
// second.
struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

std::vector<Tap> resize_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    double frac = src - static_cast<double>(lo);
    if (hi == lo) frac = 0.0;
    taps[i] = {lo, hi, frac};
  }
  return taps;
}

}  // namespace

Shape::Shape(std::initializer_list<std::size_t> dims)
    : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims)
    : dims_(std::move(dims)), numel_(checked_numel(dims_)) {
  if (dims_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "shape needs at least one extent");
  }
}

std::string Shape::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << ',';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

std::ostream& operator<<(std::ostream& out, const Shape& shape) {
  return out << shape.to_string();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw Error(ErrorCode::kShapeMismatch,
                "data length " + std::to_string(data_.size()) +
                    " does not match shape " + shape_.to_string());
  }
}

double& Tensor::at(std::size_t c, std::size_t h, std::size_t w) {
  return data_[(c * shape_[1] + h) * shape_[2] + w];
}

double Tensor::at(std::size_t c, std::size_t h, std::size_t w) const {
  return data_[(c * shape_[1] + h) * shape_[2] + w];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != shape_.numel()) {
    throw Error(ErrorCode::kShapeMismatch, "cannot reshape " +
                                               shape_.to_string() + " to " +
                                               shape.to_string());
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "item() on non-scalar " + shape_.to_string());
  }
  return data_[0];
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& x : out.data()) x *= s;
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
  return out;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride,
              int zero_pad) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernels.dim(0), kh = kernels.dim(2),
                    kw = kernels.dim(3);
  if (kernels.dim(1) != cin) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d: input " + input.shape().to_string() +
                    " has " + std::to_string(cin) + " channels but kernels " +
                    kernels.shape().to_string() + " expect " +
                    std::to_string(kernels.dim(1)));
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "conv2d: kernel extents must be odd, got " +
                    kernels.shape().to_string());
  }
  if (stride < 1) {
    throw Error(ErrorCode::kInvalidArgument, "conv2d: stride must be >= 1");
  }
  const auto pad_h = static_cast<std::ptrdiff_t>(zero_pad < 0 ? kh / 2 : zero_pad);
  const auto pad_w = static_cast<std::ptrdiff_t>(zero_pad < 0 ? kw / 2 : zero_pad);
  const std::ptrdiff_t span_h = static_cast<std::ptrdiff_t>(h) + 2 * pad_h -
                                static_cast<std::ptrdiff_t>(kh);
  const std::ptrdiff_t span_w = static_cast<std::ptrdiff_t>(w) + 2 * pad_w -
                                static_cast<std::ptrdiff_t>(kw);
  if (span_h < 0 || span_w < 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "conv2d: padding too small for kernel " +
                    kernels.shape().to_string() + " on input " +
                    input.shape().to_string());
  }
  const std::size_t oh = static_cast<std::size_t>(span_h / stride) + 1;
  const std::size_t ow = static_cast<std::size_t>(span_w / stride) + 1;

  Tensor out(Shape{cout, oh, ow});
  auto o = out.data();
  auto x = input.data();
  auto k = kernels.data();
  for (std::size_t co = 0; co < cout; ++co) {
    double* oplane = o.data() + co * oh * ow;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* iplane = x.data() + ci * h * w;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const double wgt = k[((co * cin + ci) * kh + ky) * kw + kx];
          if (wgt == 0.0) continue;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride -
                                      pad_h + static_cast<std::ptrdiff_t>(ky);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* irow = iplane + static_cast<std::size_t>(iy) * w;
            double* orow = oplane + oy * ow;
            // Valid ox range: 0 <= ox*stride - pad_w + kx < w.
            const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kx) - pad_w;
            std::ptrdiff_t ox_lo = 0;
            if (off < 0) ox_lo = (-off + stride - 1) / stride;
            std::ptrdiff_t ox_hi = static_cast<std::ptrdiff_t>(ow);
            const std::ptrdiff_t lim = (static_cast<std::ptrdiff_t>(w) - 1 - off);
            if (lim < 0) continue;
            ox_hi = std::min(ox_hi, lim / stride + 1);
            if (stride == 1) {
              for (std::ptrdiff_t ox = ox_lo; ox < ox_hi; ++ox) {
                orow[ox] += wgt * irow[ox + off];
              }
            } else {
              for (std::ptrdiff_t ox = ox_lo; ox < ox_hi; ++ox) {
                orow[ox] += wgt * irow[ox * stride + off];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& input, std::size_t out_h,
                       std::size_t out_w) {
  require_rank(input, 3, "resize_bilinear input");
  if (out_h == 0 || out_w == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "resize_bilinear: output extents must be >= 1");
  }
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h == out_h && w == out_w) return input;
  const auto ty = resize_taps(h, out_h);
  const auto tx = resize_taps(w, out_w);
  Tensor out(Shape{c, out_h, out_w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < out_h; ++i) {
      const Tap& a = ty[i];
      for (std::size_t j = 0; j < out_w; ++j) {
        const Tap& b = tx[j];
        const double top = input.at(ch, a.lo, b.lo) * (1.0 - b.frac) +
                           input.at(ch, a.lo, b.hi) * b.frac;
        const double bot = input.at(ch, a.hi, b.lo) * (1.0 - b.frac) +
                           input.at(ch, a.hi, b.hi) * b.frac;
        out.at(ch, i, j) = top * (1.0 - a.frac) + bot * a.frac;
      }
    }
  }
  return out;
}

Tensor resize_bilinear_transpose(const Tensor& grad_out, std::size_t in_h,
                                 std::size_t in_w) {
  require_rank(grad_out, 3, "resize_bilinear_transpose input");
  const std::size_t c = grad_out.dim(0), oh = grad_out.dim(1),
                    ow = grad_out.dim(2);
  if (oh == in_h && ow == in_w) return grad_out;
  const auto ty = resize_taps(in_h, oh);
  const auto tx = resize_taps(in_w, ow);
  Tensor out(Shape{c, in_h, in_w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < oh; ++i) {
      const Tap& a = ty[i];
      for (std::size_t j = 0; j < ow; ++j) {
        const Tap& b = tx[j];
        const double g = grad_out.at(ch, i, j);
        out.at(ch, a.lo, b.lo) += g * (1.0 - a.frac) * (1.0 - b.frac);
        out.at(ch, a.lo, b.hi) += g * (1.0 - a.frac) * b.frac;
        out.at(ch, a.hi, b.lo) += g * a.frac * (1.0 - b.frac);
        out.at(ch, a.hi, b.hi) += g * a.frac * b.frac;
      }
    }
  }
  return out;
}

namespace {
// Probabilities are kept inside the open unit interval; saturated logistic
// values would otherwise round to exactly 0 or 1.
constexpr double kProbFloor = std::numeric_limits<double>::min();
constexpr double kProbCeil = 1.0 - std::numeric_limits<double>::epsilon() / 2;
}  // namespace

Tensor softmax(const Tensor& input) {
  require_rank(input, 1, "softmax input");
  Tensor out = input;
  auto o = out.data();
  const double mx = *std::max_element(o.begin(), o.end());
  double z = 0.0;
  for (double& x : o) {
    x = std::exp(x - mx);
    z += x;
  }
  for (double& x : o) x = std::max(x / z, kProbFloor);
  return out;
}

Tensor sigmoid_map(const Tensor& input) {
  Tensor out = input;
  for (double& x : out.data()) {
    if (x >= 0.0) {
      x = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      x = e / (1.0 + e);
    }
    x = std::clamp(x, kProbFloor, kProbCeil);
  }
  return out;
}

Tensor outer_map_vec(const Tensor& m, const Tensor& v) {
  require_rank(m, 2, "outer_map_vec map");
  require_rank(v, 1, "outer_map_vec vector");
  const std::size_t c = v.dim(0), p = m.size();
  Tensor out(Shape{c, m.dim(0), m.dim(1)});
  auto o = out.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < p; ++i) o[ch * p + i] = m[i] * v[ch];
  }
  return out;
}

Tensor contract_channels(const Tensor& x, const Tensor& v) {
  require_rank(x, 3, "contract_channels input");
  require_rank(v, 1, "contract_channels weights");
  if (v.dim(0) != x.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch,
                "contract_channels: " + x.shape().to_string() + " vs " +
                    v.shape().to_string());
  }
  const std::size_t c = x.dim(0), p = x.dim(1) * x.dim(2);
  Tensor out(Shape{x.dim(1), x.dim(2)});
  auto o = out.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double wgt = v[ch];
    const double* row = x.data().data() + ch * p;
    for (std::size_t i = 0; i < p; ++i) o[i] += wgt * row[i];
  }
  return out;
}

Tensor contract_pixels(const Tensor& x, const Tensor& m) {
  require_rank(x, 3, "contract_pixels input");
  require_rank(m, 2, "contract_pixels weights");
  if (m.dim(0) != x.dim(1) || m.dim(1) != x.dim(2)) {
    throw Error(ErrorCode::kShapeMismatch,
                "contract_pixels: " + x.shape().to_string() + " vs " +
                    m.shape().to_string());
  }
  const std::size_t c = x.dim(0), p = m.size();
  Tensor out(Shape{c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* row = x.data().data() + ch * p;
    double s = 0.0;
    for (std::size_t i = 0; i < p; ++i) s += m[i] * row[i];
    out[ch] = s;
  }
  return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "concat_channels: no inputs");
  }
  std::size_t channels = 0;
  for (const Tensor& t : parts) {
    require_rank(t, 3, "concat_channels input");
    if (t.dim(1) != parts[0].dim(1) || t.dim(2) != parts[0].dim(2)) {
      throw Error(ErrorCode::kShapeMismatch,
                  "concat_channels: " + t.shape().to_string() + " vs " +
                      parts[0].shape().to_string());
    }
    channels += t.dim(0);
  }
  std::vector<double> data;
  data.reserve(channels * parts[0].dim(1) * parts[0].dim(2));
  for (const Tensor& t : parts) {
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor(Shape{channels, parts[0].dim(1), parts[0].dim(2)},
                std::move(data));
}

void write_tensor(std::ostream& out, const Tensor& t) {
  out << "shape:";
  for (std::size_t d : t.shape().dims()) out << ' ' << d;
  out << '\n';
  for (double x : t.data()) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) {
      bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
    }
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing tensor payload");
}

Tensor read_tensor(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kCorrupt, "missing tensor header");
  }
  std::istringstream hs(line);
  std::string tag;
  hs >> tag;
  if (tag != "shape:") {
    throw Error(ErrorCode::kCorrupt, "bad tensor header '" + line + "'");
  }
  std::vector<std::size_t> dims;
  std::size_t d = 0;
  while (hs >> d) dims.push_back(d);
  if (!hs.eof() || dims.empty()) {
    throw Error(ErrorCode::kCorrupt, "bad tensor header '" + line + "'");
  }
  Shape shape(std::move(dims));
  std::vector<double> data(shape.numel());
  for (double& x : data) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (in.gcount() != 8) {
      throw Error(ErrorCode::kCorrupt,
                  "truncated payload for tensor " + shape.to_string());
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    }
    x = std::bit_cast<double>(bits);
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace vista
