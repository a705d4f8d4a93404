#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace vista {

/// Ordered list of positive extents, e.g. {C, H, W}, {P} or {C}.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t numel() const noexcept { return numel_; }

  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::size_t numel_ = 0;
};

/// Dense row-major tensor of doubles. Plain value type: copies are deep and
/// every free function below returns a new tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
  static Tensor scalar(double value) { return Tensor(Shape{1}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t rank() const noexcept { return shape_.rank(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t c, std::size_t h, std::size_t w);
  double at(std::size_t c, std::size_t h, std::size_t w) const;

  /// Same data viewed with another shape of equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;
  double item() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Elementwise arithmetic on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
double sum(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Cross-correlation with zero padding. input [Cin,H,W], kernels
/// [Cout,Cin,kh,kw] with odd kh, kw. Output [Cout,H',W'] with
/// H' = (H + 2*pad - kh) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride = 1,
              int zero_pad = -1);

/// conv2d with "same" padding for odd kernels (pad = kh / 2).
inline Tensor conv2d_same(const Tensor& input, const Tensor& kernels) {
  return conv2d(input, kernels, 1, -1);
}

/// Bilinear resize, align_corners = false: output pixel i samples the source
/// at (i + 0.5) * in / out - 0.5, clamped to the valid range.
Tensor resize_bilinear(const Tensor& input, std::size_t out_h,
                       std::size_t out_w);

/// Adjoint of resize_bilinear for a fixed input size.
Tensor resize_bilinear_transpose(const Tensor& grad_out, std::size_t in_h,
                                 std::size_t in_w);

/// Max-subtracted softmax over a 1-D tensor.
Tensor softmax(const Tensor& input);

/// Elementwise logistic function, overflow safe in both directions.
Tensor sigmoid_map(const Tensor& input);

/// out[c,h,w] = m[h,w] * v[c].
Tensor outer_map_vec(const Tensor& m, const Tensor& v);

/// out[h,w] = sum_c v[c] * x[c,h,w].
Tensor contract_channels(const Tensor& x, const Tensor& v);

/// out[c] = sum_{h,w} m[h,w] * x[c,h,w].
Tensor contract_pixels(const Tensor& x, const Tensor& m);

/// Stacks [C_i,H,W] tensors along the channel axis.
Tensor concat_channels(std::span<const Tensor> parts);

// Serialization: "shape: d0 d1 ... dn\n" followed by little-endian float64
// payload.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

std::ostream& operator<<(std::ostream& out, const Shape& shape);

}  // namespace vista
