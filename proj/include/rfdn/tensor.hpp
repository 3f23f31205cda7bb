#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfdn {

// Error taxonomy. The CLI maps these onto exit codes
// (usage/config -> 1, io/format -> 2, shape/numeric -> 3).
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using index_t = std::int64_t;

struct Shape {
  index_t n = 0, c = 0, h = 0, w = 0;

  index_t numel() const { return n * c * h * w; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

/// Dense 4-D array in NCHW layout, contiguous row-major storage.
/// Scalar is float for training/inference and double for gradient checking.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape s) : shape_(s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
      throw ShapeError("negative tensor dimension " + s.str());
    data_.assign(static_cast<std::size_t>(s.numel()), Scalar(0));
  }

  Tensor(index_t n, index_t c, index_t h, index_t w)
      : Tensor(Shape{n, c, h, w}) {}

  static Tensor full(Shape s, Scalar v) {
    Tensor t(s);
    t.data_.assign(t.data_.size(), v);
    return t;
  }

  const Shape& shape() const { return shape_; }
  index_t n() const { return shape_.n; }
  index_t c() const { return shape_.c; }
  index_t h() const { return shape_.h; }
  index_t w() const { return shape_.w; }
  index_t numel() const { return shape_.numel(); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](index_t i) { return data_[static_cast<std::size_t>(i)]; }
  Scalar operator[](index_t i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  Scalar& operator()(index_t n, index_t c, index_t y, index_t x) {
    return data_[static_cast<std::size_t>(offset(n, c, y, x))];
  }
  Scalar operator()(index_t n, index_t c, index_t y, index_t x) const {
    return data_[static_cast<std::size_t>(offset(n, c, y, x))];
  }

  index_t offset(index_t n, index_t c, index_t y, index_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape_);
    for (index_t i = 0; i < numel(); ++i) out[i] = static_cast<T>(data_[i]);
    return out;
  }

  bool all_finite() const {
    for (Scalar v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  void fill(Scalar v) { data_.assign(data_.size(), v); }

 private:
  Shape shape_;
  std::vector<Scalar> data_;
};

/// Learnable convolution parameters: (c_out, c_in, k, k) kernel plus bias.
template <typename Scalar>
struct ConvWeights {
  Tensor<Scalar> kernel;
  std::vector<Scalar> bias;

  ConvWeights() = default;
  ConvWeights(Tensor<Scalar> k, std::vector<Scalar> b)
      : kernel(std::move(k)), bias(std::move(b)) {
    if (kernel.h() != kernel.w())
      throw ShapeError("non-square convolution kernel " + kernel.shape().str());
    if (static_cast<index_t>(bias.size()) != kernel.n())
      throw ShapeError("bias length " + std::to_string(bias.size()) +
                       " does not match c_out " + std::to_string(kernel.n()));
  }

  index_t c_out() const { return kernel.n(); }
  index_t c_in() const { return kernel.c(); }
  int k() const { return static_cast<int>(kernel.h()); }

  template <typename T>
  ConvWeights<T> cast() const {
    std::vector<T> b(bias.begin(), bias.end());
    return ConvWeights<T>(kernel.template cast<T>(), std::move(b));
  }
};

}  // namespace rfdn
