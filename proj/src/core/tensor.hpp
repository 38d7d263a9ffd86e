#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace scnn {

using Shape = std::vector<int64_t>;

enum class Dtype { f32, f64 };

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline int64_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), int64_t{1}, std::multiplies<int64_t>());
}

// Dense row-major n-dimensional array. Value type: copy/move like a vector.
// Shape is fixed at construction; reshape returns a tensor over the same
// element order.
template <typename T>
class Tensor {
public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<size_t>(shape_numel(shape_)), T{0});
  }

  Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<size_t>(shape_numel(shape_)), fill);
  }

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape();
    if (static_cast<int64_t>(data_.size()) != shape_numel(shape_))
      raise(ErrorCode::shape, "tensor_create: value list length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T{1}); }

  const Shape& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_[i]; }
  size_t ndim() const { return shape_.size(); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  static constexpr Dtype dtype() { return sizeof(T) == 4 ? Dtype::f32 : Dtype::f64; }

  // Same flat data, new shape. Element order is untouched.
  Tensor reshape(Shape new_shape) const {
    if (shape_numel(new_shape) != numel())
      raise(ErrorCode::shape,
            "reshape: " + shape_str(shape_) + " has " + std::to_string(numel()) +
                " elements, cannot view as " + shape_str(new_shape));
    Tensor out;
    out.shape_ = std::move(new_shape);
    out.data_ = data_;
    return out;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

private:
  void validate_shape() const {
    if (shape_.empty()) raise(ErrorCode::shape, "tensor shape must have at least one dimension");
    for (int64_t d : shape_)
      if (d < 1) raise(ErrorCode::shape, "tensor dimensions must be >= 1, got " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

// c[i][j] = sum_k a[i][k] * b[k][j], k ascending for every output element.
// Threads split rows of c, so results are identical for any thread count.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2)
    raise(ErrorCode::shape, "matmul: expected 2-d operands, got " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    raise(ErrorCode::shape,
          "matmul: inner dimensions disagree: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor<T> c({m, n});
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
  auto rows = [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) {
      T* crow = pc + i * n;
      const T* arow = pa + i * k;
      for (int64_t kk = 0; kk < k; ++kk) {
        const T av = arow[kk];
        const T* brow = pb + kk * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  };
  // Threading pays only for real workloads; tiny products stay serial.
  if (m * n * k >= (1 << 14))
    parallel_for_chunks(m, rows);
  else
    rows(0, m);
  return c;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  if (a.ndim() != 2) raise(ErrorCode::shape, "transpose2d: expected 2-d tensor");
  const int64_t m = a.dim(0), n = a.dim(1);
  Tensor<T> out({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

// Uniform on [-b, b] with b = sqrt(6 / fan_in), the scaling suited to
// ReLU stacks. Deterministic under the given stream.
template <typename T>
Tensor<T> kaiming_uniform_init(Shape shape, int64_t fan_in, Rng rng) {
  if (fan_in < 1) raise(ErrorCode::config, "kaiming_uniform_init: fan_in must be >= 1");
  Tensor<T> out(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(rng.uniform(-bound, bound));
  return out;
}

} // namespace scnn
