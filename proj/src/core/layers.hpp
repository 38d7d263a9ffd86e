#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace scnn {

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// conv2d, 3x3 kernel, pad 1, stride 1 (same padding).
//
// Forward is im2col + matmul: for each sample, patch matrix
// cols[(i*W+j), (c*9+u*3+v)] = x_pad[c, i+u, j+v], then
// y_mat[HW x Cout] = cols * w_mat^T with w_mat[Cout x Cin*9].
// Backward recomputes cols from the cached input:
//   dw = dy_mat^T * cols,  db[o] = sum dy[:,o,:,:],  dx = col2im(dy_mat * w_mat).
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2dCache {
  Tensor<T> x; // layer input, N x Cin x H x W
};

template <typename T>
struct Conv2dGrads {
  Tensor<T> dx, dw, db;
};

namespace detail {

// Patch matrix for one sample: rows are output positions, columns (c,u,v).
template <typename T>
void im2col_3x3_pad1(const T* x, int64_t cin, int64_t h, int64_t w, T* cols) {
  const int64_t k = cin * 9;
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j) {
      T* row = cols + (i * w + j) * k;
      for (int64_t c = 0; c < cin; ++c) {
        const T* plane = x + c * h * w;
        for (int64_t u = 0; u < 3; ++u) {
          const int64_t r = i + u - 1;
          for (int64_t v = 0; v < 3; ++v) {
            const int64_t s = j + v - 1;
            row[c * 9 + u * 3 + v] =
                (r >= 0 && r < h && s >= 0 && s < w) ? plane[r * w + s] : T{0};
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatter-add column gradients back onto the image.
template <typename T>
void col2im_3x3_pad1(const T* cols, int64_t cin, int64_t h, int64_t w, T* dx) {
  const int64_t k = cin * 9;
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j) {
      const T* row = cols + (i * w + j) * k;
      for (int64_t c = 0; c < cin; ++c) {
        T* plane = dx + c * h * w;
        for (int64_t u = 0; u < 3; ++u) {
          const int64_t r = i + u - 1;
          if (r < 0 || r >= h) continue;
          for (int64_t v = 0; v < 3; ++v) {
            const int64_t s = j + v - 1;
            if (s < 0 || s >= w) continue;
            plane[r * w + s] += row[c * 9 + u * 3 + v];
          }
        }
      }
    }
  }
}

} // namespace detail

template <typename T>
void conv2d_check_shapes(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.ndim() != 4) raise(ErrorCode::shape, "conv2d: input must be NxCxHxW, got " + shape_str(x.shape()));
  if (w.ndim() != 4 || w.dim(2) != 3 || w.dim(3) != 3)
    raise(ErrorCode::shape, "conv2d: kernel must be Cout x Cin x 3 x 3, got " + shape_str(w.shape()));
  if (x.dim(1) != w.dim(1))
    raise(ErrorCode::shape, "conv2d: input has " + std::to_string(x.dim(1)) + " channels but kernel expects " +
                                std::to_string(w.dim(1)));
  if (b.ndim() != 1 || b.dim(0) != w.dim(0))
    raise(ErrorCode::shape, "conv2d: bias must have one value per output channel");
}

template <typename T>
std::pair<Tensor<T>, Conv2dCache<T>> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w,
                                                    const Tensor<T>& b) {
  conv2d_check_shapes(x, w, b);
  const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t cout = w.dim(0), k = cin * 9, hw = h * wd;

  Tensor<T> wmat_t = transpose2d(w.reshape({cout, k})); // k x cout
  Tensor<T> y({n, cout, h, wd});
  Tensor<T> cols({hw, k});
  for (int64_t s = 0; s < n; ++s) {
    detail::im2col_3x3_pad1(x.data() + s * cin * hw, cin, h, wd, cols.data());
    Tensor<T> ymat = matmul(cols, wmat_t); // hw x cout
    T* dst = y.data() + s * cout * hw;
    for (int64_t o = 0; o < cout; ++o) {
      const T bias = b[o];
      for (int64_t p = 0; p < hw; ++p) dst[o * hw + p] = ymat[p * cout + o] + bias;
    }
  }
  return {std::move(y), Conv2dCache<T>{x}};
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Conv2dCache<T>& cache, const Tensor<T>& w, const Tensor<T>& dy) {
  const Tensor<T>& x = cache.x;
  const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t cout = w.dim(0), k = cin * 9, hw = h * wd;
  if (dy.ndim() != 4 || dy.dim(0) != n || dy.dim(1) != cout || dy.dim(2) != h || dy.dim(3) != wd)
    raise(ErrorCode::shape, "conv2d backward: gradient shape " + shape_str(dy.shape()) +
                                " does not match forward output");

  Tensor<T> wmat = w.reshape({cout, k});
  Tensor<T> dw_t({k, cout}); // accumulated as (c,u,v) x o, transposed at the end
  Tensor<T> db({cout});
  Tensor<T> dx({n, cin, h, wd});
  Tensor<T> cols({hw, k});
  Tensor<T> dymat({hw, cout});
  for (int64_t s = 0; s < n; ++s) {
    const T* dys = dy.data() + s * cout * hw;
    for (int64_t o = 0; o < cout; ++o) {
      double acc = 0.0;
      for (int64_t p = 0; p < hw; ++p) {
        dymat[p * cout + o] = dys[o * hw + p];
        acc += static_cast<double>(dys[o * hw + p]);
      }
      db[o] += static_cast<T>(acc);
    }
    detail::im2col_3x3_pad1(x.data() + s * cin * hw, cin, h, wd, cols.data());
    Tensor<T> contrib = matmul(transpose2d(cols), dymat); // k x cout
    for (int64_t i = 0; i < k * cout; ++i) dw_t[i] += contrib[i];
    Tensor<T> dcols = matmul(dymat, wmat); // hw x k
    detail::col2im_3x3_pad1(dcols.data(), cin, h, wd, dx.data() + s * cin * hw);
  }
  return {std::move(dx), transpose2d(dw_t).reshape({cout, cin, 3, 3}), std::move(db)};
}

// ---------------------------------------------------------------------------
// batchnorm2d. Train mode normalizes each channel over (N,H,W) with the
// biased (1/M) batch variance, then applies the learned scale/shift, and
// updates the running statistics (running variance uses the unbiased batch
// variance, the usual convention). Eval mode uses running statistics only.
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormState {
  Tensor<T> gamma, beta;
  Tensor<T> running_mean, running_var;
  T momentum{static_cast<T>(0.1)};
  T eps{static_cast<T>(1e-5)};

  static BatchNormState make(int64_t channels) {
    BatchNormState s;
    s.gamma = Tensor<T>::ones({channels});
    s.beta = Tensor<T>::zeros({channels});
    s.running_mean = Tensor<T>::zeros({channels});
    s.running_var = Tensor<T>::ones({channels});
    return s;
  }
};

template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<T> invstd; // per channel
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> dx, dgamma, dbeta;
};

template <typename T>
std::pair<Tensor<T>, BatchNormCache<T>> batchnorm2d_forward(const Tensor<T>& x, BatchNormState<T>& state,
                                                            Mode mode) {
  if (x.ndim() != 4) raise(ErrorCode::shape, "batchnorm2d: input must be NxCxHxW");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (c != state.gamma.dim(0)) raise(ErrorCode::shape, "batchnorm2d: channel count mismatch");
  const int64_t m = n * h * w, hw = h * w;

  Tensor<T> y(x.shape());
  BatchNormCache<T> cache;
  if (mode == Mode::eval) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const T scale = state.gamma[ch] / std::sqrt(state.running_var[ch] + state.eps);
      const T shift = state.beta[ch] - scale * state.running_mean[ch];
      for (int64_t s = 0; s < n; ++s) {
        const T* src = x.data() + (s * c + ch) * hw;
        T* dst = y.data() + (s * c + ch) * hw;
        for (int64_t p = 0; p < hw; ++p) dst[p] = scale * src[p] + shift;
      }
    }
    return {std::move(y), std::move(cache)};
  }

  if (m < 2)
    raise(ErrorCode::data, "batchnorm2d: train mode needs at least 2 values per channel, got " +
                               std::to_string(m));
  cache.xhat = Tensor<T>(x.shape());
  cache.invstd.resize(static_cast<size_t>(c));
  for (int64_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (int64_t s = 0; s < n; ++s) {
      const T* src = x.data() + (s * c + ch) * hw;
      for (int64_t p = 0; p < hw; ++p) sum += static_cast<double>(src[p]);
    }
    const double mean = sum / static_cast<double>(m);
    double var_acc = 0.0;
    for (int64_t s = 0; s < n; ++s) {
      const T* src = x.data() + (s * c + ch) * hw;
      for (int64_t p = 0; p < hw; ++p) {
        const double d = static_cast<double>(src[p]) - mean;
        var_acc += d * d;
      }
    }
    const double var_b = var_acc / static_cast<double>(m);
    const double invstd = 1.0 / std::sqrt(var_b + static_cast<double>(state.eps));
    cache.invstd[static_cast<size_t>(ch)] = static_cast<T>(invstd);

    const T g = state.gamma[ch], b = state.beta[ch];
    for (int64_t s = 0; s < n; ++s) {
      const T* src = x.data() + (s * c + ch) * hw;
      T* xh = cache.xhat.data() + (s * c + ch) * hw;
      T* dst = y.data() + (s * c + ch) * hw;
      for (int64_t p = 0; p < hw; ++p) {
        xh[p] = static_cast<T>((static_cast<double>(src[p]) - mean) * invstd);
        dst[p] = g * xh[p] + b;
      }
    }

    const double var_u = var_acc / static_cast<double>(m - 1);
    state.running_mean[ch] =
        static_cast<T>((1.0 - state.momentum) * state.running_mean[ch] + state.momentum * mean);
    state.running_var[ch] =
        static_cast<T>((1.0 - state.momentum) * state.running_var[ch] + state.momentum * var_u);
  }
  return {std::move(y), std::move(cache)};
}

// dx = gamma * invstd * (dy - mean(dy) - xhat * mean(dy * xhat)), means over (N,H,W).
template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const BatchNormCache<T>& cache, const BatchNormState<T>& state,
                                       const Tensor<T>& dy) {
  if (cache.invstd.empty()) raise(ErrorCode::state, "batchnorm2d backward: no cached train-mode forward");
  if (!dy.same_shape(cache.xhat)) raise(ErrorCode::shape, "batchnorm2d backward: gradient shape mismatch");
  const int64_t n = dy.dim(0), c = dy.dim(1), hw = dy.dim(2) * dy.dim(3);
  const double m = static_cast<double>(n * hw);

  BatchNormGrads<T> g;
  g.dx = Tensor<T>(dy.shape());
  g.dgamma = Tensor<T>({c});
  g.dbeta = Tensor<T>({c});
  for (int64_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int64_t s = 0; s < n; ++s) {
      const T* dsrc = dy.data() + (s * c + ch) * hw;
      const T* xh = cache.xhat.data() + (s * c + ch) * hw;
      for (int64_t p = 0; p < hw; ++p) {
        sum_dy += static_cast<double>(dsrc[p]);
        sum_dy_xhat += static_cast<double>(dsrc[p]) * static_cast<double>(xh[p]);
      }
    }
    g.dgamma[ch] = static_cast<T>(sum_dy_xhat);
    g.dbeta[ch] = static_cast<T>(sum_dy);

    const double mean_dy = sum_dy / m;
    const double mean_dy_xhat = sum_dy_xhat / m;
    const double scale = static_cast<double>(state.gamma[ch]) * static_cast<double>(cache.invstd[static_cast<size_t>(ch)]);
    for (int64_t s = 0; s < n; ++s) {
      const T* dsrc = dy.data() + (s * c + ch) * hw;
      const T* xh = cache.xhat.data() + (s * c + ch) * hw;
      T* dst = g.dx.data() + (s * c + ch) * hw;
      for (int64_t p = 0; p < hw; ++p)
        dst[p] = static_cast<T>(scale * (static_cast<double>(dsrc[p]) - mean_dy -
                                         static_cast<double>(xh[p]) * mean_dy_xhat));
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// relu. Gradient at exactly 0 is 0.
// ---------------------------------------------------------------------------

template <typename T>
struct ReluCache {
  std::vector<uint8_t> positive;
};

template <typename T>
std::pair<Tensor<T>, ReluCache<T>> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  ReluCache<T> cache;
  cache.positive.resize(static_cast<size_t>(x.numel()));
  for (int64_t i = 0; i < x.numel(); ++i) {
    const bool pos = x[i] > T{0};
    cache.positive[static_cast<size_t>(i)] = pos;
    y[i] = pos ? x[i] : T{0};
  }
  return {std::move(y), std::move(cache)};
}

template <typename T>
Tensor<T> relu_backward(const ReluCache<T>& cache, const Tensor<T>& dy) {
  if (static_cast<size_t>(dy.numel()) != cache.positive.size())
    raise(ErrorCode::shape, "relu backward: gradient size mismatch");
  Tensor<T> dx(dy.shape());
  for (int64_t i = 0; i < dy.numel(); ++i)
    dx[i] = cache.positive[static_cast<size_t>(i)] ? dy[i] : T{0};
  return dx;
}

// ---------------------------------------------------------------------------
// maxpool2d, 2x2 window, stride 2, floor semantics (odd trailing row/column
// dropped). Backward routes each gradient to the window argmax, first
// occurrence in row-major order on ties.
// ---------------------------------------------------------------------------

template <typename T>
struct MaxPoolCache {
  Shape in_shape;
  std::vector<int32_t> argmax; // offset within the (n,c) plane, per output element
};

template <typename T>
std::pair<Tensor<T>, MaxPoolCache<T>> maxpool2d_forward(const Tensor<T>& x) {
  if (x.ndim() != 4) raise(ErrorCode::shape, "maxpool2d: input must be NxCxHxW");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < 2 || w < 2)
    raise(ErrorCode::shape, "maxpool2d: spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                                " is below the 2x2 window");
  const int64_t ho = h / 2, wo = w / 2;
  Tensor<T> y({n, c, ho, wo});
  MaxPoolCache<T> cache;
  cache.in_shape = x.shape();
  cache.argmax.resize(static_cast<size_t>(n * c * ho * wo));
  for (int64_t plane = 0; plane < n * c; ++plane) {
    const T* src = x.data() + plane * h * w;
    T* dst = y.data() + plane * ho * wo;
    int32_t* amax = cache.argmax.data() + plane * ho * wo;
    for (int64_t i = 0; i < ho; ++i) {
      for (int64_t j = 0; j < wo; ++j) {
        int32_t best = static_cast<int32_t>(2 * i * w + 2 * j);
        T best_v = src[best];
        for (int64_t u = 0; u < 2; ++u)
          for (int64_t v = 0; v < 2; ++v) {
            const int32_t idx = static_cast<int32_t>((2 * i + u) * w + (2 * j + v));
            if (src[idx] > best_v) {
              best_v = src[idx];
              best = idx;
            }
          }
        dst[i * wo + j] = best_v;
        amax[i * wo + j] = best;
      }
    }
  }
  return {std::move(y), std::move(cache)};
}

template <typename T>
Tensor<T> maxpool2d_backward(const MaxPoolCache<T>& cache, const Tensor<T>& dy) {
  const int64_t n = cache.in_shape[0], c = cache.in_shape[1], h = cache.in_shape[2], w = cache.in_shape[3];
  const int64_t ho = h / 2, wo = w / 2;
  if (dy.ndim() != 4 || dy.dim(0) != n || dy.dim(1) != c || dy.dim(2) != ho || dy.dim(3) != wo)
    raise(ErrorCode::shape, "maxpool2d backward: gradient shape mismatch");
  Tensor<T> dx(cache.in_shape);
  for (int64_t plane = 0; plane < n * c; ++plane) {
    const T* dsrc = dy.data() + plane * ho * wo;
    const int32_t* amax = cache.argmax.data() + plane * ho * wo;
    T* dst = dx.data() + plane * h * w;
    for (int64_t p = 0; p < ho * wo; ++p) dst[amax[p]] += dsrc[p];
  }
  return dx;
}

// ---------------------------------------------------------------------------
// adaptive_avgpool2d. Output index i over input length L and output length O
// averages input rows [floor(i*L/O), ceil((i+1)*L/O)). For O > L the windows
// have size 1 and inputs repeat, which makes upsampling well defined.
// ---------------------------------------------------------------------------

inline std::pair<int64_t, int64_t> adaptive_window(int64_t i, int64_t in, int64_t out) {
  const int64_t lo = (i * in) / out;
  const int64_t hi = ((i + 1) * in + out - 1) / out; // ceil
  return {lo, hi};
}

template <typename T>
struct AdaptiveAvgPoolCache {
  Shape in_shape;
  int64_t out_h{0}, out_w{0};
};

template <typename T>
std::pair<Tensor<T>, AdaptiveAvgPoolCache<T>> adaptive_avgpool2d_forward(const Tensor<T>& x, int64_t out_h,
                                                                         int64_t out_w) {
  if (x.ndim() != 4) raise(ErrorCode::shape, "adaptive_avgpool2d: input must be NxCxHxW");
  if (out_h < 1 || out_w < 1) raise(ErrorCode::config, "adaptive_avgpool2d: output size must be >= 1");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({n, c, out_h, out_w});
  for (int64_t plane = 0; plane < n * c; ++plane) {
    const T* src = x.data() + plane * h * w;
    T* dst = y.data() + plane * out_h * out_w;
    for (int64_t i = 0; i < out_h; ++i) {
      auto [r0, r1] = adaptive_window(i, h, out_h);
      for (int64_t j = 0; j < out_w; ++j) {
        auto [c0, c1] = adaptive_window(j, w, out_w);
        double acc = 0.0;
        for (int64_t r = r0; r < r1; ++r)
          for (int64_t s = c0; s < c1; ++s) acc += static_cast<double>(src[r * w + s]);
        dst[i * out_w + j] = static_cast<T>(acc / static_cast<double>((r1 - r0) * (c1 - c0)));
      }
    }
  }
  return {std::move(y), AdaptiveAvgPoolCache<T>{x.shape(), out_h, out_w}};
}

template <typename T>
Tensor<T> adaptive_avgpool2d_backward(const AdaptiveAvgPoolCache<T>& cache, const Tensor<T>& dy) {
  const int64_t n = cache.in_shape[0], c = cache.in_shape[1], h = cache.in_shape[2], w = cache.in_shape[3];
  if (dy.ndim() != 4 || dy.dim(0) != n || dy.dim(1) != c || dy.dim(2) != cache.out_h ||
      dy.dim(3) != cache.out_w)
    raise(ErrorCode::shape, "adaptive_avgpool2d backward: gradient shape mismatch");
  Tensor<T> dx(cache.in_shape);
  for (int64_t plane = 0; plane < n * c; ++plane) {
    const T* dsrc = dy.data() + plane * cache.out_h * cache.out_w;
    T* dst = dx.data() + plane * h * w;
    for (int64_t i = 0; i < cache.out_h; ++i) {
      auto [r0, r1] = adaptive_window(i, h, cache.out_h);
      for (int64_t j = 0; j < cache.out_w; ++j) {
        auto [c0, c1] = adaptive_window(j, w, cache.out_w);
        const T share = dsrc[i * cache.out_w + j] / static_cast<T>((r1 - r0) * (c1 - c0));
        for (int64_t r = r0; r < r1; ++r)
          for (int64_t s = c0; s < c1; ++s) dst[r * w + s] += share;
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Inverted dropout: zero with probability p, scale survivors by 1/(1-p), so
// eval mode is the exact identity. The mask comes from the caller's stream;
// the same stream reproduces the same mask.
// ---------------------------------------------------------------------------

template <typename T>
struct DropoutCache {
  std::vector<uint8_t> keep;
  T scale{1};
};

template <typename T>
std::pair<Tensor<T>, DropoutCache<T>> dropout_forward(const Tensor<T>& x, double p, Mode mode, Rng rng) {
  if (p < 0.0 || p >= 1.0) raise(ErrorCode::config, "dropout: probability must be in [0, 1)");
  DropoutCache<T> cache;
  if (mode == Mode::eval) return {x, std::move(cache)};
  cache.scale = static_cast<T>(1.0 / (1.0 - p));
  cache.keep.resize(static_cast<size_t>(x.numel()));
  Tensor<T> y(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    const bool keep = rng.next_double() >= p;
    cache.keep[static_cast<size_t>(i)] = keep;
    y[i] = keep ? x[i] * cache.scale : T{0};
  }
  return {std::move(y), std::move(cache)};
}

template <typename T>
Tensor<T> dropout_backward(const DropoutCache<T>& cache, const Tensor<T>& dy) {
  if (cache.keep.empty()) raise(ErrorCode::state, "dropout backward: no cached train-mode forward");
  if (static_cast<size_t>(dy.numel()) != cache.keep.size())
    raise(ErrorCode::shape, "dropout backward: gradient size mismatch");
  Tensor<T> dx(dy.shape());
  for (int64_t i = 0; i < dy.numel(); ++i)
    dx[i] = cache.keep[static_cast<size_t>(i)] ? dy[i] * cache.scale : T{0};
  return dx;
}

// ---------------------------------------------------------------------------
// dense: y = x w + b, x is N x F, w is F x C.
// ---------------------------------------------------------------------------

template <typename T>
struct DenseCache {
  Tensor<T> x;
};

template <typename T>
struct DenseGrads {
  Tensor<T> dx, dw, db;
};

template <typename T>
std::pair<Tensor<T>, DenseCache<T>> dense_forward(const Tensor<T>& x, const Tensor<T>& w,
                                                  const Tensor<T>& b) {
  if (x.ndim() != 2 || w.ndim() != 2)
    raise(ErrorCode::shape, "dense: expected 2-d input and weight");
  if (x.dim(1) != w.dim(0))
    raise(ErrorCode::shape, "dense: input features " + std::to_string(x.dim(1)) +
                                " do not match weight rows " + std::to_string(w.dim(0)));
  if (b.ndim() != 1 || b.dim(0) != w.dim(1)) raise(ErrorCode::shape, "dense: bias shape mismatch");
  Tensor<T> y = matmul(x, w);
  const int64_t n = y.dim(0), c = y.dim(1);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j) y[i * c + j] += b[j];
  return {std::move(y), DenseCache<T>{x}};
}

template <typename T>
DenseGrads<T> dense_backward(const DenseCache<T>& cache, const Tensor<T>& w, const Tensor<T>& dy) {
  const Tensor<T>& x = cache.x;
  if (dy.ndim() != 2 || dy.dim(0) != x.dim(0) || dy.dim(1) != w.dim(1))
    raise(ErrorCode::shape, "dense backward: gradient shape mismatch");
  DenseGrads<T> g;
  g.dx = matmul(dy, transpose2d(w));
  g.dw = matmul(transpose2d(x), dy);
  g.db = Tensor<T>({w.dim(1)});
  const int64_t n = dy.dim(0), c = dy.dim(1);
  for (int64_t j = 0; j < c; ++j) {
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(dy[i * c + j]);
    g.db[j] = static_cast<T>(acc);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Softmax cross entropy with log-sum-exp stabilization.
// loss = mean over the batch of -log softmax(logits)[label];
// dlogits = (softmax - onehot) / N.
// ---------------------------------------------------------------------------

template <typename T>
struct SoftmaxLoss {
  double loss{0};
  Tensor<T> dlogits;
};

template <typename T>
SoftmaxLoss<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int64_t>& labels) {
  if (logits.ndim() != 2) raise(ErrorCode::shape, "softmax_cross_entropy: logits must be N x C");
  const int64_t n = logits.dim(0), c = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    raise(ErrorCode::shape, "softmax_cross_entropy: one label per row required");
  SoftmaxLoss<T> out;
  out.dlogits = Tensor<T>(logits.shape());
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const int64_t label = labels[static_cast<size_t>(i)];
    if (label < 0 || label >= c)
      raise(ErrorCode::data, "softmax_cross_entropy: label " + std::to_string(label) +
                                 " outside [0, " + std::to_string(c) + ")");
    const T* row = logits.data() + i * c;
    double mx = static_cast<double>(row[0]);
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
    const double lse = mx + std::log(sum);
    total += lse - static_cast<double>(row[label]);
    T* drow = out.dlogits.data() + i * c;
    for (int64_t j = 0; j < c; ++j) {
      const double p = std::exp(static_cast<double>(row[j]) - lse);
      drow[j] = static_cast<T>((p - (j == label ? 1.0 : 0.0)) / static_cast<double>(n));
    }
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

} // namespace scnn
