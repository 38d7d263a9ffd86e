#include <doctest.h>

#include <cmath>

#include "core/layers.hpp"
#include "testutil.hpp"

using namespace scnn;

TEST_CASE("conv2d zero kernel and identity kernel") {
  Tensor<double> x = Tensor<double>::ones({1, 1, 3, 3});
  Tensor<double> w({1, 1, 3, 3});
  Tensor<double> b({1}, std::vector<double>{5.0});
  auto [y, cache] = conv2d_forward(x, w, b);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == 5.0);

  // delta kernel: center 1, rest 0 -> identity with pad 1
  Tensor<double> delta({1, 1, 3, 3});
  delta[4] = 1.0;
  Tensor<double> b0({1});
  Tensor<double> img = test::random_tensor<double>({2, 1, 6, 7}, 3);
  auto [y2, cache2] = conv2d_forward(img, delta, b0);
  CHECK(test::bit_equal(y2, img));
}

TEST_CASE("conv2d matches the frozen reference output") {
  // integer-valued fixture, exact in floating point
  std::vector<double> xv = {-2, 5, 1, -3, 4, 0, -4, 3, -1, -5, 2, -2, 5, 1, -3, 4,
                            0, -4, 3, -1, -5, 2, -2, 5, 1, -3, 4, 0, -4, 3, -1, -5};
  std::vector<double> wv = {-2, 3, 1, -1, -3, 2, 0, -2, 3, 1, -1, -3, 2, 0, -2, 3, 1, -1};
  Tensor<double> x({1, 2, 4, 4}, xv);
  Tensor<double> w({1, 2, 3, 3}, wv);
  Tensor<double> b({1}, std::vector<double>{3.0});
  auto [y, cache] = conv2d_forward(x, w, b);
  std::vector<double> expected = {12, -37, -1, 10, -11, 12, -14, 3, -1, -15, 3, 9, -16, -36, 42, -14};
  REQUIRE(y.numel() == 16);
  for (size_t i = 0; i < expected.size(); ++i) CHECK(y[static_cast<int64_t>(i)] == expected[i]);
}

TEST_CASE("conv2d rejects channel mismatch") {
  Tensor<double> x({1, 2, 4, 4});
  Tensor<double> w({1, 3, 3, 3});
  Tensor<double> b({1});
  CHECK_THROWS_AS(conv2d_forward(x, w, b), Error);
}

TEST_CASE("conv2d direct-loop equivalence") {
  // independent oracle: direct 4-nested loop convolution
  Tensor<double> x = test::random_tensor<double>({2, 3, 5, 6}, 21);
  Tensor<double> w = test::random_tensor<double>({4, 3, 3, 3}, 22);
  Tensor<double> b = test::random_tensor<double>({4}, 23);
  auto [y, cache] = conv2d_forward(x, w, b);
  const int64_t n = 2, cin = 3, h = 5, wd = 6, cout = 4;
  for (int64_t s = 0; s < n; ++s)
    for (int64_t o = 0; o < cout; ++o)
      for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < wd; ++j) {
          double acc = b[o];
          for (int64_t c = 0; c < cin; ++c)
            for (int64_t u = 0; u < 3; ++u)
              for (int64_t v = 0; v < 3; ++v) {
                const int64_t r = i + u - 1, q = j + v - 1;
                if (r < 0 || r >= h || q < 0 || q >= wd) continue;
                acc += x[((s * cin + c) * h + r) * wd + q] * w[((o * cin + c) * 3 + u) * 3 + v];
              }
          CHECK(std::abs(acc - y[((s * cout + o) * h + i) * wd + j]) <= 1e-12);
        }
}

TEST_CASE("batchnorm2d constant input and normalization") {
  // constant per channel -> pre-affine output 0 (gamma 1, beta 0)
  Tensor<double> x({2, 1, 2, 2}, 3.5);
  BatchNormState<double> state = BatchNormState<double>::make(1);
  auto [y, cache] = batchnorm2d_forward(x, state, Mode::train);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(std::abs(y[i]) <= 1e-9);

  // random input: per-channel mean ~0, variance ~1. Batch variance must be
  // >= 1 for the eps term to stay inside the 1e-5 tolerance.
  Tensor<double> r = test::random_tensor<double>({4, 3, 5, 5}, 17, -2.0, 2.0);
  BatchNormState<double> s2 = BatchNormState<double>::make(3);
  auto [y2, c2] = batchnorm2d_forward(r, s2, Mode::train);
  const int64_t m = 4 * 5 * 5;
  for (int64_t ch = 0; ch < 3; ++ch) {
    double sum = 0, sumsq = 0;
    for (int64_t n = 0; n < 4; ++n)
      for (int64_t p = 0; p < 25; ++p) {
        const double v = y2[(n * 3 + ch) * 25 + p];
        sum += v;
        sumsq += v * v;
      }
    const double mean = sum / m;
    const double var = sumsq / m - mean * mean;
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(std::abs(var - 1.0) <= 1e-5);
  }
}

TEST_CASE("batchnorm2d running stats follow the momentum rule") {
  // one train call on values {1,2,3,4}: batch mean 2.5, biased var 1.25,
  // unbiased var 5/3; momentum 0.1 from (0, 1)
  Tensor<double> x({2, 1, 2, 1}, std::vector<double>{1, 2, 3, 4});
  BatchNormState<double> state = BatchNormState<double>::make(1);
  auto [y, cache] = batchnorm2d_forward(x, state, Mode::train);
  CHECK(state.running_mean[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(state.running_var[0] == doctest::Approx(0.9 + 0.1 * 5.0 / 3.0).epsilon(1e-12));
  CHECK(y[3] == doctest::Approx((4.0 - 2.5) / std::sqrt(1.25 + 1e-5)).epsilon(1e-9));

  // eval uses running stats only and leaves them untouched
  BatchNormState<double> before = state;
  auto [ye, ce] = batchnorm2d_forward(x, state, Mode::eval);
  CHECK(state.running_mean[0] == before.running_mean[0]);
  CHECK(state.running_var[0] == before.running_var[0]);
  CHECK(ye[0] == doctest::Approx((1.0 - 0.25) / std::sqrt(before.running_var[0] + 1e-5)).epsilon(1e-9));
}

TEST_CASE("batchnorm2d rejects degenerate train batches") {
  Tensor<double> x({1, 2, 1, 1});
  BatchNormState<double> state = BatchNormState<double>::make(2);
  CHECK_THROWS_AS(batchnorm2d_forward(x, state, Mode::train), Error);
  CHECK_NOTHROW(batchnorm2d_forward(x, state, Mode::eval));
}

TEST_CASE("relu forward and gradient convention") {
  Tensor<double> x({3}, std::vector<double>{-1, 0, 2});
  auto [y, cache] = relu_forward(x);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 2.0);
  Tensor<double> dy({3}, std::vector<double>{10, 20, 30});
  Tensor<double> dx = relu_backward(cache, dy);
  CHECK(dx[0] == 0.0);
  CHECK(dx[1] == 0.0); // gradient at exactly 0 is 0
  CHECK(dx[2] == 30.0);

  Tensor<double> pos = test::random_tensor<double>({4, 4}, 5, 0.1, 2.0);
  auto [yp, cp] = relu_forward(pos);
  CHECK(test::bit_equal(yp, pos));
  Tensor<double> g = test::random_tensor<double>({4, 4}, 6);
  CHECK(test::bit_equal(relu_backward(cp, g), g));
}

TEST_CASE("maxpool2d single window, floor semantics, tie rule") {
  Tensor<double> x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  auto [y, cache] = maxpool2d_forward(x);
  REQUIRE(y.numel() == 1);
  CHECK(y[0] == 4.0);
  Tensor<double> dy({1, 1, 1, 1}, std::vector<double>{1.0});
  Tensor<double> dx = maxpool2d_backward(cache, dy);
  CHECK(dx[0] == 0.0);
  CHECK(dx[1] == 0.0);
  CHECK(dx[2] == 0.0);
  CHECK(dx[3] == 1.0);

  // floor(5/2) = 2
  Tensor<double> x5 = test::random_tensor<double>({1, 1, 5, 5}, 9);
  auto [y5, c5] = maxpool2d_forward(x5);
  CHECK(y5.shape() == Shape{1, 1, 2, 2});

  // all-equal window routes to exactly one element (first in row-major order)
  Tensor<double> eq({1, 1, 2, 2}, 7.0);
  auto [ye, ce] = maxpool2d_forward(eq);
  Tensor<double> de = maxpool2d_backward(ce, dy);
  CHECK(de[0] == 1.0);
  CHECK(de[1] == 0.0);
  CHECK(de[2] == 0.0);
  CHECK(de[3] == 0.0);

  Tensor<double> tiny({1, 1, 1, 4});
  CHECK_THROWS_AS(maxpool2d_forward(tiny), Error);
}

TEST_CASE("adaptive_avgpool2d identity, global mean, and upsampling") {
  Tensor<double> x = test::random_tensor<double>({1, 2, 4, 4}, 13);
  auto [same, c1] = adaptive_avgpool2d_forward(x, 4, 4);
  CHECK(test::max_abs_diff(same, x) == 0.0);

  auto [one, c2] = adaptive_avgpool2d_forward(x, 1, 1);
  for (int64_t ch = 0; ch < 2; ++ch) {
    double acc = 0;
    for (int64_t p = 0; p < 16; ++p) acc += x[ch * 16 + p];
    CHECK(one[ch] == doctest::Approx(acc / 16.0).epsilon(1e-12));
  }

  // 3x3 [1..9] -> 5x5, windows [floor(i*3/5), ceil((i+1)*3/5))
  Tensor<double> grid({1, 1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto [up, c3] = adaptive_avgpool2d_forward(grid, 5, 5);
  std::vector<double> expected = {1.0, 1.5, 2.0, 2.5, 3.0, 2.5, 3.0, 3.5, 4.0, 4.5, 4.0, 4.5, 5.0,
                                  5.5, 6.0, 5.5, 6.0, 6.5, 7.0, 7.5, 7.0, 7.5, 8.0, 8.5, 9.0};
  REQUIRE(up.numel() == 25);
  for (size_t i = 0; i < expected.size(); ++i)
    CHECK(up[static_cast<int64_t>(i)] == doctest::Approx(expected[i]).epsilon(1e-12));
  CHECK(up[0] == 1.0); // (0,0) window is exactly the first element
}

TEST_CASE("dropout eval identity, p=0, and survivor scaling") {
  Tensor<double> x = test::random_tensor<double>({5, 5}, 31);
  auto [ye, ce] = dropout_forward(x, 0.2, Mode::eval, Rng(1));
  CHECK(test::bit_equal(ye, x));

  auto [y0, c0] = dropout_forward(x, 0.0, Mode::train, Rng(1));
  CHECK(test::bit_equal(y0, x));

  // 1e6 ones at p=0.2: mean within 0.01 of 1
  Tensor<double> ones = Tensor<double>::ones({1000000});
  auto [y, c] = dropout_forward(ones, 0.2, Mode::train, Rng(77));
  double sum = 0;
  for (int64_t i = 0; i < y.numel(); ++i) sum += y[i];
  CHECK(std::abs(sum / 1e6 - 1.0) <= 0.01);

  CHECK_THROWS_AS(dropout_forward(x, 1.0, Mode::train, Rng(1)), Error);
  CHECK_THROWS_AS(dropout_forward(x, -0.1, Mode::train, Rng(1)), Error);

  // same stream, same mask
  auto [m1, cm1] = dropout_forward(x, 0.5, Mode::train, Rng(9).child(4));
  auto [m2, cm2] = dropout_forward(x, 0.5, Mode::train, Rng(9).child(4));
  CHECK(test::bit_equal(m1, m2));
}

TEST_CASE("dense identity and bias gradient") {
  Tensor<double> x = test::random_tensor<double>({3, 4}, 41);
  Tensor<double> eye({4, 4});
  for (int64_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  Tensor<double> b0({4});
  auto [y, cache] = dense_forward(x, eye, b0);
  CHECK(test::max_abs_diff(y, x) == 0.0);

  Tensor<double> dy = test::random_tensor<double>({3, 4}, 42);
  DenseGrads<double> g = dense_backward(cache, eye, dy);
  for (int64_t j = 0; j < 4; ++j) {
    double acc = 0;
    for (int64_t i = 0; i < 3; ++i) acc += dy[i * 4 + j];
    CHECK(g.db[j] == doctest::Approx(acc).epsilon(1e-12));
  }

  Tensor<double> wrong({5, 2});
  CHECK_THROWS_AS(dense_forward(x, wrong, b0), Error);
}

TEST_CASE("softmax cross entropy: uniform logits, stability, row sums") {
  Tensor<double> logits({3, 11});
  std::vector<int64_t> labels = {0, 5, 10};
  SoftmaxLoss<double> sl = softmax_cross_entropy(logits, labels);
  CHECK(sl.loss == doctest::Approx(std::log(11.0)).epsilon(1e-12));

  // +1000 at the true label: loss ~ 0, no overflow
  Tensor<double> big({2, 11});
  big[3] = 1000.0;
  big[11 + 7] = 1000.0;
  SoftmaxLoss<double> sb = softmax_cross_entropy(big, {3, 7});
  CHECK(std::isfinite(sb.loss));
  CHECK(sb.loss <= 1e-9);

  // every gradient row sums to 0
  Tensor<double> r = test::random_tensor<double>({4, 11}, 55, -3.0, 3.0);
  SoftmaxLoss<double> sr = softmax_cross_entropy(r, {1, 2, 3, 4});
  for (int64_t i = 0; i < 4; ++i) {
    double acc = 0;
    for (int64_t j = 0; j < 11; ++j) acc += sr.dlogits[i * 11 + j];
    CHECK(std::abs(acc) <= 1e-9);
  }

  CHECK_THROWS_AS(softmax_cross_entropy(logits, {0, 5, 11}), Error);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {0, 5, -1}), Error);
}
