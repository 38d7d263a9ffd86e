#include <doctest.h>

#include "core/tensor.hpp"
#include "testutil.hpp"

using namespace scnn;

TEST_CASE("tensor creation") {
  Tensor<float> zeros({2, 2});
  CHECK(zeros.numel() == 4);
  for (int64_t i = 0; i < 4; ++i) CHECK(zeros[i] == 0.0f);

  Tensor<float> vec({3}, std::vector<float>{1, 2, 3});
  CHECK(vec[0] == 1.0f);
  CHECK(vec[2] == 3.0f);

  CHECK_THROWS_AS(Tensor<float>({2, 3}, std::vector<float>{1, 2, 3, 4, 5}), Error);
  CHECK_THROWS_AS(Tensor<float>({0, 3}), Error);
  CHECK_THROWS_AS(Tensor<float>(Shape{}), Error);
}

TEST_CASE("reshape keeps the flat data intact") {
  Tensor<double> t = test::random_tensor<double>({3, 4, 5}, 7);
  Tensor<double> r = t.reshape({5, 12});
  REQUIRE(r.numel() == t.numel());
  for (int64_t i = 0; i < t.numel(); ++i) CHECK(r[i] == t[i]);
  Tensor<double> back = r.reshape({3, 4, 5});
  CHECK(test::bit_equal(back, t));
  CHECK_THROWS_AS(t.reshape({7, 7}), Error);
}

TEST_CASE("matmul identity and hand case") {
  Tensor<double> eye({2, 2}, std::vector<double>{1, 0, 0, 1});
  Tensor<double> m({2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(test::bit_equal(matmul(eye, m), m));

  Tensor<double> a({1, 2}, std::vector<double>{1, 2});
  Tensor<double> b({2, 1}, std::vector<double>{3, 4});
  Tensor<double> c = matmul(a, b);
  REQUIRE(c.shape() == Shape{1, 1});
  CHECK(c[0] == doctest::Approx(11.0).epsilon(1e-15));

  Tensor<double> bad({2, 3});
  CHECK_THROWS_AS(matmul(bad, bad), Error);
}

TEST_CASE("matmul matches the naive triple loop") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    const int64_t m = 1 + static_cast<int64_t>(rng.next_below(16));
    const int64_t k = 1 + static_cast<int64_t>(rng.next_below(16));
    const int64_t n = 1 + static_cast<int64_t>(rng.next_below(16));
    Tensor<double> a = test::random_tensor<double>({m, k}, seed * 10 + 1);
    Tensor<double> b = test::random_tensor<double>({k, n}, seed * 10 + 2);
    Tensor<double> c = matmul(a, b);
    // independent oracle: naive i-j-k triple loop
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int64_t kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[kk * n + j];
        const double got = c[i * n + j];
        const double denom = std::max({std::abs(acc), std::abs(got), 1e-30});
        CHECK(std::abs(acc - got) / denom <= 1e-12);
      }
  }
}

TEST_CASE("matmul associativity on small random tensors") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed + 100);
    const int64_t d1 = 1 + static_cast<int64_t>(rng.next_below(8));
    const int64_t d2 = 1 + static_cast<int64_t>(rng.next_below(8));
    const int64_t d3 = 1 + static_cast<int64_t>(rng.next_below(8));
    const int64_t d4 = 1 + static_cast<int64_t>(rng.next_below(8));
    Tensor<double> a = test::random_tensor<double>({d1, d2}, seed * 3 + 1);
    Tensor<double> b = test::random_tensor<double>({d2, d3}, seed * 3 + 2);
    Tensor<double> c = test::random_tensor<double>({d3, d4}, seed * 3 + 3);
    CHECK(test::max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) <= 1e-10);
  }
}

TEST_CASE("rng reproducibility and child independence") {
  Rng a(42), b(42);
  for (int i = 0; i < 10000; ++i) REQUIRE(a.next_u64() == b.next_u64());

  // children keyed differently diverge; same labels agree
  Rng base(7);
  Rng c1 = base.child(1, 2);
  Rng c2 = base.child(1, 2);
  Rng c3 = base.child(2, 1);
  CHECK(c1.next_u64() == c2.next_u64());
  CHECK(c1.next_u64() != c3.next_u64());

  // uniform stays in range
  Rng u(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform(-2.0, 5.0);
    CHECK(v >= -2.0);
    CHECK(v < 5.0);
  }
}

TEST_CASE("kaiming uniform bound and moments") {
  // fan_in 6 -> bound exactly 1
  Tensor<double> t = kaiming_uniform_init<double>({1000}, 6, Rng(5));
  for (int64_t i = 0; i < t.numel(); ++i) {
    CHECK(t[i] >= -1.0);
    CHECK(t[i] <= 1.0);
  }

  // determinism
  Tensor<double> u1 = kaiming_uniform_init<double>({64, 3, 3, 3}, 27, Rng(9));
  Tensor<double> u2 = kaiming_uniform_init<double>({64, 3, 3, 3}, 27, Rng(9));
  CHECK(test::bit_equal(u1, u2));

  // 1e5 samples, fan_in 50: |mean| within 3 sigma, sigma = b/sqrt(3n)
  const int64_t n = 100000;
  Tensor<double> big = kaiming_uniform_init<double>({n}, 50, Rng(11));
  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i) sum += big[i];
  const double mean = sum / static_cast<double>(n);
  const double bound = std::sqrt(6.0 / 50.0);
  const double sigma = bound / std::sqrt(3.0 * static_cast<double>(n));
  CHECK(std::abs(mean) <= 3.0 * sigma);

  CHECK_THROWS_AS(kaiming_uniform_init<double>({3}, 0, Rng(1)), Error);
}
