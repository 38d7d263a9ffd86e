#pragma once

#include <cstdint>
#include <initializer_list>

namespace scnn {

// Counter-based deterministic generator. A stream is identified by a 64-bit
// key; outputs are a stateless mix of (key, counter), so the sequence depends
// only on the key and never on which thread draws from it. Child streams are
// derived by hashing integer labels into the key, which makes streams such as
// (seed, epoch, sample) reproducible and pairwise independent regardless of
// scheduling.
class Rng {
public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed);

  // New independent stream keyed by this stream's seed plus the labels.
  Rng child(std::initializer_list<uint64_t> labels) const;
  Rng child(uint64_t a) const { return child({a}); }
  Rng child(uint64_t a, uint64_t b) const { return child({a, b}); }
  Rng child(uint64_t a, uint64_t b, uint64_t c) const { return child({a, b, c}); }

  uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double next_double();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer on [0, n), n >= 1. Unbiased via rejection.
  uint64_t next_below(uint64_t n);

  uint64_t seed() const { return seed_; }

private:
  uint64_t seed_;    // stream key
  uint64_t counter_; // draws so far
};

// Standard label values for the library's derived streams, kept in one place
// so the (seed, purpose, ...) keying is stable across the codebase.
namespace rng_label {
inline constexpr uint64_t init = 1;
inline constexpr uint64_t dropout = 2;
inline constexpr uint64_t shuffle = 3;
inline constexpr uint64_t augment = 4;
inline constexpr uint64_t hflip = 5;
inline constexpr uint64_t vflip = 6;
inline constexpr uint64_t jitter = 7;
inline constexpr uint64_t affine = 8;
inline constexpr uint64_t blur = 9;
} // namespace rng_label

} // namespace scnn
