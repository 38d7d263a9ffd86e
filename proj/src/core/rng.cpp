#include "core/rng.hpp"

namespace scnn {
namespace {

// splitmix64 finalizer (Steele, Lea, Flood). Full-avalanche 64-bit mix.
uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t combine(uint64_t key, uint64_t label) { return mix64(key ^ mix64(label)); }

} // namespace

Rng::Rng(uint64_t seed) : seed_(mix64(seed)), counter_(0) {}

Rng Rng::child(std::initializer_list<uint64_t> labels) const {
  Rng out;
  uint64_t key = seed_;
  for (uint64_t l : labels) key = combine(key, l);
  out.seed_ = key;
  out.counter_ = 0;
  return out;
}

uint64_t Rng::next_u64() { return mix64(seed_ + 0x632be59bd9b4e019ULL * ++counter_); }

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

uint64_t Rng::next_below(uint64_t n) {
  if (n <= 1) return 0;
  uint64_t limit = ~uint64_t{0} - ~uint64_t{0} % n;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

} // namespace scnn
