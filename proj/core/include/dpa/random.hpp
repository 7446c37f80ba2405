#pragma once

#include <cstdint>

namespace dpa {

// Counter-based generator: output k of stream s under seed is a pure function
// of (seed, s, k), so independent workers can draw disjoint streams without
// sharing state.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 bits.
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace dpa
