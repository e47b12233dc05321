#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace divlab {

// Counter-based generator (SplitMix64). The state is a plain counter, so
// streams are cheap to derive and the sequence is identical on every
// platform. Gaussian variates use Box-Muller on top of it.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : counter_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1]; safe for log().
  double uniform_open();
  double normal();
  // +1 or -1 with equal probability.
  double sign();

 private:
  std::uint64_t counter_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);

// Sub-seed for a named stream; distinct (name, index) pairs give
// statistically independent streams under the same parent seed.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view stream, std::uint64_t index = 0);

inline Rng make_stream(std::uint64_t parent, std::string_view stream, std::uint64_t index = 0) {
  return Rng(derive_seed(parent, stream, index));
}

}  // namespace divlab
