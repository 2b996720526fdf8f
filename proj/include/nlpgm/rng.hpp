#pragma once

#include <cstddef>
#include <cstdint>

namespace nlpgm {

/// Independent random streams derived from one run seed.
enum class Stream : std::uint64_t {
  data = 1,      // problem instance generation
  init = 2,      // starting point
  sampling = 3,  // minibatch draws
  check = 4,     // certifier sample points
};

/// Counter-based 64-bit generator: output n is a fixed mixing function of
/// (key, n), so a stream is fully determined by (seed, stream id) and
/// reproducible bit for bit across platforms.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);
  CounterRng(std::uint64_t seed, Stream stream)
      : CounterRng(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

  /// Normal with the given mean and variance (not standard deviation).
  double normal(double mean, double variance);

  /// Uniform integer in [0, n), unbiased (rejection sampling). n > 0.
  std::size_t below(std::size_t n);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace nlpgm
