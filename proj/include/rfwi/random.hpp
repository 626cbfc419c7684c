// SPDX-License-Identifier: Apache-2.0

#ifndef RFWI_RANDOM_HPP
#define RFWI_RANDOM_HPP

#include <cstdint>
#include <random>

namespace rfwi
{

// Reproducible random source: identical (seed, stream id) gives identical draws.
class RandomStream
{
public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0)
    : seed_(seed), stream_(stream)
  {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Independent child stream, e.g. one per parallel worker.
  RandomStream derive(std::uint64_t worker) const
  {
    return RandomStream(seed_, stream_ * 0x9E3779B97F4A7C15ULL + worker + 1);
  }

  std::mt19937_64 &engine() { return engine_; }

private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

}  // namespace rfwi

#endif  // RFWI_RANDOM_HPP
