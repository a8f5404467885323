#pragma once

#include <cstdint>
#include <random>

namespace fhm {

// The single source of randomness. Every consumer receives one explicitly;
// nothing in the library seeds from the clock or keeps a global engine.
//
// gaussian() is virtual so tests can count or script draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  virtual ~Rng() = default;

  Rng(const Rng&) = default;
  Rng& operator=(const Rng&) = default;

  virtual double gaussian(double stddev);
  double uniform(double lo, double hi);
  std::uint64_t next_u64() { return engine_(); }

  // Independent stream keyed by (seed, stream).
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fhm
