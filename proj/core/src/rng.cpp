#include "fhm/rng.hpp"

namespace fhm {

namespace {

// splitmix64 finaliser
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

double Rng::gaussian(double stddev) {
  if (stddev == 0.0) return 0.0;
  std::normal_distribution<double> dist(0.0, stddev);
  return dist(engine_);
}

double Rng::uniform(double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(engine_);
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  return Rng(mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL)));
}

}  // namespace fhm
