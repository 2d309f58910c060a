#pragma once

#include <cstdint>
#include <random>

namespace matcomp {

using Seed = std::uint64_t;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Child seed for stream `index` under `parent`. Children of distinct indices
// are decorrelated, and the mapping is a pure function, so work keyed by
// index gives the same draws whether it runs sequentially or concurrently.
Seed child_seed(Seed parent, std::uint64_t index);

// Explicit seeded stream. Copies are independent replicas of the state, so
// pass by value to hand a stream to a callee without sharing it.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(mix64(seed)) {}

  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  double uniform(double lo, double hi);
  // Uniform on {0, ..., n - 1}.
  std::uint64_t index(std::uint64_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace matcomp
