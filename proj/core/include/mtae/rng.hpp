#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mtae/common.hpp"

namespace mtae {

// Every stochastic component owns its own Rng so that reordering one phase
// never perturbs the draws of another. Seeds for subcomponents are derived
// with derive() instead of seed+1 arithmetic to keep streams decorrelated.
class Rng {
 public:
  explicit Rng(u64 seed) : engine_(seed) {}

  u64 next_u64() { return engine_(); }

  // Uniform in [0, n). n must be > 0.
  u64 uniform_index(u64 n);

  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Stable stream splitting: hash the parent seed with a label.
u64 derive_seed(u64 seed, u64 stream);
u64 derive_seed(u64 seed, const std::string& label);

}  // namespace mtae
