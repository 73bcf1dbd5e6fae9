#include "mtae/rng.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

namespace mtae {

void log_info(const std::string& msg) { std::cerr << "[mtae] " << msg << "\n"; }
void log_warn(const std::string& msg) {
  std::cerr << "[mtae] warning: " << msg << "\n";
}

u64 Rng::uniform_index(u64 n) {
  if (n == 0) throw Error("uniform_index: n must be > 0");
  u64 threshold = (~n + 1) % n;  // 2^64 mod n
  for (;;) {
    u64 r = engine_();
    if (r >= threshold) return r % n;
  }
}

double Rng::uniform(double lo, double hi) {
  double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// Box-Muller, no spare caching: two draws per sample, fully specified.
double Rng::normal(double mean, double stddev) {
  double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

static u64 splitmix64(u64 x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

u64 derive_seed(u64 seed, u64 stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ull));
}

u64 derive_seed(u64 seed, const std::string& label) {
  u64 h = 0xcbf29ce484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return derive_seed(seed, h);
}

}  // namespace mtae
