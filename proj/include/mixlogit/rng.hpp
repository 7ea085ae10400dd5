#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace mixlogit {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent stream for sub-task `idx` derived from a master seed.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t idx) {
  return Rng(splitmix64(seed ^ splitmix64(idx + 0x51ull)));
}

inline Eigen::VectorXd randn(int n, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = nd(rng);
  return out;
}

inline double runif(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Inverse-CDF categorical draw from (possibly unnormalized) weights.
inline int sample_categorical(const Eigen::VectorXd& probs, Rng& rng) {
  double u = runif(rng) * probs.sum();
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u <= acc) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace mixlogit
