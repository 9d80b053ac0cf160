#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "degpop/coefficients.hpp"
#include "degpop/core.hpp"

namespace testing {

using namespace degpop;

/// T = 1, A = 2, 16 steps, 32 space cells, x0 = 0.3.
inline Grid coarse_grid() { return Grid::build(1.0, 2.0, 16, 32, 0.3); }

/// The 8 x 8 x 16 duality grid (T = A = 1).
inline Grid tiny_grid() { return Grid(1.0, 1.0, 8, 8, 16, 0.3); }

inline Field random_field(const Grid& g, Rank r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(g, r);
  for (auto& v : f.values()) v = u(rng);
  return f;
}

/// mu = 0.2, beta = (a - 0.25)_+, abar = 0.25.
inline RateSpec reference_rates() {
  return {[](double, double, double) { return 0.2; }, [](double a, double) { return std::max(0.0, a - 0.25); }, 0.25};
}

inline RateSpec mu_only(double mu) {
  return {[mu](double, double, double) { return mu; }, [](double, double) { return 0.0; }, 0.25};
}

inline double rel_diff(const Field& a, const Field& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.values()[k] - b.values()[k];
    num += d * d;
    den += b.values()[k] * b.values()[k];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline bool bit_equal(const Field& a, const Field& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a.values()[k] != b.values()[k]) return false;
  return true;
}

}  // namespace testing
