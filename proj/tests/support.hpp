#pragma once

// Shared helpers for the unit tests: seeded generators and matrix comparisons.

#include <netsel/matkit.hpp>
#include <netsel/rng.hpp>

#include <gtest/gtest.h>

#include <cstdint>
#include <random>

namespace netsel::test {

inline Rng rng_for(std::uint64_t a, std::uint64_t b = 0) { return Rng(derive_seed(0x5eed, {a, b})); }

inline Mat random_matrix(Rng& rng, Index r, Index c) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

inline Vec3 random_vec3(Rng& rng) { return Vec3(standard_normal(rng, 3)); }

inline double rel_err(const Mat& a, const Mat& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace netsel::test

#define EXPECT_MAT_NEAR(a, b, tol) EXPECT_LE(::netsel::test::rel_err((a), (b)), (tol))
