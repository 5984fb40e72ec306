#pragma once

// Deterministic seed derivation. Every random stream in a run is keyed by the
// master seed plus a tuple of tags, so two strategies that ask for the same
// (purpose, step, index) draw identical numbers no matter what else they
// consumed.

#include <netsel/matkit.hpp>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace netsel {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(master);
  for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

/// Stream purposes; values are part of the seed derivation and must not change.
enum class Stream : std::uint64_t {
  Process = 1,
  Relative = 2,
  Vision = 3,
  Selection = 4,
  Features = 5,
  Replicate = 6,
  Battery = 7,
};

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, Stream s, std::initializer_list<std::uint64_t> tags = {}) {
  std::uint64_t h = derive_seed(master, {static_cast<std::uint64_t>(s)});
  for (auto t : tags) h = derive_seed(h, {t});
  return Rng(h);
}

inline Vec standard_normal(Rng& rng, Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

/// Random SPD matrix G G^T + shift * I.
inline Mat random_spd(Rng& rng, Index n, double shift = 0.1) {
  Mat g(n, n);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = nd(rng);
  return g * g.transpose() / static_cast<double>(n) + shift * Mat::Identity(n, n);
}

/// Random PSD matrix of the given rank.
inline Mat random_psd(Rng& rng, Index n, Index rank) {
  Mat g(n, rank);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < rank; ++j) g(i, j) = nd(rng);
  return g * g.transpose();
}

}  // namespace netsel
