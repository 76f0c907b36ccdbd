#pragma once

// Random inputs for property tests. Seeds are explicit everywhere.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "deepiqa/archive.hpp"

namespace gen {

using Rng = std::mt19937_64;

inline deepiqa::Shape random_shape(Rng& rng, std::size_t max_side = 6, std::size_t max_channels = 5) {
  std::uniform_int_distribution<std::size_t> side(1, max_side), ch(1, max_channels);
  return {side(rng), side(rng), ch(rng)};
}

inline deepiqa::FeatureMap random_map(Rng& rng, const deepiqa::Shape& shape, float lo = -2.0f,
                                      float hi = 2.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(shape.elements());
  for (auto& x : v) x = u(rng);
  return {shape, std::move(v)};
}

inline std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

/// out position k takes the pixel (all channels) at input position perm[k].
inline deepiqa::FeatureMap permute_pixels(const deepiqa::FeatureMap& a,
                                          const std::vector<std::size_t>& perm) {
  const std::size_t C = a.channels();
  std::vector<float> v(a.values().size());
  for (std::size_t k = 0; k < perm.size(); ++k)
    for (std::size_t c = 0; c < C; ++c) v[k * C + c] = a.values()[perm[k] * C + c];
  return {a.shape(), std::move(v)};
}

/// Series drawn from a small integer alphabet so ties are common.
inline std::vector<double> tied_series(Rng& rng, std::size_t n, int levels) {
  std::uniform_int_distribution<int> u(0, levels - 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline bool has_two_values(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) != v.end();
}

}  // namespace gen
