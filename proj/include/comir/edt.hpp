#pragma once

// Exact Euclidean distance transform by separable lower envelopes of parabolas
// (Felzenszwalb & Huttenlocher). Linear in the number of pixels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace comir {

namespace detail {

// 1-D squared distance transform of a sampled function f over n points.
// Infinite entries are never on the envelope.
inline void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.resize(std::size_t(n));
  z.resize(std::size_t(n) + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    while (k >= 0) {
      const int p = v[std::size_t(k)];
      const double s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[std::size_t(k)]) {
        --k;
      } else {
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
    } else {
      const int p = v[std::size_t(k)];
      const double s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      ++k;
      v[std::size_t(k)] = q;
      z[std::size_t(k)] = s;
      z[std::size_t(k) + 1] = inf;
    }
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = inf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[std::size_t(j) + 1] < q) ++j;
    const int p = v[std::size_t(j)];
    d[q] = double(q - p) * double(q - p) + f[p];
  }
}

}  // namespace detail

/// Squared Euclidean distance from every pixel to the nearest pixel with
/// features[i] != 0. All entries are +inf when no feature pixel exists.
inline std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& features,
                                                      int width, int height) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t w = std::size_t(width), h = std::size_t(height);
  std::vector<double> grid(w * h);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = features[i] ? 0.0 : inf;

  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> in(std::max(w, h)), out(std::max(w, h));
  // Columns first, then rows.
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) in[y] = grid[y * w + x];
    detail::edt_1d(in.data(), out.data(), height, v, z);
    for (std::size_t y = 0; y < h; ++y) grid[y * w + x] = out[y];
  }
  for (std::size_t y = 0; y < h; ++y) {
    detail::edt_1d(&grid[y * w], out.data(), width, v, z);
    std::copy(out.begin(), out.begin() + std::ptrdiff_t(w), grid.begin() + std::ptrdiff_t(y * w));
  }
  return grid;
}

inline std::vector<double> distance_transform(const std::vector<std::uint8_t>& features, int width,
                                              int height) {
  auto d = squared_distance_transform(features, width, height);
  for (double& x : d) x = std::sqrt(x);
  return d;
}

}  // namespace comir
