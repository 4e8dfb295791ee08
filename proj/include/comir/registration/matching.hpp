#pragma once

#include "comir/registration/sift.hpp"

#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace comir {

struct Match {
  std::size_t a = 0;  // index into the first descriptor set
  std::size_t b = 0;  // index into the second
  double distance = 0.0;

  friend bool operator==(const Match&, const Match&) = default;
};

inline double squared_distance(const Descriptor& x, const Descriptor& y) {
  float s = 0.0f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float d = x[i] - y[i];
    s += d * d;
  }
  return double(s);
}

/// Nearest-neighbor matching with the ratio test d1/d2 < ratio. Ties resolve
/// to the lower index. With a single candidate the nearest is kept.
inline std::vector<Match> match_descriptors(std::span<const Descriptor> da,
                                            std::span<const Descriptor> db, double ratio) {
  if (da.empty() || db.empty()) throw ContractError("match_descriptors: empty descriptor set");
  if (!(ratio > 0.0)) throw ContractError("match_descriptors: ratio must be > 0");
  std::vector<Match> out;
  for (std::size_t i = 0; i < da.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < db.size(); ++j) {
      const double d = squared_distance(da[i], db[j]);
      if (d < best) {
        second = best;
        best = d;
        best_j = j;
      } else if (d < second) {
        second = d;
      }
    }
    const double d1 = std::sqrt(best);
    if (db.size() < 2) {
      out.push_back({i, best_j, d1});
      continue;
    }
    const double d2 = std::sqrt(second);
    // d1 < ratio * d2, which also rejects d1 == d2 == 0.
    if (d1 < ratio * d2) out.push_back({i, best_j, d1});
  }
  return out;
}

}  // namespace comir
