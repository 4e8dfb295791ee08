#pragma once

#include "comir/core.hpp"
#include "comir/registration/transform.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace comir {

struct RansacConfig {
  int iterations = 1000;
  double inlier_threshold_px = 5.0;
  int min_inliers = 4;
  std::uint64_t seed = 1;
};

inline void validate(const RansacConfig& c) {
  if (c.iterations < 1) throw ContractError("ransac: iterations must be >= 1");
  if (!(c.inlier_threshold_px > 0.0)) throw ContractError("ransac: inlier threshold must be > 0");
  if (c.min_inliers < 2) throw ContractError("ransac: min_inliers must be >= 2");
}

struct RansacResult {
  std::optional<RigidTransform> transform;  // empty when consensus is too small
  std::vector<std::size_t> inliers;         // of the best consensus set
  int degenerate_samples = 0;

  bool success() const { return transform.has_value(); }
};

/// Least-squares rotation and translation mapping a onto b (2-D orthogonal
/// Procrustes, no scaling), as p' = R p + t.
inline std::pair<double, Point2> procrustes_rigid(std::span<const Point2> a,
                                                  std::span<const Point2> b) {
  require(a.size() == b.size() && !a.empty(), "procrustes_rigid: need equal, non-empty point sets");
  Point2 ca{}, cb{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca = ca + a[i];
    cb = cb + b[i];
  }
  ca = (1.0 / double(a.size())) * ca;
  cb = (1.0 / double(b.size())) * cb;
  double sin_sum = 0.0, cos_sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Point2 p = a[i] - ca, q = b[i] - cb;
    cos_sum += p.x * q.x + p.y * q.y;
    sin_sum += p.x * q.y - p.y * q.x;
  }
  const double theta = std::atan2(sin_sum, cos_sum);
  const double c = std::cos(theta), s = std::sin(theta);
  const Point2 t{cb.x - (c * ca.x - s * ca.y), cb.y - (s * ca.x + c * ca.y)};
  return {theta, t};
}

/// Two-point rigid RANSAC over matched points a[i] <-> b[i], followed by a
/// Procrustes refit on the largest consensus set. The returned transform maps
/// a into b and is expressed about `pivot`.
inline RansacResult ransac_rigid(std::span<const Point2> a, std::span<const Point2> b,
                                 const RansacConfig& cfg, Point2 pivot = {}) {
  validate(cfg);
  if (a.size() != b.size()) throw ContractError("ransac_rigid: point lists differ in length");
  RansacResult result;
  const std::size_t n = a.size();
  if (n < 2) return result;

  Rng rng(cfg.seed);
  const double thr2 = cfg.inlier_threshold_px * cfg.inlier_threshold_px;
  std::vector<std::size_t> best, current;
  current.reserve(n);
  constexpr double eps = 1e-9;

  for (int it = 0; it < cfg.iterations; ++it) {
    const std::size_t i = std::size_t(rng.index(n));
    std::size_t j = std::size_t(rng.index(n - 1));
    if (j >= i) ++j;
    const Point2 da = a[j] - a[i], db = b[j] - b[i];
    if (da.norm() < eps || db.norm() < eps) {
      ++result.degenerate_samples;
      continue;
    }
    const double theta = std::atan2(da.x * db.y - da.y * db.x, da.x * db.x + da.y * db.y);
    const double c = std::cos(theta), s = std::sin(theta);
    const Point2 ma = 0.5 * (a[i] + a[j]), mb = 0.5 * (b[i] + b[j]);
    const Point2 t{mb.x - (c * ma.x - s * ma.y), mb.y - (s * ma.x + c * ma.y)};

    current.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const double ex = c * a[k].x - s * a[k].y + t.x - b[k].x;
      const double ey = s * a[k].x + c * a[k].y + t.y - b[k].y;
      if (ex * ex + ey * ey < thr2) current.push_back(k);
    }
    if (current.size() > best.size()) best = current;
  }

  result.inliers = best;
  if (best.size() < std::size_t(cfg.min_inliers)) return result;

  std::vector<Point2> pa, pb;
  pa.reserve(best.size());
  pb.reserve(best.size());
  for (std::size_t k : best) {
    pa.push_back(a[k]);
    pb.push_back(b[k]);
  }
  const auto [theta, t] = procrustes_rigid(pa, pb);
  result.transform = RigidTransform::from_linear(theta, t, pivot);
  return result;
}

}  // namespace comir
