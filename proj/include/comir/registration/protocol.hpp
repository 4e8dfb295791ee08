#pragma once

// Evaluation protocol: synthetic rigidly displaced test pairs, the
// detect -> describe -> match -> RANSAC pipeline, corner error and RSR.

#include "comir/image.hpp"
#include "comir/registration/matching.hpp"
#include "comir/registration/ransac.hpp"
#include "comir/registration/sift.hpp"
#include "comir/registration/transform.hpp"

#include <numbers>
#include <span>
#include <string>

namespace comir {

/// out(p) = img(T^-1 p), bilinear. Pixels whose preimage leaves the image (or
/// touches an invalid source pixel) are 0 and marked invalid.
inline Image warp_image(const Image& img, const RigidTransform& t) {
  Image out(img.width, img.height, 0.0);
  std::vector<std::uint8_t> mask(out.size(), 0);
  const RigidTransform inv = t.inverse();
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const Point2 src = inv.apply({double(x), double(y)});
      const auto v = img.sample(src.x, src.y);
      if (!v) continue;
      if (img.mask) {
        const int x0 = int(src.x), y0 = int(src.y);
        const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
        if (!img.valid(x0, y0) || !img.valid(x1, y0) || !img.valid(x0, y1) || !img.valid(x1, y1))
          continue;
      }
      out(x, y) = *v;
      mask[out.index(x, y)] = 1;
    }
  out.mask = std::move(mask);
  return out;
}

struct TestPair {
  Image moving;
  RigidTransform ground_truth;  // maps fixed-image coordinates to moving-image coordinates
};

/// theta ~ U(-max, max) degrees, (tx, ty) ~ U(-max, max) px, pivot at the
/// image center.
inline TestPair synthesize_test_pair(const Image& img, double max_theta_deg,
                                     double max_translation_px, std::uint64_t seed) {
  require(max_theta_deg >= 0.0 && max_translation_px >= 0.0,
          "synthesize_test_pair: bounds must be >= 0");
  Rng rng(seed);
  const double theta_deg = rng.uniform(-max_theta_deg, max_theta_deg);
  const double tx = rng.uniform(-max_translation_px, max_translation_px);
  const double ty = rng.uniform(-max_translation_px, max_translation_px);
  const Point2 c = image_center(img.width, img.height);
  const RigidTransform gt{theta_deg * std::numbers::pi / 180.0, tx, ty, c.x, c.y};
  if (gt.theta == 0.0 && tx == 0.0 && ty == 0.0) {
    Image copy = img;
    if (!copy.mask) copy.mask = std::vector<std::uint8_t>(copy.size(), 1);
    return {std::move(copy), gt};
  }
  return {warp_image(img, gt), gt};
}

struct RegistrationDiagnostics {
  std::size_t keypoints_fixed = 0;
  std::size_t keypoints_moving = 0;
  std::size_t matches = 0;
  std::size_t inliers = 0;
  std::string failed_stage;  // empty on success
};

struct RegistrationResult {
  std::optional<RigidTransform> transform;  // fixed -> moving, pivot at the fixed image center
  RegistrationDiagnostics diagnostics;

  bool success() const { return transform.has_value(); }
};

inline RegistrationResult register_features(const Features& fixed, const Features& moving,
                                            int width, int height, const SiftConfig& sift,
                                            const RansacConfig& ransac) {
  RegistrationResult r;
  r.diagnostics.keypoints_fixed = fixed.keypoints.size();
  r.diagnostics.keypoints_moving = moving.keypoints.size();
  if (fixed.descriptors.empty()) {
    r.diagnostics.failed_stage = "detect_fixed";
    return r;
  }
  if (moving.descriptors.empty()) {
    r.diagnostics.failed_stage = "detect_moving";
    return r;
  }
  const auto matches = match_descriptors(fixed.descriptors, moving.descriptors, sift.ratio_test_threshold);
  r.diagnostics.matches = matches.size();
  if (matches.size() < 2) {
    r.diagnostics.failed_stage = "match";
    return r;
  }
  std::vector<Point2> pa, pb;
  pa.reserve(matches.size());
  pb.reserve(matches.size());
  for (const Match& m : matches) {
    pa.push_back({fixed.keypoints[m.a].x, fixed.keypoints[m.a].y});
    pb.push_back({moving.keypoints[m.b].x, moving.keypoints[m.b].y});
  }
  const auto rr = ransac_rigid(pa, pb, ransac, image_center(width, height));
  r.diagnostics.inliers = rr.inliers.size();
  if (!rr.success()) {
    r.diagnostics.failed_stage = "ransac";
    return r;
  }
  r.transform = rr.transform;
  return r;
}

/// detect -> describe -> match -> RANSAC.
inline RegistrationResult register_pair(const Image& fixed, const Image& moving,
                                        const SiftConfig& sift = {}, const RansacConfig& ransac = {}) {
  if (!fixed.same_shape(moving)) throw DataError("register_pair: image dimensions differ");
  return register_features(extract_features(fixed, sift), extract_features(moving, sift),
                           fixed.width, fixed.height, sift, ransac);
}

/// Percentage of errors strictly below the threshold. Failed registrations are
/// expected as +inf and count against the rate.
inline double registration_success_rate(std::span<const double> errors, double threshold) {
  require(!errors.empty(), "registration_success_rate: empty error list");
  std::size_t ok = 0;
  for (double e : errors)
    if (e < threshold) ++ok;
  return 100.0 * double(ok) / double(errors.size());
}

/// Threshold given as a percentage of the larger image side.
inline double threshold_from_percent(double percent, int width, int height) {
  return percent / 100.0 * double(std::max(width, height));
}

}  // namespace comir
