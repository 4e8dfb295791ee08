#pragma once

#include "comir/core.hpp"

#include <array>
#include <cmath>

namespace comir {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point2, Point2) = default;

  double norm() const { return std::hypot(x, y); }
};

inline double distance(Point2 a, Point2 b) { return (a - b).norm(); }

/// Rotation by theta about a pivot, followed by a translation:
///   p' = R(theta) (p - center) + center + (tx, ty)
struct RigidTransform {
  double theta = 0.0;  // radians, counter-clockwise in (x right, y down) pixel axes
  double tx = 0.0;
  double ty = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  static RigidTransform identity(Point2 center = {}) { return {0.0, 0.0, 0.0, center.x, center.y}; }

  /// From the pivot-free form p' = R p + t.
  static RigidTransform from_linear(double theta, Point2 t, Point2 center = {}) {
    const double c = std::cos(theta), s = std::sin(theta);
    // t = t_pivot - R*center + center  =>  t_pivot = t + R*center - center
    const Point2 rc{c * center.x - s * center.y, s * center.x + c * center.y};
    const Point2 tp = t + rc - center;
    return {theta, tp.x, tp.y, center.x, center.y};
  }

  Point2 center() const { return {cx, cy}; }

  Point2 apply(Point2 p) const {
    const double c = std::cos(theta), s = std::sin(theta);
    const double dx = p.x - cx, dy = p.y - cy;
    return {c * dx - s * dy + cx + tx, s * dx + c * dy + cy + ty};
  }

  /// Translation of the pivot-free form p' = R p + t.
  Point2 linear_translation() const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {-(c * cx - s * cy) + cx + tx, -(s * cx + c * cy) + cy + ty};
  }

  /// Same pivot; p = R^-1 (p' - center - t) + center.
  RigidTransform inverse() const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {-theta, -(c * tx + s * ty), -(-s * tx + c * ty), cx, cy};
  }

  /// Same map expressed about another pivot.
  RigidTransform with_center(Point2 pivot) const {
    return from_linear(theta, linear_translation(), pivot);
  }

  bool finite() const {
    return std::isfinite(theta) && std::isfinite(tx) && std::isfinite(ty) && std::isfinite(cx) &&
           std::isfinite(cy);
  }
};

/// (outer o inner)(p) = outer(inner(p)), expressed about inner's pivot.
inline RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner) {
  const double c = std::cos(outer.theta), s = std::sin(outer.theta);
  const Point2 ti = inner.linear_translation();
  const Point2 to = outer.linear_translation();
  const Point2 t{c * ti.x - s * ti.y + to.x, s * ti.x + c * ti.y + to.y};
  return RigidTransform::from_linear(outer.theta + inner.theta, t, inner.center());
}

/// Pixel-center corners: (0,0), (W-1,0), (0,H-1), (W-1,H-1).
inline std::array<Point2, 4> image_corners(int width, int height) {
  const double w = width - 1, h = height - 1;
  return {Point2{0.0, 0.0}, Point2{w, 0.0}, Point2{0.0, h}, Point2{w, h}};
}

inline Point2 image_center(int width, int height) {
  return {0.5 * (width - 1), 0.5 * (height - 1)};
}

/// Mean displacement of the four image corners between two transforms.
inline double registration_error(const RigidTransform& estimated, const RigidTransform& ground_truth,
                                 int width, int height) {
  require(width >= 1 && height >= 1, "registration_error: positive image dimensions required");
  double sum = 0.0;
  for (const Point2& c : image_corners(width, height))
    sum += distance(estimated.apply(c), ground_truth.apply(c));
  return 0.25 * sum;
}

}  // namespace comir
