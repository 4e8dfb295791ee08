#pragma once

// Scale-invariant keypoints and 4x4x8 gradient-histogram descriptors.
//
// A from-scratch difference-of-Gaussian detector in the spirit of Lowe's
// SIFT: octaves are kept within [min_octave_size, max_octave_size] pixels,
// each octave carries steps_per_octave scale steps starting at initial_sigma.
// Not bit-compatible with any particular reference implementation.

#include "comir/core.hpp"
#include "comir/edt.hpp"
#include "comir/image.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace comir {

struct SiftConfig {
  int min_octave_size = 128;
  int max_octave_size = 1024;
  int steps_per_octave = 3;
  double initial_sigma = 1.6;
  double assumed_blur = 0.5;         // blur already present in the input
  double contrast_threshold = 0.04;  // |DoG| must exceed contrast_threshold / steps_per_octave
  double edge_threshold = 10.0;      // principal-curvature ratio r
  double ratio_test_threshold = 0.8;
  bool subpixel_refinement = false;  // 3-D quadratic extremum refinement
};

inline void validate(const SiftConfig& c) {
  if (c.min_octave_size < 8 || c.max_octave_size < c.min_octave_size)
    throw ContractError("sift: octave size range must satisfy 8 <= min <= max");
  if (c.steps_per_octave < 1) throw ContractError("sift: steps_per_octave must be >= 1");
  if (!(c.initial_sigma > c.assumed_blur) || c.assumed_blur < 0.0)
    throw ContractError("sift: initial_sigma must exceed assumed_blur >= 0");
  if (!(c.contrast_threshold > 0.0) || !(c.edge_threshold > 0.0) ||
      !(c.ratio_test_threshold > 0.0))
    throw ContractError("sift: thresholds must be positive");
}

struct Keypoint {
  double x = 0.0;  // input-image pixel coordinates
  double y = 0.0;
  double scale = 1.0;        // Gaussian sigma, input-image pixels
  double orientation = 0.0;  // radians in [0, 2pi)
  double response = 0.0;     // DoG value at the extremum
  int octave = -1;           // pyramid location; -1 when unknown
  int layer = -1;
};

inline constexpr int kDescriptorCells = 4;
inline constexpr int kDescriptorBins = 8;
inline constexpr int kDescriptorSize = kDescriptorCells * kDescriptorCells * kDescriptorBins;

using Descriptor = std::array<float, kDescriptorSize>;

/// Descriptor pipeline stages, exposed for inspection.
struct DescriptorStages {
  Descriptor normalized{};  // after the first L2 normalization
  Descriptor clamped{};     // entries clipped at 0.2, not yet renormalized
  Descriptor final{};       // unit L2 norm
};

inline constexpr float kDescriptorClamp = 0.2f;

namespace detail {

struct GradientField {
  std::vector<float> magnitude;
  std::vector<float> angle;  // [0, 2pi)
};

inline GradientField gradients(const Image& img) {
  GradientField g;
  g.magnitude.assign(img.size(), 0.0f);
  g.angle.assign(img.size(), 0.0f);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int y = 1; y + 1 < img.height; ++y)
    for (int x = 1; x + 1 < img.width; ++x) {
      const double dx = img(x + 1, y) - img(x - 1, y);
      const double dy = img(x, y + 1) - img(x, y - 1);
      double a = std::atan2(dy, dx);
      if (a < 0.0) a += two_pi;
      g.magnitude[img.index(x, y)] = float(std::hypot(dx, dy));
      g.angle[img.index(x, y)] = float(a >= two_pi ? 0.0 : a);
    }
  return g;
}

}  // namespace detail

/// Gaussian and DoG scale space. Layer k of octave o has sigma
/// initial_sigma * 2^(k/S) in octave pixels; octave pixels are
/// 2^o * base_scale input pixels.
class ScaleSpace {
 public:
  ScaleSpace(const Image& input, const SiftConfig& cfg) : cfg_(cfg) {
    validate(cfg);
    Image base = input;
    base.mask.reset();
    base_scale_ = 1.0;
    while (std::max(base.width, base.height) > cfg.max_octave_size) {
      base = downsample2(gaussian_blur(base, 1.0));
      base_scale_ *= 2.0;
    }
    if (std::min(base.width, base.height) < cfg.min_octave_size)
      throw ContractError("sift: image smaller than the minimum octave size");

    const int s = cfg.steps_per_octave;
    const double k = std::pow(2.0, 1.0 / s);
    std::vector<double> sigma(std::size_t(s) + 3);
    sigma[0] = cfg.initial_sigma;
    for (std::size_t i = 1; i < sigma.size(); ++i) sigma[i] = sigma[i - 1] * k;

    Image first = gaussian_blur(
        base, std::sqrt(cfg.initial_sigma * cfg.initial_sigma - cfg.assumed_blur * cfg.assumed_blur));
    while (true) {
      Octave oct;
      oct.gauss.push_back(std::move(first));
      for (std::size_t i = 1; i < sigma.size(); ++i)
        oct.gauss.push_back(gaussian_blur(oct.gauss.back(),
                                          std::sqrt(sigma[i] * sigma[i] - sigma[i - 1] * sigma[i - 1])));
      for (std::size_t i = 0; i + 1 < oct.gauss.size(); ++i) {
        Image d = oct.gauss[i + 1];
        for (std::size_t p = 0; p < d.size(); ++p) d.pixels[p] -= oct.gauss[i].pixels[p];
        oct.dog.push_back(std::move(d));
      }
      Image next = downsample2(oct.gauss[std::size_t(s)]);
      octaves_.push_back(std::move(oct));
      if (std::min(next.width, next.height) < cfg.min_octave_size) break;
      first = std::move(next);
    }
    grads_.resize(octaves_.size());
  }

  int octave_count() const { return int(octaves_.size()); }
  const SiftConfig& config() const { return cfg_; }
  double octave_factor(int o) const { return std::ldexp(base_scale_, o); }
  double layer_sigma(double layer) const {
    return cfg_.initial_sigma * std::pow(2.0, layer / cfg_.steps_per_octave);
  }
  const Image& gauss(int o, int l) const { return octaves_[std::size_t(o)].gauss[std::size_t(l)]; }
  const Image& dog(int o, int l) const { return octaves_[std::size_t(o)].dog[std::size_t(l)]; }

  const detail::GradientField& gradient(int o, int l) const {
    auto& slot = grads_[std::size_t(o)];
    if (slot.size() < octaves_[std::size_t(o)].gauss.size()) slot.resize(octaves_[std::size_t(o)].gauss.size());
    auto& g = slot[std::size_t(l)];
    if (!g) g = detail::gradients(gauss(o, l));
    return *g;
  }

 private:
  struct Octave {
    std::vector<Image> gauss;
    std::vector<Image> dog;
  };
  SiftConfig cfg_;
  double base_scale_ = 1.0;
  std::vector<Octave> octaves_;
  mutable std::vector<std::vector<std::optional<detail::GradientField>>> grads_;
};

namespace detail {

inline bool is_extremum(const ScaleSpace& ss, int o, int l, int x, int y) {
  const double v = ss.dog(o, l)(x, y);
  const bool want_max = v > 0.0;
  for (int dl = -1; dl <= 1; ++dl) {
    const Image& d = ss.dog(o, l + dl);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dl == 0 && dx == 0 && dy == 0) continue;
        const double u = d(x + dx, y + dy);
        if (want_max ? u >= v : u <= v) return false;
      }
  }
  return true;
}

// Hessian test on the spatial 2x2 block: reject edge-like responses.
inline bool passes_edge_test(const Image& d, int x, int y, double r) {
  const double v = d(x, y);
  const double dxx = d(x + 1, y) + d(x - 1, y) - 2.0 * v;
  const double dyy = d(x, y + 1) + d(x, y - 1) - 2.0 * v;
  const double dxy = 0.25 * (d(x + 1, y + 1) - d(x - 1, y + 1) - d(x + 1, y - 1) + d(x - 1, y - 1));
  const double tr = dxx + dyy;
  const double det = dxx * dyy - dxy * dxy;
  if (det <= 0.0) return false;
  return tr * tr * r < (r + 1.0) * (r + 1.0) * det;
}

struct Refined {
  double x, y, layer, value;
  int ix, iy, il;
};

// Quadratic fit of the DoG around (x, y, l); moves to a neighbor when the
// offset exceeds half a sample. Returns nullopt when it does not converge.
inline std::optional<Refined> refine(const ScaleSpace& ss, int o, int l, int x, int y, int border) {
  const int layers = ss.config().steps_per_octave;
  for (int iter = 0; iter < 5; ++iter) {
    const Image& d0 = ss.dog(o, l - 1);
    const Image& d1 = ss.dog(o, l);
    const Image& d2 = ss.dog(o, l + 1);
    const double v = d1(x, y);
    Eigen::Vector3d g((d1(x + 1, y) - d1(x - 1, y)) * 0.5, (d1(x, y + 1) - d1(x, y - 1)) * 0.5,
                      (d2(x, y) - d0(x, y)) * 0.5);
    Eigen::Matrix3d h;
    h(0, 0) = d1(x + 1, y) + d1(x - 1, y) - 2 * v;
    h(1, 1) = d1(x, y + 1) + d1(x, y - 1) - 2 * v;
    h(2, 2) = d2(x, y) + d0(x, y) - 2 * v;
    h(0, 1) = h(1, 0) = 0.25 * (d1(x + 1, y + 1) - d1(x - 1, y + 1) - d1(x + 1, y - 1) + d1(x - 1, y - 1));
    h(0, 2) = h(2, 0) = 0.25 * (d2(x + 1, y) - d2(x - 1, y) - d0(x + 1, y) + d0(x - 1, y));
    h(1, 2) = h(2, 1) = 0.25 * (d2(x, y + 1) - d2(x, y - 1) - d0(x, y + 1) + d0(x, y - 1));
    const Eigen::Vector3d off = -h.fullPivLu().solve(g);
    if (!off.allFinite()) return std::nullopt;
    if (std::abs(off(0)) < 0.5 && std::abs(off(1)) < 0.5 && std::abs(off(2)) < 0.5) {
      return Refined{x + off(0), y + off(1), l + off(2), v + 0.5 * g.dot(off), x, y, l};
    }
    x += int(std::lround(off(0)));
    y += int(std::lround(off(1)));
    l += int(std::lround(off(2)));
    if (l < 1 || l > layers || x < border || y < border || x >= d1.width - border ||
        y >= d1.height - border)
      return std::nullopt;
  }
  return std::nullopt;
}

// Dominant gradient orientations (peaks >= 80% of the maximum).
inline std::vector<double> orientations(const ScaleSpace& ss, int o, int l, double x, double y,
                                        double sigma) {
  constexpr int bins = 36;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const Image& img = ss.gauss(o, l);
  const GradientField& g = ss.gradient(o, l);
  const double sw = 1.5 * sigma;
  const int radius = int(std::lround(3.0 * sw));
  const int cx = int(std::lround(x)), cy = int(std::lround(y));
  std::array<double, bins> hist{};
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const int xx = cx + dx, yy = cy + dy;
      if (xx < 1 || yy < 1 || xx >= img.width - 1 || yy >= img.height - 1) continue;
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sw * sw));
      const std::size_t i = img.index(xx, yy);
      int b = int(std::floor(g.angle[i] * bins / two_pi));
      b = ((b % bins) + bins) % bins;
      hist[std::size_t(b)] += w * g.magnitude[i];
    }
  for (int pass = 0; pass < 2; ++pass) {
    std::array<double, bins> s{};
    for (int b = 0; b < bins; ++b)
      s[std::size_t(b)] = (hist[std::size_t((b + bins - 1) % bins)] + hist[std::size_t(b)] +
                           hist[std::size_t((b + 1) % bins)]) / 3.0;
    hist = s;
  }
  const double peak = *std::max_element(hist.begin(), hist.end());
  std::vector<double> out;
  if (peak <= 0.0) return out;
  for (int b = 0; b < bins; ++b) {
    const double l0 = hist[std::size_t((b + bins - 1) % bins)];
    const double c = hist[std::size_t(b)];
    const double r0 = hist[std::size_t((b + 1) % bins)];
    if (c > l0 && c > r0 && c >= 0.8 * peak) {
      const double shift = 0.5 * (l0 - r0) / (l0 - 2.0 * c + r0);
      double a = (b + 0.5 + shift) * two_pi / bins;
      a = std::fmod(a + two_pi, two_pi);
      out.push_back(a);
    }
  }
  return out;
}

// Radius (octave pixels) of the descriptor's sampling support.
inline double descriptor_radius(double sigma) {
  const double hist_width = 3.0 * sigma;
  return hist_width * std::numbers::sqrt2 * (kDescriptorCells + 1) * 0.5;
}

inline std::optional<DescriptorStages> describe(const ScaleSpace& ss, int o, int l, double x,
                                                double y, double sigma, double orientation) {
  constexpr int d = kDescriptorCells, n = kDescriptorBins;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const Image& img = ss.gauss(o, l);
  const GradientField& g = ss.gradient(o, l);
  const double hist_width = 3.0 * sigma;
  const int radius = int(std::lround(descriptor_radius(sigma)));
  const int cx = int(std::lround(x)), cy = int(std::lround(y));
  if (cx - radius < 1 || cy - radius < 1 || cx + radius >= img.width - 1 ||
      cy + radius >= img.height - 1)
    return std::nullopt;

  const double cos_t = std::cos(orientation) / hist_width;
  const double sin_t = std::sin(orientation) / hist_width;
  const double weight_scale = -1.0 / (0.5 * d * d);
  // (d + 2)^2 * (n + 2) accumulator; padding absorbs interpolation spill.
  std::vector<double> acc(std::size_t((d + 2) * (d + 2) * (n + 2)), 0.0);
  auto cell = [&](int r, int c, int b) -> double& {
    return acc[std::size_t(((r * (d + 2)) + c) * (n + 2) + b)];
  };
  const double sub_x = x - cx, sub_y = y - cy;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const double px = dx - sub_x, py = dy - sub_y;
      // Rotate into the keypoint frame, in units of histogram cells.
      const double c_rot = cos_t * px + sin_t * py;
      const double r_rot = -sin_t * px + cos_t * py;
      const double rbin = r_rot + d / 2.0 - 0.5;
      const double cbin = c_rot + d / 2.0 - 0.5;
      if (rbin <= -1.0 || rbin >= d || cbin <= -1.0 || cbin >= d) continue;
      const std::size_t i = img.index(cx + dx, cy + dy);
      const double mag = g.magnitude[i] * std::exp((c_rot * c_rot + r_rot * r_rot) * weight_scale);
      double obin = (g.angle[i] - orientation) * n / two_pi;
      obin = std::fmod(obin + 2.0 * n, double(n));

      const int r0 = int(std::floor(rbin)), c0 = int(std::floor(cbin)), o0 = int(std::floor(obin));
      const double fr = rbin - r0, fc = cbin - c0, fo = obin - o0;
      for (int ir = 0; ir <= 1; ++ir) {
        const double wr = ir ? fr : 1.0 - fr;
        for (int ic = 0; ic <= 1; ++ic) {
          const double wc = ic ? fc : 1.0 - fc;
          for (int io = 0; io <= 1; ++io) {
            const double wo = io ? fo : 1.0 - fo;
            cell(r0 + ir + 1, c0 + ic + 1, (o0 + io) % n) += mag * wr * wc * wo;
          }
        }
      }
    }

  DescriptorStages st;
  double norm = 0.0;
  std::array<double, kDescriptorSize> raw{};
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      for (int b = 0; b < n; ++b) {
        const double v = cell(r + 1, c + 1, b);
        raw[std::size_t((r * d + c) * n + b)] = v;
        norm += v * v;
      }
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) return std::nullopt;
  double norm2 = 0.0;
  for (int i = 0; i < kDescriptorSize; ++i) {
    const double v = raw[std::size_t(i)] / norm;
    st.normalized[std::size_t(i)] = float(v);
    const double c = std::min(v, double(kDescriptorClamp));
    st.clamped[std::size_t(i)] = float(c);
    norm2 += c * c;
  }
  norm2 = std::sqrt(norm2);
  for (int i = 0; i < kDescriptorSize; ++i)
    st.final[std::size_t(i)] = float(st.clamped[std::size_t(i)] / norm2);
  return st;
}

// Locates the pyramid layer for a keypoint without stored pyramid indices.
inline void locate(const ScaleSpace& ss, Keypoint& kp) {
  if (kp.octave >= 0 && kp.octave < ss.octave_count() && kp.layer >= 0) return;
  const int s = ss.config().steps_per_octave;
  const double rel = std::log2(kp.scale / ss.octave_factor(0) / ss.config().initial_sigma);
  int total = int(std::lround(rel * s));
  total = std::clamp(total, 1, (ss.octave_count() - 1) * s + s);
  kp.octave = std::min((total - 1) / s, ss.octave_count() - 1);
  kp.layer = std::clamp(total - kp.octave * s, 1, s);
}

}  // namespace detail

struct Features {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;  // parallel to keypoints
};

/// DoG extrema filtered by contrast and edge response, one keypoint per
/// dominant orientation. Pixels whose descriptor support reaches an invalid
/// (masked) region are skipped.
inline std::vector<Keypoint> detect_keypoints(const ScaleSpace& ss, const Image& img) {
  const SiftConfig& cfg = ss.config();
  const int s = cfg.steps_per_octave;
  const double threshold = cfg.contrast_threshold / s;

  std::vector<double> invalid_dist;
  if (img.mask) {
    std::vector<std::uint8_t> invalid(img.size());
    for (std::size_t i = 0; i < invalid.size(); ++i) invalid[i] = (*img.mask)[i] ? 0 : 1;
    invalid_dist = distance_transform(invalid, img.width, img.height);
  }

  std::vector<Keypoint> out;
  constexpr int border = 5;
  for (int o = 0; o < ss.octave_count(); ++o) {
    const double f = ss.octave_factor(o);
    for (int l = 1; l <= s; ++l) {
      const Image& d = ss.dog(o, l);
      for (int y = border; y < d.height - border; ++y)
        for (int x = border; x < d.width - border; ++x) {
          const double v = d(x, y);
          if (std::abs(v) <= 0.5 * threshold) continue;
          if (!detail::is_extremum(ss, o, l, x, y)) continue;

          double kx = x, ky = y, kl = l, value = v;
          int ix = x, iy = y, il = l;
          if (cfg.subpixel_refinement) {
            auto r = detail::refine(ss, o, l, x, y, border);
            if (!r) continue;
            kx = r->x, ky = r->y, kl = r->layer, value = r->value;
            ix = r->ix, iy = r->iy, il = r->il;
          }
          if (std::abs(value) <= threshold) continue;
          if (!detail::passes_edge_test(ss.dog(o, il), ix, iy, cfg.edge_threshold)) continue;

          const double sigma = ss.layer_sigma(kl);
          if (!invalid_dist.empty()) {
            const int bx = std::clamp(int(std::lround(kx * f)), 0, img.width - 1);
            const int by = std::clamp(int(std::lround(ky * f)), 0, img.height - 1);
            if (invalid_dist[img.index(bx, by)] <= detail::descriptor_radius(sigma) * f + 1.0) continue;
          }
          for (double ori : detail::orientations(ss, o, il, kx, ky, sigma)) {
            Keypoint kp;
            kp.x = kx * f;
            kp.y = ky * f;
            kp.scale = sigma * f;
            kp.orientation = ori;
            kp.response = value;
            kp.octave = o;
            kp.layer = il;
            out.push_back(kp);
          }
        }
    }
  }
  return out;
}

inline std::vector<Keypoint> detect_keypoints(const Image& img, const SiftConfig& cfg = {}) {
  bool constant = true;
  for (double v : img.pixels)
    if (v != img.pixels.front()) {
      constant = false;
      break;
    }
  if (constant) return {};
  const ScaleSpace ss(img, cfg);
  return detect_keypoints(ss, img);
}

/// Descriptors for the keypoints whose support fits in the image; the
/// returned keypoint list drops the skipped ones so indices stay parallel.
inline Features compute_descriptors(const ScaleSpace& ss, std::vector<Keypoint> kps) {
  Features out;
  out.keypoints.reserve(kps.size());
  out.descriptors.reserve(kps.size());
  for (Keypoint& kp : kps) {
    detail::locate(ss, kp);
    const double f = ss.octave_factor(kp.octave);
    auto st = detail::describe(ss, kp.octave, kp.layer, kp.x / f, kp.y / f, kp.scale / f, kp.orientation);
    if (!st) continue;
    out.keypoints.push_back(kp);
    out.descriptors.push_back(st->final);
  }
  return out;
}

inline Features compute_descriptors(const Image& img, std::vector<Keypoint> kps,
                                    const SiftConfig& cfg = {}) {
  const ScaleSpace ss(img, cfg);
  return compute_descriptors(ss, std::move(kps));
}

/// Every stage of the descriptor pipeline for one keypoint.
inline std::optional<DescriptorStages> descriptor_stages(const Image& img, Keypoint kp,
                                                         const SiftConfig& cfg = {}) {
  const ScaleSpace ss(img, cfg);
  detail::locate(ss, kp);
  const double f = ss.octave_factor(kp.octave);
  return detail::describe(ss, kp.octave, kp.layer, kp.x / f, kp.y / f, kp.scale / f, kp.orientation);
}

/// Detection and description on one shared scale space.
inline Features extract_features(const Image& img, const SiftConfig& cfg = {}) {
  bool constant = true;
  for (double v : img.pixels)
    if (v != img.pixels.front()) {
      constant = false;
      break;
    }
  if (constant) return {};
  const ScaleSpace ss(img, cfg);
  return compute_descriptors(ss, detect_keypoints(ss, img));
}

}  // namespace comir
