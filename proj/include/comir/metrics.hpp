#pragma once

// Representation-quality measures between aligned image pairs (MSE, 2-D
// correlation, SSIM, alpha-AMD), the Frechet distance between feature
// distributions, and the Pearson coefficient used to relate metrics to
// registration success.

#include "comir/core.hpp"
#include "comir/edt.hpp"
#include "comir/image.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace comir {

namespace detail {

inline void check_pair(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b))
    throw DataError(std::string(what) + ": image dimensions differ (" + std::to_string(a.width) +
                    "x" + std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                    std::to_string(b.height) + ")");
  if (!a.all_finite() || !b.all_finite()) throw DomainError(std::string(what) + ": non-finite pixels");
}

inline std::vector<std::uint8_t> joint_mask(const Image& a, const Image& b) {
  std::vector<std::uint8_t> m(a.size(), 1);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = (a.valid(i) && b.valid(i)) ? 1 : 0;
  return m;
}

}  // namespace detail

/// Mean squared intensity difference over jointly valid pixels.
inline double image_mse(const Image& a, const Image& b) {
  detail::check_pair(a, b, "image_mse");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.valid(i) || !b.valid(i)) continue;
    const double d = a.pixels[i] - b.pixels[i];
    s += d * d;
    ++n;
  }
  if (n == 0) throw DataError("image_mse: empty joint mask");
  return s / double(n);
}

/// Pearson coefficient of two equal-length sequences.
inline double pcc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("pcc: sequences differ in length");
  if (x.size() < 2) throw ContractError("pcc: need at least two values");
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; });
  };
  if (sxx == 0.0 || syy == 0.0 || constant(x) || constant(y))
    throw DomainError("pcc: undefined correlation (constant sequence)");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 2-D correlation coefficient over jointly valid pixels.
inline double image_correlation(const Image& a, const Image& b) {
  detail::check_pair(a, b, "image_correlation");
  std::vector<double> xa, xb;
  xa.reserve(a.size());
  xb.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.valid(i) || !b.valid(i)) continue;
    xa.push_back(a.pixels[i]);
    xb.push_back(b.pixels[i]);
  }
  if (xa.size() < 2) throw DataError("image_correlation: fewer than two jointly valid pixels");
  try {
    return pcc(xa, xb);
  } catch (const DomainError&) {
    throw DomainError("image_correlation: undefined correlation (constant image)");
  }
}

struct SsimConfig {
  int window_size = 11;
  double gaussian_sigma = 1.5;
  double dynamic_range = 1.0;

  double c1() const { return (0.01 * dynamic_range) * (0.01 * dynamic_range); }
  double c2() const { return (0.03 * dynamic_range) * (0.03 * dynamic_range); }
};

/// Mean local SSIM over every Gaussian-weighted window lying fully inside the
/// image (and fully inside the joint mask when one exists).
inline double image_ssim(const Image& a, const Image& b, const SsimConfig& cfg = {}) {
  detail::check_pair(a, b, "image_ssim");
  if (cfg.window_size < 3 || cfg.window_size % 2 == 0)
    throw ContractError("image_ssim: window_size must be odd and >= 3");
  if (!(cfg.dynamic_range > 0.0) || !(cfg.gaussian_sigma > 0.0))
    throw ContractError("image_ssim: dynamic_range and gaussian_sigma must be > 0");
  const int ws = cfg.window_size, r = ws / 2;
  const int w = a.width, h = a.height;
  if (w < ws || h < ws) throw DataError("image_ssim: image smaller than the window");

  const auto k = gaussian_kernel(cfg.gaussian_sigma, r);
  const int ow = w - 2 * r, oh = h - 2 * r;

  // Horizontal pass over all rows, producing ow columns; five channels.
  constexpr int C = 5;
  std::vector<double> hpass(std::size_t(C) * std::size_t(ow) * std::size_t(h));
  auto hidx = [&](int c, int x, int y) {
    return (std::size_t(c) * std::size_t(h) + std::size_t(y)) * std::size_t(ow) + std::size_t(x);
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s[C] = {0, 0, 0, 0, 0};
      for (int i = 0; i < ws; ++i) {
        const double wa = a(x + i, y), wb = b(x + i, y), kk = k[std::size_t(i)];
        s[0] += kk * wa;
        s[1] += kk * wb;
        s[2] += kk * wa * wa;
        s[3] += kk * wb * wb;
        s[4] += kk * wa * wb;
      }
      for (int c = 0; c < C; ++c) hpass[hidx(c, x, y)] = s[c];
    }

  // Window validity from an integral image of invalid pixels.
  const bool masked = a.mask.has_value() || b.mask.has_value();
  std::vector<long> invalid;
  if (masked) {
    invalid.assign(std::size_t(w + 1) * std::size_t(h + 1), 0);
    auto at = [&](int x, int y) -> long& { return invalid[std::size_t(y) * std::size_t(w + 1) + std::size_t(x)]; };
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        at(x + 1, y + 1) = at(x, y + 1) + at(x + 1, y) - at(x, y) +
                           ((a.valid(x, y) && b.valid(x, y)) ? 0 : 1);
  }
  auto window_valid = [&](int x, int y) {
    if (!masked) return true;
    auto at = [&](int xx, int yy) { return invalid[std::size_t(yy) * std::size_t(w + 1) + std::size_t(xx)]; };
    return at(x + ws, y + ws) - at(x, y + ws) - at(x + ws, y) + at(x, y) == 0;
  };

  const double c1 = cfg.c1(), c2 = cfg.c2();
  double total = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      if (!window_valid(x, y)) continue;
      double s[C] = {0, 0, 0, 0, 0};
      for (int j = 0; j < ws; ++j) {
        const double kk = k[std::size_t(j)];
        for (int c = 0; c < C; ++c) s[c] += kk * hpass[hidx(c, x, y + j)];
      }
      const double mu_a = s[0], mu_b = s[1];
      const double var_a = s[2] - mu_a * mu_a;
      const double var_b = s[3] - mu_b * mu_b;
      const double cov = s[4] - mu_a * mu_b;
      total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++count;
    }
  if (count == 0) throw DataError("image_ssim: no fully valid window");
  return total / double(count);
}

struct AlphaAmdConfig {
  double alpha = 40.0;  // truncation distance, pixels
  int levels = 8;       // quantization levels Q
};

/// Alpha scaled from 40 px at an 834-px reference size.
inline double default_alpha(int width, int height) {
  return 40.0 * double(std::max(width, height)) / 834.0;
}

/// Symmetric alpha-truncated average minimal distance between the quantized
/// level-set decompositions of two images with intensities in [0, 1].
///
/// Intensity v maps to level q = round(v * Q); level set l collects the pixels
/// with q >= l. For each direction the distance of every level-set point to the
/// same level of the other image is truncated at alpha and averaged over all
/// (point, level) memberships, which weights each point by its quantized
/// intensity. An empty target level set contributes alpha per point.
inline double alpha_amd(const Image& a, const Image& b, const AlphaAmdConfig& cfg = {}) {
  detail::check_pair(a, b, "alpha_amd");
  if (!(cfg.alpha > 0.0)) throw ContractError("alpha_amd: alpha must be > 0");
  if (cfg.levels < 1) throw ContractError("alpha_amd: levels must be >= 1");
  for (const Image* im : {&a, &b})
    for (double v : im->pixels)
      if (v < 0.0 || v > 1.0) throw DomainError("alpha_amd: intensities must lie in [0, 1]");

  const auto valid = detail::joint_mask(a, b);
  auto quantize = [&](const Image& im) {
    std::vector<int> q(im.size());
    for (std::size_t i = 0; i < q.size(); ++i)
      q[i] = valid[i] ? int(std::lround(im.pixels[i] * cfg.levels)) : 0;
    return q;
  };
  const auto qa = quantize(a), qb = quantize(b);

  double sum_ab = 0.0, sum_ba = 0.0;
  std::size_t n_ab = 0, n_ba = 0;
  std::vector<std::uint8_t> set_a(a.size()), set_b(a.size());
  for (int l = 1; l <= cfg.levels; ++l) {
    bool any_a = false, any_b = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      set_a[i] = qa[i] >= l;
      set_b[i] = qb[i] >= l;
      any_a |= set_a[i] != 0;
      any_b |= set_b[i] != 0;
    }
    if (!any_a && !any_b) continue;
    auto directed = [&](const std::vector<std::uint8_t>& from, const std::vector<std::uint8_t>& to,
                        bool to_nonempty, double& sum, std::size_t& n) {
      std::vector<double> dt;
      if (to_nonempty) dt = distance_transform(to, a.width, a.height);
      for (std::size_t i = 0; i < from.size(); ++i) {
        if (!from[i]) continue;
        sum += to_nonempty ? std::min(cfg.alpha, dt[i]) : cfg.alpha;
        ++n;
      }
    };
    directed(set_a, set_b, any_b, sum_ab, n_ab);
    directed(set_b, set_a, any_a, sum_ba, n_ba);
  }
  const double d_ab = n_ab ? sum_ab / double(n_ab) : 0.0;
  const double d_ba = n_ba ? sum_ba / double(n_ba) : 0.0;
  return 0.5 * (d_ab + d_ba);
}

/// Rows are feature vectors, one per image.
using FeatureSet = Matrix;

/// Flattens each image into one feature row. Images must share a shape.
inline FeatureSet raw_pixel_features(std::span<const Image> images) {
  require(!images.empty(), "raw_pixel_features: no images");
  FeatureSet f(Eigen::Index(images.size()), Eigen::Index(images.front().size()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_shape(images.front()))
      throw DataError("raw_pixel_features: images differ in shape");
    for (std::size_t j = 0; j < images[i].size(); ++j)
      f(Eigen::Index(i), Eigen::Index(j)) = images[i].pixels[j];
  }
  return f;
}

/// Unbiased sample covariance of the rows.
inline Matrix sample_covariance(const Matrix& rows) {
  require(rows.rows() >= 2, "sample_covariance: need at least two rows");
  const Matrix centered = rows.rowwise() - rows.colwise().mean();
  return (centered.transpose() * centered) / double(rows.rows() - 1);
}

namespace detail {

// Eigenvalues of a symmetric PSD matrix. Anything within the tolerance of zero
// is treated as zero: negative roundoff, and positive roundoff too, whose
// square root would otherwise surface at ~1e-7.
inline Vector psd_eigenvalues(const Matrix& m, Matrix* vectors = nullptr) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  Vector ev = es.eigenvalues();
  if (!ev.allFinite()) throw NumericalError("non-finite eigenvalues");
  const double tol = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol)
      throw NumericalError("matrix is not positive semidefinite (eigenvalue " +
                           std::to_string(ev(i)) + ")");
    if (ev(i) <= tol) ev(i) = 0.0;
  }
  if (vectors) *vectors = es.eigenvectors();
  return ev;
}

inline Matrix psd_sqrt(const Matrix& m) {
  Matrix v;
  const Vector ev = psd_eigenvalues(m, &v);
  return v * ev.cwiseSqrt().asDiagonal() * v.transpose();
}

}  // namespace detail

/// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
inline double frechet_distance(const FeatureSet& fa, const FeatureSet& fb) {
  if (fa.cols() != fb.cols()) throw DataError("frechet_distance: feature dimensions differ");
  if (fa.rows() < 2 || fb.rows() < 2)
    throw DataError("frechet_distance: need at least two feature vectors per set");
  if (!fa.allFinite() || !fb.allFinite()) throw DomainError("frechet_distance: non-finite features");
  const Vector mu_a = fa.colwise().mean().transpose();
  const Vector mu_b = fb.colwise().mean().transpose();
  const Matrix cov_a = sample_covariance(fa);
  const Matrix cov_b = sample_covariance(fb);
  const Matrix root_a = detail::psd_sqrt(cov_a);
  Matrix inner = root_a * cov_b * root_a;
  inner = 0.5 * (inner + inner.transpose());
  const double tr_cross = detail::psd_eigenvalues(inner).cwiseSqrt().sum();
  return (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_cross;
}

}  // namespace comir
