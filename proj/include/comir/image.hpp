#pragma once

#include "comir/core.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace comir {

/// Grayscale image, row-major, nominal intensity range [0, 1].
/// The optional mask marks valid pixels (1) versus out-of-support (0).
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;
  std::optional<std::vector<std::uint8_t>> mask;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(std::size_t(w) * std::size_t(h), fill) {
    require(w >= 1 && h >= 1, "Image: width and height must be >= 1");
  }

  std::size_t size() const { return pixels.size(); }
  std::size_t index(int x, int y) const { return std::size_t(y) * std::size_t(width) + std::size_t(x); }

  double& operator()(int x, int y) { return pixels[index(x, y)]; }
  double operator()(int x, int y) const { return pixels[index(x, y)]; }

  bool valid(std::size_t i) const { return !mask || (*mask)[i] != 0; }
  bool valid(int x, int y) const { return valid(index(x, y)); }

  bool same_shape(const Image& o) const { return width == o.width && height == o.height; }

  bool all_finite() const {
    for (double v : pixels)
      if (!std::isfinite(v)) return false;
    return true;
  }

  /// Bilinear interpolation at continuous pixel-center coordinates.
  /// Returns nullopt outside [0, W-1] x [0, H-1]. Integer positions return the
  /// stored value exactly.
  std::optional<double> sample(double x, double y) const {
    if (!(x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1)) return std::nullopt;
    const int x0 = std::min(int(x), width - 1);
    const int y0 = std::min(int(y), height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const double top = fx == 0.0 ? (*this)(x0, y0) : (1.0 - fx) * (*this)(x0, y0) + fx * (*this)(x1, y0);
    if (fy == 0.0) return top;
    const double bot = fx == 0.0 ? (*this)(x0, y1) : (1.0 - fx) * (*this)(x0, y1) + fx * (*this)(x1, y1);
    return (1.0 - fy) * top + fy * bot;
  }
};

/// Normalized 1-D Gaussian kernel of the given radius.
inline std::vector<double> gaussian_kernel(double sigma, int radius) {
  require(sigma > 0.0 && radius >= 0, "gaussian_kernel: sigma > 0, radius >= 0");
  std::vector<double> k(std::size_t(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
    k[std::size_t(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur with clamped borders. Mask is carried over unchanged.
inline Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, int(std::ceil(4.0 * sigma)));
  const auto k = gaussian_kernel(sigma, radius);
  const int w = img.width, h = img.height;
  std::vector<double> tmp(img.size());
  for (int y = 0; y < h; ++y) {
    const double* row = &img.pixels[img.index(0, y)];
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        s += k[std::size_t(i + radius)] * row[xx];
      }
      tmp[img.index(x, y)] = s;
    }
  }
  Image out = img;
  std::vector<double> col(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[std::size_t(y)] = tmp[img.index(x, y)];
    for (int y = 0; y < h; ++y) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        s += k[std::size_t(i + radius)] * col[std::size_t(yy)];
      }
      out(x, y) = s;
    }
  }
  return out;
}

/// Keeps every second pixel in each direction.
inline Image downsample2(const Image& img) {
  Image out(std::max(1, (img.width + 1) / 2), std::max(1, (img.height + 1) / 2));
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out(x, y) = img(2 * x, 2 * y);
  return out;
}

/// Random Gaussian blobs of mixed sign and size over a mid-gray background,
/// rescaled to [0, 1]. Feature-rich and smooth enough for bilinear resampling.
inline Image make_texture(int width, int height, std::uint64_t seed, double blob_density = 2.0e-3) {
  require(width >= 8 && height >= 8, "make_texture: image too small");
  Rng rng(seed);
  Image img(width, height, 0.0);
  const int count = std::max(4, int(blob_density * double(width) * double(height)));
  for (int b = 0; b < count; ++b) {
    const double cx = rng.uniform(0.0, width - 1.0);
    const double cy = rng.uniform(0.0, height - 1.0);
    const double sigma = rng.uniform(2.0, 9.0);
    const double amp = rng.uniform(0.3, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const int r = int(std::ceil(3.5 * sigma));
    const int x0 = std::max(0, int(cx) - r), x1 = std::min(width - 1, int(cx) + r);
    const int y0 = std::max(0, int(cy) - r), y1 = std::min(height - 1, int(cy) + r);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        img(x, y) += amp * std::exp(-(dx * dx + dy * dy) * inv);
      }
  }
  const auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const double l = *lo, span = *hi - *lo;
  for (double& v : img.pixels) v = span > 0.0 ? (v - l) / span : 0.5;
  return img;
}

/// Independent uniform noise per pixel.
inline Image make_noise(int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  Image img(width, height);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

}  // namespace comir
