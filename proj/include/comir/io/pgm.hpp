#pragma once

// Netpbm grayscale (P2 ascii, P5 binary), 8- and 16-bit. Intensities are
// normalized to [0, 1] on load.

#include "comir/image.hpp"
#include "comir/io/text.hpp"

#include <filesystem>
#include <string>

namespace comir::io {

enum class PgmFormat { ascii_p2, binary_p5 };

namespace detail {

class PgmReader {
 public:
  PgmReader(std::string_view data, std::string source) : d_(data), src_(std::move(source)) {}

  // Skips whitespace and '#' comments, then reads an unsigned decimal token.
  long token() {
    while (pos_ < d_.size()) {
      const char c = d_[pos_];
      if (c == '#') {
        while (pos_ < d_.size() && d_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
    const std::size_t start = pos_;
    while (pos_ < d_.size() && std::isdigit(static_cast<unsigned char>(d_[pos_]))) ++pos_;
    if (start == pos_) fail("expected an unsigned integer");
    const auto v = parse_integer(d_.substr(start, pos_ - start));
    if (!v) fail("integer out of range");
    return *v;
  }

  std::string_view magic() {
    if (d_.size() < 2) fail("truncated header");
    pos_ = 2;
    return d_.substr(0, 2);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_whitespace() {
    if (pos_ >= d_.size() || !std::isspace(static_cast<unsigned char>(d_[pos_])))
      fail("expected a single whitespace byte before the raster");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  std::string_view data() const { return d_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(src_ + ": PGM: " + what);
  }

 private:
  std::string_view d_;
  std::string src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Image parse_pgm(std::string_view data, const std::string& source = "<pgm>") {
  detail::PgmReader r(data, source);
  const auto magic = r.magic();
  if (magic != "P2" && magic != "P5") r.fail("unsupported magic '" + std::string(magic) + "'");
  const long w = r.token(), h = r.token(), maxval = r.token();
  if (w < 1 || h < 1) r.fail("invalid dimensions");
  if (maxval < 1 || maxval > 65535) r.fail("maxval must be in [1, 65535]");
  Image img(static_cast<int>(w), static_cast<int>(h));
  const double scale = 1.0 / double(maxval);
  if (magic == "P2") {
    for (std::size_t i = 0; i < img.size(); ++i) {
      const long v = r.token();
      if (v > maxval) r.fail("sample exceeds maxval");
      img.pixels[i] = double(v) * scale;
    }
    return img;
  }
  r.single_whitespace();
  const std::size_t bytes = maxval < 256 ? 1 : 2;
  const std::string_view raster = r.data().substr(r.pos());
  if (raster.size() < img.size() * bytes) r.fail("truncated raster");
  for (std::size_t i = 0; i < img.size(); ++i) {
    long v;
    if (bytes == 1) {
      v = static_cast<unsigned char>(raster[i]);
    } else {
      v = (long(static_cast<unsigned char>(raster[2 * i])) << 8) |
          long(static_cast<unsigned char>(raster[2 * i + 1]));
    }
    if (v > maxval) r.fail("sample exceeds maxval");
    img.pixels[i] = double(v) * scale;
  }
  return img;
}

inline std::string serialize_pgm(const Image& img, PgmFormat format = PgmFormat::binary_p5,
                                 int maxval = 255) {
  require(maxval >= 1 && maxval <= 65535, "serialize_pgm: maxval must be in [1, 65535]");
  std::string out = (format == PgmFormat::ascii_p2 ? "P2\n" : "P5\n") + std::to_string(img.width) +
                    " " + std::to_string(img.height) + "\n" + std::to_string(maxval) + "\n";
  auto quantize = [&](double v) {
    return long(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
  };
  if (format == PgmFormat::ascii_p2) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        if (x) out += ' ';
        out += std::to_string(quantize(img(x, y)));
      }
      out += '\n';
    }
    return out;
  }
  for (double v : img.pixels) {
    const long q = quantize(v);
    if (maxval < 256) {
      out += char(q);
    } else {
      out += char((q >> 8) & 0xff);
      out += char(q & 0xff);
    }
  }
  return out;
}

/// Loads an image; a sibling "<stem>.mask.pgm" (nonzero = valid) is attached
/// as the validity mask when present.
inline Image load_pgm(const std::filesystem::path& path) {
  Image img = parse_pgm(read_file(path), path.string());
  auto mask_path = path;
  mask_path.replace_extension(".mask.pgm");
  if (std::filesystem::exists(mask_path)) {
    const Image m = parse_pgm(read_file(mask_path), mask_path.string());
    if (!m.same_shape(img)) throw DataError(mask_path.string() + ": mask shape differs from image");
    std::vector<std::uint8_t> mask(m.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = m.pixels[i] > 0.0 ? 1 : 0;
    img.mask = std::move(mask);
  }
  return img;
}

/// Saves the intensities, plus a sibling mask file when the image has a mask.
inline void save_pgm(const std::filesystem::path& path, const Image& img,
                     PgmFormat format = PgmFormat::binary_p5, int maxval = 255) {
  write_file_atomic(path, serialize_pgm(img, format, maxval));
  if (img.mask) {
    Image m(img.width, img.height);
    for (std::size_t i = 0; i < m.size(); ++i) m.pixels[i] = (*img.mask)[i] ? 1.0 : 0.0;
    auto mask_path = path;
    mask_path.replace_extension(".mask.pgm");
    write_file_atomic(mask_path, serialize_pgm(m, PgmFormat::binary_p5, 255));
  }
}

}  // namespace comir::io
