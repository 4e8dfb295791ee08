#pragma once

// Minimal SVG plots. All plotted data is also written as CSV by the CLI, so
// these are convenience artifacts only.

#include "comir/embedding.hpp"
#include "comir/io/text.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace comir::io {

namespace detail {

struct Frame {
  double x0, x1, y0, y1;  // data range
  double size = 480.0, margin = 40.0;

  double px(double x) const {
    return margin + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * (size - 2 * margin);
  }
  double py(double y) const {
    return size - margin - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * (size - 2 * margin);
  }
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string svg_open(double size) {
  const std::string s = num(size);
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + s + "\" height=\"" + s +
         "\" viewBox=\"0 0 " + s + " " + s + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace detail

/// 2-D MDS scatter: modality A blue, modality B red (diamonds), corresponding
/// items joined by yellow links.
inline std::string mds_scatter_svg(const Matrix& points, const std::vector<ItemLabel>& labels,
                                   const std::string& title = "") {
  require(points.cols() == 2 && std::size_t(points.rows()) == labels.size(),
          "mds_scatter_svg: expected n x 2 points with one label each");
  detail::Frame f{0, 1, 0, 1};
  if (points.rows() > 0) {
    f.x0 = points.col(0).minCoeff();
    f.x1 = points.col(0).maxCoeff();
    f.y0 = points.col(1).minCoeff();
    f.y1 = points.col(1).maxCoeff();
    // equal aspect
    const double span = std::max(f.x1 - f.x0, f.y1 - f.y0);
    const double cx = 0.5 * (f.x0 + f.x1), cy = 0.5 * (f.y0 + f.y1);
    f.x0 = cx - 0.5 * span;
    f.x1 = cx + 0.5 * span;
    f.y0 = cy - 0.5 * span;
    f.y1 = cy + 0.5 * span;
  }
  std::string out = detail::svg_open(f.size);
  if (!title.empty())
    out += "<text x=\"" + detail::num(f.margin) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" +
           title + "</text>\n";

  // links first so markers stay on top
  std::vector<long> first_a, first_b;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].modality != Modality::A) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j].modality != Modality::B || labels[j].pair_id != labels[i].pair_id) continue;
      const auto a = Eigen::Index(i), b = Eigen::Index(j);
      out += "<line x1=\"" + detail::num(f.px(points(a, 0))) + "\" y1=\"" + detail::num(f.py(points(a, 1))) +
             "\" x2=\"" + detail::num(f.px(points(b, 0))) + "\" y2=\"" + detail::num(f.py(points(b, 1))) +
             "\" stroke=\"#e6c700\" stroke-width=\"1\"/>\n";
      break;
    }
  }
  const double r = 4.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double x = f.px(points(Eigen::Index(i), 0)), y = f.py(points(Eigen::Index(i), 1));
    const char* color = labels[i].modality == Modality::A ? "#1f4fd1" : "#d11f1f";
    out += "<polygon points=\"" + detail::num(x) + "," + detail::num(y - r) + " " + detail::num(x + r) + "," +
           detail::num(y) + " " + detail::num(x) + "," + detail::num(y + r) + " " + detail::num(x - r) + "," +
           detail::num(y) + "\" fill=\"" + color + "\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

/// Singular-value spectra on a log10 axis, one polyline per series. Values at
/// or below `floor` are drawn at the floor.
inline std::string spectrum_svg(const std::vector<std::vector<double>>& series,
                                const std::vector<std::string>& names, double floor = 1e-12) {
  require(series.size() == names.size(), "spectrum_svg: one name per series");
  static const char* colors[] = {"#1f4fd1", "#d11f1f", "#2a9d2a", "#8c3fc0", "#e08a00", "#444444"};
  std::size_t longest = 1;
  double lo = std::log10(floor), hi = lo + 1.0;
  bool first = true;
  for (const auto& s : series) {
    longest = std::max(longest, s.size());
    for (double v : s) {
      const double l = std::log10(std::max(v, floor));
      if (first) {
        lo = hi = l;
        first = false;
      }
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
  }
  if (hi - lo < 1e-9) hi = lo + 1.0;
  detail::Frame f{0.0, double(std::max<std::size_t>(longest, 2) - 1), lo, hi};
  std::string out = detail::svg_open(f.size);
  out += "<line x1=\"" + detail::num(f.margin) + "\" y1=\"" + detail::num(f.size - f.margin) + "\" x2=\"" +
         detail::num(f.size - f.margin) + "\" y2=\"" + detail::num(f.size - f.margin) +
         "\" stroke=\"black\"/>\n<line x1=\"" + detail::num(f.margin) + "\" y1=\"" + detail::num(f.margin) +
         "\" x2=\"" + detail::num(f.margin) + "\" y2=\"" + detail::num(f.size - f.margin) + "\" stroke=\"black\"/>\n";
  out += "<text x=\"4\" y=\"" + detail::num(f.margin - 8) +
         "\" font-family=\"sans-serif\" font-size=\"11\">log10 singular value</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = colors[k % std::size(colors)];
    std::string pts;
    for (std::size_t i = 0; i < series[k].size(); ++i) {
      if (i) pts += ' ';
      pts += detail::num(f.px(double(i))) + "," + detail::num(f.py(std::log10(std::max(series[k][i], floor))));
    }
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    out += "<text x=\"" + detail::num(f.size - f.margin - 120) + "\" y=\"" + detail::num(f.margin + 14.0 * double(k)) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + color + "\">" + names[k] + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace comir::io
