#pragma once

// MTX1 text matrices:
//
//   MTX1
//   <rows> <cols>
//   <cols space-separated reals>      (rows lines)
//   # optional trailing metadata lines
//
// Values are written in shortest round-trip form, so parse(serialize(m))
// reproduces every entry exactly.

#include "comir/io/text.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace comir::io {

struct MatrixFile {
  Matrix values;
  std::vector<std::string> metadata;  // without the leading '#', one per line
};

inline std::string serialize_matrix(const Matrix& m, const std::vector<std::string>& metadata = {}) {
  std::string out = "MTX1\n" + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ' ';
      out += format_real(m(r, c));
    }
    out += '\n';
  }
  for (const auto& line : metadata) out += "# " + line + "\n";
  return out;
}

namespace detail {
[[noreturn]] inline void matrix_parse_error(const std::string& source, std::size_t line,
                                            const std::string& what) {
  throw DataError(source + ":" + std::to_string(line) + ": " + what);
}
}  // namespace detail

inline MatrixFile parse_matrix(std::string_view text, const std::string& source = "<matrix>") {
  const auto lines = split(text, '\n');
  std::size_t ln = 0;
  auto line_at = [&](std::size_t i) -> std::string {
    std::string s = i < lines.size() ? lines[i] : std::string();
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
  };
  if (line_at(0) != "MTX1") detail::matrix_parse_error(source, 1, "expected 'MTX1' header");
  ln = 1;
  const auto dims = split_whitespace(line_at(ln));
  if (dims.size() != 2) detail::matrix_parse_error(source, 2, "expected '<rows> <cols>'");
  const auto rows = parse_integer(dims[0]);
  const auto cols = parse_integer(dims[1]);
  if (!rows || !cols || *rows < 0 || *cols < 0)
    detail::matrix_parse_error(source, 2, "invalid dimensions");

  MatrixFile mf;
  mf.values.resize(*rows, *cols);
  for (long r = 0; r < *rows; ++r) {
    ln = std::size_t(r) + 2;
    if (ln >= lines.size() || (ln + 1 == lines.size() && line_at(ln).empty()))
      detail::matrix_parse_error(source, ln + 1, "missing row");
    const auto fields = split_whitespace(line_at(ln));
    if (long(fields.size()) != *cols)
      detail::matrix_parse_error(source, ln + 1,
                                 "expected " + std::to_string(*cols) + " values, found " +
                                     std::to_string(fields.size()));
    for (long c = 0; c < *cols; ++c) {
      const auto v = parse_real(fields[std::size_t(c)]);
      if (!v) detail::matrix_parse_error(source, ln + 1, "invalid number '" + fields[std::size_t(c)] + "'");
      mf.values(r, c) = *v;
    }
  }
  for (std::size_t i = std::size_t(*rows) + 2; i < lines.size(); ++i) {
    const std::string s = line_at(i);
    if (s.empty()) continue;
    if (s.front() != '#') detail::matrix_parse_error(source, i + 1, "unexpected content after the last row");
    std::string meta = s.substr(1);
    if (!meta.empty() && meta.front() == ' ') meta.erase(0, 1);
    mf.metadata.push_back(std::move(meta));
  }
  return mf;
}

inline MatrixFile load_matrix(const std::filesystem::path& path) {
  return parse_matrix(read_file(path), path.string());
}

inline void save_matrix(const std::filesystem::path& path, const Matrix& m,
                        const std::vector<std::string>& metadata = {}) {
  write_file_atomic(path, serialize_matrix(m, metadata));
}

}  // namespace comir::io
