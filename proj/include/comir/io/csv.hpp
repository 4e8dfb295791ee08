#pragma once

// Comma-separated tables: a header row naming the columns, data rows, and
// optional trailing "# key=value" metadata lines. Fields never contain commas.

#include "comir/io/text.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace comir::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError("csv: missing column '" + std::string(name) + "'");
  }

  bool has_column(std::string_view name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }

  std::optional<std::string> meta(std::string_view key) const {
    for (const auto& [k, v] : metadata)
      if (k == key) return v;
    return std::nullopt;
  }

  std::vector<double> numeric_column(std::string_view name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
      const auto v = parse_real(r.at(c));
      if (!v) throw DataError("csv: non-numeric value '" + r.at(c) + "' in column '" + std::string(name) + "'");
      out.push_back(*v);
    }
    return out;
  }
};

inline std::string serialize_csv(const CsvTable& t) {
  auto join = [](const std::vector<std::string>& fields) {
    std::string s;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) s += ',';
      s += fields[i];
    }
    return s + "\n";
  };
  std::string out = join(t.header);
  for (const auto& r : t.rows) {
    require(r.size() == t.header.size(), "csv: row width differs from header");
    out += join(r);
  }
  for (const auto& [k, v] : t.metadata) out += "# " + k + "=" + v + "\n";
  return out;
}

inline CsvTable parse_csv(std::string_view text, const std::string& source = "<csv>") {
  CsvTable t;
  const auto lines = split(text, '\n');
  bool have_header = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body.front() == ' ') body.erase(0, 1);
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        t.metadata.emplace_back(body, "");
      } else {
        t.metadata.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      }
      continue;
    }
    auto fields = split(line, ',');
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError(source + ":" + std::to_string(i + 1) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw DataError(source + ": missing header row");
  return t;
}

inline CsvTable load_csv(const std::filesystem::path& path) {
  return parse_csv(read_file(path), path.string());
}

inline void save_csv(const std::filesystem::path& path, const CsvTable& t) {
  write_file_atomic(path, serialize_csv(t));
}

}  // namespace comir::io
