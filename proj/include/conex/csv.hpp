#pragma once

// Minimal RFC 4180 reading/writing for the selector and judgment files.

#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "conex/error.hpp"

namespace conex::csv {

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k > 0) out += ',';
    out += escape(fields[k]);
  }
  return out;
}

/// Shortest representation that round-trips.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError(line, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

/// Reads all records; fields may be quoted and contain newlines. Returns
/// each row with the line number it started on.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

inline std::vector<Row> read(std::istream& in) {
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Row row;
    row.line = lineno;
    std::string field;
    bool quoted = false;
    std::size_t k = 0;
    while (true) {
      if (k == line.size()) {
        if (!quoted) break;
        std::string next;
        if (!std::getline(in, next)) throw ParseError(row.line, "unterminated quote");
        ++lineno;
        field += '\n';
        line = std::move(next);
        k = 0;
        continue;
      }
      const char c = line[k++];
      if (quoted) {
        if (c == '"') {
          if (k < line.size() && line[k] == '"') {
            field += '"';
            ++k;
          } else {
            quoted = false;
          }
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
      } else {
        field += c;
      }
    }
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace conex::csv
