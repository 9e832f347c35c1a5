#pragma once

// Minimal ASCII PLY reader: vertex positions only.

#include <Eigen/Core>

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gnc/errors.hpp"

namespace gnc {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline bool parse_double(std::string_view token, double& value) {
  // from_chars rejects a leading '+', which some exporters emit.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  return ec == std::errc() && ptr == token.data() + token.size();
}

inline bool parse_size(std::string_view token, std::size_t& value) {
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  return ec == std::errc() && ptr == token.data() + token.size();
}

}  // namespace detail

/// Reads vertex x/y/z from an ASCII PLY stream, in file order. Other vertex
/// properties and other elements are skipped (one record per line).
inline std::vector<Eigen::Vector3d> parse_ply_points(std::istream& in,
                                                     const std::string& name = "<stream>") {
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
  };

  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || detail::split_ws(line) != std::vector<std::string_view>{"ply"}) {
    throw ParseError(name, line_no, "missing 'ply' magic line");
  }

  std::vector<Element> elements;
  bool have_format = false;
  bool header_done = false;
  while (next_line()) {
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) throw ParseError(name, line_no, "malformed format line");
      if (tok[1] == "binary_little_endian" || tok[1] == "binary_big_endian") {
        throw UnsupportedFormat(name + ": binary PLY is not supported");
      }
      if (tok[1] != "ascii") throw ParseError(name, line_no, "unknown PLY format");
      have_format = true;
    } else if (tok[0] == "element") {
      Element e;
      if (tok.size() != 3 || !detail::parse_size(tok[2], e.count)) {
        throw ParseError(name, line_no, "malformed element line");
      }
      e.name = std::string(tok[1]);
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty()) throw ParseError(name, line_no, "property before element");
      if (tok.size() < 3) throw ParseError(name, line_no, "malformed property line");
      elements.back().properties.emplace_back(tok.back());
    } else if (tok[0] == "end_header") {
      header_done = true;
      break;
    } else {
      throw ParseError(name, line_no, "unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!header_done) throw ParseError(name, line_no, "missing end_header");
  if (!have_format) throw ParseError(name, line_no, "missing format line");

  std::vector<Eigen::Vector3d> points;
  bool found_vertex = false;
  for (const Element& e : elements) {
    if (e.name != "vertex") {
      for (std::size_t k = 0; k < e.count; ++k) {
        if (!next_line()) throw ParseError(name, line_no, "unexpected end of file");
      }
      continue;
    }
    found_vertex = true;
    int ix = -1, iy = -1, iz = -1;
    for (std::size_t p = 0; p < e.properties.size(); ++p) {
      if (e.properties[p] == "x") ix = static_cast<int>(p);
      if (e.properties[p] == "y") iy = static_cast<int>(p);
      if (e.properties[p] == "z") iz = static_cast<int>(p);
    }
    if (ix < 0 || iy < 0 || iz < 0) {
      throw ParseError(name, 0, "vertex element lacks x, y, z properties");
    }
    points.reserve(e.count);
    for (std::size_t k = 0; k < e.count; ++k) {
      if (!next_line()) throw ParseError(name, line_no, "unexpected end of file in vertex list");
      const auto tok = detail::split_ws(line);
      if (tok.size() < e.properties.size()) {
        throw ParseError(name, line_no, "vertex record has too few values");
      }
      Eigen::Vector3d p;
      if (!detail::parse_double(tok[static_cast<std::size_t>(ix)], p[0]) ||
          !detail::parse_double(tok[static_cast<std::size_t>(iy)], p[1]) ||
          !detail::parse_double(tok[static_cast<std::size_t>(iz)], p[2])) {
        throw ParseError(name, line_no, "invalid vertex coordinate");
      }
      points.push_back(p);
    }
    break;
  }
  if (!found_vertex) throw ParseError(name, 0, "no vertex element");
  return points;
}

inline std::vector<Eigen::Vector3d> load_ply_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open PLY file '" + path + "'");
  return parse_ply_points(in, path);
}

}  // namespace gnc
