#pragma once

// Plain-text correspondence files.
//
// One correspondence per line, whitespace-separated:
//   registration:     ax ay az bx by bz
//   shape alignment:  zx zy Bx By Bz
// '#' starts a comment that runs to the end of the line; blank lines are
// ignored. Index-pair files (for PLY pairs) hold "source_index target_index".

#include <Eigen/Core>

#include <array>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <span>
#include <utility>
#include <vector>

#include "gnc/errors.hpp"
#include "gnc/ply.hpp"
#include "gnc/registration.hpp"
#include "gnc/shape_alignment.hpp"

namespace gnc {

namespace detail {

/// Calls `on_row(tokens, line_no)` for every non-empty, comment-stripped line.
template <typename OnRow>
void for_each_data_row(std::istream& in, OnRow&& on_row) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    const auto tokens = split_ws(view);
    if (tokens.empty()) continue;
    on_row(tokens, line_no);
  }
}

template <std::size_t N>
std::array<double, N> parse_row(const std::vector<std::string_view>& tokens,
                                const std::string& name, std::size_t line_no) {
  if (tokens.size() != N) {
    throw ParseError(name, line_no,
                     "expected " + std::to_string(N) + " values, found " +
                         std::to_string(tokens.size()));
  }
  std::array<double, N> values{};
  for (std::size_t k = 0; k < N; ++k) {
    if (!parse_double(tokens[k], values[k])) {
      throw ParseError(name, line_no, "invalid number '" + std::string(tokens[k]) + "'");
    }
  }
  return values;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

}  // namespace detail

inline std::vector<PointCorrespondence> parse_registration_correspondences(
    std::istream& in, const std::string& name = "<stream>") {
  std::vector<PointCorrespondence> out;
  detail::for_each_data_row(in, [&](const auto& tokens, std::size_t line_no) {
    const auto v = detail::parse_row<6>(tokens, name, line_no);
    out.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
  });
  return out;
}

inline std::vector<ShapeCorrespondence> parse_shape_correspondences(
    std::istream& in, const std::string& name = "<stream>") {
  std::vector<ShapeCorrespondence> out;
  detail::for_each_data_row(in, [&](const auto& tokens, std::size_t line_no) {
    const auto v = detail::parse_row<5>(tokens, name, line_no);
    out.push_back({{v[0], v[1]}, {v[2], v[3], v[4]}});
  });
  return out;
}

inline std::vector<PointCorrespondence> load_registration_correspondences(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_registration_correspondences(in, path);
}

inline std::vector<ShapeCorrespondence> load_shape_correspondences(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_shape_correspondences(in, path);
}

/// Pairs source/target PLY vertices through an index file.
inline std::vector<PointCorrespondence> load_registration_from_ply(
    const std::string& source_ply, const std::string& target_ply,
    const std::string& pairs_path) {
  const auto source = load_ply_points(source_ply);
  const auto target = load_ply_points(target_ply);
  auto in = detail::open_input(pairs_path);
  std::vector<PointCorrespondence> out;
  detail::for_each_data_row(in, [&](const auto& tokens, std::size_t line_no) {
    if (tokens.size() != 2) throw ParseError(pairs_path, line_no, "expected 2 indices");
    std::size_t i = 0, j = 0;
    if (!detail::parse_size(tokens[0], i) || !detail::parse_size(tokens[1], j)) {
      throw ParseError(pairs_path, line_no, "invalid index");
    }
    if (i >= source.size() || j >= target.size()) {
      throw ParseError(pairs_path, line_no, "index out of range");
    }
    out.push_back({source[i], target[j]});
  });
  return out;
}

inline void write_correspondences(std::ostream& out,
                                  std::span<const PointCorrespondence> corrs) {
  for (const auto& c : corrs) {
    out << c.a[0] << ' ' << c.a[1] << ' ' << c.a[2] << ' ' << c.b[0] << ' ' << c.b[1] << ' '
        << c.b[2] << '\n';
  }
}

inline void write_correspondences(std::ostream& out,
                                  std::span<const ShapeCorrespondence> corrs) {
  for (const auto& c : corrs) {
    out << c.z[0] << ' ' << c.z[1] << ' ' << c.B[0] << ' ' << c.B[1] << ' ' << c.B[2] << '\n';
  }
}

}  // namespace gnc
