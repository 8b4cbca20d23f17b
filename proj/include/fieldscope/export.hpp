#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fieldscope/error.hpp"
#include "fieldscope/geometry.hpp"

namespace fieldscope {

enum class ExportFormat { obj, vtk };

inline ExportFormat parse_export_format(std::string_view s) {
  if (s == "obj") return ExportFormat::obj;
  if (s == "vtk") return ExportFormat::vtk;
  throw Error(ErrorCode::unsupported, "unsupported export format '" + std::string(s) + "' (expected obj or vtk)");
}

inline std::string_view extension(ExportFormat f) { return f == ExportFormat::obj ? "obj" : "vtk"; }

/// Geometry flattened to points, polylines and triangles.
struct ExportPrimitives {
  std::vector<Vec3> points;
  std::vector<std::vector<std::size_t>> lines;
  std::vector<std::array<std::size_t, 3>> triangles;
};

inline ExportPrimitives flatten(const Geometry& geometry) {
  ExportPrimitives out;
  auto add_line = [&out](const std::vector<Vec3>& pts) {
    if (pts.size() < 2) return;
    std::vector<std::size_t> idx;
    for (const auto& p : pts) {
      idx.push_back(out.points.size());
      out.points.push_back(p);
    }
    out.lines.push_back(std::move(idx));
  };
  std::visit(
      [&](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, TriangleMesh>) {
          out.points = g.vertices;
          for (const auto& t : g.triangles) out.triangles.push_back({t[0], t[1], t[2]});
        } else if constexpr (std::is_same_v<T, PolylineSet>) {
          for (const auto& l : g.lines) add_line(l.points);
        } else if constexpr (std::is_same_v<T, StripedLineSet>) {
          for (const auto& l : g.lines) add_line(l.line.points);
        } else if constexpr (std::is_same_v<T, GlyphSet>) {
          for (const auto& gl : g.glyphs) add_line({gl.origin, gl.origin + gl.vector});
        } else {
          add_line(g.points);
        }
      },
      geometry);
  return out;
}

namespace detail {

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace detail

/// Wavefront OBJ: `v x y z`, one `l` record per polyline, `f a b c` per triangle (1-based).
inline std::string to_obj(const Geometry& geometry) {
  const auto prim = flatten(geometry);
  std::ostringstream out;
  out << "# fieldscope " << geometry_kind(geometry) << "\n";
  for (const auto& p : prim.points) {
    out << "v " << detail::fmt9(p.x) << ' ' << detail::fmt9(p.y) << ' ' << detail::fmt9(p.z) << '\n';
  }
  for (const auto& l : prim.lines) {
    out << 'l';
    for (auto i : l) out << ' ' << i + 1;
    out << '\n';
  }
  for (const auto& t : prim.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  return out.str();
}

/// Legacy VTK ASCII POLYDATA with POINTS, then LINES and/or POLYGONS sections.
inline std::string to_vtk(const Geometry& geometry) {
  const auto prim = flatten(geometry);
  std::ostringstream out;
  out << "# vtk DataFile Version 3.0\n";
  out << "fieldscope " << geometry_kind(geometry) << "\n";
  out << "ASCII\nDATASET POLYDATA\n";
  out << "POINTS " << prim.points.size() << " double\n";
  for (const auto& p : prim.points) {
    out << detail::fmt9(p.x) << ' ' << detail::fmt9(p.y) << ' ' << detail::fmt9(p.z) << '\n';
  }
  if (!prim.lines.empty()) {
    std::size_t total = 0;
    for (const auto& l : prim.lines) total += l.size() + 1;
    out << "LINES " << prim.lines.size() << ' ' << total << '\n';
    for (const auto& l : prim.lines) {
      out << l.size();
      for (auto i : l) out << ' ' << i;
      out << '\n';
    }
  }
  if (!prim.triangles.empty()) {
    out << "POLYGONS " << prim.triangles.size() << ' ' << prim.triangles.size() * 4 << '\n';
    for (const auto& t : prim.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  return out.str();
}

inline void export_geometry(const Geometry& geometry, ExportFormat format, const std::filesystem::path& destination) {
  std::ofstream out(destination, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + destination.string());
  out << (format == ExportFormat::obj ? to_obj(geometry) : to_vtk(geometry));
  if (!out) throw Error(ErrorCode::io_error, "failed writing " + destination.string());
}

}  // namespace fieldscope
