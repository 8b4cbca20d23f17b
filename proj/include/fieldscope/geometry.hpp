#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"

#include "fieldscope/dynamics.hpp"
#include "fieldscope/error.hpp"
#include "fieldscope/surface.hpp"
#include "fieldscope/trace.hpp"
#include "fieldscope/vec3.hpp"

namespace fieldscope {

struct PolylineSet {
  std::vector<Polyline> lines;
  friend bool operator==(const PolylineSet&, const PolylineSet&) = default;
};

struct StripedLineSet {
  std::vector<StripedPolyline> lines;
  friend bool operator==(const StripedLineSet&, const StripedLineSet&) = default;
};

struct GlyphSet {
  std::vector<Glyph> glyphs;
  friend bool operator==(const GlyphSet&, const GlyphSet&) = default;
};

/// Output of one visualization operation at one time step.
using Geometry = std::variant<TriangleMesh, PolylineSet, StripedLineSet, GlyphSet, MaterialCurve>;

inline std::string_view geometry_kind(const Geometry& g) {
  static constexpr std::string_view kNames[] = {"mesh", "polylines", "striped_lines", "glyphs", "material_curve"};
  return kNames[g.index()];
}

/// Rounds to 9 significant decimal digits, the precision geometry carries on the wire.
inline double round_sig9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

namespace detail {

inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({round_sig9(v.x), round_sig9(v.y), round_sig9(v.z)}); }

inline nlohmann::json points_json(const std::vector<Vec3>& pts) {
  auto a = nlohmann::json::array();
  for (const auto& p : pts) a.push_back(vec_json(p));
  return a;
}

inline nlohmann::json scalars_json(const std::vector<double>& v) {
  auto a = nlohmann::json::array();
  for (double x : v) a.push_back(round_sig9(x));
  return a;
}

inline nlohmann::json polyline_json(const Polyline& l) {
  return {{"points", points_json(l.points)},
          {"s", scalars_json(l.arclength)},
          {"t", scalars_json(l.param)},
          {"speed", scalars_json(l.speed)}};
}

inline Vec3 vec_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::parse_error, "expected a 3-element coordinate array");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline std::vector<Vec3> points_from_json(const nlohmann::json& j) {
  std::vector<Vec3> out;
  for (const auto& p : j) out.push_back(vec_from_json(p));
  return out;
}

inline Polyline polyline_from_json(const nlohmann::json& j) {
  Polyline l;
  l.points = points_from_json(j.at("points"));
  l.arclength = j.at("s").get<std::vector<double>>();
  l.param = j.at("t").get<std::vector<double>>();
  l.speed = j.at("speed").get<std::vector<double>>();
  return l;
}

}  // namespace detail

/// Canonical JSON form; coordinates and attributes rounded to 9 significant digits.
inline nlohmann::json geometry_json(const Geometry& geometry) {
  using nlohmann::json;
  json j;
  j["kind"] = std::string(geometry_kind(geometry));
  std::visit(
      [&j](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, TriangleMesh>) {
          j["vertices"] = detail::points_json(g.vertices);
          j["normals"] = detail::points_json(g.normals);
          auto tris = json::array();
          for (const auto& t : g.triangles) tris.push_back({t[0], t[1], t[2]});
          j["triangles"] = std::move(tris);
        } else if constexpr (std::is_same_v<T, PolylineSet>) {
          auto lines = json::array();
          for (const auto& l : g.lines) lines.push_back(detail::polyline_json(l));
          j["lines"] = std::move(lines);
        } else if constexpr (std::is_same_v<T, StripedLineSet>) {
          auto lines = json::array();
          for (const auto& l : g.lines) {
            auto lj = detail::polyline_json(l.line);
            lj["phase"] = detail::scalars_json(l.phase);
            lj["wavelength"] = round_sig9(l.wavelength);
            lj["phase_offset"] = round_sig9(l.phase_offset);
            lines.push_back(std::move(lj));
          }
          j["lines"] = std::move(lines);
        } else if constexpr (std::is_same_v<T, GlyphSet>) {
          auto origins = json::array(), vectors = json::array();
          for (const auto& gl : g.glyphs) {
            origins.push_back(detail::vec_json(gl.origin));
            vectors.push_back(detail::vec_json(gl.vector));
          }
          j["origins"] = std::move(origins);
          j["vectors"] = std::move(vectors);
        } else {
          j["points"] = detail::points_json(g.points);
          j["frozen"] = std::vector<bool>(g.frozen.begin(), g.frozen.end());
          j["rest_length"] = detail::scalars_json(g.rest_length);
          j["split_length"] = detail::scalars_json(g.split_length);
          j["time"] = round_sig9(g.time);
        }
      },
      geometry);
  return j;
}

/// Inverse of geometry_json (values come back at wire precision).
inline Geometry geometry_from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "mesh") {
      TriangleMesh m;
      m.vertices = detail::points_from_json(j.at("vertices"));
      m.normals = detail::points_from_json(j.at("normals"));
      for (const auto& t : j.at("triangles")) {
        m.triangles.push_back({t.at(0).get<std::uint32_t>(), t.at(1).get<std::uint32_t>(), t.at(2).get<std::uint32_t>()});
      }
      return m;
    }
    if (kind == "polylines") {
      PolylineSet s;
      for (const auto& l : j.at("lines")) s.lines.push_back(detail::polyline_from_json(l));
      return s;
    }
    if (kind == "striped_lines") {
      StripedLineSet s;
      for (const auto& l : j.at("lines")) {
        StripedPolyline sp;
        sp.line = detail::polyline_from_json(l);
        sp.phase = l.at("phase").get<std::vector<double>>();
        sp.wavelength = l.at("wavelength").get<double>();
        sp.phase_offset = l.at("phase_offset").get<double>();
        s.lines.push_back(std::move(sp));
      }
      return s;
    }
    if (kind == "glyphs") {
      GlyphSet s;
      const auto origins = detail::points_from_json(j.at("origins"));
      const auto vectors = detail::points_from_json(j.at("vectors"));
      if (origins.size() != vectors.size()) throw Error(ErrorCode::parse_error, "glyph arrays differ in length");
      for (std::size_t i = 0; i < origins.size(); ++i) s.glyphs.push_back({origins[i], vectors[i]});
      return s;
    }
    if (kind == "material_curve") {
      MaterialCurve c;
      c.points = detail::points_from_json(j.at("points"));
      for (bool f : j.at("frozen").get<std::vector<bool>>()) c.frozen.push_back(f);
      c.rest_length = j.at("rest_length").get<std::vector<double>>();
      c.split_length = j.at("split_length").get<std::vector<double>>();
      c.time = j.at("time").get<double>();
      return c;
    }
    throw Error(ErrorCode::parse_error, "unknown geometry kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed geometry: ") + e.what());
  }
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string geometry_bytes(const Geometry& g) { return geometry_json(g).dump(); }

inline std::string geometry_hash(const Geometry& g) { return hex64(fnv1a64(geometry_bytes(g))); }

}  // namespace fieldscope
