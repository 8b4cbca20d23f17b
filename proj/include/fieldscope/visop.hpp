#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"

#include "fieldscope/dataset.hpp"
#include "fieldscope/dynamics.hpp"
#include "fieldscope/error.hpp"
#include "fieldscope/geometry.hpp"
#include "fieldscope/trace.hpp"

namespace fieldscope {

/// Trace controls as recorded in an operation; unset values take the
/// dataset-derived defaults when the operation runs.
struct TraceParams {
  std::optional<double> step;
  std::optional<std::size_t> max_steps;
  std::optional<double> min_speed;
  Direction direction = Direction::forward;

  friend bool operator==(const TraceParams&, const TraceParams&) = default;
};

struct IsosurfaceOp {
  std::string scalar;
  double level = 0.0;
  friend bool operator==(const IsosurfaceOp&, const IsosurfaceOp&) = default;
};

struct FieldLinesOp {
  std::string vector;
  std::vector<Vec3> seeds;
  TraceParams opts;
  friend bool operator==(const FieldLinesOp&, const FieldLinesOp&) = default;
};

struct ParticleTracerOp {
  std::string vector;
  std::vector<Vec3> seeds;
  TraceParams opts;
  friend bool operator==(const ParticleTracerOp&, const ParticleTracerOp&) = default;
};

struct InteractiveFieldLinesOp {
  std::string vector;
  SeedBeam beam;
  TraceParams opts;
  std::optional<double> wavelength;  // default 10 x step
  double phase_offset = 0.0;
  friend bool operator==(const InteractiveFieldLinesOp&, const InteractiveFieldLinesOp&) = default;
};

struct LocalArrowsOp {
  std::string vector;
  Vec3 center;
  double radius = 0.0;
  std::size_t n = 1;
  friend bool operator==(const LocalArrowsOp&, const LocalArrowsOp&) = default;
};

/// Starting curve for the tube advector: the field line of `field` through `point`.
struct CurveSeed {
  Vec3 point;
  std::string field;
  TraceParams opts;
  friend bool operator==(const CurveSeed&, const CurveSeed&) = default;
};

struct TubeAdvectorOp {
  std::string flow;
  std::variant<CurveSeed, std::vector<Vec3>> curve;
  double dt = 0.0;
  std::size_t n_steps = 1;
  double resample_threshold = kDefaultResampleThreshold;
  friend bool operator==(const TubeAdvectorOp&, const TubeAdvectorOp&) = default;
};

struct TestParticleOp {
  std::string e_field;
  std::string b_field;
  Vec3 p0;
  InitialVelocity v0;
  double charge_to_mass = 1.0;
  double dt = 0.0;
  std::size_t n_steps = 1;
  Pusher pusher = Pusher::boris;
  friend bool operator==(const TestParticleOp&, const TestParticleOp&) = default;
};

using VisOp = std::variant<IsosurfaceOp, FieldLinesOp, ParticleTracerOp, InteractiveFieldLinesOp, LocalArrowsOp,
                           TubeAdvectorOp, TestParticleOp>;

inline std::string_view op_tag(const VisOp& op) {
  static constexpr std::string_view kTags[] = {"Isosurface",  "FieldLines",   "ParticleTracer", "InteractiveFieldLines",
                                               "LocalArrows", "TubeAdvector", "TestParticle"};
  return kTags[op.index()];
}

/// Operations whose state carries over from one time step to the next.
inline bool is_time_dependent(const VisOp& op) {
  return std::holds_alternative<TubeAdvectorOp>(op) || std::holds_alternative<TestParticleOp>(op);
}

namespace detail {

using nlohmann::json;

inline json exact_vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::forward: return "forward";
    case Direction::backward: return "backward";
    case Direction::both: return "both";
  }
  return "forward";
}

inline Direction direction_from(const std::string& s) {
  if (s == "forward") return Direction::forward;
  if (s == "backward") return Direction::backward;
  if (s == "both") return Direction::both;
  throw Error(ErrorCode::parse_error, "unknown trace direction '" + s + "'");
}

inline json trace_params_json(const TraceParams& p) {
  json j = json::object();
  if (p.step) j["step"] = *p.step;
  if (p.max_steps) j["max_steps"] = *p.max_steps;
  if (p.min_speed) j["min_speed"] = *p.min_speed;
  j["direction"] = std::string(direction_name(p.direction));
  return j;
}

inline TraceParams trace_params_from(const json& j) {
  TraceParams p;
  if (j.contains("step")) p.step = j.at("step").get<double>();
  if (j.contains("max_steps")) p.max_steps = j.at("max_steps").get<std::size_t>();
  if (j.contains("min_speed")) p.min_speed = j.at("min_speed").get<double>();
  if (j.contains("direction")) p.direction = direction_from(j.at("direction").get<std::string>());
  return p;
}

inline json seeds_json(const std::vector<Vec3>& seeds) {
  json a = json::array();
  for (const auto& s : seeds) a.push_back(exact_vec(s));
  return a;
}

inline std::vector<Vec3> seeds_from(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::parse_error, "expected an array of points");
  std::vector<Vec3> out;
  for (const auto& p : j) out.push_back(vec_from_json(p));
  return out;
}

}  // namespace detail

/// Tagged body: {"method": <tag>, ...parameters}. Doubles are stored exactly.
inline nlohmann::json visop_json(const VisOp& op) {
  using nlohmann::json;
  using namespace detail;
  json j;
  j["method"] = std::string(op_tag(op));
  std::visit(
      [&j](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, IsosurfaceOp>) {
          j["scalar"] = o.scalar;
          j["level"] = o.level;
        } else if constexpr (std::is_same_v<T, FieldLinesOp> || std::is_same_v<T, ParticleTracerOp>) {
          j["vector"] = o.vector;
          j["seeds"] = seeds_json(o.seeds);
          j["opts"] = trace_params_json(o.opts);
        } else if constexpr (std::is_same_v<T, InteractiveFieldLinesOp>) {
          j["vector"] = o.vector;
          j["beam"] = {{"a", exact_vec(o.beam.a)}, {"b", exact_vec(o.beam.b)}, {"n", o.beam.count}};
          j["opts"] = trace_params_json(o.opts);
          if (o.wavelength) j["wavelength"] = *o.wavelength;
          j["phase_offset"] = o.phase_offset;
        } else if constexpr (std::is_same_v<T, LocalArrowsOp>) {
          j["vector"] = o.vector;
          j["center"] = exact_vec(o.center);
          j["radius"] = o.radius;
          j["n"] = o.n;
        } else if constexpr (std::is_same_v<T, TubeAdvectorOp>) {
          j["flow"] = o.flow;
          if (const auto* seed = std::get_if<CurveSeed>(&o.curve)) {
            j["curve"] = {{"seed", exact_vec(seed->point)}, {"field", seed->field}, {"opts", trace_params_json(seed->opts)}};
          } else {
            j["curve"] = {{"points", seeds_json(std::get<std::vector<Vec3>>(o.curve))}};
          }
          j["dt"] = o.dt;
          j["n_steps"] = o.n_steps;
          j["resample_threshold"] = o.resample_threshold;
        } else {
          j["e_field"] = o.e_field;
          j["b_field"] = o.b_field;
          j["p0"] = exact_vec(o.p0);
          if (const auto* v = std::get_if<Vec3>(&o.v0.rule)) {
            j["v0"] = {{"vector", exact_vec(*v)}};
          } else {
            j["v0"] = {{"field", std::get<std::string>(o.v0.rule)}};
          }
          j["charge_to_mass"] = o.charge_to_mass;
          j["dt"] = o.dt;
          j["n_steps"] = o.n_steps;
          j["pusher"] = o.pusher == Pusher::boris ? "boris" : "rk4";
        }
      },
      op);
  return j;
}

inline VisOp visop_from_json(const nlohmann::json& j) {
  using namespace detail;
  try {
    const auto method = j.at("method").get<std::string>();
    if (method == "Isosurface") return IsosurfaceOp{j.at("scalar").get<std::string>(), j.at("level").get<double>()};
    if (method == "FieldLines" || method == "ParticleTracer") {
      auto vec = j.at("vector").get<std::string>();
      auto seeds = seeds_from(j.at("seeds"));
      auto opts = j.contains("opts") ? trace_params_from(j.at("opts")) : TraceParams{};
      if (method == "FieldLines") return FieldLinesOp{std::move(vec), std::move(seeds), opts};
      return ParticleTracerOp{std::move(vec), std::move(seeds), opts};
    }
    if (method == "InteractiveFieldLines") {
      InteractiveFieldLinesOp o;
      o.vector = j.at("vector").get<std::string>();
      const auto& beam = j.at("beam");
      o.beam = {vec_from_json(beam.at("a")), vec_from_json(beam.at("b")), beam.at("n").get<std::size_t>()};
      if (j.contains("opts")) o.opts = trace_params_from(j.at("opts"));
      if (j.contains("wavelength")) o.wavelength = j.at("wavelength").get<double>();
      if (j.contains("phase_offset")) o.phase_offset = j.at("phase_offset").get<double>();
      return o;
    }
    if (method == "LocalArrows") {
      return LocalArrowsOp{j.at("vector").get<std::string>(), vec_from_json(j.at("center")),
                           j.at("radius").get<double>(), j.at("n").get<std::size_t>()};
    }
    if (method == "TubeAdvector") {
      TubeAdvectorOp o;
      o.flow = j.at("flow").get<std::string>();
      const auto& c = j.at("curve");
      if (c.contains("points")) {
        o.curve = seeds_from(c.at("points"));
      } else {
        CurveSeed s{vec_from_json(c.at("seed")), c.at("field").get<std::string>(), {}};
        if (c.contains("opts")) s.opts = trace_params_from(c.at("opts"));
        o.curve = std::move(s);
      }
      o.dt = j.at("dt").get<double>();
      o.n_steps = j.at("n_steps").get<std::size_t>();
      if (j.contains("resample_threshold")) o.resample_threshold = j.at("resample_threshold").get<double>();
      return o;
    }
    if (method == "TestParticle") {
      TestParticleOp o;
      o.e_field = j.at("e_field").get<std::string>();
      o.b_field = j.at("b_field").get<std::string>();
      o.p0 = vec_from_json(j.at("p0"));
      const auto& v0 = j.at("v0");
      if (v0.contains("vector")) {
        o.v0.rule = vec_from_json(v0.at("vector"));
      } else {
        o.v0.rule = v0.at("field").get<std::string>();
      }
      o.charge_to_mass = j.at("charge_to_mass").get<double>();
      o.dt = j.at("dt").get<double>();
      o.n_steps = j.at("n_steps").get<std::size_t>();
      if (j.contains("pusher")) {
        const auto p = j.at("pusher").get<std::string>();
        if (p != "boris" && p != "rk4") throw Error(ErrorCode::parse_error, "unknown pusher '" + p + "'");
        o.pusher = p == "boris" ? Pusher::boris : Pusher::rk4;
      }
      return o;
    }
    throw Error(ErrorCode::parse_error, "unknown visualization method '" + method + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed operation: ") + e.what());
  }
}

/// Field names an operation reads.
inline std::vector<std::string> referenced_fields(const VisOp& op) {
  return std::visit(
      [](const auto& o) -> std::vector<std::string> {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, IsosurfaceOp>) {
          return {o.scalar};
        } else if constexpr (std::is_same_v<T, TubeAdvectorOp>) {
          std::vector<std::string> out{o.flow};
          if (const auto* s = std::get_if<CurveSeed>(&o.curve)) out.push_back(s->field);
          return out;
        } else if constexpr (std::is_same_v<T, TestParticleOp>) {
          std::vector<std::string> out{o.e_field, o.b_field};
          if (const auto* f = std::get_if<std::string>(&o.v0.rule)) out.push_back(*f);
          return out;
        } else {
          return {o.vector};
        }
      },
      op);
}

}  // namespace fieldscope
