#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fieldscope/dataset.hpp"
#include "fieldscope/error.hpp"
#include "fieldscope/trace.hpp"
#include "fieldscope/vec3.hpp"

namespace fieldscope {

/// Material curve carried by a flow. Each segment remembers its rest length
/// (the material length it started with) so stretching can be measured after
/// resampling, and its length when it was created, which drives resampling.
struct MaterialCurve {
  std::vector<Vec3> points;
  std::vector<bool> frozen;
  std::vector<double> rest_length;  // one per segment
  std::vector<double> split_length;  // one per segment: length when created
  double time = 0.0;

  MaterialCurve() = default;

  explicit MaterialCurve(std::vector<Vec3> pts, double t = 0.0) : points(std::move(pts)), time(t) {
    if (points.size() < 2) throw Error(ErrorCode::invalid_argument, "material curve needs at least 2 vertices");
    for (const auto& p : points) {
      if (!is_finite(p)) throw Error(ErrorCode::non_finite, "material curve vertex is not finite");
    }
    frozen.assign(points.size(), false);
    rest_length.resize(points.size() - 1);
    for (std::size_t i = 0; i + 1 < points.size(); ++i) rest_length[i] = distance(points[i], points[i + 1]);
    split_length = rest_length;
  }

  std::size_t size() const { return points.size(); }

  friend bool operator==(const MaterialCurve&, const MaterialCurve&) = default;
};

struct CurveDiagnostics {
  double total_length = 0.0;
  double max_stretch = 0.0;
  std::size_t vertex_count = 0;
};

inline CurveDiagnostics curve_diagnostics(const MaterialCurve& curve) {
  CurveDiagnostics d;
  d.vertex_count = curve.points.size();
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    const double len = distance(curve.points[i], curve.points[i + 1]);
    d.total_length += len;
    if (curve.rest_length[i] > 0.0) d.max_stretch = std::max(d.max_stretch, len / curve.rest_length[i]);
  }
  return d;
}

inline constexpr double kDefaultResampleThreshold = 2.0;

/// Splits every segment that has grown past threshold x its length at creation
/// at the midpoint. Both halves inherit half the material rest length and
/// start a new reference length. A threshold <= 0 or infinite disables splitting.
template <VectorFieldSampler S>
void resample_curve(const S& flow, MaterialCurve& curve, double threshold) {
  if (!(threshold > 0.0) || !std::isfinite(threshold)) return;
  MaterialCurve out;
  out.time = curve.time;
  out.points.push_back(curve.points.front());
  out.frozen.push_back(curve.frozen.front());
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    const Vec3& a = curve.points[i];
    const Vec3& b = curve.points[i + 1];
    const double rest = curve.rest_length[i];
    const double len = distance(a, b);
    if (len > threshold * curve.split_length[i]) {
      const Vec3 mid = (a + b) * 0.5;
      out.points.push_back(mid);
      out.frozen.push_back(!flow(mid).has_value());
      out.rest_length.push_back(rest * 0.5);
      out.rest_length.push_back(rest * 0.5);
      out.split_length.push_back(distance(a, mid));
      out.split_length.push_back(distance(mid, b));
    } else {
      out.rest_length.push_back(rest);
      out.split_length.push_back(curve.split_length[i]);
    }
    out.points.push_back(b);
    out.frozen.push_back(curve.frozen[i + 1]);
  }
  curve = std::move(out);
}

/// Advances every unfrozen vertex by RK4 on dP/dt = u(P). Vertices whose step
/// leaves the domain stay in place and are flagged frozen.
template <VectorFieldSampler S>
MaterialCurve advect_curve(const S& flow, MaterialCurve curve, double dt, std::size_t n_steps,
                           double resample_threshold = kDefaultResampleThreshold) {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "advection dt must be > 0");
  for (std::size_t n = 0; n < n_steps; ++n) {
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
      if (curve.frozen[i]) continue;
      auto q = detail::rk4_advance(flow, curve.points[i], dt);
      if (q) {
        curve.points[i] = *q;
      } else {
        curve.frozen[i] = true;
      }
    }
    curve.time += dt;
    resample_curve(flow, curve, resample_threshold);
  }
  return curve;
}

struct ParticleState {
  Vec3 position;
  Vec3 velocity;
  double charge_to_mass = 1.0;
  double time = 0.0;

  friend bool operator==(const ParticleState&, const ParticleState&) = default;
};

/// Boris push: half electric kick, magnetic rotation, half electric kick,
/// then drift with the new velocity.
inline ParticleState boris_step(const Vec3& e, const Vec3& b, ParticleState s, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "particle dt must be > 0");
  const double half = 0.5 * s.charge_to_mass * dt;
  const Vec3 v_minus = s.velocity + half * e;
  const Vec3 t = half * b;
  const Vec3 sv = (2.0 / (1.0 + dot(t, t))) * t;
  const Vec3 v_prime = v_minus + cross(v_minus, t);
  const Vec3 v_plus = v_minus + cross(v_prime, sv);
  s.velocity = v_plus + half * e;
  s.position += dt * s.velocity;
  s.time += dt;
  return s;
}

/// Classical RK4 on (x, v) for cross-checking the Boris pusher.
inline ParticleState rk4_particle_step(const Vec3& e, const Vec3& b, ParticleState s, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "particle dt must be > 0");
  const double qm = s.charge_to_mass;
  auto accel = [&](const Vec3& v) { return qm * (e + cross(v, b)); };
  const Vec3 v1 = s.velocity, a1 = accel(v1);
  const Vec3 v2 = s.velocity + 0.5 * dt * a1, a2 = accel(v2);
  const Vec3 v3 = s.velocity + 0.5 * dt * a2, a3 = accel(v3);
  const Vec3 v4 = s.velocity + dt * a3, a4 = accel(v4);
  s.position += (dt / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
  s.velocity += (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  s.time += dt;
  return s;
}

enum class Pusher { boris, rk4 };

/// Initial velocity: an explicit vector or a named velocity field sampled at p0.
struct InitialVelocity {
  std::variant<Vec3, std::string> rule;

  friend bool operator==(const InitialVelocity&, const InitialVelocity&) = default;
};

struct ParticleRun {
  Polyline trajectory;
  ParticleState final_state;
  bool left_domain = false;
};

/// Continues a particle for n_steps under the fields of one snapshot.
/// The trajectory starts with the incoming state.
inline ParticleRun push_particle(const Dataset& data, const std::string& e_name, const std::string& b_name,
                                 ParticleState state, double dt, std::size_t n_steps, Pusher pusher = Pusher::boris) {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "particle dt must be > 0");
  const auto efield = data.vector_sampler(e_name);
  const auto bfield = data.vector_sampler(b_name);
  ParticleRun run;
  auto record = [&run](const ParticleState& s) {
    run.trajectory.points.push_back(s.position);
    run.trajectory.param.push_back(s.time);
    run.trajectory.speed.push_back(norm(s.velocity));
  };
  record(state);
  for (std::size_t n = 0; n < n_steps; ++n) {
    const auto e = efield(state.position);
    const auto b = bfield(state.position);
    if (!e || !b) {
      run.left_domain = true;
      break;
    }
    const ParticleState next =
        pusher == Pusher::boris ? boris_step(*e, *b, state, dt) : rk4_particle_step(*e, *b, state, dt);
    // The last in-domain state is kept on exit.
    if (!bfield(next.position)) {
      run.left_domain = true;
      break;
    }
    state = next;
    record(state);
  }
  detail::fill_arclength(run.trajectory);
  run.final_state = state;
  return run;
}

inline Vec3 resolve_initial_velocity(const Dataset& data, const InitialVelocity& v0, const Vec3& p0) {
  if (const auto* v = std::get_if<Vec3>(&v0.rule)) return *v;
  const auto& name = std::get<std::string>(v0.rule);
  const auto sampled = data.vector_sampler(name)(p0);
  if (!sampled) throw Error(ErrorCode::outside_domain, "particle start is outside the domain");
  return *sampled;
}

/// Starting state for a test particle; p0 must lie where the magnetic field is defined.
inline ParticleState initial_particle_state(const Dataset& data, const std::string& b_name, const Vec3& p0,
                                            const InitialVelocity& v0, double charge_to_mass, double t0) {
  if (!(std::abs(charge_to_mass) > 0.0) || !std::isfinite(charge_to_mass)) {
    throw Error(ErrorCode::invalid_argument, "charge-to-mass ratio must be finite and non-zero");
  }
  if (!data.vector_sampler(b_name)(p0)) throw Error(ErrorCode::outside_domain, "particle start is outside the domain");
  return {p0, resolve_initial_velocity(data, v0, p0), charge_to_mass, t0};
}

/// Integrates a test particle through a field source. Snapshots are held
/// constant in time: the snapshot in effect at time t is the last one whose
/// time is <= t.
inline Polyline integrate_test_particle(const FieldSource& fields, const std::string& e_name,
                                        const std::string& b_name, const Vec3& p0, const InitialVelocity& v0,
                                        double charge_to_mass, double dt, std::size_t n_steps,
                                        Pusher pusher = Pusher::boris) {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "particle dt must be > 0");
  auto first = fields.snapshot(0);
  for (const auto& name : {e_name, b_name}) {
    if (!first->has_vector(name)) throw Error(ErrorCode::unknown_field, "unknown vector field '" + name + "'");
  }
  ParticleState state = initial_particle_state(*first, b_name, p0, v0, charge_to_mass, fields.time(0));

  Polyline out;
  std::size_t done = 0;
  std::size_t index = 0;
  while (done < n_steps) {
    // Steps run under snapshot `index` until the next snapshot time is reached.
    std::size_t chunk = n_steps - done;
    if (index + 1 < fields.size()) {
      const double until = fields.time(index + 1);
      std::size_t k = 0;
      double t = state.time;
      while (k < chunk && t < until) {
        t += dt;
        ++k;
      }
      chunk = k;
    }
    if (chunk == 0) {
      ++index;
      continue;
    }
    const auto snap = fields.snapshot(index);
    ParticleRun run = push_particle(*snap, e_name, b_name, state, dt, chunk, pusher);
    const std::size_t skip = out.points.empty() ? 0 : 1;
    for (std::size_t i = skip; i < run.trajectory.size(); ++i) {
      out.points.push_back(run.trajectory.points[i]);
      out.param.push_back(run.trajectory.param[i]);
      out.speed.push_back(run.trajectory.speed[i]);
    }
    state = run.final_state;
    done += chunk;
    if (run.left_domain) break;
    if (index + 1 < fields.size()) ++index;
  }
  if (out.points.empty()) {
    out.points.push_back(state.position);
    out.param.push_back(state.time);
    out.speed.push_back(norm(state.velocity));
  }
  detail::fill_arclength(out);
  return out;
}

}  // namespace fieldscope
