#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fieldscope/dataset.hpp"
#include "fieldscope/error.hpp"
#include "fieldscope/vec3.hpp"

namespace fieldscope {

/// Anything callable as `std::optional<Vec3>(const Vec3&)`; nullopt means outside the domain.
template <typename S>
concept VectorFieldSampler = requires(const S& s, const Vec3& p) {
  { s(p) } -> std::convertible_to<std::optional<Vec3>>;
};

enum class Direction { forward, backward, both };

struct TraceOptions {
  double step = 0.0;
  std::size_t max_steps = 10000;
  double min_speed = 0.0;
  Direction direction = Direction::forward;

  void validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorCode::invalid_argument, "trace step must be > 0");
    if (max_steps < 1) throw Error(ErrorCode::invalid_argument, "max_steps must be >= 1");
    if (!(min_speed >= 0.0)) throw Error(ErrorCode::invalid_argument, "min_speed must be >= 0");
  }

  friend bool operator==(const TraceOptions&, const TraceOptions&) = default;
};

inline constexpr std::size_t kDefaultMaxSteps = 10000;

/// Step 0.2 x smallest cell edge, stagnation below 1e-6 x RMS speed.
inline TraceOptions default_trace_options(const Dataset& data, const std::string& vector_name) {
  TraceOptions o;
  o.step = 0.2 * data.min_cell_edge();
  o.max_steps = kDefaultMaxSteps;
  o.min_speed = 1e-6 * data.rms_magnitude(vector_name);
  return o;
}

/// Ordered vertices with arclength s, integration parameter t and sampled |v|.
struct Polyline {
  std::vector<Vec3> points;
  std::vector<double> arclength;
  std::vector<double> param;
  std::vector<double> speed;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  friend bool operator==(const Polyline&, const Polyline&) = default;
};

struct StripedPolyline {
  Polyline line;
  std::vector<double> phase;
  double wavelength = 1.0;
  double phase_offset = 0.0;

  friend bool operator==(const StripedPolyline&, const StripedPolyline&) = default;
};

struct SeedBeam {
  Vec3 a;
  Vec3 b;
  std::size_t count = 1;

  /// count points evenly spaced on [a, b]; the midpoint when count == 1.
  std::vector<Vec3> seeds() const {
    if (count < 1) throw Error(ErrorCode::invalid_argument, "seed beam needs at least one seed");
    if (count == 1) return {(a + b) * 0.5};
    std::vector<Vec3> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double f = static_cast<double>(i) / static_cast<double>(count - 1);
      out[i] = (i + 1 == count) ? b : a + (b - a) * f;
    }
    return out;
  }

  friend bool operator==(const SeedBeam&, const SeedBeam&) = default;
};

struct Glyph {
  Vec3 origin;
  Vec3 vector;

  friend bool operator==(const Glyph&, const Glyph&) = default;
};

namespace detail {

template <VectorFieldSampler S>
std::optional<Vec3> rk4_increment(const S& f, const Vec3& p, double h) {
  const std::optional<Vec3> k1 = f(p);
  if (!k1) return std::nullopt;
  const std::optional<Vec3> k2 = f(p + (0.5 * h) * *k1);
  if (!k2) return std::nullopt;
  const std::optional<Vec3> k3 = f(p + (0.5 * h) * *k2);
  if (!k3) return std::nullopt;
  const std::optional<Vec3> k4 = f(p + h * *k3);
  if (!k4) return std::nullopt;
  return (h / 6.0) * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4);
}

template <VectorFieldSampler S>
std::optional<Vec3> rk4_advance(const S& f, const Vec3& p, double h) {
  const auto d = rk4_increment(f, p, h);
  if (!d) return std::nullopt;
  return p + *d;
}

struct HalfTrace {
  std::vector<Vec3> points;
  std::vector<double> speed;
};

/// Integrates from seed (excluded from the output) until the domain is left,
/// the speed drops below min_speed, or max_steps is reached.
template <VectorFieldSampler S, typename Rhs>
HalfTrace integrate_half(const S& field, const Rhs& rhs, const Vec3& seed, double seed_speed, double h,
                         const TraceOptions& opts) {
  HalfTrace out;
  Vec3 p = seed;
  Vec3 carry;  // low-order bits lost when adding small increments (Kahan summation)
  double speed = seed_speed;
  for (std::size_t n = 0; n < opts.max_steps; ++n) {
    if (speed < opts.min_speed || speed == 0.0) break;
    const auto d = rk4_increment(rhs, p, h);
    if (!d) break;
    const Vec3 y = *d - carry;
    const Vec3 q = p + y;
    if (q == p) break;
    const auto v = field(q);
    if (!v) break;
    carry = (q - p) - y;
    p = q;
    speed = norm(*v);
    out.points.push_back(p);
    out.speed.push_back(speed);
  }
  return out;
}

inline void fill_arclength(Polyline& line) {
  line.arclength.assign(line.points.size(), 0.0);
  for (std::size_t i = 1; i < line.points.size(); ++i) {
    line.arclength[i] = line.arclength[i - 1] + distance(line.points[i - 1], line.points[i]);
  }
}

template <VectorFieldSampler S, typename Rhs>
Polyline trace(const S& field, const Rhs& rhs, const Vec3& seed, const TraceOptions& opts, double seed_speed) {
  const double h = opts.step;
  Polyline line;
  if (opts.direction != Direction::forward) {
    const HalfTrace back = integrate_half(field, rhs, seed, seed_speed, -h, opts);
    for (std::size_t i = back.points.size(); i-- > 0;) {
      line.points.push_back(back.points[i]);
      line.speed.push_back(back.speed[i]);
      line.param.push_back(-static_cast<double>(i + 1) * h);
    }
  }
  line.points.push_back(seed);
  line.speed.push_back(seed_speed);
  line.param.push_back(0.0);
  if (opts.direction != Direction::backward) {
    const HalfTrace fwd = integrate_half(field, rhs, seed, seed_speed, h, opts);
    for (std::size_t i = 0; i < fwd.points.size(); ++i) {
      line.points.push_back(fwd.points[i]);
      line.speed.push_back(fwd.speed[i]);
      line.param.push_back(static_cast<double>(i + 1) * h);
    }
  }
  fill_arclength(line);
  return line;
}

}  // namespace detail

/// One classical RK4 step of dP/dt = v(P). Outside when any stage leaves the domain.
template <VectorFieldSampler S>
std::optional<Vec3> rk4_step(const S& field, const Vec3& p, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::invalid_argument, "rk4 step must be > 0");
  return detail::rk4_advance(field, p, h);
}

/// Field line through seed: integrates the unit direction field so the
/// parameter is arclength.
template <VectorFieldSampler S>
Polyline trace_field_line(const S& field, const Vec3& seed, const TraceOptions& opts) {
  opts.validate();
  const auto v0 = field(seed);
  if (!v0) throw Error(ErrorCode::outside_domain, "field line seed is outside the domain");
  auto unit = [&field](const Vec3& p) -> std::optional<Vec3> {
    auto v = field(p);
    if (!v) return std::nullopt;
    const double n = norm(*v);
    return n > 0.0 ? *v / n : Vec3{};
  };
  return detail::trace(field, unit, seed, opts, norm(*v0));
}

/// Particle path / streamline of dP/dt = v; param is time.
template <VectorFieldSampler S>
Polyline trace_particle_path(const S& field, const Vec3& seed, const TraceOptions& opts) {
  opts.validate();
  const auto v0 = field(seed);
  if (!v0) throw Error(ErrorCode::outside_domain, "particle seed is outside the domain");
  return detail::trace(field, field, seed, opts, norm(*v0));
}

/// Stripe phase 2*pi*s/wavelength + offset on every vertex.
inline StripedPolyline make_striped(Polyline line, double wavelength, double phase_offset) {
  if (!(wavelength > 0.0)) throw Error(ErrorCode::invalid_argument, "stripe wavelength must be > 0");
  StripedPolyline out;
  out.wavelength = wavelength;
  out.phase_offset = phase_offset;
  out.phase.resize(line.size());
  for (std::size_t i = 0; i < line.size(); ++i) {
    out.phase[i] = 2.0 * std::numbers::pi * (line.arclength[i] / wavelength) + phase_offset;
  }
  out.line = std::move(line);
  return out;
}

/// One striped field line per beam seed. Seeds outside the domain give empty
/// lines so that steering never fails.
template <VectorFieldSampler S>
std::vector<StripedPolyline> interactive_field_lines(const S& field, const SeedBeam& beam, const TraceOptions& opts,
                                                     double wavelength, double phase_offset) {
  opts.validate();
  std::vector<StripedPolyline> out;
  for (const Vec3& seed : beam.seeds()) {
    Polyline line;
    if (field(seed)) line = trace_field_line(field, seed, opts);
    out.push_back(make_striped(std::move(line), wavelength, phase_offset));
  }
  return out;
}

/// n^3 lattice of arrows filling the cube of half-width radius around center.
template <VectorFieldSampler S>
std::vector<Glyph> local_arrows(const S& field, const Vec3& center, double radius, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "local arrows need n >= 1");
  if (!(radius >= 0.0)) throw Error(ErrorCode::invalid_argument, "local arrows radius must be >= 0");
  auto offset = [&](std::size_t i) {
    return n == 1 ? 0.0 : radius * (-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1));
  };
  std::vector<Glyph> out;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        const Vec3 p = center + Vec3{offset(i), offset(j), offset(k)};
        if (auto v = field(p)) out.push_back({p, *v});
      }
  return out;
}

}  // namespace fieldscope
