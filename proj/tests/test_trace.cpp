#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fieldscope/trace.hpp"

using namespace fieldscope;

namespace {

// Analytic fields on a box domain.
struct Analytic {
  Vec3 (*f)(const Vec3&);
  Box box{{-10, -10, -10}, {10, 10, 10}};
  std::optional<Vec3> operator()(const Vec3& p) const {
    if (!box.contains(p)) return std::nullopt;
    return f(p);
  }
};

Vec3 rotation(const Vec3& p) { return {-p.y, p.x, 0.0}; }
Vec3 strain(const Vec3& p) { return {p.x, -p.y, 0.0}; }
Vec3 wavy(const Vec3& p) { return {1.0, 0.5 * std::sin(2 * p.x), 0.2}; }

TraceOptions opts(double h, std::size_t max_steps, Direction d = Direction::forward) {
  TraceOptions o;
  o.step = h;
  o.max_steps = max_steps;
  o.direction = d;
  return o;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

double distance_to_polyline(const Vec3& p, const Polyline& line) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) best = std::min(best, point_segment_distance(p, line.points[i], line.points[i + 1]));
  return best;
}

}  // namespace

TEST(Rk4Step, ConstantFieldIsExact) {
  const Analytic f{[](const Vec3&) { return Vec3{1, 0, 0}; }};
  const auto q = rk4_step(f, {0, 0, 0}, 0.1);
  ASSERT_TRUE(q);
  EXPECT_DOUBLE_EQ(q->x, 0.1);
  EXPECT_EQ(q->y, 0.0);
}

TEST(Rk4Step, RotationMatchesCircleWithinH5) {
  const Analytic f{rotation};
  const double h = 0.01;
  const auto q = rk4_step(f, {1, 0, 0}, h);
  EXPECT_LE(distance(*q, {std::cos(h), std::sin(h), 0}), std::pow(h, 5));
}

TEST(Rk4Step, OutsideAndBadStep) {
  const Analytic f{[](const Vec3&) { return Vec3{1, 0, 0}; }, Box{{0, 0, 0}, {1, 1, 1}}};
  EXPECT_FALSE(rk4_step(f, {1, 0.5, 0.5}, 0.1));
  EXPECT_THROW(rk4_step(f, {0.5, 0.5, 0.5}, 0.0), Error);
}

TEST(FieldLine, NormalizedStraightSegment) {
  const Analytic f{[](const Vec3&) { return Vec3{0, 0, 2}; }};
  const Polyline l = trace_field_line(f, {0, 0, 0}, opts(0.1, 10));
  ASSERT_EQ(l.size(), 11u);
  EXPECT_NEAR(l.points.back().z, 1.0, 1e-12);
  EXPECT_NEAR(l.arclength.back(), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(l.speed.front(), 2.0);
}

TEST(FieldLine, RotationClosure) {
  const Analytic f{rotation};
  const double h = 1e-3;
  const auto n = static_cast<std::size_t>(std::floor(2 * std::numbers::pi / h));
  const Polyline l = trace_field_line(f, {1, 0, 0}, opts(h, n));
  ASSERT_EQ(l.size(), n + 1);
  auto unit = [&f](const Vec3& p) -> std::optional<Vec3> {
    const Vec3 v = *f(p);
    return v / norm(v);
  };
  const Vec3 end = *rk4_step(unit, l.points.back(), 2 * std::numbers::pi - n * h);
  EXPECT_LE(distance(end, {1, 0, 0}), 1e-5);
}

TEST(FieldLine, StagnantSeedGivesSingleVertex) {
  const Analytic f{[](const Vec3&) { return Vec3{1e-9, 0, 0}; }};
  TraceOptions o = opts(0.1, 100);
  o.min_speed = 1e-6;
  const Polyline l = trace_field_line(f, {0, 0, 0}, o);
  EXPECT_EQ(l.size(), 1u);
}

TEST(FieldLine, SeedOutsideThrows) {
  const Analytic f{rotation, Box{{0, 0, 0}, {1, 1, 1}}};
  try {
    trace_field_line(f, {2, 2, 2}, opts(0.1, 10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::outside_domain);
  }
}

TEST(FieldLine, BothDirectionsShareSeedOnce) {
  const Analytic f{wavy, Box{{0, -1, 0}, {4, 1, 2}}};
  const Vec3 seed{2, 0, 1};
  const Polyline both = trace_field_line(f, seed, opts(0.05, 20, Direction::both));
  ASSERT_EQ(both.size(), 41u);
  EXPECT_EQ(both.points[20], seed);
  EXPECT_EQ(both.param[20], 0.0);
  for (std::size_t i = 1; i < both.size(); ++i) {
    EXPECT_GT(both.param[i], both.param[i - 1]);
    EXPECT_NE(both.points[i], both.points[i - 1]);
  }
  const Polyline back = trace_field_line(f, seed, opts(0.05, 20, Direction::backward));
  EXPECT_EQ(back.points.back(), seed);
  EXPECT_EQ(back.points.front(), both.points.front());
}

TEST(FieldLine, ArclengthIsCumulativeDistance) {
  const Analytic f{wavy, Box{{0, -1, 0}, {4, 1, 2}}};
  const Polyline l = trace_field_line(f, {0.5, 0, 0.5}, opts(0.01, 10000, Direction::both));
  double s = 0.0;
  for (std::size_t i = 1; i < l.size(); ++i) {
    s += distance(l.points[i - 1], l.points[i]);
    EXPECT_NEAR(l.arclength[i], s, 1e-12);
    EXPECT_GE(l.arclength[i], l.arclength[i - 1]);
  }
}

TEST(FieldLine, ReTraceableFromAnyVertex) {
  const Analytic f{wavy, Box{{0, -1, 0}, {4, 1, 2}}};
  const TraceOptions o = opts(2e-3, 100000, Direction::both);
  const Polyline l = trace_field_line(f, {1.3, 0.1, 0.7}, o);
  for (std::size_t pick : {std::size_t{0}, l.size() / 3, l.size() - 1}) {
    const Polyline r = trace_field_line(f, l.points[pick], o);
    for (std::size_t i = 0; i < r.size(); i += 7) EXPECT_LE(distance_to_polyline(r.points[i], l), 1e-6);
  }
}

TEST(FieldLine, Deterministic) {
  const Analytic f{wavy, Box{{0, -1, 0}, {4, 1, 2}}};
  const TraceOptions o = opts(0.01, 500, Direction::both);
  EXPECT_EQ(trace_field_line(f, {1, 0, 1}, o), trace_field_line(f, {1, 0, 1}, o));
}

TEST(ParticlePath, UniformFieldTime) {
  const Analytic f{[](const Vec3&) { return Vec3{2, 0, 0}; }};
  const Polyline l = trace_particle_path(f, {0, 0, 0}, opts(0.1, 5));
  EXPECT_NEAR(l.points.back().x, 1.0, 1e-12);
  EXPECT_NEAR(l.param.back(), 0.5, 1e-12);
}

TEST(ParticlePath, LinearStrainMatchesExponential) {
  const Analytic f{strain};
  const Polyline l = trace_particle_path(f, {1, 1, 0}, opts(1e-3, 1000));
  EXPECT_NEAR(l.param.back(), 1.0, 1e-12);
  EXPECT_NEAR(l.points.back().x, std::exp(1.0), 1e-6);
  EXPECT_NEAR(l.points.back().y, std::exp(-1.0), 1e-6);
}

TEST(ParticlePath, RotationConservesRadius) {
  const Analytic f{rotation};
  const double h = 1e-3;
  const Polyline l = trace_particle_path(f, {0.7, 0, 0.3}, opts(h, static_cast<std::size_t>(2 * std::numbers::pi / h)));
  for (const auto& p : l.points) EXPECT_NEAR(std::hypot(p.x, p.y), 0.7, 1e-6);
}

TEST(SeedBeam, EvenSpacing) {
  SeedBeam one{{0, 0, 0}, {2, 0, 0}, 1};
  EXPECT_EQ(one.seeds(), std::vector<Vec3>{Vec3(1, 0, 0)});
  SeedBeam three{{0, 0, 0}, {2, 0, 0}, 3};
  const auto s = three.seeds();
  EXPECT_EQ(s[0], Vec3(0, 0, 0));
  EXPECT_EQ(s[1], Vec3(1, 0, 0));
  EXPECT_EQ(s[2], Vec3(2, 0, 0));
  EXPECT_THROW((SeedBeam{{}, {}, 0}.seeds()), Error);
}

TEST(Interactive, StripePhaseFollowsArclength) {
  const Analytic f{[](const Vec3&) { return Vec3{1, 0, 0}; }};
  const auto lines = interactive_field_lines(f, SeedBeam{{0, 0, 0}, {0, 0, 0}, 1}, opts(0.1, 10), 1.0, 0.25);
  ASSERT_EQ(lines.size(), 1u);
  const auto& l = lines[0];
  for (std::size_t i = 0; i < l.line.size(); ++i) {
    EXPECT_NEAR(l.phase[i], 2 * std::numbers::pi * l.line.arclength[i] + 0.25, 1e-12);
    EXPECT_NEAR(l.line.points[i].y, 0.0, 1e-15);
  }
}

TEST(Interactive, OutsideBeamGivesEmptyLines) {
  const Analytic f{rotation, Box{{0, 0, 0}, {1, 1, 1}}};
  const auto lines = interactive_field_lines(f, SeedBeam{{5, 5, 5}, {6, 6, 6}, 4}, opts(0.1, 10), 1.0, 0.0);
  ASSERT_EQ(lines.size(), 4u);
  for (const auto& l : lines) EXPECT_TRUE(l.line.empty());
}

TEST(Interactive, ConcentricCircles) {
  const Analytic f{rotation};
  const double h = 1e-3;
  const auto lines = interactive_field_lines(f, SeedBeam{{0.2, 0, 0}, {1.0, 0, 0}, 5},
                                             opts(h, static_cast<std::size_t>(0.5 * std::numbers::pi / h)), 10 * h, 0.0);
  ASSERT_EQ(lines.size(), 5u);
  for (std::size_t n = 0; n < 5; ++n) {
    const double r = 0.2 + 0.2 * static_cast<double>(n);
    for (const auto& p : lines[n].line.points) EXPECT_NEAR(std::hypot(p.x, p.y), r, 1e-4);
  }
}

TEST(LocalArrows, LatticeAndBoundary) {
  const Analytic f{[](const Vec3&) { return Vec3{0, 1, 0}; }, Box{{0, 0, 0}, {1, 1, 1}}};
  const auto single = local_arrows(f, {0.5, 0.5, 0.5}, 0.2, 1);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].origin, Vec3(0.5, 0.5, 0.5));
  const auto full = local_arrows(f, {0.5, 0.5, 0.5}, 0.2, 3);
  EXPECT_EQ(full.size(), 27u);
  for (const auto& g : full) EXPECT_EQ(g.vector, Vec3(0, 1, 0));
  // Centre on a face: count in-domain lattice points directly.
  const auto edge = local_arrows(f, {0.0, 0.5, 0.5}, 0.2, 4);
  std::size_t expected = 0;
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) expected += (-0.2 + 0.4 * i / 3.0) >= 0.0;
  EXPECT_EQ(edge.size(), expected);
}

TEST(TraceOptions, Validation) {
  const Analytic f{rotation};
  EXPECT_THROW(trace_field_line(f, {1, 0, 0}, opts(0.0, 10)), Error);
  EXPECT_THROW(trace_field_line(f, {1, 0, 0}, opts(0.1, 0)), Error);
}
