#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fieldscope/grid.hpp"
#include "fieldscope/vec3.hpp"

namespace fieldscope {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Vec3> normals;  // empty or one per vertex

  bool empty() const { return triangles.empty(); }

  friend bool operator==(const TriangleMesh&, const TriangleMesh&) = default;
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * norm(cross(b - a, c - a)); }

inline double surface_area(const TriangleMesh& mesh) {
  double a = 0.0;
  for (const auto& t : mesh.triangles) a += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  return a;
}

namespace mc {

// Corner c of a cell sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
struct Edge {
  std::uint8_t a;
  std::uint8_t b;
  std::uint8_t axis;
};

inline constexpr std::array<Edge, 12> kEdges = [] {
  std::array<Edge, 12> e{};
  std::size_t n = 0;
  for (std::uint8_t axis = 0; axis < 3; ++axis)
    for (std::uint8_t c = 0; c < 8; ++c)
      if (((c >> axis) & 1u) == 0) e[n++] = {c, static_cast<std::uint8_t>(c | (1u << axis)), axis};
  return e;
}();

constexpr std::uint8_t edge_between(std::uint8_t p, std::uint8_t q) {
  for (std::uint8_t i = 0; i < 12; ++i)
    if ((kEdges[i].a == p && kEdges[i].b == q) || (kEdges[i].a == q && kEdges[i].b == p)) return i;
  return 255;
}

// Face corners listed counter-clockwise as seen from outside the cell.
struct Face {
  std::array<std::uint8_t, 4> corners;
  std::array<std::uint8_t, 4> edges;  // edges[i] joins corners[i] and corners[i + 1]
};

inline constexpr std::array<Face, 6> kFaces = [] {
  std::array<Face, 6> faces{};
  std::size_t n = 0;
  for (std::uint8_t axis = 0; axis < 3; ++axis) {
    const std::uint8_t u = (axis + 1) % 3, w = (axis + 2) % 3;
    for (std::uint8_t side = 0; side < 2; ++side) {
      auto corner = [&](int cu, int cw) {
        return static_cast<std::uint8_t>((side << axis) | (cu << u) | (cw << w));
      };
      Face f{};
      if (side == 1) {
        f.corners = {corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)};
      } else {
        f.corners = {corner(0, 0), corner(0, 1), corner(1, 1), corner(1, 0)};
      }
      for (std::size_t i = 0; i < 4; ++i) f.edges[i] = edge_between(f.corners[i], f.corners[(i + 1) % 4]);
      faces[n++] = f;
    }
  }
  return faces;
}();

/// Intersected-edge mask for each of the 256 corner classifications.
inline constexpr std::array<std::uint16_t, 256> kEdgeTable = [] {
  std::array<std::uint16_t, 256> t{};
  for (std::size_t cfg = 0; cfg < 256; ++cfg) {
    std::uint16_t mask = 0;
    for (std::size_t e = 0; e < 12; ++e) {
      if (((cfg >> kEdges[e].a) & 1u) != ((cfg >> kEdges[e].b) & 1u)) mask |= static_cast<std::uint16_t>(1u << e);
    }
    t[cfg] = mask;
  }
  return t;
}();

/// Bit f set when edge e lies on face f.
inline constexpr std::array<std::uint8_t, 12> kEdgeFaces = [] {
  std::array<std::uint8_t, 12> m{};
  for (std::size_t f = 0; f < kFaces.size(); ++f)
    for (auto e : kFaces[f].edges) m[e] |= static_cast<std::uint8_t>(1u << f);
  return m;
}();

constexpr bool share_face(std::uint8_t e1, std::uint8_t e2) { return (kEdgeFaces[e1] & kEdgeFaces[e2]) != 0; }

/// Index of a loop vertex whose fan diagonals all run through the cell
/// interior (none lies in a cell face), if there is one.
inline std::optional<std::size_t> fan_apex(const std::vector<std::uint8_t>& loop) {
  const std::size_t m = loop.size();
  for (std::size_t a = 0; a < m; ++a) {
    bool ok = true;
    for (std::size_t k = 0; k < m && ok; ++k) {
      if (k == a || k == (a + 1) % m || (k + 1) % m == a) continue;
      ok = !share_face(loop[a], loop[k]);
    }
    if (ok) return a;
  }
  return std::nullopt;
}

/// Contour loops through the intersected edges of one cell. Each face
/// contributes segments from an entry crossing to an exit crossing (walking
/// the face boundary counter-clockwise); saddle faces are split by the
/// face-centre value so neighbouring cells agree.
inline std::vector<std::vector<std::uint8_t>> cell_loops(std::uint8_t cfg, const std::array<double, 8>& value,
                                                         double level) {
  std::array<std::int8_t, 12> next;
  next.fill(-1);
  for (const Face& f : kFaces) {
    std::array<bool, 4> in{};
    for (std::size_t i = 0; i < 4; ++i) in[i] = (cfg >> f.corners[i]) & 1u;
    std::array<int, 4> entries{}, exits{};
    int ne = 0, nx = 0;
    for (int i = 0; i < 4; ++i) {
      const bool a = in[static_cast<std::size_t>(i)], b = in[static_cast<std::size_t>((i + 1) % 4)];
      if (!a && b) entries[static_cast<std::size_t>(ne++)] = i;
      if (a && !b) exits[static_cast<std::size_t>(nx++)] = i;
    }
    if (ne == 1) {
      next[f.edges[static_cast<std::size_t>(entries[0])]] = static_cast<std::int8_t>(f.edges[static_cast<std::size_t>(exits[0])]);
    } else if (ne == 2) {
      double centre = 0.0;
      for (auto c : f.corners) centre += value[c];
      centre *= 0.25;
      const int shift = centre >= level ? 3 : 1;  // inside corners joined: pair entry i with exit i-1
      for (int k = 0; k < 2; ++k) {
        const int i = entries[static_cast<std::size_t>(k)];
        next[f.edges[static_cast<std::size_t>(i)]] = static_cast<std::int8_t>(f.edges[static_cast<std::size_t>((i + shift) % 4)]);
      }
    }
  }
  std::vector<std::vector<std::uint8_t>> loops;
  std::array<bool, 12> used{};
  for (std::uint8_t e = 0; e < 12; ++e) {
    if (next[e] < 0 || used[e]) continue;
    std::vector<std::uint8_t> loop;
    std::uint8_t cur = e;
    while (!used[cur]) {
      used[cur] = true;
      loop.push_back(cur);
      cur = static_cast<std::uint8_t>(next[cur]);
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

}  // namespace mc

namespace detail {

/// Node gradient by one-sided/central differences on the rectilinear axes.
inline Vec3 node_gradient(const ScalarField& f, std::size_t i, std::size_t j, std::size_t k) {
  const RectGrid& g = f.grid();
  const std::array<std::size_t, 3> idx{i, j, k};
  Vec3 grad;
  for (std::size_t d = 0; d < 3; ++d) {
    const Axis& ax = g.axis(d);
    std::array<std::size_t, 3> lo = idx, hi = idx;
    if (idx[d] > 0) lo[d] = idx[d] - 1;
    if (idx[d] + 1 < ax.size()) hi[d] = idx[d] + 1;
    grad[d] = (f.at(hi[0], hi[1], hi[2]) - f.at(lo[0], lo[1], lo[2])) / (ax[hi[d]] - ax[lo[d]]);
  }
  return grad;
}

}  // namespace detail

/// Marching-cubes isosurface of a rectilinear scalar field. Corners with
/// value >= level count as inside; triangles are wound so their normals point
/// towards increasing values. Levels outside the field range give an empty mesh.
inline TriangleMesh extract_isosurface(const ScalarField& field, double level) {
  TriangleMesh mesh;
  const auto [fmin, fmax] = field.range();
  if (!(level >= fmin && level <= fmax)) return mesh;
  const RectGrid& g = field.grid();
  const auto& vals = field.values();
  std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;

  auto vertex_on_edge = [&](std::size_t i, std::size_t j, std::size_t k, const mc::Edge& e) -> std::uint32_t {
    const std::array<std::size_t, 3> a{i + (e.a & 1u), j + ((e.a >> 1) & 1u), k + ((e.a >> 2) & 1u)};
    const std::size_t na = g.index(a[0], a[1], a[2]);
    const std::uint64_t key = static_cast<std::uint64_t>(na) * 3u + e.axis;
    if (auto it = edge_vertex.find(key); it != edge_vertex.end()) return it->second;
    std::array<std::size_t, 3> b = a;
    ++b[e.axis];
    const double va = vals[na], vb = vals[g.index(b[0], b[1], b[2])];
    const double t = (level - va) / (vb - va);
    const Vec3 pa = g.node(a[0], a[1], a[2]), pb = g.node(b[0], b[1], b[2]);
    Vec3 p = pa;
    p[e.axis] = pa[e.axis] + t * (pb[e.axis] - pa[e.axis]);
    const Vec3 ga = detail::node_gradient(field, a[0], a[1], a[2]);
    const Vec3 gb = detail::node_gradient(field, b[0], b[1], b[2]);
    Vec3 n = ga + t * (gb - ga);
    const double len = norm(n);
    n = len > 0.0 ? n / len : Vec3{};
    const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    mesh.normals.push_back(n);
    edge_vertex.emplace(key, id);
    return id;
  };

  // Point inside a cell where the trilinear interpolant equals level: the mean
  // of the loop vertices pulled onto the level set by Newton steps.
  auto centre_vertex = [&](const std::array<double, 8>& cv, const Vec3& lo, const Vec3& ext,
                           const std::vector<std::uint32_t>& ids) -> std::uint32_t {
    Vec3 p;
    for (auto id : ids) p += mesh.vertices[id];
    p = p / static_cast<double>(ids.size());
    auto eval = [&](const Vec3& q, Vec3& grad) {
      const double u[3] = {(q.x - lo.x) / ext.x, (q.y - lo.y) / ext.y, (q.z - lo.z) / ext.z};
      double val = 0.0;
      Vec3 d;
      for (std::uint8_t c = 0; c < 8; ++c) {
        double w[3];
        double dw[3];
        for (std::size_t a = 0; a < 3; ++a) {
          const bool hi_side = (c >> a) & 1u;
          w[a] = hi_side ? u[a] : 1.0 - u[a];
          dw[a] = hi_side ? 1.0 : -1.0;
        }
        val += cv[c] * w[0] * w[1] * w[2];
        d.x += cv[c] * dw[0] * w[1] * w[2] / ext.x;
        d.y += cv[c] * w[0] * dw[1] * w[2] / ext.y;
        d.z += cv[c] * w[0] * w[1] * dw[2] / ext.z;
      }
      grad = d;
      return val;
    };
    Vec3 grad;
    for (int it = 0; it < 50; ++it) {
      const double r = eval(p, grad) - level;
      const double g2 = dot(grad, grad);
      if (std::abs(r) <= 1e-15 * (std::abs(level) + 1.0) || !(g2 > 0.0)) break;
      Vec3 q = p - (r / g2) * grad;
      for (std::size_t a = 0; a < 3; ++a) q[a] = std::clamp(q[a], lo[a], lo[a] + ext[a]);
      p = q;
    }
    eval(p, grad);
    const double len = norm(grad);
    const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    mesh.normals.push_back(len > 0.0 ? grad / len : Vec3{});
    return id;
  };

  for (std::size_t k = 0; k + 1 < g.nz(); ++k)
    for (std::size_t j = 0; j + 1 < g.ny(); ++j)
      for (std::size_t i = 0; i + 1 < g.nx(); ++i) {
        std::array<double, 8> v{};
        std::uint8_t cfg = 0;
        bool finite = true;
        for (std::uint8_t c = 0; c < 8; ++c) {
          v[c] = field.at(i + (c & 1u), j + ((c >> 1) & 1u), k + ((c >> 2) & 1u));
          finite = finite && std::isfinite(v[c]);
          if (v[c] >= level) cfg |= static_cast<std::uint8_t>(1u << c);
        }
        if (!finite || mc::kEdgeTable[cfg] == 0) continue;
        const Vec3 lo = g.node(i, j, k), hi = g.node(i + 1, j + 1, k + 1);
        const Vec3 ext = hi - lo;
        const double min_area = 1e-14 * std::max({ext.x * ext.y, ext.y * ext.z, ext.z * ext.x});
        auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
          if (triangle_area(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]) > min_area) {
            mesh.triangles.push_back({a, b, c});
          }
        };
        for (const auto& loop : mc::cell_loops(cfg, v, level)) {
          std::vector<std::uint32_t> ids;
          ids.reserve(loop.size());
          for (auto e : loop) ids.push_back(vertex_on_edge(i, j, k, mc::kEdges[e]));
          const std::size_t m = ids.size();
          if (const auto apex = mc::fan_apex(loop)) {
            for (std::size_t n = 1; n + 1 < m; ++n) emit(ids[*apex], ids[(*apex + n + 1) % m], ids[(*apex + n) % m]);
            continue;
          }
          // Loops that cross a face twice (tunnels) get a centre vertex on the
          // level set so no triangle lies in a cell face.
          const std::uint32_t c = centre_vertex(v, lo, ext, ids);
          for (std::size_t n = 0; n < m; ++n) emit(c, ids[(n + 1) % m], ids[n]);
        }
      }
  return mesh;
}

}  // namespace fieldscope
