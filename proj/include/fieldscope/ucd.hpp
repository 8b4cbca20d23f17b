#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fieldscope/error.hpp"
#include "fieldscope/vec3.hpp"

namespace fieldscope {

using Tet = std::array<std::uint32_t, 4>;

inline double signed_volume6(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return dot(cross(b - a, c - a), d - a);
}

/// Tetrahedral mesh with per-vertex attributes. Cells are stored positively
/// oriented; negatively oriented input cells get their last two vertices swapped.
class TetMesh {
 public:
  TetMesh(std::vector<Vec3> vertices, std::vector<Tet> cells)
      : vertices_(std::move(vertices)), cells_(std::move(cells)) {
    if (vertices_.empty() || cells_.empty()) {
      throw Error(ErrorCode::invalid_argument, "tetrahedral mesh needs at least one vertex and one cell");
    }
    bounds_ = {vertices_.front(), vertices_.front()};
    for (std::size_t n = 0; n < vertices_.size(); ++n) {
      const Vec3& v = vertices_[n];
      if (!is_finite(v)) {
        throw Error(ErrorCode::non_finite, "mesh vertex " + std::to_string(n) + " is not finite");
      }
      for (std::size_t d = 0; d < 3; ++d) {
        bounds_.lo[d] = std::min(bounds_.lo[d], v[d]);
        bounds_.hi[d] = std::max(bounds_.hi[d], v[d]);
      }
    }
    const Vec3 ext = bounds_.extent();
    const double span = std::max({ext.x, ext.y, ext.z});
    min_volume6_ = 1e-14 * span * span * span * 6.0;
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      Tet& t = cells_[c];
      for (auto v : t) {
        if (v >= vertices_.size()) {
          throw Error(ErrorCode::invalid_argument, "cell " + std::to_string(c) + " references vertex " +
                                                       std::to_string(v) + " out of range");
        }
      }
      double vol = volume6(t);
      if (vol < 0) {
        std::swap(t[2], t[3]);
        vol = -vol;
      }
      if (!(vol >= min_volume6_) || vol == 0.0) {
        throw Error(ErrorCode::degenerate_cell, "cell " + std::to_string(c) + " is degenerate");
      }
    }
  }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Tet>& cells() const { return cells_; }
  std::size_t cell_count() const { return cells_.size(); }
  const Box& bounds() const { return bounds_; }

  Vec3 vertex(std::size_t cell, std::size_t corner) const { return vertices_[cells_[cell][corner]]; }

  Vec3 centroid(std::size_t cell) const {
    return (vertex(cell, 0) + vertex(cell, 1) + vertex(cell, 2) + vertex(cell, 3)) * 0.25;
  }

  Box cell_bounds(std::size_t cell) const {
    Box b{vertex(cell, 0), vertex(cell, 0)};
    for (std::size_t c = 1; c < 4; ++c) {
      const Vec3 v = vertex(cell, c);
      for (std::size_t d = 0; d < 3; ++d) {
        b.lo[d] = std::min(b.lo[d], v[d]);
        b.hi[d] = std::max(b.hi[d], v[d]);
      }
    }
    return b;
  }

  /// Six times the signed volume of a cell.
  double volume6(const Tet& t) const {
    return signed_volume6(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]], vertices_[t[3]]);
  }
  double min_volume6() const { return min_volume6_; }

  void add_scalar(const std::string& name, std::vector<double> values) {
    check_attribute_name(name);
    check_attribute(name, values);
    scalars_.emplace(name, std::move(values));
  }

  void add_vector(const std::string& name, std::array<std::vector<double>, 3> comps) {
    check_attribute_name(name);
    for (std::size_t d = 0; d < 3; ++d) check_attribute(name + "[" + std::to_string(d) + "]", comps[d]);
    std::vector<Vec3> packed(vertices_.size());
    for (std::size_t n = 0; n < packed.size(); ++n) packed[n] = {comps[0][n], comps[1][n], comps[2][n]};
    vectors_.emplace(name, std::move(packed));
  }

  const std::vector<double>* scalar(const std::string& name) const {
    auto it = scalars_.find(name);
    return it == scalars_.end() ? nullptr : &it->second;
  }
  const std::vector<Vec3>* vector(const std::string& name) const {
    auto it = vectors_.find(name);
    return it == vectors_.end() ? nullptr : &it->second;
  }
  const std::map<std::string, std::vector<double>>& scalars() const { return scalars_; }
  const std::map<std::string, std::vector<Vec3>>& vectors() const { return vectors_; }

 private:
  void check_attribute_name(const std::string& name) const {
    if (scalars_.count(name) || vectors_.count(name)) {
      throw Error(ErrorCode::duplicate_name, "duplicate attribute name '" + name + "'");
    }
  }
  void check_attribute(const std::string& name, const std::vector<double>& values) const {
    if (values.size() != vertices_.size()) {
      throw Error(ErrorCode::size_mismatch, "attribute '" + name + "' has " + std::to_string(values.size()) +
                                                " values, mesh has " + std::to_string(vertices_.size()) +
                                                " vertices");
    }
    for (std::size_t n = 0; n < values.size(); ++n) {
      if (!std::isfinite(values[n])) {
        throw Error(ErrorCode::non_finite, "attribute '" + name + "' is not finite at vertex " + std::to_string(n));
      }
    }
  }

  std::vector<Vec3> vertices_;
  std::vector<Tet> cells_;
  Box bounds_;
  double min_volume6_ = 0.0;
  std::map<std::string, std::vector<double>> scalars_;
  std::map<std::string, std::vector<Vec3>> vectors_;
};

/// Weights tolerance for the point-in-cell test; points on shared faces are
/// found from either side.
inline constexpr double kInsideTolerance = -1e-10;

using Barycentric = std::array<double, 4>;

inline Barycentric barycentric_weights(const TetMesh& mesh, std::size_t cell, const Vec3& p) {
  const Vec3 a = mesh.vertex(cell, 0), b = mesh.vertex(cell, 1), c = mesh.vertex(cell, 2), d = mesh.vertex(cell, 3);
  const double vol = signed_volume6(a, b, c, d);
  if (!(std::abs(vol) >= mesh.min_volume6()) || vol == 0.0) {
    throw Error(ErrorCode::degenerate_cell, "cell " + std::to_string(cell) + " is degenerate");
  }
  const Vec3 ap = p - a;
  const double w1 = dot(cross(ap, c - a), d - a) / vol;
  const double w2 = dot(cross(b - a, ap), d - a) / vol;
  const double w3 = dot(cross(b - a, c - a), ap) / vol;
  return {1.0 - (w1 + w2 + w3), w1, w2, w3};
}

inline bool weights_inside(const Barycentric& w) {
  return w[0] >= kInsideTolerance && w[1] >= kInsideTolerance && w[2] >= kInsideTolerance &&
         w[3] >= kInsideTolerance;
}

struct BucketResolution {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  std::size_t count() const { return nx * ny * nz; }
};

/// Uniform bucket grid over the mesh bounding box; each bucket lists, in
/// ascending order, the cells whose (slightly inflated) bounding box overlaps it.
class CellLocator {
 public:
  CellLocator(const TetMesh& mesh, BucketResolution res) : res_(res), bounds_(mesh.bounds()) {
    if (res_.nx == 0 || res_.ny == 0 || res_.nz == 0) {
      throw Error(ErrorCode::invalid_argument, "bucket resolution must be positive");
    }
    const Vec3 ext = bounds_.extent();
    pad_ = 1e-8 * std::max({ext.x, ext.y, ext.z});
    buckets_.resize(res_.count());
    for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
      Box b = mesh.cell_bounds(c);
      const auto lo = bucket_coords({b.lo.x - pad_, b.lo.y - pad_, b.lo.z - pad_});
      const auto hi = bucket_coords({b.hi.x + pad_, b.hi.y + pad_, b.hi.z + pad_});
      for (std::size_t k = lo[2]; k <= hi[2]; ++k)
        for (std::size_t j = lo[1]; j <= hi[1]; ++j)
          for (std::size_t i = lo[0]; i <= hi[0]; ++i)
            buckets_[i + res_.nx * (j + res_.ny * k)].push_back(static_cast<std::uint32_t>(c));
    }
  }

  const BucketResolution& resolution() const { return res_; }
  std::size_t bucket_count() const { return buckets_.size(); }
  const std::vector<std::uint32_t>& bucket(std::size_t b) const { return buckets_[b]; }

  /// Candidate cells for p (empty when p lies outside the padded bounds).
  const std::vector<std::uint32_t>& candidates(const Vec3& p) const {
    static const std::vector<std::uint32_t> kNone;
    for (std::size_t d = 0; d < 3; ++d) {
      if (!(p[d] >= bounds_.lo[d] - pad_ && p[d] <= bounds_.hi[d] + pad_)) return kNone;
    }
    const auto c = bucket_coords(p);
    return buckets_[c[0] + res_.nx * (c[1] + res_.ny * c[2])];
  }

  double average_candidates() const {
    std::size_t total = 0;
    for (const auto& b : buckets_) total += b.size();
    return static_cast<double>(total) / static_cast<double>(buckets_.size());
  }

 private:
  std::array<std::size_t, 3> bucket_coords(const Vec3& p) const {
    const std::array<std::size_t, 3> n{res_.nx, res_.ny, res_.nz};
    std::array<std::size_t, 3> out{};
    for (std::size_t d = 0; d < 3; ++d) {
      const double ext = bounds_.hi[d] - bounds_.lo[d];
      double f = ext > 0 ? (p[d] - bounds_.lo[d]) / ext * static_cast<double>(n[d]) : 0.0;
      f = std::clamp(f, 0.0, static_cast<double>(n[d] - 1));
      out[d] = static_cast<std::size_t>(f);
    }
    return out;
  }

  BucketResolution res_;
  Box bounds_;
  double pad_ = 0.0;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

inline constexpr std::size_t kDefaultCellsPerBucket = 8;

inline CellLocator build_locator(const TetMesh& mesh, BucketResolution res) { return CellLocator(mesh, res); }

/// Chooses a bucket resolution proportional to the bounding box aspect so the
/// bucket count is about cells / target_cells_per_bucket.
inline CellLocator build_locator(const TetMesh& mesh, std::size_t target_cells_per_bucket = kDefaultCellsPerBucket) {
  if (target_cells_per_bucket == 0) {
    throw Error(ErrorCode::invalid_argument, "target cells per bucket must be positive");
  }
  const double wanted = std::max(1.0, static_cast<double>(mesh.cell_count()) /
                                          static_cast<double>(target_cells_per_bucket));
  const Vec3 ext = mesh.bounds().extent();
  const double span = std::max({ext.x, ext.y, ext.z});
  // Flat axes get unit extent relative to the box so the volume stays positive.
  Vec3 e;
  for (std::size_t d = 0; d < 3; ++d) e[d] = ext[d] > 1e-12 * span ? ext[d] : span;
  const double scale = std::cbrt(wanted / (e.x * e.y * e.z));
  auto axis_res = [&](double len) {
    return static_cast<std::size_t>(std::max(1.0, std::round(len * scale)));
  };
  return CellLocator(mesh, {axis_res(e.x), axis_res(e.y), axis_res(e.z)});
}

inline std::optional<std::size_t> locate_point(const CellLocator& locator, const TetMesh& mesh, const Vec3& p) {
  for (std::uint32_t c : locator.candidates(p)) {
    if (weights_inside(barycentric_weights(mesh, c, p))) return c;
  }
  return std::nullopt;
}

inline std::optional<double> sample_ucd_scalar(const TetMesh& mesh, const std::string& name, const Vec3& p,
                                               const CellLocator& locator) {
  const auto* values = mesh.scalar(name);
  if (!values) throw Error(ErrorCode::unknown_field, "unknown mesh attribute '" + name + "'");
  auto cell = locate_point(locator, mesh, p);
  if (!cell) return std::nullopt;
  const auto w = barycentric_weights(mesh, *cell, p);
  double v = 0.0;
  for (std::size_t c = 0; c < 4; ++c) v += w[c] * (*values)[mesh.cells()[*cell][c]];
  return v;
}

inline std::optional<Vec3> sample_ucd_vector(const TetMesh& mesh, const std::string& name, const Vec3& p,
                                             const CellLocator& locator) {
  const auto* values = mesh.vector(name);
  if (!values) throw Error(ErrorCode::unknown_field, "unknown mesh attribute '" + name + "'");
  auto cell = locate_point(locator, mesh, p);
  if (!cell) return std::nullopt;
  const auto w = barycentric_weights(mesh, *cell, p);
  Vec3 v;
  for (std::size_t c = 0; c < 4; ++c) v += w[c] * (*values)[mesh.cells()[*cell][c]];
  return v;
}

/// Box [0,1]^3 split into n^3 hexahedra, six tetrahedra each (Kuhn split),
/// interior vertices jittered by up to jitter * spacing and cell order shuffled.
inline TetMesh make_box_mesh(std::size_t n, double jitter = 0.0, std::uint64_t seed = 0) {
  if (n == 0) throw Error(ErrorCode::invalid_argument, "box mesh needs at least one hexahedron per axis");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t nv = n + 1;
  const double h = 1.0 / static_cast<double>(n);
  std::vector<Vec3> verts(nv * nv * nv);
  auto vid = [nv](std::size_t i, std::size_t j, std::size_t k) {
    return static_cast<std::uint32_t>(i + nv * (j + nv * k));
  };
  for (std::size_t k = 0; k < nv; ++k)
    for (std::size_t j = 0; j < nv; ++j)
      for (std::size_t i = 0; i < nv; ++i) {
        Vec3 p{static_cast<double>(i) * h, static_cast<double>(j) * h, static_cast<double>(k) * h};
        const std::array<std::size_t, 3> idx{i, j, k};
        for (std::size_t d = 0; d < 3; ++d) {
          const double r = u(rng);
          if (idx[d] > 0 && idx[d] < n) p[d] += jitter * h * r;
        }
        verts[vid(i, j, k)] = p;
      }
  // Kuhn triangulation: one tet per permutation of the axes.
  static constexpr std::array<std::array<int, 3>, 6> kPerms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::vector<Tet> cells;
  cells.reserve(6 * n * n * n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        for (const auto& perm : kPerms) {
          std::array<std::size_t, 3> c{i, j, k};
          Tet t{};
          t[0] = vid(c[0], c[1], c[2]);
          for (std::size_t s = 0; s < 3; ++s) {
            ++c[static_cast<std::size_t>(perm[s])];
            t[s + 1] = vid(c[0], c[1], c[2]);
          }
          cells.push_back(t);
        }
  std::shuffle(cells.begin(), cells.end(), rng);
  return TetMesh(std::move(verts), std::move(cells));
}

}  // namespace fieldscope
