#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fieldscope/error.hpp"
#include "fieldscope/vec3.hpp"

namespace fieldscope {

/// Strictly increasing coordinate list along one grid direction.
class Axis {
 public:
  explicit Axis(std::vector<double> coords) : coords_(std::move(coords)) {
    if (coords_.size() < 2) {
      throw Error(ErrorCode::invalid_argument, "axis needs at least 2 coordinates");
    }
    for (std::size_t i = 0; i < coords_.size(); ++i) {
      if (!std::isfinite(coords_[i])) {
        throw Error(ErrorCode::non_finite, "axis coordinate " + std::to_string(i) + " is not finite");
      }
      if (i > 0 && !(coords_[i - 1] < coords_[i])) {
        throw Error(ErrorCode::invalid_argument,
                    "axis coordinates must be strictly increasing (index " + std::to_string(i) + ")");
      }
    }
  }

  /// Evenly spaced axis with n nodes over [lo, hi].
  static Axis uniform(double lo, double hi, std::size_t n) {
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) {
      c[i] = (i + 1 == n) ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return Axis(std::move(c));
  }

  std::size_t size() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  double front() const { return coords_.front(); }
  double back() const { return coords_.back(); }
  const std::vector<double>& coords() const { return coords_; }

  /// Interval index containing v, or nullopt when v is outside [front, back].
  /// A value on an interior node belongs to the interval on its right; the
  /// last node belongs to the last interval.
  std::optional<std::size_t> locate(double v) const {
    if (!(v >= coords_.front() && v <= coords_.back())) return std::nullopt;
    auto it = std::upper_bound(coords_.begin(), coords_.end(), v);
    auto i = static_cast<std::size_t>(it - coords_.begin());
    return std::min(i, coords_.size() - 1) - 1;
  }

  double min_spacing() const {
    double m = coords_[1] - coords_[0];
    for (std::size_t i = 2; i < coords_.size(); ++i) m = std::min(m, coords_[i] - coords_[i - 1]);
    return m;
  }

  friend bool operator==(const Axis&, const Axis&) = default;

 private:
  std::vector<double> coords_;
};

struct CellIndex {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

class RectGrid {
 public:
  RectGrid(Axis x, Axis y, Axis z) : axes_{std::move(x), std::move(y), std::move(z)} {}

  const Axis& axis(std::size_t d) const { return axes_[d]; }
  const Axis& x() const { return axes_[0]; }
  const Axis& y() const { return axes_[1]; }
  const Axis& z() const { return axes_[2]; }

  std::size_t nx() const { return axes_[0].size(); }
  std::size_t ny() const { return axes_[1].size(); }
  std::size_t nz() const { return axes_[2].size(); }
  std::size_t node_count() const { return nx() * ny() * nz(); }

  /// x-fastest linear node index.
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + nx() * (j + ny() * k); }

  Vec3 node(std::size_t i, std::size_t j, std::size_t k) const { return {x()[i], y()[j], z()[k]}; }

  double min_cell_edge() const {
    return std::min({axes_[0].min_spacing(), axes_[1].min_spacing(), axes_[2].min_spacing()});
  }

  friend bool operator==(const RectGrid&, const RectGrid&) = default;

 private:
  std::array<Axis, 3> axes_;
};

inline Box grid_bounds(const RectGrid& grid) {
  return {{grid.x().front(), grid.y().front(), grid.z().front()},
          {grid.x().back(), grid.y().back(), grid.z().back()}};
}

inline std::optional<CellIndex> locate_cell(const RectGrid& grid, const Vec3& p) {
  auto i = grid.x().locate(p.x);
  auto j = grid.y().locate(p.y);
  auto k = grid.z().locate(p.z);
  if (!i || !j || !k) return std::nullopt;
  return CellIndex{*i, *j, *k};
}

/// Trilinear stencil: 8 node indices (x-fastest corner order) and their weights.
struct TrilinearStencil {
  std::array<std::size_t, 8> nodes{};
  std::array<double, 8> weights{};
};

inline std::optional<TrilinearStencil> trilinear_stencil(const RectGrid& grid, const Vec3& p) {
  auto cell = locate_cell(grid, p);
  if (!cell) return std::nullopt;
  const auto [i, j, k] = *cell;
  const double tx = (p.x - grid.x()[i]) / (grid.x()[i + 1] - grid.x()[i]);
  const double ty = (p.y - grid.y()[j]) / (grid.y()[j + 1] - grid.y()[j]);
  const double tz = (p.z - grid.z()[k]) / (grid.z()[k + 1] - grid.z()[k]);
  const std::array<double, 2> wx{1.0 - tx, tx};
  const std::array<double, 2> wy{1.0 - ty, ty};
  const std::array<double, 2> wz{1.0 - tz, tz};
  TrilinearStencil s;
  for (std::size_t c = 0; c < 8; ++c) {
    const std::size_t di = c & 1u, dj = (c >> 1) & 1u, dk = (c >> 2) & 1u;
    s.nodes[c] = grid.index(i + di, j + dj, k + dk);
    s.weights[c] = wx[di] * wy[dj] * wz[dk];
  }
  return s;
}

inline void check_finite_values(const std::vector<double>& values, const std::string& name) {
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (!std::isfinite(values[n])) {
      throw Error(ErrorCode::non_finite, "field '" + name + "' has a non-finite value at index " + std::to_string(n));
    }
  }
}

class ScalarField {
 public:
  ScalarField(std::shared_ptr<const RectGrid> grid, std::vector<double> values, std::string name)
      : grid_(std::move(grid)), values_(std::move(values)), name_(std::move(name)) {
    if (values_.size() != grid_->node_count()) {
      throw Error(ErrorCode::size_mismatch, "field '" + name_ + "' has " + std::to_string(values_.size()) +
                                                " values, grid has " + std::to_string(grid_->node_count()) +
                                                " nodes");
    }
    check_finite_values(values_, name_);
  }

  const RectGrid& grid() const { return *grid_; }
  const std::shared_ptr<const RectGrid>& grid_ptr() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  const std::string& name() const { return name_; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return values_[grid_->index(i, j, k)]; }

  std::pair<double, double> range() const {
    auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
    return {*lo, *hi};
  }

 private:
  std::shared_ptr<const RectGrid> grid_;
  std::vector<double> values_;
  std::string name_;
};

class VectorField {
 public:
  VectorField(std::shared_ptr<const RectGrid> grid, std::array<std::vector<double>, 3> components, std::string name)
      : grid_(std::move(grid)), comps_(std::move(components)), name_(std::move(name)) {
    for (std::size_t d = 0; d < 3; ++d) {
      const std::string cname = name_ + "[" + std::to_string(d) + "]";
      if (comps_[d].size() != grid_->node_count()) {
        throw Error(ErrorCode::size_mismatch, "field '" + cname + "' has " + std::to_string(comps_[d].size()) +
                                                  " values, grid has " + std::to_string(grid_->node_count()) +
                                                  " nodes");
      }
      check_finite_values(comps_[d], cname);
    }
  }

  const RectGrid& grid() const { return *grid_; }
  const std::shared_ptr<const RectGrid>& grid_ptr() const { return grid_; }
  const std::vector<double>& component(std::size_t d) const { return comps_[d]; }
  const std::string& name() const { return name_; }
  Vec3 at(std::size_t n) const { return {comps_[0][n], comps_[1][n], comps_[2][n]}; }

  /// Root mean square of the node magnitudes.
  double rms_magnitude() const {
    double acc = 0.0;
    for (std::size_t n = 0; n < grid_->node_count(); ++n) acc += dot(at(n), at(n));
    return std::sqrt(acc / static_cast<double>(grid_->node_count()));
  }

 private:
  std::shared_ptr<const RectGrid> grid_;
  std::array<std::vector<double>, 3> comps_;
  std::string name_;
};

inline std::optional<double> sample_scalar(const ScalarField& field, const Vec3& p) {
  auto s = trilinear_stencil(field.grid(), p);
  if (!s) return std::nullopt;
  double v = 0.0;
  for (std::size_t c = 0; c < 8; ++c) v += s->weights[c] * field.values()[s->nodes[c]];
  return v;
}

inline std::optional<Vec3> sample_vector(const VectorField& field, const Vec3& p) {
  auto s = trilinear_stencil(field.grid(), p);
  if (!s) return std::nullopt;
  Vec3 v;
  for (std::size_t c = 0; c < 8; ++c) v += s->weights[c] * field.at(s->nodes[c]);
  return v;
}

/// Builds a scalar field by evaluating f at every grid node.
template <typename F>
ScalarField make_scalar_field(std::shared_ptr<const RectGrid> grid, std::string name, F&& f) {
  std::vector<double> values(grid->node_count());
  for (std::size_t k = 0; k < grid->nz(); ++k)
    for (std::size_t j = 0; j < grid->ny(); ++j)
      for (std::size_t i = 0; i < grid->nx(); ++i) values[grid->index(i, j, k)] = f(grid->node(i, j, k));
  return ScalarField(std::move(grid), std::move(values), std::move(name));
}

template <typename F>
VectorField make_vector_field(std::shared_ptr<const RectGrid> grid, std::string name, F&& f) {
  std::array<std::vector<double>, 3> comps;
  for (auto& c : comps) c.resize(grid->node_count());
  for (std::size_t k = 0; k < grid->nz(); ++k)
    for (std::size_t j = 0; j < grid->ny(); ++j)
      for (std::size_t i = 0; i < grid->nx(); ++i) {
        const Vec3 v = f(grid->node(i, j, k));
        const std::size_t n = grid->index(i, j, k);
        comps[0][n] = v.x;
        comps[1][n] = v.y;
        comps[2][n] = v.z;
      }
  return VectorField(std::move(grid), std::move(comps), std::move(name));
}

}  // namespace fieldscope
