#pragma once

#include <cstddef>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fieldscope/error.hpp"
#include "fieldscope/grid.hpp"
#include "fieldscope/ucd.hpp"
#include "fieldscope/vec3.hpp"

namespace fieldscope {

using ScalarSampler = std::function<std::optional<double>(const Vec3&)>;
using VectorSampler = std::function<std::optional<Vec3>(const Vec3&)>;

/// Named scalar and vector fields sharing one domain: a rectilinear grid or a
/// tetrahedral mesh (whose attributes are the fields).
class Dataset {
 public:
  explicit Dataset(std::shared_ptr<const RectGrid> grid, double time = 0.0) : grid_(std::move(grid)), time_(time) {}

  Dataset(std::shared_ptr<const TetMesh> mesh, double time = 0.0)
      : mesh_(std::move(mesh)), locator_(std::make_shared<CellLocator>(build_locator(*mesh_))), time_(time) {}

  bool is_rectilinear() const { return grid_ != nullptr; }
  double time() const { return time_; }

  const std::shared_ptr<const RectGrid>& grid() const { return grid_; }
  const std::shared_ptr<const TetMesh>& mesh() const { return mesh_; }

  void add_scalar(ScalarField field) {
    require_rectilinear();
    if (*field.grid_ptr() != *grid_) {
      throw Error(ErrorCode::invalid_argument, "field '" + field.name() + "' is not on the dataset grid");
    }
    check_new_name(field.name());
    auto name = field.name();
    scalars_.emplace(std::move(name), std::move(field));
  }

  void add_vector(VectorField field) {
    require_rectilinear();
    if (*field.grid_ptr() != *grid_) {
      throw Error(ErrorCode::invalid_argument, "field '" + field.name() + "' is not on the dataset grid");
    }
    check_new_name(field.name());
    auto name = field.name();
    vectors_.emplace(std::move(name), std::move(field));
  }

  bool has_scalar(const std::string& name) const {
    return grid_ ? scalars_.count(name) > 0 : mesh_->scalar(name) != nullptr;
  }
  bool has_vector(const std::string& name) const {
    return grid_ ? vectors_.count(name) > 0 : mesh_->vector(name) != nullptr;
  }

  std::vector<std::string> scalar_names() const {
    std::vector<std::string> out;
    if (grid_) {
      for (const auto& [n, f] : scalars_) out.push_back(n);
    } else {
      for (const auto& [n, f] : mesh_->scalars()) out.push_back(n);
    }
    return out;
  }
  std::vector<std::string> vector_names() const {
    std::vector<std::string> out;
    if (grid_) {
      for (const auto& [n, f] : vectors_) out.push_back(n);
    } else {
      for (const auto& [n, f] : mesh_->vectors()) out.push_back(n);
    }
    return out;
  }

  const ScalarField& scalar(const std::string& name) const {
    require_rectilinear();
    auto it = scalars_.find(name);
    if (it == scalars_.end()) throw Error(ErrorCode::unknown_field, "unknown scalar field '" + name + "'");
    return it->second;
  }
  const VectorField& vector(const std::string& name) const {
    require_rectilinear();
    auto it = vectors_.find(name);
    if (it == vectors_.end()) throw Error(ErrorCode::unknown_field, "unknown vector field '" + name + "'");
    return it->second;
  }

  ScalarSampler scalar_sampler(const std::string& name) const {
    if (!has_scalar(name)) throw Error(ErrorCode::unknown_field, "unknown scalar field '" + name + "'");
    if (grid_) {
      const ScalarField* f = &scalars_.at(name);
      return [f](const Vec3& p) { return sample_scalar(*f, p); };
    }
    return [mesh = mesh_, loc = locator_, name](const Vec3& p) { return sample_ucd_scalar(*mesh, name, p, *loc); };
  }

  VectorSampler vector_sampler(const std::string& name) const {
    if (!has_vector(name)) throw Error(ErrorCode::unknown_field, "unknown vector field '" + name + "'");
    if (grid_) {
      const VectorField* f = &vectors_.at(name);
      return [f](const Vec3& p) { return sample_vector(*f, p); };
    }
    return [mesh = mesh_, loc = locator_, name](const Vec3& p) { return sample_ucd_vector(*mesh, name, p, *loc); };
  }

  Box bounds() const { return grid_ ? grid_bounds(*grid_) : mesh_->bounds(); }

  /// Smallest grid spacing, or the smallest tetrahedron edge on a mesh.
  double min_cell_edge() const {
    if (grid_) return grid_->min_cell_edge();
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < mesh_->cell_count(); ++c)
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = a + 1; b < 4; ++b) m = std::min(m, distance(mesh_->vertex(c, a), mesh_->vertex(c, b)));
    return m;
  }

  /// RMS of node magnitudes of a vector field.
  double rms_magnitude(const std::string& name) const {
    if (grid_) return vector(name).rms_magnitude();
    const auto* v = mesh_->vector(name);
    if (!v) throw Error(ErrorCode::unknown_field, "unknown vector field '" + name + "'");
    double acc = 0.0;
    for (const auto& x : *v) acc += dot(x, x);
    return std::sqrt(acc / static_cast<double>(v->size()));
  }

 private:
  void require_rectilinear() const {
    if (!grid_) throw Error(ErrorCode::unsupported, "operation requires a rectilinear grid dataset");
  }
  void check_new_name(const std::string& name) const {
    if (scalars_.count(name) || vectors_.count(name)) {
      throw Error(ErrorCode::duplicate_name, "duplicate field name '" + name + "'");
    }
  }

  std::shared_ptr<const RectGrid> grid_;
  std::shared_ptr<const TetMesh> mesh_;
  std::shared_ptr<const CellLocator> locator_;
  std::map<std::string, ScalarField> scalars_;
  std::map<std::string, VectorField> vectors_;
  double time_ = 0.0;
};

/// Ordered snapshots of a dataset. A single dataset is a one-element source.
class FieldSource {
 public:
  virtual ~FieldSource() = default;
  virtual std::string name() const = 0;
  virtual std::size_t size() const = 0;
  virtual double time(std::size_t index) const = 0;
  virtual std::shared_ptr<const Dataset> snapshot(std::size_t index) const = 0;
};

/// In-memory time series; times strictly increasing.
class FieldSequence : public FieldSource {
 public:
  explicit FieldSequence(std::string name) : name_(std::move(name)) {}

  FieldSequence(std::string name, std::shared_ptr<const Dataset> single) : name_(std::move(name)) {
    push_back(std::move(single));
  }

  void push_back(std::shared_ptr<const Dataset> snapshot) {
    if (!snapshots_.empty()) {
      if (!(snapshot->time() > snapshots_.back()->time())) {
        throw Error(ErrorCode::invalid_argument, "snapshot times must be strictly increasing");
      }
      const auto& first = *snapshots_.front();
      const bool same_domain = first.is_rectilinear()
                                   ? (snapshot->is_rectilinear() && *snapshot->grid() == *first.grid())
                                   : (snapshot->mesh() == first.mesh());
      if (!same_domain) throw Error(ErrorCode::invalid_argument, "all snapshots must share one grid");
    }
    snapshots_.push_back(std::move(snapshot));
  }

  std::string name() const override { return name_; }
  std::size_t size() const override { return snapshots_.size(); }
  double time(std::size_t index) const override { return at(index)->time(); }
  std::shared_ptr<const Dataset> snapshot(std::size_t index) const override { return at(index); }

 private:
  const std::shared_ptr<const Dataset>& at(std::size_t index) const {
    if (index >= snapshots_.size()) {
      throw Error(ErrorCode::invalid_argument, "time step " + std::to_string(index) + " out of range [0, " +
                                                   std::to_string(snapshots_.size()) + ")");
    }
    return snapshots_[index];
  }

  std::string name_;
  std::vector<std::shared_ptr<const Dataset>> snapshots_;
};

}  // namespace fieldscope
