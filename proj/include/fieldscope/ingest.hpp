#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fieldscope/dataset.hpp"
#include "fieldscope/error.hpp"
#include "fieldscope/grid.hpp"
#include "fieldscope/ucd.hpp"

namespace fieldscope {

namespace fs = std::filesystem;

// -- raw volumes ------------------------------------------------------------

/// Reads a headerless little-endian float32 file of exactly `count` values.
/// Non-finite values are rejected with their byte offset.
inline std::vector<double> read_raw_f32(const fs::path& path, std::size_t count) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot stat " + path.string() + ": " + ec.message());
  if (size != count * 4) {
    throw Error(ErrorCode::size_mismatch, path.string() + ": expected " + std::to_string(count * 4) + " bytes (" +
                                              std::to_string(count) + " float32 values), found " +
                                              std::to_string(size));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::vector<unsigned char> buf(count * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw Error(ErrorCode::io_error, "short read on " + path.string());
  std::vector<double> out(count);
  for (std::size_t n = 0; n < count; ++n) {
    const unsigned char* b = &buf[n * 4];
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) {
      throw Error(ErrorCode::non_finite, path.string() + ": non-finite value at byte offset " + std::to_string(n * 4));
    }
    out[n] = static_cast<double>(f);
  }
  return out;
}

inline void write_raw_f32(const fs::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!out) throw Error(ErrorCode::io_error, "failed writing " + path.string());
}

// -- UCD mesh files -----------------------------------------------------------

/// Text mesh: "ucd 1", then "<vertices> <cells>", vertex lines "x y z", cell lines "v0 v1 v2 v3".
inline TetMesh read_ucd_mesh(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open mesh file " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (!in || magic != "ucd" || version != 1) {
    throw Error(ErrorCode::parse_error, path.string() + ": expected header 'ucd 1'");
  }
  std::size_t nv = 0, nc = 0;
  in >> nv >> nc;
  if (!in) throw Error(ErrorCode::parse_error, path.string() + ": missing vertex/cell counts");
  std::vector<Vec3> verts(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    in >> verts[i].x >> verts[i].y >> verts[i].z;
    if (!in) throw Error(ErrorCode::parse_error, path.string() + ": bad vertex line " + std::to_string(i));
  }
  std::vector<Tet> cells(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    in >> cells[i][0] >> cells[i][1] >> cells[i][2] >> cells[i][3];
    if (!in) throw Error(ErrorCode::parse_error, path.string() + ": bad cell line " + std::to_string(i));
  }
  return TetMesh(std::move(verts), std::move(cells));
}

inline void write_ucd_mesh(const fs::path& path, const TetMesh& mesh) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << "ucd 1\n" << mesh.vertices().size() << ' ' << mesh.cell_count() << '\n';
  out.precision(17);
  for (const auto& v : mesh.vertices()) out << v.x << ' ' << v.y << ' ' << v.z << '\n';
  for (const auto& c : mesh.cells()) out << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << c[3] << '\n';
}

// -- manifests ----------------------------------------------------------------

enum class FieldKind { scalar, vector };

struct FieldEntry {
  std::string name;
  FieldKind kind = FieldKind::scalar;
  std::vector<fs::path> paths;  // 1 for scalars, 3 for vectors
};

struct StepEntry {
  double time = 0.0;
  std::vector<FieldEntry> fields;
};

/// Parsed dataset manifest. Paths are resolved against the manifest directory.
struct Manifest {
  std::string name;
  bool rectilinear = true;
  std::array<std::vector<double>, 3> axes;
  fs::path mesh_path;
  std::vector<FieldEntry> fields;  // present in every step
  std::vector<StepEntry> steps;    // empty: single snapshot at time 0
};

namespace detail {

inline FieldEntry field_entry_from(const nlohmann::json& j, const fs::path& base) {
  FieldEntry f;
  f.name = j.at("name").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "scalar") {
    f.kind = FieldKind::scalar;
    f.paths.push_back(base / j.at("path").get<std::string>());
  } else if (kind == "vector") {
    f.kind = FieldKind::vector;
    const auto paths = j.at("paths").get<std::vector<std::string>>();
    if (paths.size() != 3) throw Error(ErrorCode::parse_error, "vector field '" + f.name + "' needs 3 component paths");
    for (const auto& p : paths) f.paths.push_back(base / p);
  } else {
    throw Error(ErrorCode::parse_error, "field '" + f.name + "' has unknown kind '" + kind + "'");
  }
  return f;
}

}  // namespace detail

inline Manifest parse_manifest(const nlohmann::json& j, const fs::path& base) {
  Manifest m;
  try {
    m.name = j.at("name").get<std::string>();
    const auto& grid = j.at("grid");
    const auto kind = grid.at("kind").get<std::string>();
    if (kind == "rectilinear") {
      const auto& axes = grid.at("axes");
      m.axes[0] = axes.at("x").get<std::vector<double>>();
      m.axes[1] = axes.at("y").get<std::vector<double>>();
      m.axes[2] = axes.at("z").get<std::vector<double>>();
    } else if (kind == "ucd") {
      m.rectilinear = false;
      m.mesh_path = base / grid.at("mesh").get<std::string>();
    } else {
      throw Error(ErrorCode::parse_error, "unknown grid kind '" + kind + "'");
    }
    if (j.contains("fields")) {
      for (const auto& f : j.at("fields")) m.fields.push_back(detail::field_entry_from(f, base));
    }
    if (j.contains("steps")) {
      for (const auto& s : j.at("steps")) {
        StepEntry step;
        step.time = s.at("time").get<double>();
        if (s.contains("fields")) {
          for (const auto& f : s.at("fields")) step.fields.push_back(detail::field_entry_from(f, base));
        }
        m.steps.push_back(std::move(step));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed manifest: ") + e.what());
  }
  for (std::size_t i = 1; i < m.steps.size(); ++i) {
    if (!(m.steps[i].time > m.steps[i - 1].time)) {
      throw Error(ErrorCode::invalid_argument, "manifest step times must be strictly increasing (step " +
                                                   std::to_string(i) + ")");
    }
  }
  return m;
}

inline Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, "manifest " + path.string() + " is not valid: " + e.what());
  }
  return parse_manifest(j, path.parent_path());
}

/// Field source backed by a manifest. Domain and file sizes are validated up
/// front; snapshot values are read when first requested and kept in a small
/// least-recently-used cache.
class ManifestSource : public FieldSource {
 public:
  explicit ManifestSource(Manifest manifest, std::size_t cache_capacity = 4)
      : manifest_(std::move(manifest)), capacity_(std::max<std::size_t>(1, cache_capacity)) {
    if (manifest_.rectilinear) {
      grid_ = std::make_shared<const RectGrid>(Axis(manifest_.axes[0]), Axis(manifest_.axes[1]),
                                               Axis(manifest_.axes[2]));
      node_count_ = grid_->node_count();
    } else {
      mesh_ = std::make_shared<TetMesh>(read_ucd_mesh(manifest_.mesh_path));
      node_count_ = mesh_->vertices().size();
    }
    const std::size_t steps = std::max<std::size_t>(1, manifest_.steps.size());
    for (std::size_t s = 0; s < steps; ++s) {
      std::set<std::string> names;
      for (const auto* f : step_fields(s)) {
        if (!names.insert(f->name).second) {
          throw Error(ErrorCode::duplicate_name, "duplicate field name '" + f->name + "' in step " + std::to_string(s));
        }
        for (const auto& p : f->paths) {
          std::error_code ec;
          const auto size = fs::file_size(p, ec);
          if (ec) throw Error(ErrorCode::io_error, "cannot stat " + p.string() + ": " + ec.message());
          if (size != node_count_ * 4) {
            throw Error(ErrorCode::size_mismatch, p.string() + ": expected " + std::to_string(node_count_ * 4) +
                                                      " bytes (" + std::to_string(node_count_) +
                                                      " float32 values), found " + std::to_string(size));
          }
        }
      }
    }
    if (!manifest_.rectilinear) {
      // Mesh attributes are static across steps, so they are loaded once.
      if (!manifest_.steps.empty()) {
        for (const auto& s : manifest_.steps) {
          if (!s.fields.empty()) throw Error(ErrorCode::unsupported, "time-varying UCD attributes are not supported");
        }
      }
      for (const auto& f : manifest_.fields) {
        if (f.kind == FieldKind::scalar) {
          mesh_->add_scalar(f.name, read_raw_f32(f.paths[0], node_count_));
        } else {
          mesh_->add_vector(f.name, {read_raw_f32(f.paths[0], node_count_), read_raw_f32(f.paths[1], node_count_),
                                     read_raw_f32(f.paths[2], node_count_)});
        }
      }
    }
  }

  std::string name() const override { return manifest_.name; }
  std::size_t size() const override { return std::max<std::size_t>(1, manifest_.steps.size()); }
  double time(std::size_t index) const override {
    check(index);
    return manifest_.steps.empty() ? 0.0 : manifest_.steps[index].time;
  }

  std::shared_ptr<const Dataset> snapshot(std::size_t index) const override {
    check(index);
    std::lock_guard lock(mutex_);
    for (auto it = lru_.begin(); it != lru_.end(); ++it) {
      if (it->first == index) {
        lru_.splice(lru_.begin(), lru_, it);
        return it->second;
      }
    }
    auto d = load(index);
    lru_.emplace_front(index, d);
    if (lru_.size() > capacity_) lru_.pop_back();
    ++loads_;
    return d;
  }

  /// Number of snapshot reads from disk so far.
  std::size_t load_count() const {
    std::lock_guard lock(mutex_);
    return loads_;
  }

  const Manifest& manifest() const { return manifest_; }

 private:
  void check(std::size_t index) const {
    if (index >= size()) {
      throw Error(ErrorCode::invalid_argument, "time step " + std::to_string(index) + " out of range [0, " +
                                                   std::to_string(size()) + ")");
    }
  }

  std::vector<const FieldEntry*> step_fields(std::size_t s) const {
    std::vector<const FieldEntry*> out;
    for (const auto& f : manifest_.fields) out.push_back(&f);
    if (!manifest_.steps.empty()) {
      for (const auto& f : manifest_.steps[s].fields) out.push_back(&f);
    }
    return out;
  }

  std::shared_ptr<const Dataset> load(std::size_t index) const {
    const double t = time(index);
    if (!manifest_.rectilinear) return std::make_shared<const Dataset>(std::shared_ptr<const TetMesh>(mesh_), t);
    auto d = std::make_shared<Dataset>(grid_, t);
    for (const auto* f : step_fields(index)) {
      if (f->kind == FieldKind::scalar) {
        d->add_scalar(ScalarField(grid_, read_raw_f32(f->paths[0], node_count_), f->name));
      } else {
        d->add_vector(VectorField(grid_,
                                  {read_raw_f32(f->paths[0], node_count_), read_raw_f32(f->paths[1], node_count_),
                                   read_raw_f32(f->paths[2], node_count_)},
                                  f->name));
      }
    }
    return d;
  }

  Manifest manifest_;
  std::shared_ptr<const RectGrid> grid_;
  std::shared_ptr<TetMesh> mesh_;
  std::size_t node_count_ = 0;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  mutable std::list<std::pair<std::size_t, std::shared_ptr<const Dataset>>> lru_;
  mutable std::size_t loads_ = 0;
};

inline std::shared_ptr<const ManifestSource> load_dataset(const fs::path& manifest_path) {
  return std::make_shared<const ManifestSource>(read_manifest(manifest_path));
}

}  // namespace fieldscope
