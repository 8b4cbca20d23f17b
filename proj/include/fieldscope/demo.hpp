#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fieldscope/error.hpp"
#include "fieldscope/grid.hpp"
#include "fieldscope/ingest.hpp"

namespace fieldscope {

/// Writes a small synthetic time-varying dataset on [-1, 1]^3 and returns the
/// manifest path. Fields per step s (time 0.25 s):
///   phi = x^2 + y^2 + z^2, a radial scalar;
///   B   = (-y, x, 0.5) (1 + 0.1 s), a helical magnetic field;
///   u   = (x, -y, 0), a straining flow;
///   E   = (0, 0.05, 0), a uniform electric field.
inline std::filesystem::path write_demo_dataset(const std::filesystem::path& dir, std::size_t n = 24,
                                                std::size_t steps = 5) {
  if (n < 2 || steps < 1) throw Error(ErrorCode::invalid_argument, "demo dataset needs n >= 2 and steps >= 1");
  std::filesystem::create_directories(dir);
  const Axis axis = Axis::uniform(-1.0, 1.0, n);
  auto grid = std::make_shared<const RectGrid>(axis, axis, axis);
  const std::vector<double> coords = axis.coords();

  auto write_scalar = [&](const std::string& file, const ScalarField& f) {
    write_raw_f32(dir / file, f.values());
    return file;
  };
  auto write_vector = [&](const std::string& stem, const VectorField& f) {
    std::vector<std::string> files;
    for (std::size_t c = 0; c < 3; ++c) {
      files.push_back(stem + "_" + "xyz"[c] + ".f32");
      write_raw_f32(dir / files.back(), f.component(c));
    }
    return files;
  };

  nlohmann::json manifest;
  manifest["name"] = "demo";
  manifest["grid"] = {{"kind", "rectilinear"}, {"axes", {{"x", coords}, {"y", coords}, {"z", coords}}}};
  manifest["fields"] = nlohmann::json::array(
      {{{"name", "phi"},
        {"kind", "scalar"},
        {"path", write_scalar("phi.f32", make_scalar_field(grid, "phi", [](const Vec3& p) { return dot(p, p); }))}},
       {{"name", "u"},
        {"kind", "vector"},
        {"paths", write_vector("u", make_vector_field(grid, "u", [](const Vec3& p) { return Vec3{p.x, -p.y, 0.0}; }))}},
       {{"name", "E"},
        {"kind", "vector"},
        {"paths", write_vector("E", make_vector_field(grid, "E", [](const Vec3&) { return Vec3{0.0, 0.05, 0.0}; }))}}});
  auto step_list = nlohmann::json::array();
  for (std::size_t s = 0; s < steps; ++s) {
    const double scale = 1.0 + 0.1 * static_cast<double>(s);
    const auto b = make_vector_field(grid, "B", [scale](const Vec3& p) { return Vec3{-p.y, p.x, 0.5} * scale; });
    step_list.push_back({{"time", 0.25 * static_cast<double>(s)},
                         {"fields", {{{"name", "B"}, {"kind", "vector"}, {"paths", write_vector("B" + std::to_string(s), b)}}}}});
  }
  manifest["steps"] = std::move(step_list);
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << manifest.dump(2) << '\n';
  return path;
}

}  // namespace fieldscope
