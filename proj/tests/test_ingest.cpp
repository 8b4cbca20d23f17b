#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <limits>

#include "fieldscope/ingest.hpp"
#include "support.hpp"

using namespace fieldscope;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

void write_bytes(const fs::path& p, const std::vector<float>& v) {
  std::ofstream out(p, std::ios::binary);
  for (float f : v) {
    unsigned char b[4];
    std::memcpy(b, &f, 4);  // little-endian hosts only, like the reader's contract
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

nlohmann::json tiny_manifest() {
  return {{"name", "tiny"},
          {"grid", {{"kind", "rectilinear"}, {"axes", {{"x", {0.0, 1.0}}, {"y", {0.0, 1.0}}, {"z", {0.0, 0.5, 1.0}}}}}},
          {"fields", {{{"name", "s"}, {"kind", "scalar"}, {"path", "s.f32"}}}}};
}

}  // namespace

TEST(RawF32, RoundTripsFloatPrecision) {
  TempDir dir;
  const std::vector<double> v{0.0, -1.5, 3.25, 1e-3};
  write_raw_f32(dir.path() / "a.f32", v);
  EXPECT_EQ(fs::file_size(dir.path() / "a.f32"), 16u);
  const auto back = read_raw_f32(dir.path() / "a.f32", 4);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(v[i])));
}

TEST(RawF32, SizeMismatchNamesCounts) {
  TempDir dir;
  write_bytes(dir.path() / "a.f32", {1, 2, 3});
  try {
    read_raw_f32(dir.path() / "a.f32", 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::size_mismatch);
    EXPECT_NE(std::string(e.what()).find("expected 16 bytes"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("found 12"), std::string::npos);
  }
}

TEST(RawF32, NonFiniteReportsOffset) {
  TempDir dir;
  write_bytes(dir.path() / "a.f32", {1, 2, std::numeric_limits<float>::quiet_NaN(), 4});
  try {
    read_raw_f32(dir.path() / "a.f32", 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::non_finite);
    EXPECT_NE(std::string(e.what()).find("byte offset 8"), std::string::npos) << e.what();
  }
  write_bytes(dir.path() / "b.f32", {std::numeric_limits<float>::infinity()});
  EXPECT_THROW(read_raw_f32(dir.path() / "b.f32", 1), Error);
  EXPECT_THROW(read_raw_f32(dir.path() / "missing.f32", 1), Error);
}

TEST(Manifest, LoadsSingleSnapshot) {
  TempDir dir;
  std::vector<float> vals(12);
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(i);
  write_bytes(dir.path() / "s.f32", vals);
  write_json(dir.path() / "m.json", tiny_manifest());
  const auto src = load_dataset(dir.path() / "m.json");
  EXPECT_EQ(src->name(), "tiny");
  EXPECT_EQ(src->size(), 1u);
  EXPECT_EQ(src->time(0), 0.0);
  const auto snap = src->snapshot(0);
  // x-fastest node order: node (1, 1, 2) is 1 + 2 * 1 + 4 * 2 = 11.
  EXPECT_EQ(snap->scalar_sampler("s")(Vec3{1, 1, 1}).value(), 11.0);
  EXPECT_EQ(snap->scalar_sampler("s")(Vec3{0, 0, 0.25}).value(), 2.0);
  EXPECT_FALSE(snap->scalar_sampler("s")(Vec3{0, 0, 2}).has_value());
}

TEST(Manifest, ValidatesSizesUpFront) {
  TempDir dir;
  write_bytes(dir.path() / "s.f32", std::vector<float>(11, 0.0f));
  write_json(dir.path() / "m.json", tiny_manifest());
  try {
    load_dataset(dir.path() / "m.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::size_mismatch);
  }
}

TEST(Manifest, RejectsMalformed) {
  TempDir dir;
  write_bytes(dir.path() / "s.f32", std::vector<float>(12, 0.0f));
  auto m = tiny_manifest();
  m["grid"]["kind"] = "spherical";
  write_json(dir.path() / "a.json", m);
  EXPECT_THROW(load_dataset(dir.path() / "a.json"), Error);

  m = tiny_manifest();
  m["fields"].push_back({{"name", "s"}, {"kind", "scalar"}, {"path", "s.f32"}});
  write_json(dir.path() / "b.json", m);
  try {
    load_dataset(dir.path() / "b.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::duplicate_name);
  }

  m = tiny_manifest();
  m["grid"]["axes"]["z"] = {0.0, 1.0, 0.5};
  write_json(dir.path() / "c.json", m);
  EXPECT_THROW(load_dataset(dir.path() / "c.json"), Error);

  m = tiny_manifest();
  m["steps"] = {{{"time", 1.0}}, {{"time", 1.0}}};
  write_json(dir.path() / "d.json", m);
  EXPECT_THROW(load_dataset(dir.path() / "d.json"), Error);

  std::ofstream(dir.path() / "e.json") << "{ not json";
  try {
    load_dataset(dir.path() / "e.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
  }
}

TEST(Manifest, TimeSeriesLoadsLazilyWithLru) {
  TempDir dir;
  const auto manifest = write_demo_dataset(dir.path(), 6, 6);
  auto src = std::make_shared<ManifestSource>(read_manifest(manifest), 2);
  EXPECT_EQ(src->size(), 6u);
  EXPECT_EQ(src->time(3), 0.75);
  EXPECT_EQ(src->load_count(), 0u);
  const auto b0 = src->snapshot(0)->vector_sampler("B")(Vec3{0.2, 0.4, 0}).value();
  const auto b3 = src->snapshot(3)->vector_sampler("B")(Vec3{0.2, 0.4, 0}).value();
  EXPECT_NEAR(b3.z / b0.z, 1.3, 1e-6);
  EXPECT_EQ(src->load_count(), 2u);
  src->snapshot(0);
  EXPECT_EQ(src->load_count(), 2u);
  src->snapshot(5);  // evicts step 3
  src->snapshot(3);
  EXPECT_EQ(src->load_count(), 4u);
  // Static fields are present in every step.
  EXPECT_TRUE(src->snapshot(4)->has_scalar("phi"));
  EXPECT_THROW(src->snapshot(6), Error);
}

TEST(Manifest, UnstructuredMesh) {
  TempDir dir;
  // Unit cube split into 5 tets.
  std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
  std::vector<Tet> cells{{0, 1, 2, 4}, {1, 3, 2, 7}, {1, 5, 4, 7}, {2, 6, 4, 7}, {1, 2, 4, 7}};
  write_ucd_mesh(dir.path() / "cube.ucd", TetMesh(v, cells));
  std::vector<float> s, ux, uy, uz;
  for (const auto& p : v) {
    s.push_back(static_cast<float>(p.x + 2 * p.y + 3 * p.z));
    ux.push_back(1.0f);
    uy.push_back(static_cast<float>(p.z));
    uz.push_back(0.0f);
  }
  write_bytes(dir.path() / "s.f32", s);
  write_bytes(dir.path() / "ux.f32", ux);
  write_bytes(dir.path() / "uy.f32", uy);
  write_bytes(dir.path() / "uz.f32", uz);
  write_json(dir.path() / "m.json",
             {{"name", "cube"},
              {"grid", {{"kind", "ucd"}, {"mesh", "cube.ucd"}}},
              {"fields",
               {{{"name", "s"}, {"kind", "scalar"}, {"path", "s.f32"}},
                {{"name", "u"}, {"kind", "vector"}, {"paths", {"ux.f32", "uy.f32", "uz.f32"}}}}}});
  const auto src = load_dataset(dir.path() / "m.json");
  const auto snap = src->snapshot(0);
  EXPECT_FALSE(snap->is_rectilinear());
  // Linear fields are reproduced exactly by barycentric interpolation.
  EXPECT_NEAR(snap->scalar_sampler("s")(Vec3{0.3, 0.6, 0.2}).value(), 0.3 + 1.2 + 0.6, 1e-6);
  EXPECT_NEAR(snap->vector_sampler("u")(Vec3{0.3, 0.6, 0.2}).value().y, 0.2, 1e-6);
  EXPECT_FALSE(snap->scalar_sampler("s")(Vec3{1.5, 0.5, 0.5}).has_value());
}

TEST(UcdFile, RoundTripAndErrors) {
  TempDir dir;
  TetMesh mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{0, 1, 2, 3}});
  write_ucd_mesh(dir.path() / "t.ucd", mesh);
  const auto back = read_ucd_mesh(dir.path() / "t.ucd");
  EXPECT_EQ(back.vertices(), mesh.vertices());
  EXPECT_EQ(back.cells(), mesh.cells());
  std::ofstream(dir.path() / "bad.ucd") << "ucd 2\n";
  EXPECT_THROW(read_ucd_mesh(dir.path() / "bad.ucd"), Error);
  std::ofstream(dir.path() / "short.ucd") << "ucd 1\n4 1\n0 0 0\n";
  EXPECT_THROW(read_ucd_mesh(dir.path() / "short.ucd"), Error);
}
