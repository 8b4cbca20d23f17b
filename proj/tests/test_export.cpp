#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "fieldscope/export.hpp"
#include "support.hpp"

using namespace fieldscope;

namespace {

TriangleMesh one_triangle() {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 0.5, 0}};
  m.normals = {{0, 0, 1}, {0, 0, 1}, {0, 0, 1}};
  m.triangles = {{0, 1, 2}};
  return m;
}

PolylineSet two_lines() {
  Polyline a, b;
  a.points = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  b.points = {{0, 1, 0}, {0.123456789123, 1, 0}};
  return {{a, b}};
}

}  // namespace

TEST(Export, ObjMesh) {
  EXPECT_EQ(to_obj(one_triangle()),
            "# fieldscope mesh\n"
            "v 0 0 0\nv 1 0 0\nv 0 0.5 0\n"
            "f 1 2 3\n");
}

TEST(Export, ObjLines) {
  EXPECT_EQ(to_obj(two_lines()),
            "# fieldscope polylines\n"
            "v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nv 0.123456789 1 0\n"
            "l 1 2 3\nl 4 5\n");
}

TEST(Export, VtkMeshAndLines) {
  EXPECT_EQ(to_vtk(one_triangle()),
            "# vtk DataFile Version 3.0\nfieldscope mesh\nASCII\nDATASET POLYDATA\n"
            "POINTS 3 double\n0 0 0\n1 0 0\n0 0.5 0\n"
            "POLYGONS 1 4\n3 0 1 2\n");
  const auto vtk = to_vtk(two_lines());
  EXPECT_NE(vtk.find("POINTS 5 double\n"), std::string::npos);
  EXPECT_NE(vtk.find("LINES 2 7\n3 0 1 2\n2 3 4\n"), std::string::npos);
}

TEST(Export, GlyphsBecomeSegments) {
  GlyphSet g{{{{1, 1, 1}, {0, 0, 2}}}};
  EXPECT_EQ(to_obj(g), "# fieldscope glyphs\nv 1 1 1\nv 1 1 3\nl 1 2\n");
}

TEST(Export, FormatParsingAndFiles) {
  EXPECT_EQ(parse_export_format("obj"), ExportFormat::obj);
  EXPECT_EQ(parse_export_format("vtk"), ExportFormat::vtk);
  try {
    parse_export_format("stl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unsupported);
  }
  testsupport::TempDir dir;
  export_geometry(one_triangle(), ExportFormat::vtk, dir.path() / "m.vtk");
  std::ifstream in(dir.path() / "m.vtk");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), to_vtk(one_triangle()));
  EXPECT_THROW(export_geometry(one_triangle(), ExportFormat::obj, dir.path() / "no" / "dir.obj"), Error);
}

TEST(Export, ObjReparsesToNineDigits) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  TriangleMesh m;
  for (int i = 0; i < 300; ++i) {
    m.vertices.push_back({u(rng), u(rng) * 1e-7, u(rng) * 1e9});
    m.normals.push_back({0, 0, 1});
  }
  for (std::uint32_t i = 0; i + 2 < 300; i += 3) m.triangles.push_back({i, i + 1, i + 2});
  std::istringstream in(to_obj(m));
  std::string line;
  std::size_t v = 0, f = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      double x, y, z;
      ls >> x >> y >> z;
      ASSERT_LT(v, m.vertices.size());
      EXPECT_EQ(x, round_sig9(m.vertices[v].x));
      EXPECT_EQ(y, round_sig9(m.vertices[v].y));
      EXPECT_EQ(z, round_sig9(m.vertices[v].z));
      ++v;
    } else if (tag == "f") {
      std::uint32_t a, b, c;
      ls >> a >> b >> c;
      EXPECT_EQ((std::array<std::uint32_t, 3>{a - 1, b - 1, c - 1}), m.triangles[f]);
      ++f;
    }
  }
  EXPECT_EQ(v, m.vertices.size());
  EXPECT_EQ(f, m.triangles.size());
}
