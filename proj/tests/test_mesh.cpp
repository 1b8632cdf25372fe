#include <gtest/gtest.h>

#include <filesystem>

#include "support.hpp"

using namespace momtopo;

TEST(Mesh, TwoByOneGridHasFourTriangles) {
  const auto mesh = build_mesh({2.0, 1.0, 2, 1, 0.5});
  EXPECT_EQ(mesh.n_triangles(), 4);
  EXPECT_EQ(mesh.n_dof(), test::brute_force_interior_edges(mesh));
  EXPECT_EQ(mesh.n_dof(), 3);
}

TEST(Mesh, InteriorEdgeCountMatchesBruteForce) {
  for (int nx = 1; nx <= 7; ++nx)
    for (int ny = 1; ny <= 5; ++ny) {
      const auto mesh = build_mesh({1.0, 1.0, nx, ny, 0.5});
      EXPECT_EQ(mesh.n_dof(), test::brute_force_interior_edges(mesh)) << nx << "x" << ny;
      EXPECT_EQ(mesh.n_dof(), 3 * nx * ny - nx - ny);
    }
}

TEST(Mesh, StructuredOneByTwoGridCannotHaveExactly345Dofs) {
  // 3 nx ny - nx - ny with nx = 2 ny never equals 345; 16 x 8 (360) is the nearest
  for (int ny = 1; ny < 40; ++ny) EXPECT_NE(3 * 2 * ny * ny - 3 * ny, 345);
  EXPECT_EQ(build_mesh({2.0, 1.0, 16, 8, 0.5}).n_dof(), 360);
}

TEST(Mesh, RwgOrientationIsConsistent) {
  const auto mesh = build_mesh({2.0, 1.0, 4, 3, 0.5});
  for (const auto& e : mesh.interior_edges) {
    EXPECT_LT(e.v0, e.v1);
    EXPECT_NE(e.tri_plus, e.tri_minus);
    for (int t : {e.tri_plus, e.tri_minus}) {
      const auto& tri = mesh.triangles[t];
      EXPECT_NE(std::find(tri.begin(), tri.end(), e.v0), tri.end());
      EXPECT_NE(std::find(tri.begin(), tri.end(), e.v1), tri.end());
    }
    EXPECT_NE(e.free_plus, e.v0);
    EXPECT_NE(e.free_plus, e.v1);
    EXPECT_NE(e.free_minus, e.free_plus);
    EXPECT_NEAR(e.length, (mesh.vertices[e.v1] - mesh.vertices[e.v0]).norm(), 1e-15);
  }
  double area = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    EXPECT_GT(mesh.area(t), 0.0);
    area += mesh.area(t);
  }
  EXPECT_NEAR(area, 2.0, 1e-12);
}

TEST(Mesh, CentreFeedIsTransverseEdgeThroughOrigin) {
  const PlateSpec spec{2.0, 1.0, 16, 8, 0.5};
  const auto mesh = build_mesh(spec);
  const DofIndex n = centre_feed_dof(mesh, spec);
  const auto& e = mesh.interior_edges[n];
  const Vec3 t = mesh.vertices[e.v1] - mesh.vertices[e.v0];
  EXPECT_NEAR(std::abs(t.normalized().y()), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(mesh.edge_midpoint(n).x()), 0.0, 1e-12);
}

TEST(Mesh, NearestDofRejectsImpossibleDirection) {
  const auto mesh = build_mesh({1.0, 1.0, 2, 2, 0.5});
  EXPECT_THROW(nearest_dof(mesh, Vec3::Zero(), Vec3::UnitZ()), InvalidArgument);
}

TEST(Mesh, InvalidPlateRejected) {
  EXPECT_THROW(build_mesh({0.0, 1.0, 2, 2, 0.5}), InvalidArgument);
  EXPECT_THROW(build_mesh({1.0, 1.0, 0, 2, 0.5}), InvalidArgument);
  EXPECT_THROW(build_mesh({1.0, 1.0, 2, 2, -1.0}), InvalidArgument);
}

TEST(Mesh, NonManifoldEdgeRejected) {
  std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}};
  std::vector<std::array<int, 3>> t{{0, 1, 2}, {0, 3, 1}, {0, 1, 4}};
  EXPECT_THROW(make_mesh(v, t), MeshError);
}

TEST(Mesh, MeshFileRoundTrip) {
  const auto mesh = build_mesh({2.0, 1.0, 3, 2, 0.5});
  const auto path = (std::filesystem::temp_directory_path() / "momtopo_mesh_rt.txt").string();
  write_mesh_file(path, mesh, {1, 4}, {4});
  const auto back = read_mesh_file(path);
  ASSERT_EQ(back.mesh.n_dof(), mesh.n_dof());
  EXPECT_EQ(back.fixed, (DofList{1, 4}));
  EXPECT_EQ(back.gaps, (DofList{4}));
  for (int n = 0; n < mesh.n_dof(); ++n) {
    EXPECT_EQ(back.mesh.interior_edges[n].v0, mesh.interior_edges[n].v0);
    EXPECT_EQ(back.mesh.interior_edges[n].tri_plus, mesh.interior_edges[n].tri_plus);
  }
  std::filesystem::remove(path);
}
