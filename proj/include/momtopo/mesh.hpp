#pragma once

// Triangular discretization of the bounding plate and its RWG (interior-edge)
// degrees of freedom.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "momtopo/core.hpp"

namespace momtopo {

struct PlateSpec {
  double length_x = 1.0;
  double length_y = 1.0;
  int nx = 1;
  int ny = 1;
  // electrical size k*a, a being the radius of the sphere circumscribing the plate
  double ka = 0.5;

  double circumscribing_radius() const {
    return 0.5 * std::hypot(length_x, length_y);
  }
  double wavenumber() const { return ka / circumscribing_radius(); }

  void validate() const {
    if (!(length_x > 0.0) || !(length_y > 0.0))
      throw InvalidArgument("plate dimensions must be positive");
    if (nx < 1 || ny < 1) throw InvalidArgument("plate subdivisions must be >= 1");
    if (!(ka > 0.0)) throw InvalidArgument("electrical size ka must be positive");
  }
};

/// One RWG basis function: the interior edge (v0 < v1) shared by the plus and
/// minus triangle. The reference direction of current is from the plus
/// triangle's free vertex across the edge into the minus triangle.
struct InteriorEdge {
  int v0 = 0;
  int v1 = 0;
  int tri_plus = 0;
  int tri_minus = 0;
  int free_plus = 0;
  int free_minus = 0;
  double length = 0.0;
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<InteriorEdge> interior_edges;

  int n_dof() const { return static_cast<int>(interior_edges.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }

  double area(int t) const {
    const auto& tri = triangles[t];
    return 0.5 * (vertices[tri[1]] - vertices[tri[0]])
                     .cross(vertices[tri[2]] - vertices[tri[0]])
                     .norm();
  }

  Vec3 centroid(int t) const {
    const auto& tri = triangles[t];
    return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
  }

  Vec3 edge_midpoint(int n) const {
    const auto& e = interior_edges[n];
    return 0.5 * (vertices[e.v0] + vertices[e.v1]);
  }

  double max_edge_length() const {
    double out = 0.0;
    for (const auto& tri : triangles)
      for (int i = 0; i < 3; ++i)
        out = std::max(out, (vertices[tri[i]] - vertices[tri[(i + 1) % 3]]).norm());
    return out;
  }
};

namespace detail {

inline bool edge_runs_forward(const std::array<int, 3>& tri, int a, int b) {
  for (int i = 0; i < 3; ++i)
    if (tri[i] == a && tri[(i + 1) % 3] == b) return true;
  return false;
}

inline int opposite_vertex(const std::array<int, 3>& tri, int a, int b) {
  for (int v : tri)
    if (v != a && v != b) return v;
  return -1;
}

}  // namespace detail

/// Derives interior edges from vertices and triangles. Edges are ordered by
/// (min vertex, max vertex). The plus triangle is the one traversing the edge
/// as v0 -> v1, which makes basis orientation independent of triangle order.
inline Mesh make_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles) {
  Mesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.triangles = std::move(triangles);
  const int nv = static_cast<int>(mesh.vertices.size());

  std::map<std::pair<int, int>, std::vector<int>> edge_tris;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int v : tri)
      if (v < 0 || v >= nv) throw MeshError("triangle references a missing vertex");
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw MeshError("triangle with repeated vertex");
    if (!(mesh.area(t) > 0.0)) throw MeshError("degenerate triangle with zero area");
    for (int i = 0; i < 3; ++i) {
      int a = tri[i], b = tri[(i + 1) % 3];
      edge_tris[{std::min(a, b), std::max(a, b)}].push_back(t);
    }
  }

  for (const auto& [key, tris] : edge_tris) {
    if (tris.size() == 1) continue;
    if (tris.size() > 2) throw MeshError("non-manifold edge shared by more than two triangles");
    InteriorEdge e;
    e.v0 = key.first;
    e.v1 = key.second;
    int first = tris[0], second = tris[1];
    const bool f_fwd = detail::edge_runs_forward(mesh.triangles[first], e.v0, e.v1);
    const bool s_fwd = detail::edge_runs_forward(mesh.triangles[second], e.v0, e.v1);
    if (f_fwd == s_fwd) {
      // inconsistent winding; fall back to triangle order
      e.tri_plus = std::min(first, second);
      e.tri_minus = std::max(first, second);
    } else if (f_fwd) {
      e.tri_plus = first;
      e.tri_minus = second;
    } else {
      e.tri_plus = second;
      e.tri_minus = first;
    }
    e.free_plus = detail::opposite_vertex(mesh.triangles[e.tri_plus], e.v0, e.v1);
    e.free_minus = detail::opposite_vertex(mesh.triangles[e.tri_minus], e.v0, e.v1);
    e.length = (mesh.vertices[e.v1] - mesh.vertices[e.v0]).norm();
    mesh.interior_edges.push_back(e);
  }
  return mesh;
}

/// Structured mesh of 2*nx*ny right triangles over a plate centred at the
/// origin in the z = 0 plane.
inline Mesh build_mesh(const PlateSpec& spec) {
  spec.validate();
  std::vector<Vec3> verts;
  verts.reserve(static_cast<std::size_t>((spec.nx + 1) * (spec.ny + 1)));
  for (int j = 0; j <= spec.ny; ++j)
    for (int i = 0; i <= spec.nx; ++i)
      verts.emplace_back(-0.5 * spec.length_x + spec.length_x * i / spec.nx,
                         -0.5 * spec.length_y + spec.length_y * j / spec.ny, 0.0);
  auto id = [&](int i, int j) { return j * (spec.nx + 1) + i; };
  std::vector<std::array<int, 3>> tris;
  tris.reserve(static_cast<std::size_t>(2 * spec.nx * spec.ny));
  for (int j = 0; j < spec.ny; ++j)
    for (int i = 0; i < spec.nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      tris.push_back({a, b, c});
      tris.push_back({a, c, d});
    }
  return make_mesh(std::move(verts), std::move(tris));
}

/// DOF whose edge midpoint lies closest to `point`, restricted to edges whose
/// direction is (anti)parallel to `edge_direction` when that is nonzero.
/// Ties resolve to the lowest index.
inline DofIndex nearest_dof(const Mesh& mesh, const Vec3& point,
                            const Vec3& edge_direction = Vec3::Zero()) {
  DofIndex best = -1;
  double best_d = infinity;
  const double dn = edge_direction.norm();
  for (int n = 0; n < mesh.n_dof(); ++n) {
    const auto& e = mesh.interior_edges[n];
    if (dn > 0.0) {
      Vec3 t = (mesh.vertices[e.v1] - mesh.vertices[e.v0]).normalized();
      if (std::abs(std::abs(t.dot(edge_direction / dn)) - 1.0) > 1e-9) continue;
    }
    const double d = (mesh.edge_midpoint(n) - point).norm();
    if (best < 0 || d < best_d - 1e-12 * (1.0 + best_d)) {
      best_d = d;
      best = n;
    }
  }
  if (best < 0) throw InvalidArgument("no interior edge matches the requested direction");
  return best;
}

/// Default feed: the edge transverse to the long plate axis nearest the centre.
inline DofIndex centre_feed_dof(const Mesh& mesh, const PlateSpec& spec) {
  const Vec3 across = spec.length_x >= spec.length_y ? Vec3(0.0, 1.0, 0.0) : Vec3(1.0, 0.0, 0.0);
  return nearest_dof(mesh, Vec3::Zero(), across);
}

// ---------------------------------------------------------------------------
// ASCII mesh file: `v x y z`, `t i j k`, `fixed n`, `gap n` (0-based indices).

struct MeshFile {
  Mesh mesh;
  DofList fixed;
  DofList gaps;
};

inline void write_mesh_file(const std::string& path, const Mesh& mesh, const DofList& fixed,
                            const DofList& gaps) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open mesh file for writing: " + path);
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (int f : fixed) out << "fixed " << f << '\n';
  for (int g : gaps) out << "gap " << g << '\n';
  if (!out) throw IoError("failed writing mesh file: " + path);
}

inline MeshFile read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path);
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  DofList fixed, gaps;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    bool ok = true;
    if (tag == "v") {
      double x, y, z;
      ok = static_cast<bool>(ls >> x >> y >> z);
      verts.emplace_back(x, y, z);
    } else if (tag == "t") {
      std::array<int, 3> t{};
      ok = static_cast<bool>(ls >> t[0] >> t[1] >> t[2]);
      tris.push_back(t);
    } else if (tag == "fixed" || tag == "gap") {
      int n;
      ok = static_cast<bool>(ls >> n);
      (tag == "fixed" ? fixed : gaps).push_back(n);
    } else {
      ok = false;
    }
    if (!ok)
      throw FormatError(FormatError::Kind::malformed,
                        path + ":" + std::to_string(lineno) + ": malformed mesh line");
  }
  MeshFile mf{make_mesh(std::move(verts), std::move(tris)), std::move(fixed), std::move(gaps)};
  for (int n : mf.fixed)
    if (n < 0 || n >= mf.mesh.n_dof()) throw InvalidArgument("fixed DOF out of range in " + path);
  for (int n : mf.gaps)
    if (n < 0 || n >= mf.mesh.n_dof()) throw InvalidArgument("gap DOF out of range in " + path);
  return mf;
}

}  // namespace momtopo
