#pragma once

// MOMX operator container: little-endian binary.
//   header  "MOMX" | version u32 | N_dof u32 | flags u32 (bit t set when tag t is present)
//   record  tag u16 | rows u32 | cols u32 | column-major f64 data, (re, im) pairs for complex tags
// Loading rebuilds the mesh from its vertices and triangles and re-derives
// Z, R0 and X0.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "momtopo/core.hpp"
#include "momtopo/mesh.hpp"
#include "momtopo/operators.hpp"

namespace momtopo {

inline constexpr std::uint32_t momx_version = 1;

enum class MomxTag : std::uint16_t {
  Z0 = 1,
  Zrho = 2,
  ZL = 3,
  V = 4,
  W = 5,
  Xm = 6,
  Xe = 7,
  U1 = 8,
  Lchol = 9,
  F = 10,
  probes = 11,
  scalars = 12,
  vertices = 13,
  triangles = 14,
  fixed = 15,
  gaps = 16,
};

namespace detail {

inline constexpr std::array<MomxTag, 16> momx_tags{
    MomxTag::Z0, MomxTag::Zrho,  MomxTag::ZL, MomxTag::V,      MomxTag::W,        MomxTag::Xm,
    MomxTag::Xe, MomxTag::U1,    MomxTag::Lchol, MomxTag::F,   MomxTag::probes,   MomxTag::scalars,
    MomxTag::vertices, MomxTag::triangles, MomxTag::fixed, MomxTag::gaps};

inline bool momx_complex(MomxTag t) {
  return t == MomxTag::Z0 || t == MomxTag::ZL || t == MomxTag::V || t == MomxTag::F;
}

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class MomxWriter {
 public:
  explicit MomxWriter(std::ofstream& out) : out_(out) {}

  template <class T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  void record(MomxTag tag, const MatR& A) {
    header(tag, A.rows(), A.cols());
    for (Eigen::Index c = 0; c < A.cols(); ++c)
      for (Eigen::Index r = 0; r < A.rows(); ++r) put(A(r, c));
  }
  void record(MomxTag tag, const MatC& A) {
    header(tag, A.rows(), A.cols());
    for (Eigen::Index c = 0; c < A.cols(); ++c)
      for (Eigen::Index r = 0; r < A.rows(); ++r) {
        put(A(r, c).real());
        put(A(r, c).imag());
      }
  }

 private:
  void header(MomxTag tag, Eigen::Index rows, Eigen::Index cols) {
    put(static_cast<std::uint16_t>(tag));
    put(static_cast<std::uint32_t>(rows));
    put(static_cast<std::uint32_t>(cols));
  }
  std::ofstream& out_;
};

class MomxReader {
 public:
  MomxReader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <class T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (in_.gcount() != static_cast<std::streamsize>(sizeof(T)))
      throw FormatError(FormatError::Kind::truncated, "truncated operator file: " + path_);
    return to_little(v);
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  void read_data(bool complex_data, std::uint32_t rows, std::uint32_t cols, MatR& R, MatC& C) {
    if (complex_data) {
      C.resize(rows, cols);
      for (std::uint32_t c = 0; c < cols; ++c)
        for (std::uint32_t r = 0; r < rows; ++r) {
          const double re = get<double>();
          const double im = get<double>();
          C(r, c) = cplx(re, im);
        }
    } else {
      R.resize(rows, cols);
      for (std::uint32_t c = 0; c < cols; ++c)
        for (std::uint32_t r = 0; r < rows; ++r) R(r, c) = get<double>();
    }
  }

 private:
  std::ifstream& in_;
  std::string path_;
};

inline MatR list_column(const DofList& l) {
  MatR m(static_cast<Eigen::Index>(l.size()), 1);
  for (std::size_t i = 0; i < l.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = l[i];
  return m;
}

inline DofList column_list(const MatR& m) {
  DofList l(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) l[static_cast<std::size_t>(i)] = static_cast<int>(m(i));
  return l;
}

}  // namespace detail

/// Writes atomically: data goes to a sibling temporary that is renamed on success.
inline void save_operators(const OperatorSet& ops, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
  if (!fs::is_directory(dir)) throw IoError("output directory does not exist: " + dir.string());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    detail::MomxWriter w(out);
    out.write("MOMX", 4);
    w.put(momx_version);
    w.put(static_cast<std::uint32_t>(ops.n_dof()));
    std::uint32_t flags = 0;
    for (auto t : detail::momx_tags) flags |= 1u << static_cast<unsigned>(t);
    w.put(flags);

    w.record(MomxTag::Z0, ops.Z0);
    w.record(MomxTag::Zrho, ops.Zrho);
    w.record(MomxTag::ZL, MatC(ops.ZL));
    w.record(MomxTag::V, MatC(ops.V));
    w.record(MomxTag::W, ops.W);
    w.record(MomxTag::Xm, ops.Xm);
    w.record(MomxTag::Xe, ops.Xe);
    w.record(MomxTag::U1, ops.U1);
    w.record(MomxTag::Lchol, ops.L_chol);
    w.record(MomxTag::F, ops.F);
    MatR probes(static_cast<Eigen::Index>(ops.probes.size()), 6);
    for (std::size_t i = 0; i < ops.probes.size(); ++i) {
      probes.row(static_cast<Eigen::Index>(i)).head(3) = ops.probes[i].direction.transpose();
      probes.row(static_cast<Eigen::Index>(i)).tail(3) = ops.probes[i].polarization.transpose();
    }
    w.record(MomxTag::probes, probes);
    MatR scalars(1, 5);
    scalars << ops.k, ops.ka, ops.radius, ops.fd_delta, static_cast<double>(ops.l_max);
    w.record(MomxTag::scalars, scalars);
    MatR verts(static_cast<Eigen::Index>(ops.mesh.vertices.size()), 3);
    for (std::size_t i = 0; i < ops.mesh.vertices.size(); ++i)
      verts.row(static_cast<Eigen::Index>(i)) = ops.mesh.vertices[i].transpose();
    w.record(MomxTag::vertices, verts);
    MatR tris(static_cast<Eigen::Index>(ops.mesh.triangles.size()), 3);
    for (std::size_t i = 0; i < ops.mesh.triangles.size(); ++i)
      for (int c = 0; c < 3; ++c) tris(static_cast<Eigen::Index>(i), c) = ops.mesh.triangles[i][c];
    w.record(MomxTag::triangles, tris);
    w.record(MomxTag::fixed, detail::list_column(ops.fixed));
    w.record(MomxTag::gaps, detail::list_column(ops.gaps));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move operator file into place: " + ec.message());
  }
}

inline OperatorSet load_operators(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open operator file: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4) throw FormatError(FormatError::Kind::truncated, "truncated operator file: " + path);
  if (std::memcmp(magic, "MOMX", 4) != 0) throw FormatError(FormatError::Kind::bad_magic, "bad magic in " + path);
  detail::MomxReader r(in, path);
  const auto version = r.get<std::uint32_t>();
  if (version != momx_version)
    throw FormatError(FormatError::Kind::version_mismatch,
                      "operator file version " + std::to_string(version) + ", expected " + std::to_string(momx_version));
  const auto n_dof = r.get<std::uint32_t>();
  const auto flags = r.get<std::uint32_t>();

  OperatorSet ops;
  MatR probes, scalars, verts, tris, fixed, gaps;
  std::uint32_t seen = 0;
  while (!r.at_end()) {
    const auto tag_raw = r.get<std::uint16_t>();
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (tag_raw == 0 || tag_raw > 31)
      throw FormatError(FormatError::Kind::malformed, "unknown record tag " + std::to_string(tag_raw));
    const auto tag = static_cast<MomxTag>(tag_raw);
    MatR R;
    MatC C;
    r.read_data(detail::momx_complex(tag), rows, cols, R, C);
    seen |= 1u << tag_raw;
    switch (tag) {
      case MomxTag::Z0: ops.Z0 = std::move(C); break;
      case MomxTag::Zrho: ops.Zrho = std::move(R); break;
      case MomxTag::ZL: ops.ZL = C.col(0); break;
      case MomxTag::V: ops.V = C.col(0); break;
      case MomxTag::W: ops.W = std::move(R); break;
      case MomxTag::Xm: ops.Xm = std::move(R); break;
      case MomxTag::Xe: ops.Xe = std::move(R); break;
      case MomxTag::U1: ops.U1 = std::move(R); break;
      case MomxTag::Lchol: ops.L_chol = std::move(R); break;
      case MomxTag::F: ops.F = std::move(C); break;
      case MomxTag::probes: probes = std::move(R); break;
      case MomxTag::scalars: scalars = std::move(R); break;
      case MomxTag::vertices: verts = std::move(R); break;
      case MomxTag::triangles: tris = std::move(R); break;
      case MomxTag::fixed: fixed = std::move(R); break;
      case MomxTag::gaps: gaps = std::move(R); break;
      default: break;  // unknown but well-formed records are skipped
    }
  }
  if ((seen & flags) != flags)
    throw FormatError(FormatError::Kind::truncated, "operator file ends before every announced record: " + path);

  const Eigen::Index N = n_dof;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) throw FormatError(FormatError::Kind::malformed, std::string("inconsistent record: ") + what);
  };
  expect(ops.Z0.rows() == N && ops.Z0.cols() == N, "Z0");
  expect(ops.W.rows() == N && ops.Xm.rows() == N && ops.Xe.rows() == N, "stored energy");
  expect(ops.V.size() == N && ops.ZL.size() == N, "V/ZL");
  expect(scalars.size() == 5, "scalars");
  expect(verts.cols() == 3 && tris.cols() == 3, "mesh");
  expect(probes.cols() == 6 && probes.rows() == ops.F.rows(), "probes");

  ops.k = scalars(0);
  ops.ka = scalars(1);
  ops.radius = scalars(2);
  ops.fd_delta = scalars(3);
  ops.l_max = static_cast<int>(scalars(4));
  for (Eigen::Index i = 0; i < probes.rows(); ++i)
    ops.probes.push_back({probes.row(i).head(3).transpose(), probes.row(i).tail(3).transpose()});
  std::vector<Vec3> vv;
  for (Eigen::Index i = 0; i < verts.rows(); ++i) vv.emplace_back(verts.row(i).transpose());
  std::vector<std::array<int, 3>> tt;
  for (Eigen::Index i = 0; i < tris.rows(); ++i)
    tt.push_back({static_cast<int>(tris(i, 0)), static_cast<int>(tris(i, 1)), static_cast<int>(tris(i, 2))});
  ops.mesh = make_mesh(std::move(vv), std::move(tt));
  expect(ops.mesh.n_dof() == N, "mesh DOF count");
  ops.fixed = detail::column_list(fixed);
  ops.gaps = detail::column_list(gaps);
  ops.finalize();
  return ops;
}

}  // namespace momtopo
