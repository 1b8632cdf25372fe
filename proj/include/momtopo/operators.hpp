#pragma once

// Method-of-moments operators over a fixed RWG discretization: the EFIE
// impedance matrix, material and lumped loads, excitation, stored-energy
// matrices, and the low-rank factors of the dissipative operators.
//
// Basis functions are RWG functions divided by their edge length, so a
// coefficient I_n is the total current crossing edge n and every operator is
// in ohms. Time convention exp(j omega t).

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "momtopo/core.hpp"
#include "momtopo/mesh.hpp"
#include "momtopo/parallel.hpp"
#include "momtopo/quadrature.hpp"
#include "momtopo/spherical.hpp"

namespace momtopo {

struct LumpedPort {
  DofIndex dof = 0;
  double resistance = 0.0;
  double inductance = 0.0;
  // infinity means no series capacitor
  double capacitance = infinity;
};

struct ExcitationSpec {
  enum class Kind { delta_gap, plane_wave };

  Kind kind = Kind::delta_gap;
  DofIndex gap_dof = 0;
  Vec3 direction = -Vec3::UnitZ();
  Vec3 polarization = Vec3::UnitX();
  double amplitude = 1.0;

  static ExcitationSpec delta_gap(DofIndex n) {
    ExcitationSpec s;
    s.gap_dof = n;
    return s;
  }
  static ExcitationSpec plane_wave(const Vec3& d, const Vec3& e, double amplitude = 1.0) {
    ExcitationSpec s;
    s.kind = Kind::plane_wave;
    s.direction = d;
    s.polarization = e;
    s.amplitude = amplitude;
    return s;
  }

  void validate(int n_dof) const {
    if (kind == Kind::delta_gap) {
      if (gap_dof < 0 || gap_dof >= n_dof)
        throw InvalidArgument("delta-gap DOF " + std::to_string(gap_dof) + " out of range [0, " +
                              std::to_string(n_dof) + ")");
      return;
    }
    if (std::abs(direction.norm() - 1.0) > 1e-12 || std::abs(polarization.norm() - 1.0) > 1e-12)
      throw InvalidArgument("plane-wave direction and polarization must be unit vectors");
    if (std::abs(direction.dot(polarization)) > 1e-12)
      throw InvalidArgument("plane-wave polarization must be orthogonal to the direction");
  }
};

struct FarfieldProbe {
  Vec3 direction = Vec3::UnitZ();
  Vec3 polarization = Vec3::UnitX();
};

namespace detail {

struct TriBasis {
  int dof;
  double sign;
  Vec3 free_vertex;
};

struct TriangleData {
  std::array<Vec3, 3> p;
  double area = 0.0;
  double diameter = 0.0;
  Vec3 centroid;
  std::vector<TriBasis> basis;
  std::vector<quad::QuadPoint> pts;
};

inline std::vector<TriangleData> triangle_data(const Mesh& mesh, const quad::TriangleRule& rule) {
  std::vector<TriangleData> out(mesh.triangles.size());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    auto& td = out[t];
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) td.p[i] = mesh.vertices[tri[i]];
    td.area = mesh.area(t);
    td.centroid = mesh.centroid(t);
    for (int i = 0; i < 3; ++i) td.diameter = std::max(td.diameter, (td.p[i] - td.p[(i + 1) % 3]).norm());
    td.pts = quad::map_rule(rule, td.p[0], td.p[1], td.p[2], td.area);
  }
  for (int n = 0; n < mesh.n_dof(); ++n) {
    const auto& e = mesh.interior_edges[n];
    out[e.tri_plus].basis.push_back({n, 1.0, mesh.vertices[e.free_plus]});
    out[e.tri_minus].basis.push_back({n, -1.0, mesh.vertices[e.free_minus]});
  }
  return out;
}

/// Value of basis b (restricted to its triangle) at r.
inline Vec3 basis_value(const TriBasis& b, double area, const Vec3& r) {
  return b.sign * (r - b.free_vertex) / (2.0 * area);
}

// j0(x) and j2(x)/x^2, smooth through x = 0
inline double j0(double x) {
  if (x < 1e-3) return 1.0 - x * x / 6.0 + x * x * x * x / 120.0;
  return std::sin(x) / x;
}
inline double j2_over_x2(double x) {
  if (x < 1.0) return sph::bessel_series(2, x, 2);
  return ((3.0 - x * x) * std::sin(x) - 3.0 * x * std::cos(x)) / (x * x * x * x * x);
}

/// Sums per-triangle row blocks (rows follow the triangle's basis order) in
/// triangle order, so the result does not depend on the worker count.
inline MatR reduce_blocks(const std::vector<detail::TriangleData>& tris, const std::vector<MatR>& blocks, int N) {
  MatR out = MatR::Zero(N, N);
  for (std::size_t p = 0; p < tris.size(); ++p)
    for (std::size_t i = 0; i < tris[p].basis.size(); ++i)
      out.row(tris[p].basis[i].dof) += blocks[p].row(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace detail

/// Reactance X0 = Im{Z0}. The hypersingular dyadic kernel is integrated in
/// the mixed-potential form; the static 1/R part of near interactions is
/// integrated analytically over the source triangle.
inline MatR assemble_reactance(const Mesh& mesh, double k, int threads = 1) {
  if (!(k > 0.0)) throw InvalidArgument("wavenumber must be positive");
  const auto tris = detail::triangle_data(mesh, quad::gauss7());
  const int N = mesh.n_dof();
  const int T = mesh.n_triangles();
  const double eta = constants::eta0;
  const double inv4pi = 1.0 / (4.0 * constants::pi);
  std::vector<MatR> blocks(static_cast<std::size_t>(T));

  parallel_for(T, threads, [&](int begin, int end, int) {
    for (int p = begin; p < end; ++p) {
      const auto& tp = tris[p];
      if (tp.basis.empty()) continue;
      MatR& X = blocks[p];
      X = MatR::Zero(static_cast<Eigen::Index>(tp.basis.size()), N);
      for (int q = 0; q < T; ++q) {
        const auto& tq = tris[q];
        if (tq.basis.empty()) continue;
        const bool near = (tp.centroid - tq.centroid).norm() < 3.0 * std::max(tp.diameter, tq.diameter);
        double S0 = 0.0, Srr = 0.0;
        Vec3 Sr = Vec3::Zero(), Srp = Vec3::Zero();
        for (const auto& a : tp.pts) {
          for (const auto& b : tq.pts) {
            const double R = (a.r - b.r).norm();
            const double x = k * R;
            double g;
            if (near) {
              g = (x < 1e-4) ? -0.5 * k * x * inv4pi : (std::cos(x) - 1.0) / R * inv4pi;
            } else {
              g = std::cos(x) / R * inv4pi;
            }
            const double ww = a.w * b.w * g;
            S0 += ww;
            Sr += ww * a.r;
            Srp += ww * b.r;
            Srr += ww * a.r.dot(b.r);
          }
          if (near) {
            const auto sp = quad::static_potential(a.r, tq.p[0], tq.p[1], tq.p[2]);
            const double c = a.w * inv4pi;
            const Vec3 rp = sp.vector + a.r * sp.scalar;
            S0 += c * sp.scalar;
            Sr += c * sp.scalar * a.r;
            Srp += c * rp;
            Srr += c * a.r.dot(rp);
          }
        }
        const double apq = tp.area * tq.area;
        for (std::size_t i = 0; i < tp.basis.size(); ++i)
          for (const auto& bj : tq.basis) {
            const auto& bi = tp.basis[i];
            const double A = Srr - bj.free_vertex.dot(Sr) - bi.free_vertex.dot(Srp) +
                             bi.free_vertex.dot(bj.free_vertex) * S0;
            X(static_cast<Eigen::Index>(i), bj.dof) += k * eta * bi.sign * bj.sign * (A / (4.0 * apq) - S0 / (k * k * apq));
          }
      }
    }
  });
  const MatR X = detail::reduce_blocks(tris, blocks, N);
  return 0.5 * (X + X.transpose());
}

/// Radiation matrix R0 = Re{Z0}, integrated with the smooth dyadic kernel
/// Im{(1 + grad grad / k^2) G}, which keeps the discrete matrix positive
/// semidefinite and consistent with the spherical-wave factorization.
inline MatR assemble_radiation(const Mesh& mesh, double k, int threads = 1) {
  if (!(k > 0.0)) throw InvalidArgument("wavenumber must be positive");
  const auto tris = detail::triangle_data(mesh, quad::gauss7());
  const int N = mesh.n_dof();
  const int T = mesh.n_triangles();
  const double pref = k * constants::eta0 * k / (4.0 * constants::pi);
  std::vector<MatR> blocks(static_cast<std::size_t>(T));

  parallel_for(T, threads, [&](int begin, int end, int) {
    std::array<Vec3, 3> psi_a, psi_b;
    for (int p = begin; p < end; ++p) {
      const auto& tp = tris[p];
      const int np = static_cast<int>(tp.basis.size());
      if (np == 0) continue;
      MatR& R = blocks[p];
      R = MatR::Zero(np, N);
      for (int q = 0; q < T; ++q) {
        const auto& tq = tris[q];
        const int nq = static_cast<int>(tq.basis.size());
        if (nq == 0) continue;
        double acc[3][3] = {};
        for (const auto& a : tp.pts) {
          for (int i = 0; i < np; ++i) psi_a[i] = detail::basis_value(tp.basis[i], tp.area, a.r);
          for (const auto& b : tq.pts) {
            const Vec3 Rv = a.r - b.r;
            const double x = k * Rv.norm();
            const double c2 = detail::j2_over_x2(x);
            const double a0 = (2.0 * detail::j0(x) - c2 * x * x) / 3.0;
            const double kk = k * k * c2;
            const double ww = a.w * b.w;
            for (int j = 0; j < nq; ++j) psi_b[j] = detail::basis_value(tq.basis[j], tq.area, b.r);
            for (int i = 0; i < np; ++i) {
              const double ai = psi_a[i].dot(Rv);
              for (int j = 0; j < nq; ++j)
                acc[i][j] += ww * (a0 * psi_a[i].dot(psi_b[j]) + kk * ai * psi_b[j].dot(Rv));
            }
          }
        }
        for (int i = 0; i < np; ++i)
          for (int j = 0; j < nq; ++j) R(i, tq.basis[j].dof) += pref * acc[i][j];
      }
    }
  });
  const MatR R = detail::reduce_blocks(tris, blocks, N);
  return 0.5 * (R + R.transpose());
}

/// Vacuum impedance matrix Z0 = R0 + j X0.
inline MatC assemble_efie(const Mesh& mesh, double k, int threads = 1) {
  const MatR R = assemble_radiation(mesh, k, threads);
  const MatR X = assemble_reactance(mesh, k, threads);
  MatC Z(R.rows(), R.cols());
  Z.real() = R;
  Z.imag() = X;
  return Z;
}

/// Ohmic loss Gram matrix for a sheet resistivity rho_s(r) >= 0.
inline MatR assemble_material(const Mesh& mesh, const std::function<double(const Vec3&)>& rho) {
  const auto tris = detail::triangle_data(mesh, quad::gauss7());
  const int N = mesh.n_dof();
  MatR Z = MatR::Zero(N, N);
  if (!rho) return Z;
  for (const auto& t : tris) {
    for (const auto& a : t.pts) {
      const double rs = rho(a.r);
      if (rs < 0.0) throw InvalidArgument("sheet resistivity must be non-negative");
      if (rs == 0.0) continue;
      for (const auto& bi : t.basis)
        for (const auto& bj : t.basis)
          Z(bi.dof, bj.dof) += a.w * rs *
                               detail::basis_value(bi, t.area, a.r).dot(detail::basis_value(bj, t.area, a.r));
    }
  }
  return Z;
}

/// Diagonal of the lumped-element matrix: series R-L-C per port DOF.
inline VecC assemble_lumped(const std::vector<LumpedPort>& ports, double omega, int n_dof) {
  if (!(omega > 0.0)) throw InvalidArgument("angular frequency must be positive");
  VecC zl = VecC::Zero(n_dof);
  std::vector<bool> seen(static_cast<std::size_t>(n_dof), false);
  for (const auto& p : ports) {
    if (p.dof < 0 || p.dof >= n_dof) throw InvalidArgument("lumped port DOF out of range");
    if (seen[p.dof]) throw InvalidArgument("lumped port DOFs must be distinct");
    seen[p.dof] = true;
    if (p.capacitance == 0.0) throw InvalidArgument("zero series capacitance (infinite reactance)");
    if (p.resistance < 0.0) throw InvalidArgument("negative lumped resistance");
    const double xc = std::isinf(p.capacitance) ? 0.0 : 1.0 / (omega * p.capacitance);
    zl[p.dof] = cplx(p.resistance, omega * p.inductance - xc);
  }
  return zl;
}

inline VecC assemble_excitation(const Mesh& mesh, const ExcitationSpec& spec, double k) {
  const int N = mesh.n_dof();
  spec.validate(N);
  VecC V = VecC::Zero(N);
  if (spec.kind == ExcitationSpec::Kind::delta_gap) {
    // 1 V across the gap edge
    V[spec.gap_dof] = 1.0;
    return V;
  }
  const auto tris = detail::triangle_data(mesh, quad::gauss7());
  for (const auto& t : tris)
    for (const auto& a : t.pts) {
      const cplx phase = std::exp(-constants::j * k * spec.direction.dot(a.r));
      for (const auto& b : t.basis)
        V[b.dof] += a.w * spec.amplitude * detail::basis_value(b, t.area, a.r).dot(spec.polarization) * phase;
    }
  return V;
}

struct StoredEnergy {
  MatR W;
  MatR Xm;
  MatR Xe;
};

/// W = omega dX0/domega by central differences at omega (1 +- delta), with
/// the magnetic/electric split Xm = (W + X0)/2, Xe = (W - X0)/2.
inline StoredEnergy stored_energy_matrices(const Mesh& mesh, double k, double delta = 1e-4,
                                           int threads = 1, const MatR* x0 = nullptr) {
  if (!(delta > 0.0 && delta < 0.1)) throw InvalidArgument("finite-difference step must be in (0, 0.1)");
  const MatR Xp = assemble_reactance(mesh, k * (1.0 + delta), threads);
  const MatR Xn = assemble_reactance(mesh, k * (1.0 - delta), threads);
  StoredEnergy out;
  out.W = (Xp - Xn) / (2.0 * delta);
  const MatR X0 = x0 ? *x0 : assemble_reactance(mesh, k, threads);
  out.Xm = 0.5 * (out.W + X0);
  out.Xe = 0.5 * (out.W - X0);
  return out;
}

/// U1 with R0 ~= U1^T U1; one row per regular spherical wave up to l_max.
inline MatR spherical_projection(const Mesh& mesh, double k, int l_max) {
  if (l_max < 1) throw InvalidArgument("l_max must be >= 1");
  const sph::WaveEvaluator waves(l_max);
  const auto tris = detail::triangle_data(mesh, quad::gauss7());
  MatR U1 = MatR::Zero(waves.size(), mesh.n_dof());
  MatR u(waves.size(), 3);
  const double pref = k * std::sqrt(constants::eta0);
  for (const auto& t : tris)
    for (const auto& a : t.pts) {
      waves.evaluate(k * a.r, u);
      for (const auto& b : t.basis)
        U1.col(b.dof) += pref * a.w * (u * detail::basis_value(b, t.area, a.r));
    }
  return U1;
}

/// F(d, e) with radiation intensity U = |F I|^2 / (2 eta0).
inline RowC farfield_row(const Mesh& mesh, double k, const Vec3& d, const Vec3& e) {
  if (std::abs(d.norm() - 1.0) > 1e-12 || std::abs(e.norm() - 1.0) > 1e-12)
    throw InvalidArgument("far-field direction and polarization must be unit vectors");
  if (std::abs(d.dot(e)) > 1e-12) throw InvalidArgument("polarization must be orthogonal to direction");
  const auto tris = detail::triangle_data(mesh, quad::gauss7());
  RowC F = RowC::Zero(mesh.n_dof());
  const cplx pref = -constants::j * constants::eta0 * k / (4.0 * constants::pi);
  for (const auto& t : tris)
    for (const auto& a : t.pts) {
      const cplx phase = std::exp(constants::j * k * d.dot(a.r));
      for (const auto& b : t.basis) F[b.dof] += pref * a.w * e.dot(detail::basis_value(b, t.area, a.r)) * phase;
    }
  return F;
}

/// Upper-triangular L with L^T L = R for symmetric positive semidefinite R.
/// Zero pivots (null directions) yield zero rows.
inline MatR cholesky_loss(const MatR& R) {
  const int n = static_cast<int>(R.rows());
  if (R.cols() != n) throw InvalidArgument("loss matrix must be square");
  MatR L = MatR::Zero(n, n);
  if (n == 0) return L;
  const double scale = R.diagonal().cwiseAbs().maxCoeff();
  if (scale == 0.0) return L;
  const double tol = 1e-10 * scale;
  for (int j = 0; j < n; ++j) {
    const double d = R(j, j) - L.col(j).head(j).squaredNorm();
    if (d < -tol) throw NumericalError(NumericalError::Kind::indefinite, "loss matrix is indefinite");
    if (d <= tol) {
      for (int i = j + 1; i < n; ++i) {
        const double r = R(j, i) - L.col(j).head(j).dot(L.col(i).head(j));
        if (std::abs(r) > std::sqrt(tol * scale) * 1e-3)
          throw NumericalError(NumericalError::Kind::indefinite, "loss matrix is indefinite");
      }
      continue;
    }
    const double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      const double r = R(j, i) - L.col(j).head(j).dot(L.col(i).head(j));
      if (r != 0.0) L(j, i) = r / ljj;
    }
  }
  return L;
}

/// Every precomputed operator for one frequency. Immutable once built.
struct OperatorSet {
  double k = 0.0;
  double ka = 0.0;
  double radius = 0.0;
  double fd_delta = 1e-4;
  int l_max = 0;
  Mesh mesh;
  MatC Z0;
  MatR Zrho;
  VecC ZL;  // diagonal of the lumped matrix
  VecC V;
  MatR W, Xm, Xe;
  MatR U1;
  MatR L_chol;
  MatC F;  // one row per probe
  std::vector<FarfieldProbe> probes;
  DofList fixed;
  DofList gaps;

  // derived by finalize()
  MatC Z;
  MatR R0, X0;

  int n_dof() const { return static_cast<int>(Z0.rows()); }
  double omega() const { return k * constants::c0; }
  double eta() const { return constants::eta0; }

  /// Total impedance Z0 + Zrho + ZL and the real/imaginary vacuum parts.
  void finalize() {
    R0 = Z0.real();
    X0 = Z0.imag();
    Z = Z0;
    if (Zrho.size() != 0) Z.real() += Zrho;
    if (ZL.size() != 0) Z.diagonal() += ZL;
  }

  /// Real part of the lumped contributions (port resistances).
  VecR lumped_resistance() const {
    return ZL.size() ? VecR(ZL.real()) : VecR(VecR::Zero(n_dof()));
  }
};

struct BuildOptions {
  double fd_delta = 1e-4;
  int l_max = 0;  // 0 selects sph::default_l_max(ka)
  std::optional<ExcitationSpec> excitation;  // unset: delta gap at the centre feed
  DofList fixed;
  std::function<double(const Vec3&)> resistivity;
  std::vector<LumpedPort> ports;
  std::vector<FarfieldProbe> probes{{Vec3::UnitZ(), Vec3::UnitX()}, {Vec3::UnitZ(), Vec3::UnitY()}};
  int threads = 1;
};

/// Assembles every operator for `mesh` at wavenumber k. `radius` is the
/// radius of the origin-centred sphere enclosing the mesh.
inline OperatorSet build_operators(Mesh mesh, double k, double radius, const BuildOptions& opt,
                                   std::optional<DofIndex> default_gap = std::nullopt) {
  if (!(k > 0.0) || !(radius > 0.0)) throw InvalidArgument("wavenumber and radius must be positive");
  OperatorSet ops;
  ops.k = k;
  ops.radius = radius;
  ops.ka = k * radius;
  ops.fd_delta = opt.fd_delta;
  ops.l_max = opt.l_max > 0 ? opt.l_max : sph::default_l_max(ops.ka);
  const int N = mesh.n_dof();
  if (N == 0) throw InvalidArgument("mesh has no interior edges");

  ops.Z0 = assemble_efie(mesh, k, opt.threads);
  const MatR X0 = ops.Z0.imag();
  auto se = stored_energy_matrices(mesh, k, opt.fd_delta, opt.threads, &X0);
  ops.W = std::move(se.W);
  ops.Xm = std::move(se.Xm);
  ops.Xe = std::move(se.Xe);
  ops.Zrho = assemble_material(mesh, opt.resistivity);
  ops.L_chol = cholesky_loss(ops.Zrho);
  ops.ZL = assemble_lumped(opt.ports, k * constants::c0, N);
  ops.U1 = spherical_projection(mesh, k, ops.l_max);

  ExcitationSpec exc;
  if (opt.excitation) {
    exc = *opt.excitation;
  } else {
    if (!default_gap) throw InvalidArgument("no excitation specified");
    exc = ExcitationSpec::delta_gap(*default_gap);
  }
  ops.V = assemble_excitation(mesh, exc, k);

  ops.fixed = opt.fixed;
  if (exc.kind == ExcitationSpec::Kind::delta_gap) {
    ops.gaps = {exc.gap_dof};
    ops.fixed.push_back(exc.gap_dof);
  }
  std::sort(ops.fixed.begin(), ops.fixed.end());
  ops.fixed.erase(std::unique(ops.fixed.begin(), ops.fixed.end()), ops.fixed.end());
  for (int f : ops.fixed)
    if (f < 0 || f >= N) throw InvalidArgument("fixed DOF out of range");

  ops.probes = opt.probes;
  ops.F = MatC::Zero(static_cast<Eigen::Index>(opt.probes.size()), N);
  for (std::size_t i = 0; i < opt.probes.size(); ++i)
    ops.F.row(static_cast<Eigen::Index>(i)) =
        farfield_row(mesh, k, opt.probes[i].direction, opt.probes[i].polarization);

  ops.mesh = std::move(mesh);
  ops.finalize();
  return ops;
}

inline OperatorSet build_operators(const PlateSpec& spec, const BuildOptions& opt = {}) {
  Mesh mesh = build_mesh(spec);
  const DofIndex gap = centre_feed_dof(mesh, spec);
  return build_operators(std::move(mesh), spec.wavenumber(), spec.circumscribing_radius(), opt, gap);
}

}  // namespace momtopo
