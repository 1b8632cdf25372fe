#pragma once

// Shared oracles for the test binaries. Everything here is computed without
// the library's fast paths: dense solves, brute-force loops, an independent
// thin-wire solver.

#include <random>
#include <set>

#include "momtopo/momtopo.hpp"

namespace momtopo::test {

inline double rel_err(const VecC& a, const VecC& b) {
  const double n = b.norm();
  return (a - b).norm() / (n > 0.0 ? n : 1.0);
}

template <class A, class B>
double rel_err_mat(const A& a, const B& b) {
  const double n = b.norm();
  return (a - b).norm() / (n > 0.0 ? n : 1.0);
}

/// Random complex symmetric Z = R + jX with R positive definite, so every
/// principal submatrix is invertible.
inline MatC random_symmetric_system(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatR a(n, n), b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      a(i, j) = g(rng);
      b(i, j) = g(rng);
    }
  MatR R = a * a.transpose() / n + MatR::Identity(n, n);
  MatR X = 0.5 * (b + b.transpose());
  MatC Z(n, n);
  Z.real() = R;
  Z.imag() = X;
  return Z;
}

inline VecC random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  VecC v(n);
  for (int i = 0; i < n; ++i) v[i] = cplx(g(rng), g(rng));
  return v;
}

inline MatR random_psd(int n, std::mt19937_64& rng, double shift = 0.0) {
  std::normal_distribution<double> g;
  MatR a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return a * a.transpose() + shift * MatR::Identity(n, n);
}

inline MatR random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatR a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return 0.5 * (a + a.transpose());
}

inline DofList random_subset(int n, int m, std::mt19937_64& rng) {
  DofList all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(m));
  std::sort(all.begin(), all.end());
  return all;
}

/// Current on `active` by a dense LU solve of the truncated system.
inline VecC direct_solve(const MatC& Z, const VecC& V, const DofList& active) {
  return Z(active, active).partialPivLu().solve(V(active));
}

/// Untuned-Q style objective 1/2 I^H A I / I^H B I on explicit channels.
inline Objective ratio_objective(const MatR& A, const MatR& B) {
  return Objective({A, B}, {}, [](const double* q, const cplx*) { return 0.5 * q[0] / q[1]; });
}

/// Interior edges by pairwise comparison of triangle vertex sets.
inline int brute_force_interior_edges(const Mesh& mesh) {
  int count = 0;
  const int T = mesh.n_triangles();
  for (int a = 0; a < T; ++a)
    for (int b = a + 1; b < T; ++b) {
      int shared = 0;
      for (int i : mesh.triangles[a])
        for (int j : mesh.triangles[b]) shared += i == j;
      count += shared == 2;
    }
  return count;
}

/// The 13-DOF toy plate (one fixed feed, 12 optimized bits).
inline PlateSpec toy12_plate() { return {2.0, 1.0, 3, 2, 0.5}; }

/// The 11-DOF plate whose 10 optimized bits allow exhaustive neighbourhood checks.
inline PlateSpec toy10_plate() { return {1.0, 2.0, 1, 6, 0.5}; }

/// All 2^n_opt objective values, index = bit mask.
inline std::vector<double> enumerate_all(const OperatorSet& ops, const Objective& obj, const ParamPtr& param) {
  const int n = param->n_opt();
  std::vector<double> f(std::size_t{1} << n);
  for (std::uint64_t m = 0; m < f.size(); ++m) {
    Gene g(param);
    for (int b = 0; b < n; ++b)
      if ((m >> b) & 1u) g.set(b, true);
    f[m] = evaluate_gene(g, ops, obj);
  }
  return f;
}

inline Gene gene_from_mask(const ParamPtr& param, std::uint64_t m) {
  Gene g(param);
  for (int b = 0; b < param->n_opt(); ++b)
    if ((m >> b) & 1u) g.set(b, true);
  return g;
}

inline std::uint64_t mask_of(const Gene& g) {
  std::uint64_t m = 0;
  for (int b = 0; b < g.n_opt(); ++b)
    if (g.bit(b)) m |= std::uint64_t{1} << b;
  return m;
}

/// Input impedance of a centre-fed straight wire (length L, radius a) from
/// Hallen's equation with the reduced kernel: piecewise-linear currents on
/// n_seg segments (zero at the ends), point matching at the interior nodes and
/// at one end. Independent of the surface code path.
inline cplx thin_wire_impedance(double L, double a, double k, int n_seg = 60) {
  const double eta = constants::eta0;
  const double h = L / n_seg;
  const int nb = n_seg - 1;  // interior nodes carry the unknown currents
  std::vector<double> node(static_cast<std::size_t>(n_seg + 1));
  for (int i = 0; i <= n_seg; ++i) node[i] = -0.5 * L + i * h;
  std::vector<double> gx, gw;
  quad::gauss_legendre(12, gx, gw);
  const int sub = 8;

  auto kernel_integral = [&](double z, int b) {
    // int tri_b(z') exp(-jkR)/(4 pi R) dz' with tri_b peaking at node b+1
    const double zc = node[b + 1];
    cplx s = 0.0;
    for (int side = 0; side < 2; ++side) {
      const double z0 = side == 0 ? zc - h : zc;
      for (int p = 0; p < sub; ++p) {
        const double lo = z0 + p * h / sub, hi = lo + h / sub;
        for (std::size_t q = 0; q < gx.size(); ++q) {
          const double zp = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx[q];
          const double t = 1.0 - std::abs(zp - zc) / h;
          const double R = std::sqrt((z - zp) * (z - zp) + a * a);
          s += 0.5 * (hi - lo) * gw[q] * t * std::exp(cplx(0.0, -k * R)) / (4.0 * constants::pi * R);
        }
      }
    }
    return s;
  };

  const int n = nb + 1;
  MatC A = MatC::Zero(n, n);
  VecC rhs(n);
  std::vector<double> zm;
  for (int i = 1; i <= nb; ++i) zm.push_back(node[i]);
  zm.push_back(node[n_seg]);
  for (int m = 0; m < n; ++m) {
    for (int b = 0; b < nb; ++b) A(m, b) = kernel_integral(zm[m], b);
    A(m, nb) = -std::cos(k * zm[m]);
    rhs[m] = cplx(0.0, -1.0 / (2.0 * eta)) * std::sin(k * std::abs(zm[m]));
  }
  const VecC x = A.partialPivLu().solve(rhs);
  return 1.0 / x[n_seg / 2 - 1];
}

/// Input impedance of a delta-gap-fed strip at the feed edge.
inline cplx strip_impedance(double L, double w, int nx, double k) {
  const PlateSpec spec{L, w, nx, 1, k * 0.5 * std::hypot(L, w)};
  const auto ops = build_operators(spec);
  const VecC I = ops.Z.partialPivLu().solve(ops.V);
  return input_impedance(I, ops.Z, ops.gaps.front());
}

/// Resistance where the reactance of z(x) crosses zero, by secant iteration
/// on x starting from the bracket [x0, x1].
template <class F>
double resistance_at_resonance(F&& z, double x0, double x1, int iters = 30) {
  cplx z0 = z(x0), z1 = z(x1);
  for (int i = 0; i < iters && std::abs(x1 - x0) > 1e-10; ++i) {
    const double x2 = x1 - z1.imag() * (x1 - x0) / (z1.imag() - z0.imag());
    x0 = x1;
    z0 = z1;
    x1 = x2;
    z1 = z(x1);
  }
  return z1.real();
}

}  // namespace momtopo::test
