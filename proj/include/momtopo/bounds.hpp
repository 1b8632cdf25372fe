#pragma once

// Lower bound on the radiation Q-factor over all currents supported by the
// plate:
//   minimize 1/2 I^H W I  subject to  I^H R0 I = 1,  I^H X0 I = 0.
// Solved through the dual: for nu in (-1, 1) the pencil W + nu X0 is positive
// definite, and lambda(nu) = min I^H (W + nu X0) I / I^H R0 I is a concave
// lower bound. Bisection on the sign of I^H X0 I at the minimizer finds the
// dual maximum.

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>

#include "momtopo/core.hpp"
#include "momtopo/operators.hpp"

namespace momtopo {

struct BoundResult {
  double q_lb = 0.0;
  VecC current;  // full length, zero outside the mask
  double nu = 0.0;
  int iterations = 0;
  double constraint_residual = 0.0;     // |I^H X I| / I^H R0 I
  double normalization_residual = 0.0;  // |I^H R0 I - 1|
  double eigen_residual = 0.0;          // ||(W + nu X) I - lambda R0 I|| / ||W||
  double primal_q = 0.0;                // 1/2 I^H W I of the returned current
};

struct BoundOptions {
  double nu_tolerance = 1e-10;
  int max_iterations = 200;
};

namespace detail {

struct DualPoint {
  double lambda;
  VecR v;  // R0-normalized minimizer
  double s;  // v^T X v
};

inline DualPoint dual_point(const MatR& R, const MatR& W, const MatR& X, double nu) {
  Eigen::GeneralizedSelfAdjointEigenSolver<MatR> es(R, W + nu * X);
  if (es.info() != Eigen::Success)
    throw NumericalError(NumericalError::Kind::indefinite, "W + nu X is not positive definite at nu = " +
                                                               std::to_string(nu));
  const Eigen::Index n = R.rows();
  const double mu = es.eigenvalues()(n - 1);
  if (!(mu > 0.0)) throw NumericalError(NumericalError::Kind::rank_zero, "radiation matrix is numerically zero");
  VecR v = es.eigenvectors().col(n - 1);
  v /= std::sqrt(v.dot(R * v));
  return {1.0 / mu, v, v.dot(X * v)};
}

}  // namespace detail

/// Solves the bound on the full plate, or on the DOFs of `mask` only.
inline BoundResult solve_bound(const MatR& R0, const MatR& W, const MatR& X, const std::optional<DofList>& mask = {},
                               const BoundOptions& opt = {}) {
  const int N = static_cast<int>(R0.rows());
  if (W.rows() != N || X.rows() != N) throw InvalidArgument("bound operators differ in size");
  DofList idx;
  if (mask) {
    idx = *mask;
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    for (int i : idx)
      if (i < 0 || i >= N) throw InvalidArgument("bound mask DOF out of range");
  } else {
    idx.resize(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) idx[i] = i;
  }
  if (idx.empty()) throw InvalidArgument("bound mask is empty");
  const MatR R = R0(idx, idx), Wd = W(idx, idx), Xd = X(idx, idx);
  const double rmax = R.cwiseAbs().maxCoeff();
  if (!(rmax > 0.0)) throw NumericalError(NumericalError::Kind::rank_zero, "radiation matrix is numerically zero");

  BoundResult out;
  VecR v;
  double lambda = 0.0;
  if (Xd.cwiseAbs().maxCoeff() == 0.0) {
    const auto p = detail::dual_point(R, Wd, Xd, 0.0);
    out.nu = 0.0;
    v = p.v;
    lambda = p.lambda;
  } else {
    // I^H X I > 0 near nu = -1 (electric storage penalized), < 0 near +1
    double lo = -1.0 + 1e-9, hi = 1.0 - 1e-9;
    auto plo = detail::dual_point(R, Wd, Xd, lo);
    auto phi = detail::dual_point(R, Wd, Xd, hi);
    if (!(plo.s > 0.0) || !(phi.s < 0.0))
      throw NumericalError(NumericalError::Kind::no_sign_change,
                           "no sign change of I^H X I over nu in [" + std::to_string(lo) + ", " +
                               std::to_string(hi) + "]");
    while (hi - lo > opt.nu_tolerance && out.iterations < opt.max_iterations) {
      const double mid = 0.5 * (lo + hi);
      auto p = detail::dual_point(R, Wd, Xd, mid);
      ++out.iterations;
      if (p.s > 0.0) {
        lo = mid;
        plo = std::move(p);
      } else {
        hi = mid;
        phi = std::move(p);
      }
    }
    out.nu = 0.5 * (lo + hi);
    const auto mid = detail::dual_point(R, Wd, Xd, out.nu);
    lambda = mid.lambda;
    v = mid.v;
    if (std::abs(mid.s) > 1e-6) {
      // minimal eigenvalue (near-)degenerate across the root: mix the two
      // bracketing minimizers so that v^T X v = 0
      const VecR& a = plo.v;
      const VecR& b = phi.v;
      const double xaa = a.dot(Xd * a), xab = a.dot(Xd * b), xbb = b.dot(Xd * b);
      // (a + t b)^T X (a + t b) = xaa + 2 t xab + t^2 xbb, with xaa > 0 > xbb
      const double disc = xab * xab - xaa * xbb;
      const double t = (-xab - std::sqrt(std::max(0.0, disc))) / xbb;
      VecR c = a + t * b;
      c /= std::sqrt(c.dot(R * c));
      v = c;
    }
  }
  const double rr = v.dot(R * v);
  out.q_lb = 0.5 * lambda;
  out.primal_q = 0.5 * v.dot(Wd * v) / rr;
  out.constraint_residual = std::abs(v.dot(Xd * v)) / rr;
  out.normalization_residual = std::abs(rr - 1.0);
  const double wn = Wd.norm();
  out.eigen_residual = ((Wd + out.nu * Xd) * v - lambda * (R * v)).norm() / (wn > 0.0 ? wn : 1.0);
  out.current = VecC::Zero(N);
  for (std::size_t i = 0; i < idx.size(); ++i) out.current[idx[i]] = v[static_cast<Eigen::Index>(i)];
  return out;
}

inline BoundResult solve_bound(const OperatorSet& ops, const std::optional<DofList>& mask = {},
                               const BoundOptions& opt = {}) {
  return solve_bound(ops.R0, ops.W, ops.X0, mask, opt);
}

/// q = Q / Q_lb.
inline double normalize(double objective_value, double q_lb) {
  if (!(q_lb > 0.0)) throw InvalidArgument("bound must be positive");
  return objective_value / q_lb;
}

}  // namespace momtopo
