#include <gtest/gtest.h>

#include "support.hpp"

using namespace momtopo;

namespace {

struct Pencil {
  MatR W, R, X;
};

// W = Xm + Xe and X = Xm - Xe with Xm, Xe positive definite, so W +- X >= 0.
Pencil random_pencil(int n, std::mt19937_64& rng) {
  const MatR Xm = test::random_psd(n, rng, 0.2), Xe = test::random_psd(n, rng, 0.2);
  return {Xm + Xe, test::random_psd(n, rng, 0.05), Xm - Xe};
}

}  // namespace

TEST(Bounds, NoFeasibleSampleBeatsTheBound) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  const int n = 6;
  for (int trial = 0; trial < 3; ++trial) {
    const auto p = random_pencil(n, rng);
    const auto b = solve_bound(p.R, p.W, p.X);
    double best = infinity;
    int used = 0;
    VecR u(n), v(n);
    while (used < 1000000) {
      for (int i = 0; i < n; ++i) {
        u[i] = g(rng);
        v[i] = g(rng);
      }
      const double xu = u.dot(p.X * u), xv = v.dot(p.X * v);
      if (!(xu > 0.0 && xv < 0.0)) continue;
      // I = u + j t v has I^H X I = xu + t^2 xv = 0
      const double t = std::sqrt(-xu / xv);
      const double w = u.dot(p.W * u) + t * t * v.dot(p.W * v);
      const double r = u.dot(p.R * u) + t * t * v.dot(p.R * v);
      best = std::min(best, 0.5 * w / r);
      ++used;
    }
    EXPECT_GE(best, b.q_lb * (1.0 - 1e-3)) << "trial " << trial;
    EXPECT_LE(b.constraint_residual, 1e-8);
    EXPECT_NEAR(b.primal_q, b.q_lb, 1e-8 * b.q_lb);
  }
}

TEST(Bounds, ReturnedCurrentIsFeasibleAndOptimal) {
  std::mt19937_64 rng(2);
  const auto p = random_pencil(10, rng);
  const auto b = solve_bound(p.R, p.W, p.X);
  EXPECT_GT(b.nu, -1.0);
  EXPECT_LT(b.nu, 1.0);
  EXPECT_LE(b.normalization_residual, 1e-10);
  EXPECT_LE(b.eigen_residual, 1e-8);
  // the tuned Q of the optimal current equals the bound
  const double qt = q_untuned(b.current, p.W, p.R) + 0.5 * q_matching(b.current, p.X, p.R);
  EXPECT_NEAR(qt, b.q_lb, 1e-6 * b.q_lb);
}

TEST(Bounds, ReactanceFreePencilGivesZeroMultiplier) {
  std::mt19937_64 rng(3);
  const MatR W = test::random_psd(5, rng, 1.0), R = test::random_psd(5, rng, 0.1);
  const auto b = solve_bound(R, W, MatR::Zero(5, 5));
  EXPECT_EQ(b.nu, 0.0);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatR> es(W, R);
  EXPECT_NEAR(b.q_lb, 0.5 * es.eigenvalues()(0), 1e-10 * b.q_lb);
}

TEST(Bounds, DefiniteReactanceHasNoSignChange) {
  std::mt19937_64 rng(4);
  const MatR Xm = test::random_psd(5, rng, 1.0);
  try {
    solve_bound(test::random_psd(5, rng, 0.1), Xm, Xm);
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), NumericalError::Kind::no_sign_change);
  }
}

TEST(Bounds, ZeroRadiationRejected) {
  EXPECT_THROW(solve_bound(MatR::Zero(3, 3), MatR::Identity(3, 3), MatR::Zero(3, 3)), NumericalError);
}

TEST(Bounds, MaskedBoundIsNeverLower) {
  const auto ops = build_operators(PlateSpec{2.0, 1.0, 6, 3, 0.5});
  const auto full = solve_bound(ops);
  DofList part;
  for (int n = 0; n < ops.n_dof() * 2 / 3; ++n) part.push_back(n);
  const auto masked = solve_bound(ops, part);
  EXPECT_GE(masked.q_lb, full.q_lb * (1.0 - 1e-9));
  for (int n = static_cast<int>(part.size()); n < ops.n_dof(); ++n) EXPECT_EQ(masked.current[n], cplx(0.0));
  // every other DOF leaves a sign-definite reactance: the tuning constraint is infeasible
  DofList sparse;
  for (int n = 0; n < ops.n_dof(); n += 2) sparse.push_back(n);
  try {
    solve_bound(ops, sparse);
    ADD_FAILURE() << "expected an infeasible tuning constraint";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), NumericalError::Kind::no_sign_change);
  }
  EXPECT_THROW(solve_bound(ops, DofList{}), InvalidArgument);
  EXPECT_THROW(solve_bound(ops, DofList{ops.n_dof()}), InvalidArgument);
}

TEST(Bounds, HalfWavelengthPlateAtKaHalfIsInReferenceBand) {
  const auto ops = build_operators(PlateSpec{2.0, 1.0, 16, 8, 0.5});
  const auto b = solve_bound(ops);
  EXPECT_GE(b.q_lb, 30.9);
  EXPECT_LE(b.q_lb, 41.7);
  EXPECT_LE(b.constraint_residual, 1e-8);
}

TEST(Bounds, BoundDecreasesWithElectricalSize) {
  const auto small = solve_bound(build_operators(PlateSpec{2.0, 1.0, 6, 3, 0.4}));
  const auto large = solve_bound(build_operators(PlateSpec{2.0, 1.0, 6, 3, 0.6}));
  EXPECT_GT(small.q_lb, large.q_lb);
  // Q_lb scales close to (ka)^-3 for small plates
  const double slope = std::log(small.q_lb / large.q_lb) / std::log(0.6 / 0.4);
  EXPECT_NEAR(slope, 3.0, 0.5);
}
