#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace momtopo;
using test::direct_solve;
using test::rel_err;

namespace {

struct System {
  MatC Z;
  VecC V;
};

System random_system(int n, std::mt19937_64& rng) {
  return {test::random_symmetric_system(n, rng), test::random_vector(n, rng)};
}

// Objective mixing every channel type: a ratio of quadratic forms plus a
// linear far-field-like term.
Objective mixed_objective(int n, std::mt19937_64& rng) {
  const MatR A = test::random_psd(n, rng, 0.1);
  const MatR B = test::random_psd(n, rng, 1.0);
  RowC b(n);
  const VecC bv = test::random_vector(n, rng);
  b = bv.transpose();
  return Objective({A, B}, {b}, [](const double* q, const cplx* l) { return 0.5 * q[0] / q[1] + 0.1 * std::norm(l[0]); });
}

}  // namespace

TEST(Reanalysis, FullGeneMatchesDenseSolve) {
  std::mt19937_64 rng(1);
  const auto sys = random_system(6, rng);
  const auto s = init_state(sys.Z, sys.V, {0, 1, 2, 3, 4, 5});
  const VecC ref = sys.Z.partialPivLu().solve(sys.V);
  EXPECT_LE(rel_err(s.I, ref), 1e-12);
}

TEST(Reanalysis, RemovalMatchesTruncatedSolve) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sys = random_system(8, rng);
    const auto s = init_state(sys.Z, sys.V, {0, 1, 2, 3, 4, 5, 6, 7});
    for (int r = 0; r < 8; ++r) {
      const auto p = remove_current(s, r);
      EXPECT_LE(rel_err(p.I, direct_solve(sys.Z, sys.V, p.active)), 1e-10);
      EXPECT_EQ(p.active.size(), 7u);
    }
  }
}

TEST(Reanalysis, AdditionMatchesEnlargedSolve) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sys = random_system(9, rng);
    const DofList active = test::random_subset(9, 8, rng);
    const auto s = init_state(sys.Z, sys.V, active);
    for (int a = 0; a < 9; ++a) {
      if (s.is_active(a)) continue;
      const auto p = add_current(s, a);
      EXPECT_EQ(p.active, (DofList{0, 1, 2, 3, 4, 5, 6, 7, 8}));
      EXPECT_LE(rel_err(p.I, direct_solve(sys.Z, sys.V, p.active)), 1e-10);
    }
  }
}

TEST(Reanalysis, RemoveThenAddRestoresCurrent) {
  std::mt19937_64 rng(4);
  const auto sys = random_system(8, rng);
  auto s = init_state(sys.Z, sys.V, {0, 1, 2, 3, 4, 5, 6, 7});
  const VecC I0 = s.I;
  for (int r = 0; r < 8; ++r) {
    auto t = s;
    commit_remove(t, r);
    const auto p = add_current(t, r);
    EXPECT_LE(rel_err(p.I, I0), 1e-9);
  }
}

TEST(Reanalysis, CommitsMatchFromScratchState) {
  std::mt19937_64 rng(5);
  const int n = 12;
  const auto sys = random_system(n, rng);
  const auto obj = mixed_objective(n, rng);
  auto s = init_state(sys.Z, sys.V, test::random_subset(n, 7, rng), &obj);
  for (int step = 0; step < 6; ++step) {
    DofList cand_r = s.active, cand_a;
    for (int i = 0; i < n; ++i)
      if (!s.is_active(i)) cand_a.push_back(i);
    if (step % 2 == 0 && !cand_a.empty())
      commit_add(s, cand_a[rng() % cand_a.size()]);
    else
      commit_remove(s, cand_r[rng() % cand_r.size()]);
    const auto ref = init_state(sys.Z, sys.V, s.active, &obj);
    EXPECT_LE(test::rel_err_mat(s.Y, ref.Y), 1e-8);
    EXPECT_LE(rel_err(s.I, ref.I), 1e-8);
    for (int c = 0; c < obj.n_quadratic(); ++c) EXPECT_LE(test::rel_err_mat(s.P[c], ref.P[c]), 1e-8);
    EXPECT_NEAR(s.f, ref.f, 1e-8 * std::abs(ref.f));
  }
}

TEST(Reanalysis, FiftyRandomUpdatesStayWithinDriftTolerance) {
  std::mt19937_64 rng(6);
  const int n = 20;
  const auto sys = random_system(n, rng);
  const auto obj = mixed_objective(n, rng);
  auto s = init_state(sys.Z, sys.V, test::random_subset(n, 10, rng), &obj);
  for (int step = 0; step < 50; ++step) {
    const int d = static_cast<int>(rng() % n);
    if (s.is_active(d)) {
      if (s.size() > 1) commit_remove(s, d);
    } else {
      commit_add(s, d);
    }
  }
  const auto ref = init_state(sys.Z, sys.V, s.active, &obj);
  EXPECT_LE(test::rel_err_mat(s.Y, ref.Y), 1e-8);
  EXPECT_LE(rel_err(s.I, ref.I), 1e-8);
}

TEST(Reanalysis, AlternatingCommitsKeepInverseAccurate) {
  std::mt19937_64 rng(7);
  const int n = 16;
  const auto sys = random_system(n, rng);
  auto s = init_state(sys.Z, sys.V, test::random_subset(n, 8, rng));
  for (int step = 0; step < 30; ++step) {
    DofList pool;
    for (int i = 0; i < n; ++i)
      if (s.is_active(i) == (step % 2 == 1)) pool.push_back(i);
    const int d = pool[rng() % pool.size()];
    if (step % 2 == 1)
      commit_remove(s, d);
    else
      commit_add(s, d);
    const MatC ZE = sys.Z(s.active, s.active);
    EXPECT_LE((s.Y * ZE - MatC::Identity(s.size(), s.size())).norm(), 1e-7);
  }
}

TEST(Reanalysis, SensitivityEqualsBruteForceDifference) {
  std::mt19937_64 rng(8);
  const int n = 10;
  for (int trial = 0; trial < 10; ++trial) {
    const auto sys = random_system(n, rng);
    const auto obj = mixed_objective(n, rng);
    const auto s = init_state(sys.Z, sys.V, test::random_subset(n, 6, rng), &obj);
    DofList R, A;
    candidate_sets(s, std::vector<bool>(n, false), R, A);
    const auto map = sweep_sensitivity(s, R, A);
    ASSERT_EQ(map.entries.size(), 10u);
    for (const auto& e : map.entries) {
      DofList act = s.active;
      if (e.action == Action::remove)
        act.erase(std::find(act.begin(), act.end(), e.dof));
      else
        act.insert(std::lower_bound(act.begin(), act.end(), e.dof), e.dof);
      const double f = obj.evaluate(act, direct_solve(sys.Z, sys.V, act));
      ASSERT_FALSE(e.excluded);
      EXPECT_NEAR(e.tau, f - s.f, 1e-9 * std::max(1.0, std::abs(s.f)));
    }
  }
}

TEST(Reanalysis, SensitivityOnPlateOperators) {
  const auto ops = build_operators(test::toy12_plate());
  const Objective obj(ops, ObjectiveSpec::tuned_q());
  const auto p = make_parameterization(ops.n_dof(), ops.fixed);
  std::mt19937_64 rng(9);
  Gene g(p);
  for (int b = 0; b < g.n_opt(); ++b) g.set(b, rng() & 1);
  const auto s = init_state(ops, g, &obj);
  std::vector<bool> fixed(ops.n_dof(), false);
  for (int f : ops.fixed) fixed[f] = true;
  DofList R, A;
  candidate_sets(s, fixed, R, A);
  const auto map = sweep_sensitivity(s, R, A, 2);
  for (const auto& e : map.entries) {
    const double direct = evaluate_gene(flip(g, p->bit_of(e.dof)), ops, obj);
    EXPECT_NEAR(e.tau, direct - s.f, 1e-9 * s.f) << e.dof;
  }
}

TEST(Reanalysis, TruncationEqualsSelectionProduct) {
  std::mt19937_64 rng(10);
  const MatR A = test::random_symmetric(6, rng);
  const DofList idx{1, 2, 5};
  MatR C = MatR::Zero(6, 3);
  for (int i = 0; i < 3; ++i) C(idx[i], i) = 1.0;
  EXPECT_LE((truncate_operator(A, idx) - C.transpose() * A * C).norm(), 1e-15);
  EXPECT_THROW(truncate_operator(A, {6}), InvalidArgument);
}

TEST(Reanalysis, InvalidUpdatesRejected) {
  std::mt19937_64 rng(11);
  const auto sys = random_system(5, rng);
  auto s = init_state(sys.Z, sys.V, {1, 3});
  EXPECT_THROW(remove_current(s, 0), InvalidArgument);
  EXPECT_THROW(add_current(s, 1), InvalidArgument);
  EXPECT_THROW(commit_add(s, 5), InvalidArgument);
  commit_remove(s, 1);
  EXPECT_THROW(commit_remove(s, 3), InvalidArgument);
  EXPECT_THROW(init_state(sys.Z, sys.V, {}), InvalidArgument);
}

TEST(Reanalysis, SingularSystemRaisesNumericalError) {
  MatC Z = MatC::Zero(3, 3);
  Z(0, 0) = 1.0;
  const VecC V = VecC::Ones(3);
  EXPECT_THROW(init_state(Z, V, {0, 1}), NumericalError);
}

TEST(Reanalysis, SensitivityCsvHasOneRowPerCandidate) {
  std::mt19937_64 rng(12);
  const auto sys = random_system(6, rng);
  const auto obj = test::ratio_objective(test::random_psd(6, rng, 0.1), test::random_psd(6, rng, 1.0));
  const auto s = init_state(sys.Z, sys.V, {0, 2, 4}, &obj);
  const auto map = sweep_sensitivity(s, {0, 2, 4}, {1, 3, 5});
  const auto path = (std::filesystem::temp_directory_path() / "momtopo_sens.csv").string();
  write_sensitivity_csv(path, map);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "dof,action,tau");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6);
  std::filesystem::remove(path);
}
