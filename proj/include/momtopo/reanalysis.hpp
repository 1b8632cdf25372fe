#pragma once

// Inversion-free exact reanalysis of Z I = V under single-DOF removals and
// additions. One dense inversion per state; every later change is a rank-1
// update of the admittance matrix Y = Z_E^{-1} over the active DOFs E.
//
// When an Objective is attached the state also maintains, per quadratic
// channel A, the product P = A_E Y, and per linear channel b the row b_E Y.
// With those a removal candidate is scored in O(M) and the whole removal sweep
// costs one matrix-vector product.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "momtopo/core.hpp"
#include "momtopo/metrics.hpp"
#include "momtopo/operators.hpp"
#include "momtopo/parallel.hpp"
#include "momtopo/shapes.hpp"

namespace momtopo {

/// Gathers the block of A on `idx` (candidate-local ordering).
template <class Mat>
Mat truncate_operator(const Mat& A, const DofList& idx) {
  for (int i : idx)
    if (i < 0 || i >= A.rows() || i >= A.cols()) throw InvalidArgument("truncation index out of range");
  return A(idx, idx);
}

struct ReanalysisState {
  // borrowed full system; must outlive the state
  const MatC* Z = nullptr;
  const VecC* V_full = nullptr;
  const Objective* objective = nullptr;

  DofList active;          // set G, ascending
  std::vector<int> local;  // global DOF -> row of Y, -1 when inactive
  MatC Y;
  VecC V;
  VecC I;

  std::vector<MatC> P;   // A_E Y per quadratic channel
  std::vector<RowC> bY;  // b_E Y per linear channel
  std::vector<double> q; // I^H A_E I
  std::vector<cplx> l;   // b_E I
  double f = std::numeric_limits<double>::quiet_NaN();

  double drift_tolerance = 1e-9;
  double baseline_residual = 0.0;
  double last_residual = 0.0;
  int commits = 0;
  int refreshes = 0;

  int size() const { return static_cast<int>(active.size()); }
  int n_dof() const { return static_cast<int>(local.size()); }
  bool is_active(DofIndex n) const { return n >= 0 && n < n_dof() && local[n] >= 0; }
};

/// A perturbed current together with the DOF set it lives on.
struct Perturbed {
  DofList active;
  VecC I;
};

namespace detail {

inline void rebuild_local(ReanalysisState& s) {
  std::fill(s.local.begin(), s.local.end(), -1);
  for (int i = 0; i < s.size(); ++i) s.local[s.active[i]] = i;
}

template <class Mat>
void erase_row_col(Mat& A, int k) {
  const Eigen::Index n = A.rows();
  const Eigen::Index tail = n - k - 1;
  if (tail > 0) {
    A.block(k, 0, tail, n) = A.block(k + 1, 0, tail, n).eval();
    A.block(0, k, n, tail) = A.block(0, k + 1, n, tail).eval();
  }
  A.conservativeResize(n - 1, n - 1);
}

template <class Vec>
void erase_entry(Vec& v, int k) {
  const Eigen::Index n = v.size();
  if (n - k - 1 > 0) v.segment(k, n - k - 1) = v.segment(k + 1, n - k - 1).eval();
  v.conservativeResize(n - 1);
}

/// Builds the (n+1)x(n+1) matrix [[TL, col], [row, corner]] with the new
/// index placed at `pos`.
inline MatC insert_row_col(const MatC& TL, const VecC& col, const RowC& row, cplx corner, int pos) {
  const int n = static_cast<int>(TL.rows());
  MatC out(n + 1, n + 1);
  const int a = pos, b = n - pos;
  out.block(0, 0, a, a) = TL.block(0, 0, a, a);
  out.block(0, a + 1, a, b) = TL.block(0, a, a, b);
  out.block(a + 1, 0, b, a) = TL.block(a, 0, b, a);
  out.block(a + 1, a + 1, b, b) = TL.block(a, a, b, b);
  out.col(a).head(a) = col.head(a);
  out.col(a).tail(b) = col.tail(b);
  out.row(a).head(a) = row.head(a);
  out.row(a).tail(b) = row.tail(b);
  out(a, a) = corner;
  return out;
}

template <class Vec, class S>
Vec insert_entry(const Vec& v, int pos, S value) {
  const int n = static_cast<int>(v.size());
  Vec out(n + 1);
  out.head(pos) = v.head(pos);
  out[pos] = value;
  out.tail(n - pos) = v.tail(n - pos);
  return out;
}

inline double max_abs(const MatC& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

inline void refresh_channels(ReanalysisState& s) {
  if (!s.objective) return;
  const auto& obj = *s.objective;
  s.q.resize(obj.n_quadratic());
  s.l.resize(obj.n_linear());
  for (int c = 0; c < obj.n_quadratic(); ++c) s.q[c] = s.I.dot(s.P[c] * s.V).real();
  for (int c = 0; c < obj.n_linear(); ++c) s.l[c] = (s.bY[c] * s.V)(0);
  try {
    s.f = obj.combine(s.q.data(), s.l.data());
  } catch (const NumericalError&) {
    s.f = std::numeric_limits<double>::infinity();
  }
}

inline void build_caches(ReanalysisState& s) {
  s.P.clear();
  s.bY.clear();
  if (!s.objective) return;
  const auto& obj = *s.objective;
  for (int c = 0; c < obj.n_quadratic(); ++c) {
    if (obj.quadratic(c).rows() != s.n_dof()) throw InvalidArgument("objective size does not match the system");
    const MatR A = obj.quadratic(c)(s.active, s.active);
    s.P.push_back(A.cast<cplx>() * s.Y);
  }
  for (int c = 0; c < obj.n_linear(); ++c) {
    if (obj.linear(c).size() != s.n_dof()) throw InvalidArgument("objective size does not match the system");
    RowC b(s.size());
    for (int i = 0; i < s.size(); ++i) b[i] = obj.linear(c)[s.active[i]];
    s.bY.push_back(b * s.Y);
  }
  refresh_channels(s);
}

/// Relative residual ||Y Z_E p - p|| / ||p|| for the all-ones probe p.
inline double probe_residual(const ReanalysisState& s) {
  const int M = s.size();
  VecC zp = VecC::Zero(M);
  for (int i = 0; i < M; ++i) {
    cplx acc = 0.0;
    for (int j = 0; j < M; ++j) acc += (*s.Z)(s.active[i], s.active[j]);
    zp[i] = acc;
  }
  return (s.Y * zp - VecC::Ones(M)).norm() / std::sqrt(static_cast<double>(M));
}

}  // namespace detail

/// Factorizes the truncated system from scratch and rebuilds every cache.
inline void refresh(ReanalysisState& s) {
  const MatC ZE = (*s.Z)(s.active, s.active);
  Eigen::PartialPivLU<MatC> lu(ZE);
  // rcond alone misses exactly zero pivots, so check the U diagonal too
  const auto piv = lu.matrixLU().diagonal().cwiseAbs();
  const double rc = piv.maxCoeff() > 0.0 ? std::min(lu.rcond(), piv.minCoeff() / piv.maxCoeff()) : 0.0;
  if (!(rc > 1e-15))
    throw NumericalError(NumericalError::Kind::singular_system,
                         "truncated impedance matrix is singular (rcond estimate " + std::to_string(rc) + ")");
  s.Y = lu.inverse();
  s.Y = (0.5 * (s.Y + s.Y.transpose())).eval();
  s.V = (*s.V_full)(s.active);
  s.I = s.Y * s.V;
  detail::build_caches(s);
  s.baseline_residual = detail::probe_residual(s);
  s.last_residual = s.baseline_residual;
  ++s.refreshes;
}

/// State for Z I = V restricted to `active`. Z and V are borrowed.
inline ReanalysisState init_state(const MatC& Z, const VecC& V, DofList active, const Objective* objective = nullptr) {
  const int N = static_cast<int>(Z.rows());
  if (Z.cols() != N || V.size() != N) throw InvalidArgument("system dimensions disagree");
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());
  if (active.empty()) throw InvalidArgument("active set is empty");
  if (active.front() < 0 || active.back() >= N) throw InvalidArgument("active DOF out of range");
  ReanalysisState s;
  s.Z = &Z;
  s.V_full = &V;
  s.objective = objective;
  s.active = std::move(active);
  s.local.assign(static_cast<std::size_t>(N), -1);
  detail::rebuild_local(s);
  refresh(s);
  return s;
}

inline ReanalysisState init_state(const OperatorSet& ops, const Gene& gene, const Objective* objective = nullptr) {
  if (gene.n_dof() != ops.n_dof()) throw InvalidArgument("gene does not match the operator set");
  return init_state(ops.Z, ops.V, gene.active_dofs(), objective);
}

/// Attaches (or replaces) the objective and rebuilds its caches, O(M^3).
inline void attach_objective(ReanalysisState& s, const Objective* objective) {
  s.objective = objective;
  detail::build_caches(s);
}

/// Current after removing DOF r: I - (I_r / Y_rr) y_r without entry r.
inline Perturbed remove_current(const ReanalysisState& s, DofIndex r) {
  if (!s.is_active(r)) throw InvalidArgument("DOF " + std::to_string(r) + " is not active");
  const int k = s.local[r];
  const cplx yrr = s.Y(k, k);
  if (!(std::abs(yrr) >= 1e-14 * detail::max_abs(s.Y)))
    throw NumericalError(NumericalError::Kind::degenerate_pivot, "degenerate pivot Y_rr for DOF " + std::to_string(r));
  Perturbed out;
  out.active = s.active;
  out.active.erase(out.active.begin() + k);
  VecC I = s.I - (s.I[k] / yrr) * s.Y.col(k);
  detail::erase_entry(I, k);
  out.I = std::move(I);
  return out;
}

/// Current after adding DOF a: [I - i_a x_a; i_a] with x_a = Y z_a,
/// s = Z_aa - z_a^T x_a and i_a = (V_a - z_a^T I) / s, in sorted order.
inline Perturbed add_current(const ReanalysisState& s, DofIndex a) {
  if (a < 0 || a >= s.n_dof()) throw InvalidArgument("DOF out of range");
  if (s.is_active(a)) throw InvalidArgument("DOF " + std::to_string(a) + " is already active");
  const VecC z = (*s.Z)(s.active, a);
  const VecC x = s.Y * z;
  const cplx zaa = (*s.Z)(a, a);
  const cplx schur = zaa - (z.transpose() * x)(0);
  if (!(std::abs(schur) >= 1e-14 * std::abs(zaa)))
    throw NumericalError(NumericalError::Kind::degenerate_schur,
                         "degenerate Schur complement for DOF " + std::to_string(a));
  const cplx ia = ((*s.V_full)[a] - (z.transpose() * s.I)(0)) / schur;
  const int pos = static_cast<int>(std::lower_bound(s.active.begin(), s.active.end(), a) - s.active.begin());
  Perturbed out;
  out.active = s.active;
  out.active.insert(out.active.begin() + pos, a);
  out.I = detail::insert_entry<VecC>(s.I - ia * x, pos, ia);
  return out;
}

// ---------------------------------------------------------------------------
// Commits

namespace detail {

inline void after_commit(ReanalysisState& s) {
  ++s.commits;
  refresh_channels(s);
  s.last_residual = probe_residual(s);
  if (s.last_residual > std::max(s.drift_tolerance, 10.0 * s.baseline_residual)) refresh(s);
}

}  // namespace detail

inline void commit_remove(ReanalysisState& s, DofIndex r) {
  if (!s.is_active(r)) throw InvalidArgument("DOF " + std::to_string(r) + " is not active");
  if (s.size() == 1) throw InvalidArgument("cannot remove the last active DOF");
  const int k = s.local[r];
  const cplx yrr = s.Y(k, k);
  if (!(std::abs(yrr) >= 1e-14 * detail::max_abs(s.Y)))
    throw NumericalError(NumericalError::Kind::degenerate_pivot, "degenerate pivot Y_rr for DOF " + std::to_string(r));
  const VecC y = s.Y.col(k);
  const RowC yt = y.transpose() / yrr;

  for (auto& P : s.P) {
    const VecC pk = P.col(k);
    P.noalias() -= pk * yt;
    detail::erase_row_col(P, k);
  }
  for (auto& b : s.bY) {
    const cplx bk = b[k];
    b -= bk * yt;
    detail::erase_entry(b, k);
  }
  s.I -= (s.I[k] / yrr) * y;
  s.Y.noalias() -= y * yt;
  detail::erase_row_col(s.Y, k);
  detail::erase_entry(s.I, k);
  detail::erase_entry(s.V, k);
  s.active.erase(s.active.begin() + k);
  detail::rebuild_local(s);
  detail::after_commit(s);
}

inline void commit_add(ReanalysisState& s, DofIndex a) {
  if (a < 0 || a >= s.n_dof()) throw InvalidArgument("DOF out of range");
  if (s.is_active(a)) throw InvalidArgument("DOF " + std::to_string(a) + " is already active");
  const VecC z = (*s.Z)(s.active, a);
  const VecC x = s.Y * z;
  const cplx zaa = (*s.Z)(a, a);
  const cplx schur = zaa - (z.transpose() * x)(0);
  if (!(std::abs(schur) >= 1e-14 * std::abs(zaa)))
    throw NumericalError(NumericalError::Kind::degenerate_schur,
                         "degenerate Schur complement for DOF " + std::to_string(a));
  const cplx ia = ((*s.V_full)[a] - (z.transpose() * s.I)(0)) / schur;
  const int pos = static_cast<int>(std::lower_bound(s.active.begin(), s.active.end(), a) - s.active.begin());
  const RowC xt = x.transpose() / schur;

  if (s.objective) {
    const auto& obj = *s.objective;
    for (int c = 0; c < obj.n_quadratic(); ++c) {
      const MatR& A = obj.quadratic(c);
      VecC alpha(s.size());
      for (int i = 0; i < s.size(); ++i) alpha[i] = A(s.active[i], a);
      const cplx aaa = A(a, a);
      MatC& P = s.P[c];
      const VecC Pz = P * z;
      const RowC aY = alpha.transpose() * s.Y;
      const cplx ax = (alpha.transpose() * x)(0);
      const VecC d = Pz - alpha;
      MatC TL = P;
      TL.noalias() += d * xt;
      P = detail::insert_row_col(TL, -d / schur, aY + (ax - aaa) * xt, (aaa - ax) / schur, pos);
    }
    for (int c = 0; c < obj.n_linear(); ++c) {
      const cplx ba = obj.linear(c)[a];
      RowC& b = s.bY[c];
      const cplx bx = (b * z)(0);
      const RowC top = b + (bx - ba) * xt;
      b = detail::insert_entry<RowC>(top, pos, (ba - bx) / schur);
    }
  }

  MatC TL = s.Y;
  TL.noalias() += x * xt;
  s.Y = detail::insert_row_col(TL, -x / schur, -xt, 1.0 / schur, pos);
  s.I = detail::insert_entry<VecC>(s.I - ia * x, pos, ia);
  s.V = detail::insert_entry<VecC>(s.V, pos, (*s.V_full)[a]);
  s.active.insert(s.active.begin() + pos, a);
  detail::rebuild_local(s);
  detail::after_commit(s);
}

// ---------------------------------------------------------------------------
// Sensitivity sweep

enum class Action { remove, add };

inline const char* to_string(Action a) { return a == Action::remove ? "remove" : "add"; }

struct SensitivityEntry {
  DofIndex dof = 0;
  Action action = Action::remove;
  double tau = 0.0;       // f(perturbed) - f(current); NaN when excluded
  bool excluded = false;  // degenerate pivot or non-evaluable objective
  std::string reason;
};

struct SensitivityMap {
  double objective_current = 0.0;
  std::vector<SensitivityEntry> entries;  // removals ascending, then additions ascending

  /// Most negative tau; ties go to the lowest DOF, removals before additions.
  /// Returns -1 when no candidate improves the objective.
  int best() const {
    int best = -1;
    for (int e = 0; e < static_cast<int>(entries.size()); ++e) {
      const auto& c = entries[e];
      if (c.excluded || !(c.tau < 0.0)) continue;
      if (best < 0) {
        best = e;
        continue;
      }
      const auto& b = entries[best];
      if (c.tau < b.tau || (c.tau == b.tau && (c.dof < b.dof || (c.dof == b.dof && c.action < b.action))))
        best = e;
    }
    return best;
  }
};

/// Removal candidates (active, not fixed) and addition candidates (inactive).
inline void candidate_sets(const ReanalysisState& s, const std::vector<bool>& fixed_mask, DofList& removable,
                           DofList& addable) {
  removable.clear();
  addable.clear();
  for (int n = 0; n < s.n_dof(); ++n) {
    const bool fixed = n < static_cast<int>(fixed_mask.size()) && fixed_mask[n];
    if (s.local[n] >= 0) {
      if (!fixed) removable.push_back(n);
    } else if (!fixed) {
      addable.push_back(n);
    }
  }
}

/// Scores every candidate in `removable` and `addable` with the state's
/// objective. Removals cost O(M) each, additions O(M^2) each.
inline SensitivityMap sweep_sensitivity(const ReanalysisState& s, const DofList& removable, const DofList& addable,
                                        int threads = 1) {
  if (!s.objective) throw InvalidArgument("sweep requires an objective attached to the state");
  const auto& obj = *s.objective;
  const int nq = obj.n_quadratic();
  const int nl = obj.n_linear();
  const int M = s.size();
  SensitivityMap map;
  map.objective_current = s.f;
  map.entries.resize(removable.size() + addable.size());

  auto score = [&](SensitivityEntry& e, const std::vector<double>& q, const std::vector<cplx>& l) {
    try {
      const double f = obj.combine(q.data(), l.data());
      e.tau = f - s.f;
      if (!std::isfinite(e.tau)) {
        e.excluded = true;
        e.reason = "non-finite objective";
      }
    } catch (const NumericalError& err) {
      e.excluded = true;
      e.tau = std::numeric_limits<double>::quiet_NaN();
      e.reason = err.what();
    }
  };

  // removals
  if (!removable.empty()) {
    std::vector<RowC> t(static_cast<std::size_t>(nq));
    for (int c = 0; c < nq; ++c) t[c] = s.I.adjoint() * s.P[c];
    const double ymax = detail::max_abs(s.Y);
    const int nr = static_cast<int>(removable.size());
    parallel_for(nr, threads, [&](int begin, int end, int) {
      std::vector<double> q(static_cast<std::size_t>(nq));
      std::vector<cplx> l(static_cast<std::size_t>(nl));
      for (int idx = begin; idx < end; ++idx) {
        auto& e = map.entries[idx];
        e.dof = removable[idx];
        e.action = Action::remove;
        if (!s.is_active(e.dof)) throw InvalidArgument("removal candidate is not active");
        const int k = s.local[e.dof];
        const cplx yrr = s.Y(k, k);
        if (M == 1 || !(std::abs(yrr) >= 1e-14 * ymax)) {
          e.excluded = true;
          e.tau = std::numeric_limits<double>::quiet_NaN();
          e.reason = M == 1 ? "would empty the structure" : "degenerate pivot";
          continue;
        }
        const cplx c = s.I[k] / yrr;
        for (int ch = 0; ch < nq; ++ch) {
          const double yay = s.Y.col(k).dot(s.P[ch].col(k)).real();
          q[ch] = s.q[ch] - 2.0 * (c * t[ch][k]).real() + std::norm(c) * yay;
        }
        for (int ch = 0; ch < nl; ++ch) l[ch] = s.l[ch] - c * s.bY[ch][k];
        score(e, q, l);
      }
    });
  }

  // additions
  if (!addable.empty()) {
    const int na = static_cast<int>(addable.size());
    for (int a : addable)
      if (a < 0 || a >= s.n_dof() || s.is_active(a)) throw InvalidArgument("addition candidate is not inactive");
    const MatC Zea = (*s.Z)(s.active, addable);
    const MatC X = s.Y * Zea;
    std::vector<MatC> Wc(static_cast<std::size_t>(nq));
    std::vector<MatR> Alpha(static_cast<std::size_t>(nq));
    std::vector<VecC> alphaI(static_cast<std::size_t>(nq));
    for (int c = 0; c < nq; ++c) {
      Wc[c] = s.P[c] * Zea;
      Alpha[c] = obj.quadratic(c)(s.active, addable);
      alphaI[c] = Alpha[c].transpose().cast<cplx>() * s.I;
    }
    std::vector<RowC> bz(static_cast<std::size_t>(nl));
    for (int c = 0; c < nl; ++c) bz[c] = s.bY[c] * Zea;
    const RowC zI = s.I.transpose() * Zea;
    const int off = static_cast<int>(removable.size());

    parallel_for(na, threads, [&](int begin, int end, int) {
      std::vector<double> q(static_cast<std::size_t>(nq));
      std::vector<cplx> l(static_cast<std::size_t>(nl));
      for (int t = begin; t < end; ++t) {
        auto& e = map.entries[off + t];
        const int a = addable[t];
        e.dof = a;
        e.action = Action::add;
        const cplx zaa = (*s.Z)(a, a);
        const cplx schur = zaa - Zea.col(t).cwiseProduct(X.col(t)).sum();
        if (!(std::abs(schur) >= 1e-14 * std::abs(zaa))) {
          e.excluded = true;
          e.tau = std::numeric_limits<double>::quiet_NaN();
          e.reason = "degenerate Schur complement";
          continue;
        }
        const cplx ia = ((*s.V_full)[a] - zI[t]) / schur;
        for (int c = 0; c < nq; ++c) {
          const cplx IAx = s.I.dot(Wc[c].col(t));
          const double xAx = X.col(t).dot(Wc[c].col(t)).real();
          const double uAu = s.q[c] - 2.0 * (ia * IAx).real() + std::norm(ia) * xAx;
          const cplx ax = Alpha[c].col(t).cast<cplx>().dot(X.col(t));
          const cplx au = alphaI[c][t] - ia * ax;
          q[c] = uAu + 2.0 * (std::conj(ia) * au).real() + std::norm(ia) * obj.quadratic(c)(a, a);
        }
        for (int c = 0; c < nl; ++c) l[c] = s.l[c] - ia * bz[c][t] + obj.linear(c)[a] * ia;
        score(e, q, l);
      }
    });
  }
  return map;
}

/// CSV rows `dof,action,tau`; excluded candidates carry an empty tau.
inline void write_sensitivity_csv(const std::string& path, const SensitivityMap& map) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.precision(17);
  out << "dof,action,tau\n";
  for (const auto& e : map.entries) {
    out << e.dof << ',' << to_string(e.action) << ',';
    if (!e.excluded) out << e.tau;
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace momtopo
