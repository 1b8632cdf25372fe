#pragma once

// Power, energy and port metrics, sub-region and coupling operators, and the
// weighted composite objective.
//
// Every quadratic form here is in watts: P = 1/2 I^H A I.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "momtopo/core.hpp"
#include "momtopo/operators.hpp"

namespace momtopo {

namespace detail {

inline void check_len(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) throw InvalidArgument(std::string("dimension mismatch in ") + what);
}

inline double guarded_div(double num, double den, NumericalError::Kind kind, const char* what) {
  if (!(std::abs(den) >= 1e-300)) throw NumericalError(kind, what);
  return num / den;
}

}  // namespace detail

/// 1/2 I^H A I for any (real or complex) square A.
template <class Derived>
cplx quadratic_form(const Eigen::MatrixBase<Derived>& A, const VecC& I) {
  detail::check_len(A.rows(), I.size(), "quadratic_form");
  detail::check_len(A.cols(), I.size(), "quadratic_form");
  return 0.5 * I.dot(A.template cast<cplx>() * I);
}

/// Real part of 1/2 I^H A I for real symmetric A, without complex promotion of A.
inline double quadratic_form_real(const MatR& A, const VecC& I) {
  detail::check_len(A.rows(), I.size(), "quadratic_form");
  const VecR re = I.real(), im = I.imag();
  return 0.5 * (re.dot(A * re) + im.dot(A * im));
}

/// 1/2 I^H V.
inline cplx complex_power(const VecC& I, const VecC& V) {
  detail::check_len(I.size(), V.size(), "complex_power");
  return 0.5 * I.dot(V);
}

inline double radiated_power(const MatR& R0, const VecC& I) { return quadratic_form_real(R0, I); }

/// 1/2 |U1 I|^2, the low-rank form of the radiated power.
inline double radiated_power_linear(const MatR& U1, const VecC& I) {
  detail::check_len(U1.cols(), I.size(), "radiated_power_linear");
  return 0.5 * (U1 * I).squaredNorm();
}

/// Ohmic loss in the material plus the series resistances of lumped ports.
inline double lost_power(const VecC& I, const MatR& Rrho, const VecC& ZL) {
  double p = 0.0;
  if (Rrho.size()) p += quadratic_form_real(Rrho, I);
  if (ZL.size()) {
    detail::check_len(ZL.size(), I.size(), "lost_power");
    for (Eigen::Index l = 0; l < ZL.size(); ++l) p += 0.5 * std::norm(I[l]) * ZL[l].real();
  }
  return p;
}

/// Q_U = 1/2 I^H W I / I^H R0 I.
inline double q_untuned(const VecC& I, const MatR& W, const MatR& R0) {
  const double pr = quadratic_form_real(R0, I);
  return detail::guarded_div(0.5 * quadratic_form_real(W, I), pr, NumericalError::Kind::non_radiating,
                             "non-radiating current");
}

/// Q_E = |I^H X I| / I^H R0 I.
inline double q_matching(const VecC& I, const MatR& X, const MatR& R0) {
  const double pr = quadratic_form_real(R0, I);
  return detail::guarded_div(std::abs(quadratic_form_real(X, I)), pr, NumericalError::Kind::non_radiating,
                             "non-radiating current");
}

/// Radiation intensity |F I|^2 / (2 eta0) for one far-field row.
inline double radiation_intensity(const RowC& F, const VecC& I) {
  detail::check_len(F.size(), I.size(), "radiation_intensity");
  return std::norm((F * I)(0)) / (2.0 * constants::eta0);
}

inline cplx port_current(const VecC& I, DofIndex n) {
  if (n < 0 || n >= I.size()) throw InvalidArgument("port DOF out of range");
  return I[n];
}

/// Port share of the complex power, I^H Z I / |I_n|^2. For a single delta gap
/// driving Z I = V this equals V_n / I_n.
inline cplx input_impedance(const VecC& I, const MatC& Z, DofIndex n) {
  const cplx in = port_current(I, n);
  if (!(std::norm(in) >= 1e-300)) throw NumericalError(NumericalError::Kind::open_port, "zero port current");
  return I.dot(Z * I) / std::norm(in);
}

/// A_D: A with every row and column outside D zeroed.
template <class Mat>
Mat subregion_operator(const Mat& A, const DofList& D) {
  Mat out = Mat::Zero(A.rows(), A.cols());
  for (int m : D) {
    if (m < 0 || m >= A.rows()) throw InvalidArgument("sub-region DOF out of range");
    for (int n : D) out(m, n) = A(m, n);
  }
  return out;
}

/// A_12: rows from D1, columns from D2, zero elsewhere. D1 and D2 must be disjoint.
template <class Mat>
Mat coupling_operator(const Mat& A, const DofList& D1, const DofList& D2) {
  std::vector<bool> in1(static_cast<std::size_t>(A.rows()), false);
  for (int m : D1) {
    if (m < 0 || m >= A.rows()) throw InvalidArgument("coupling DOF out of range");
    in1[m] = true;
  }
  for (int n : D2) {
    if (n < 0 || n >= A.cols()) throw InvalidArgument("coupling DOF out of range");
    if (in1[n]) throw InvalidArgument("coupling regions overlap at DOF " + std::to_string(n));
  }
  Mat out = Mat::Zero(A.rows(), A.cols());
  for (int m : D1)
    for (int n : D2) out(m, n) = A(m, n);
  return out;
}

// ---------------------------------------------------------------------------
// Composite objective

enum class TermKind {
  q_untuned,
  q_matching,
  radiated_power,
  lost_power,
  radiation_intensity,
  input_impedance_target,
  custom_quadratic,
};

enum class OperatorName { W, R0, X0, Xm, Xe, Rrho, RL };

inline const char* to_string(TermKind k) {
  switch (k) {
    case TermKind::q_untuned: return "Q_untuned";
    case TermKind::q_matching: return "Q_matching";
    case TermKind::radiated_power: return "radiated_power";
    case TermKind::lost_power: return "lost_power";
    case TermKind::radiation_intensity: return "radiation_intensity";
    case TermKind::input_impedance_target: return "input_impedance_target";
    case TermKind::custom_quadratic: return "custom_quadratic";
  }
  return "?";
}

inline std::optional<TermKind> term_kind_from_string(const std::string& s) {
  for (auto k : {TermKind::q_untuned, TermKind::q_matching, TermKind::radiated_power, TermKind::lost_power,
                 TermKind::radiation_intensity, TermKind::input_impedance_target, TermKind::custom_quadratic})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

inline std::optional<OperatorName> operator_from_string(const std::string& s) {
  if (s == "W") return OperatorName::W;
  if (s == "R0") return OperatorName::R0;
  if (s == "X0") return OperatorName::X0;
  if (s == "Xm") return OperatorName::Xm;
  if (s == "Xe") return OperatorName::Xe;
  if (s == "Rrho") return OperatorName::Rrho;
  if (s == "RL") return OperatorName::RL;
  return std::nullopt;
}

inline const char* to_string(OperatorName o) {
  switch (o) {
    case OperatorName::W: return "W";
    case OperatorName::R0: return "R0";
    case OperatorName::X0: return "X0";
    case OperatorName::Xm: return "Xm";
    case OperatorName::Xe: return "Xe";
    case OperatorName::Rrho: return "Rrho";
    case OperatorName::RL: return "RL";
  }
  return "?";
}

inline MatR named_operator(const OperatorSet& ops, OperatorName o) {
  switch (o) {
    case OperatorName::W: return ops.W;
    case OperatorName::R0: return ops.R0;
    case OperatorName::X0: return ops.X0;
    case OperatorName::Xm: return ops.Xm;
    case OperatorName::Xe: return ops.Xe;
    case OperatorName::Rrho: return ops.Zrho.size() ? ops.Zrho : MatR::Zero(ops.n_dof(), ops.n_dof());
    case OperatorName::RL: return MatR(ops.lumped_resistance().asDiagonal());
  }
  return {};
}

struct ObjectiveTerm {
  TermKind kind = TermKind::q_untuned;
  double weight = 1.0;
  // radiation_intensity
  Vec3 direction = Vec3::UnitZ();
  Vec3 polarization = Vec3::UnitX();
  // input_impedance_target; port defaults to the first gap DOF
  cplx z_target{50.0, 0.0};
  std::optional<DofIndex> port;
  // custom_quadratic: 1/2 I^H A I, or the ratio of two forms when a denominator is set
  OperatorName matrix = OperatorName::W;
  std::optional<OperatorName> denominator;
};

struct ObjectiveSpec {
  std::vector<ObjectiveTerm> terms;
  DofList eval_domain;  // empty: whole plate
  double q_lb = 0.0;    // > 0 divides the composite (normalized objective q)

  /// Q_U + Q_E / 2, the tuned Q-factor whose minimum is the fundamental bound.
  static ObjectiveSpec tuned_q() {
    ObjectiveSpec s;
    ObjectiveTerm u, e;
    u.kind = TermKind::q_untuned;
    e.kind = TermKind::q_matching;
    e.weight = 0.5;
    s.terms = {u, e};
    return s;
  }

  void validate() const {
    std::vector<std::string> bad;
    if (terms.empty()) bad.push_back("objective: at least one term required");
    bool nonzero = false;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const auto& t = terms[i];
      if (!std::isfinite(t.weight)) bad.push_back("objective[" + std::to_string(i) + "].weight: not finite");
      if (t.weight != 0.0) nonzero = true;
      if (t.kind == TermKind::radiation_intensity) {
        if (std::abs(t.direction.norm() - 1.0) > 1e-12 || std::abs(t.polarization.norm() - 1.0) > 1e-12 ||
            std::abs(t.direction.dot(t.polarization)) > 1e-12)
          bad.push_back("objective[" + std::to_string(i) + "]: direction/polarization must be orthonormal");
      }
      if (t.kind == TermKind::input_impedance_target && !(std::abs(t.z_target) > 0.0))
        bad.push_back("objective[" + std::to_string(i) + "].z_target: must be nonzero");
    }
    if (!terms.empty() && !nonzero) bad.push_back("objective: all weights are zero");
    if (q_lb < 0.0 || !std::isfinite(q_lb)) bad.push_back("objective: normalization bound must be >= 0");
    if (!bad.empty()) throw ConfigError(bad);
  }
};

/// An ObjectiveSpec compiled against one OperatorSet into quadratic channels
/// (real symmetric A, value I^H A I) and linear channels (row b, value b I).
/// Reanalysis updates channel values cheaply; `combine` maps them to f.
class Objective {
 public:
  Objective(const OperatorSet& ops, ObjectiveSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const int N = ops.n_dof();
    for (int d : spec_.eval_domain)
      if (d < 0 || d >= N) throw ConfigError({"eval_domain: DOF " + std::to_string(d) + " out of range"});
    for (const auto& t : spec_.terms) {
      Compiled c;
      c.term = t;
      switch (t.kind) {
        case TermKind::q_untuned:
          c.a = quad(ops, OperatorName::W);
          c.b = quad(ops, OperatorName::R0);
          break;
        case TermKind::q_matching:
          c.a = quad(ops, OperatorName::X0);
          c.b = quad(ops, OperatorName::R0);
          break;
        case TermKind::radiated_power:
          c.a = quad(ops, OperatorName::R0);
          break;
        case TermKind::lost_power: {
          MatR A = named_operator(ops, OperatorName::Rrho) + named_operator(ops, OperatorName::RL);
          c.a = add_quad(std::move(A));
          break;
        }
        case TermKind::radiation_intensity:
          c.a = add_lin(farfield_row(ops.mesh, ops.k, t.direction, t.polarization));
          break;
        case TermKind::input_impedance_target: {
          DofIndex n = t.port ? *t.port : (ops.gaps.empty() ? -1 : ops.gaps.front());
          if (n < 0 || n >= N) throw ConfigError({"objective: input_impedance_target needs a valid port DOF"});
          RowC e = RowC::Zero(N);
          e[n] = 1.0;
          c.a = add_lin(std::move(e));
          c.port_voltage = ops.V[n];
          break;
        }
        case TermKind::custom_quadratic:
          c.a = quad(ops, t.matrix);
          if (t.denominator) c.b = quad(ops, *t.denominator);
          break;
      }
      compiled_.push_back(std::move(c));
    }
  }

  using Combiner = std::function<double(const double* q, const cplx* l)>;

  /// Objective over explicit channels, for systems without an OperatorSet.
  Objective(std::vector<MatR> quadratic, std::vector<RowC> linear, Combiner combiner)
      : quad_(std::move(quadratic)), lin_(std::move(linear)), custom_(std::move(combiner)) {
    if (!custom_) throw InvalidArgument("objective combiner required");
    quad_names_.assign(quad_.size(), std::nullopt);
  }

  const ObjectiveSpec& spec() const { return spec_; }
  int n_quadratic() const { return static_cast<int>(quad_.size()); }
  int n_linear() const { return static_cast<int>(lin_.size()); }
  const MatR& quadratic(int i) const { return quad_[i]; }
  const RowC& linear(int i) const { return lin_[i]; }

  /// Composite value from channel values q (I^H A I) and l (b I).
  double combine(const double* q, const cplx* l) const {
    if (custom_) return custom_(q, l);
    double f = 0.0;
    for (const auto& c : compiled_) {
      if (c.term.weight == 0.0) continue;
      f += c.term.weight * term_value(c, q, l);
    }
    if (spec_.q_lb > 0.0) f /= spec_.q_lb;
    return f;
  }

  /// Per-term values (unweighted, unnormalized).
  std::vector<double> terms(const double* q, const cplx* l) const {
    std::vector<double> out;
    for (const auto& c : compiled_) out.push_back(term_value(c, q, l));
    return out;
  }

  /// Channel values for a current on `active` (ascending global DOFs).
  void channels(const DofList& active, const VecC& I, std::vector<double>& q, std::vector<cplx>& l) const {
    detail::check_len(static_cast<Eigen::Index>(active.size()), I.size(), "objective channels");
    q.resize(quad_.size());
    l.resize(lin_.size());
    const VecR re = I.real(), im = I.imag();
    for (std::size_t c = 0; c < quad_.size(); ++c) {
      const MatR A = quad_[c](active, active);
      q[c] = re.dot(A * re) + im.dot(A * im);
    }
    for (std::size_t c = 0; c < lin_.size(); ++c) {
      cplx s = 0.0;
      for (std::size_t i = 0; i < active.size(); ++i) s += lin_[c][active[i]] * I[static_cast<Eigen::Index>(i)];
      l[c] = s;
    }
  }

  double evaluate(const DofList& active, const VecC& I) const {
    std::vector<double> q;
    std::vector<cplx> l;
    channels(active, I, q, l);
    return combine(q.data(), l.data());
  }

  /// Full-length current (zeros on inactive DOFs).
  double evaluate(const VecC& I_full) const {
    DofList all(static_cast<std::size_t>(I_full.size()));
    for (int n = 0; n < I_full.size(); ++n) all[n] = n;
    return evaluate(all, I_full);
  }

 private:
  struct Compiled {
    ObjectiveTerm term;
    int a = -1;
    int b = -1;
    cplx port_voltage = 0.0;
  };

  double term_value(const Compiled& c, const double* q, const cplx* l) const {
    switch (c.term.kind) {
      case TermKind::q_untuned:
        return detail::guarded_div(0.5 * q[c.a], q[c.b], NumericalError::Kind::non_radiating,
                                   "non-radiating current");
      case TermKind::q_matching:
        return detail::guarded_div(std::abs(q[c.a]), q[c.b], NumericalError::Kind::non_radiating,
                                   "non-radiating current");
      case TermKind::radiated_power:
      case TermKind::lost_power:
        return 0.5 * q[c.a];
      case TermKind::radiation_intensity:
        return std::norm(l[c.a]) / (2.0 * constants::eta0);
      case TermKind::input_impedance_target: {
        const cplx in = l[c.a];
        if (!(std::norm(in) >= 1e-300))
          throw NumericalError(NumericalError::Kind::open_port, "zero port current");
        return std::abs(c.port_voltage / in - c.term.z_target) / std::abs(c.term.z_target);
      }
      case TermKind::custom_quadratic:
        if (c.b < 0) return 0.5 * q[c.a];
        return detail::guarded_div(q[c.a], q[c.b], NumericalError::Kind::zero_denominator,
                                   "zero denominator in custom ratio");
    }
    return 0.0;
  }

  int quad(const OperatorSet& ops, OperatorName o) {
    for (std::size_t i = 0; i < quad_names_.size(); ++i)
      if (quad_names_[i] == o) return static_cast<int>(i);
    quad_names_.push_back(o);
    return add_quad(named_operator(ops, o), false);
  }

  int add_quad(MatR A, bool unnamed = true) {
    if (unnamed) quad_names_.push_back(std::nullopt);
    if (!spec_.eval_domain.empty()) A = subregion_operator(A, spec_.eval_domain);
    quad_.push_back(std::move(A));
    return static_cast<int>(quad_.size()) - 1;
  }

  int add_lin(RowC b) {
    lin_.push_back(std::move(b));
    return static_cast<int>(lin_.size()) - 1;
  }

  ObjectiveSpec spec_;
  std::vector<Compiled> compiled_;
  std::vector<MatR> quad_;
  std::vector<std::optional<OperatorName>> quad_names_;
  std::vector<RowC> lin_;
  Combiner custom_;
};

/// Composite objective of a full-length current.
inline double composite(const ObjectiveSpec& spec, const VecC& I, const OperatorSet& ops) {
  return Objective(ops, spec).evaluate(I);
}

}  // namespace momtopo
