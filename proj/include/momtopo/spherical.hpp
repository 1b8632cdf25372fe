#pragma once

// Real-valued regular vector spherical waves (Hansen normalization) used to
// factorize the radiation matrix.

#include <algorithm>
#include <cmath>
#include <vector>

#include "momtopo/core.hpp"

namespace momtopo::sph {

struct WaveIndex {
  int type;    // 1 = TE (M-type), 2 = TM (N-type)
  int parity;  // 0 = even (cos m phi), 1 = odd (sin m phi)
  int m;
  int l;
};

/// All (type, parity, m, l) with 1 <= l <= l_max; 2 * (l_max^2 + 2 l_max) entries.
inline std::vector<WaveIndex> enumerate_waves(int l_max) {
  std::vector<WaveIndex> out;
  for (int type = 1; type <= 2; ++type)
    for (int l = 1; l <= l_max; ++l)
      for (int m = 0; m <= l; ++m)
        for (int parity = 0; parity <= 1; ++parity) {
          if (m == 0 && parity == 1) continue;
          out.push_back({type, parity, m, l});
        }
  return out;
}

/// j_l(x) / x^p by ascending series, accurate for modest x.
inline double bessel_series(int l, double x, int p) {
  // j_l(x) = x^l sum_n (-x^2/2)^n / (n! (2l+2n+1)!!)
  double dfact = 1.0;
  for (int i = 3; i <= 2 * l + 1; i += 2) dfact *= i;
  double term = 1.0 / dfact;
  double sum = term;
  const double h = -0.5 * x * x;
  for (int n = 1; n < 60; ++n) {
    term *= h / (n * (2.0 * l + 2.0 * n + 1.0));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum * std::pow(x, l - p);
}

inline double sph_j(int l, double x) {
  if (l < 0) return 0.0;
  if (x < 0.5 + 0.1 * l) return bessel_series(l, x, 0);
  return std::sph_bessel(static_cast<unsigned>(l), x);
}

inline double sph_j_over_x(int l, double x) {
  if (x < 0.5 + 0.1 * l) return bessel_series(l, x, 1);
  return std::sph_bessel(static_cast<unsigned>(l), x) / x;
}

/// Evaluates every wave of `enumerate_waves(l_max)` at k*r; row a of the
/// result is the Cartesian vector u_a(k r).
class WaveEvaluator {
 public:
  explicit WaveEvaluator(int l_max) : l_max_(l_max), index_(enumerate_waves(l_max)) {
    norm_.assign(static_cast<std::size_t>((l_max + 1) * (l_max + 1)), 0.0);
    for (int l = 0; l <= l_max; ++l)
      for (int m = 0; m <= l; ++m)
        norm_[at(l, m)] = std::sqrt((m == 0 ? 1.0 : 2.0) * (2.0 * l + 1.0) / (4.0 * constants::pi) *
                                    std::exp(std::lgamma(l - m + 1.0) - std::lgamma(l + m + 1.0)));
  }

  int l_max() const { return l_max_; }
  const std::vector<WaveIndex>& index() const { return index_; }
  int size() const { return static_cast<int>(index_.size()); }

  void evaluate(const Vec3& kr, Eigen::Ref<MatR> out) const {
    const double x = kr.norm();
    double ct = 1.0, st = 0.0, phi = 0.0;
    if (x > 0.0) {
      ct = std::clamp(kr.z() / x, -1.0, 1.0);
      st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
      phi = std::atan2(kr.y(), kr.x());
    }
    const Vec3 rhat(st * std::cos(phi), st * std::sin(phi), ct);
    const Vec3 that(ct * std::cos(phi), ct * std::sin(phi), -st);
    const Vec3 phat(-std::sin(phi), std::cos(phi), 0.0);

    const int L = l_max_;
    std::vector<double> P(static_cast<std::size_t>((L + 1) * (L + 1)), 0.0), tau(P.size(), 0.0),
        piv(P.size(), 0.0);
    // m = 0
    {
      std::vector<double> p0(L + 1, 0.0);
      p0[0] = 1.0;
      if (L >= 1) p0[1] = ct;
      for (int l = 2; l <= L; ++l) p0[l] = ((2.0 * l - 1.0) * ct * p0[l - 1] - (l - 1.0) * p0[l - 2]) / l;
      for (int l = 0; l <= L; ++l) P[at(l, 0)] = p0[l];
    }
    // m >= 1 through P_l^m / sin(theta), regular at the poles
    std::vector<double> pt(L + 2, 0.0);
    std::vector<double> pt1(L + 1, 0.0);  // P_l^1 / sin(theta), needed for tau_l0
    for (int m = 1; m <= L; ++m) {
      std::fill(pt.begin(), pt.end(), 0.0);
      double dfact = 1.0;
      for (int i = 3; i <= 2 * m - 1; i += 2) dfact *= i;
      pt[m] = dfact * std::pow(st, m - 1);
      if (m + 1 <= L) pt[m + 1] = (2.0 * m + 1.0) * ct * pt[m];
      for (int l = m + 2; l <= L; ++l)
        pt[l] = ((2.0 * l - 1.0) * ct * pt[l - 1] - (l + m - 1.0) * pt[l - 2]) / (l - m);
      for (int l = m; l <= L; ++l) {
        P[at(l, m)] = st * pt[l];
        tau[at(l, m)] = l * ct * pt[l] - (l + m) * (l - 1 >= m ? pt[l - 1] : 0.0);
        piv[at(l, m)] = m * pt[l];
        if (m == 1) pt1[l] = pt[l];
      }
    }
    for (int l = 1; l <= L; ++l) tau[at(l, 0)] = -st * pt1[l];

    std::vector<double> jl(L + 1), jlx(L + 1), djl(L + 1);
    for (int l = 0; l <= L; ++l) jl[l] = sph_j(l, x);
    for (int l = 1; l <= L; ++l) jlx[l] = sph_j_over_x(l, x);
    for (int l = 1; l <= L; ++l) djl[l] = sph_j(l - 1, x) - l * jlx[l];

    for (int a = 0; a < size(); ++a) {
      const auto& w = index_[a];
      const double n = norm_[at(w.l, w.m)];
      const double f = w.parity == 0 ? std::cos(w.m * phi) : std::sin(w.m * phi);
      const double fp = w.parity == 0 ? -std::sin(w.m * phi) : std::cos(w.m * phi);
      const double ll = std::sqrt(w.l * (w.l + 1.0));
      const double Y = n * P[at(w.l, w.m)] * f;
      const Vec3 grad = (that * (n * tau[at(w.l, w.m)] * f) + phat * (n * piv[at(w.l, w.m)] * fp)) / ll;
      Vec3 u;
      if (w.type == 1) {
        // X = grad_Omega Y x rhat / sqrt(l(l+1))
        const Vec3 X = grad.cross(rhat);
        u = jl[w.l] * X;
      } else {
        u = djl[w.l] * grad + ll * jlx[w.l] * Y * rhat;
      }
      out.row(a) = u.transpose();
    }
  }

 private:
  int at(int l, int m) const { return l * (l_max_ + 1) + m; }

  int l_max_;
  std::vector<WaveIndex> index_;
  std::vector<double> norm_;
};

/// Default truncation l_max = ceil(ka + 7 (ka)^(1/3) + 3).
inline int default_l_max(double ka) {
  return static_cast<int>(std::ceil(ka + 7.0 * std::cbrt(ka) + 3.0));
}

}  // namespace momtopo::sph
