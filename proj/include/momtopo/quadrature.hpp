#pragma once

// Triangle quadrature rules and closed-form potential integrals of the static
// 1/R kernel over flat triangles.

#include <array>
#include <cmath>
#include <vector>

#include "momtopo/core.hpp"

namespace momtopo::quad {

struct TriangleRule {
  // barycentric coordinates (of vertices 0,1,2) and weights summing to one
  std::vector<std::array<double, 3>> bary;
  std::vector<double> weight;
  int size() const { return static_cast<int>(weight.size()); }
};

/// Symmetric 3-point rule, exact for quadratics.
inline const TriangleRule& gauss3() {
  static const TriangleRule rule{
      {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
       {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
       {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}},
      {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
  return rule;
}

/// 7-point degree-5 rule (Radon / Dunavant).
inline const TriangleRule& gauss7() {
  static const TriangleRule rule = [] {
    const double s15 = std::sqrt(15.0);
    const double a1 = (6.0 - s15) / 21.0, b1 = (9.0 + 2.0 * s15) / 21.0;
    const double a2 = (6.0 + s15) / 21.0, b2 = (9.0 - 2.0 * s15) / 21.0;
    const double w1 = (155.0 - s15) / 1200.0, w2 = (155.0 + s15) / 1200.0;
    TriangleRule r;
    r.bary = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
              {b1, a1, a1}, {a1, b1, a1}, {a1, a1, b1},
              {b2, a2, a2}, {a2, b2, a2}, {a2, a2, b2}};
    r.weight = {9.0 / 40.0, w1, w1, w1, w2, w2, w2};
    return r;
  }();
  return rule;
}

struct QuadPoint {
  Vec3 r;
  double w;  // absolute weight (area included)
};

inline std::vector<QuadPoint> map_rule(const TriangleRule& rule, const Vec3& p0, const Vec3& p1,
                                       const Vec3& p2, double area) {
  std::vector<QuadPoint> pts(rule.size());
  for (int q = 0; q < rule.size(); ++q) {
    const auto& b = rule.bary[q];
    pts[q] = {b[0] * p0 + b[1] * p1 + b[2] * p2, rule.weight[q] * area};
  }
  return pts;
}

/// Integrals over the flat triangle (p0,p1,p2) seen from `r`:
///   scalar = int 1/|r - r'| dS',   vector = int (r' - r)/|r - r'| dS'.
struct StaticPotential {
  double scalar = 0.0;
  Vec3 vector = Vec3::Zero();
};

inline StaticPotential static_potential(const Vec3& r, const Vec3& p0, const Vec3& p1,
                                        const Vec3& p2) {
  const std::array<Vec3, 3> p{p0, p1, p2};
  const Vec3 n = (p1 - p0).cross(p2 - p0).normalized();
  const double d = n.dot(r - p0);
  const double ad = std::abs(d);
  const Vec3 rho = r - d * n;
  const double scale = (p1 - p0).norm() + (p2 - p1).norm() + (p0 - p2).norm();
  const double tiny = 1e-14 * scale * scale;

  StaticPotential out;
  Vec3 in_plane = Vec3::Zero();
  for (int i = 0; i < 3; ++i) {
    const Vec3& pa = p[i];
    const Vec3& pb = p[(i + 1) % 3];
    const Vec3 lhat = (pb - pa).normalized();
    const Vec3 uhat = lhat.cross(n);
    const double lp = (pb - rho).dot(lhat);
    const double lm = (pa - rho).dot(lhat);
    const double p0i = (pa - rho).dot(uhat);
    const double r0sq = p0i * p0i + d * d;
    const double rp = (r - pb).norm();
    const double rm = (r - pa).norm();
    if (r0sq > tiny) {
      // both forms are algebraically equal; pick the one free of cancellation
      const double logt = (lp + lm >= 0.0) ? std::log((rp + lp) / (rm + lm))
                                           : std::log((rm - lm) / (rp - lp));
      double term = p0i * logt;
      if (ad > 0.0)
        term -= ad * (std::atan(p0i * lp / (r0sq + ad * rp)) - std::atan(p0i * lm / (r0sq + ad * rm)));
      out.scalar += term;
      in_plane += uhat * (r0sq * logt);
    }
    in_plane += uhat * (lp * rp - lm * rm);
  }
  out.vector = 0.5 * in_plane;
  return out;
}

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(constants::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace momtopo::quad
