#pragma once

// Closed-form singular solutions of the Stokes equations: the Oseen tensor and
// the exterior response V[S], P[S] of a unit ball forced to deform with a
// trace-free strain S.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <stdexcept>
#include <vector>

#include "dilute/quadrature.hpp"
#include "dilute/types.hpp"

namespace dilute {

/// U(x) = (I/|x| + x x^T/|x|^3) / (8 pi).
inline Mat3 oseen_tensor(const Vec3& x) {
  const double r = x.norm();
  if (!(r > 0.0)) throw std::domain_error("oseen_tensor: singular at x = 0");
  return (Mat3::Identity() / r + x * x.transpose() / (r * r * r)) / (8.0 * pi);
}

/// V[S](x); inside the unit ball the rigid-strain extension S x.
inline Vec3 stresslet_velocity(const TraceFreeSymMat& s, const Vec3& x) {
  const Mat3 S = s.matrix();
  const double r2 = x.squaredNorm();
  if (r2 < 1.0) return S * x;
  const Vec3 Sx = S * x;
  const double q = x.dot(Sx);
  const double r5 = r2 * r2 * std::sqrt(r2);
  const double r7 = r5 * r2;
  return (2.5 * q / r5) * x + Sx / r5 - (2.5 * q / r7) * x;
}

namespace detail {

// Gradient pieces of V[S] at an exterior point: stresslet term and the
// decaying remainder. G(i,k) = d V_i / d x_k.
inline void stresslet_gradient_parts(const Mat3& S, const Vec3& x, Mat3& far, Mat3& near) {
  const Vec3 Sx = S * x;
  const double q = x.dot(Sx);
  const double r2 = x.squaredNorm();
  const double r5 = r2 * r2 * std::sqrt(r2);
  const double r7 = r5 * r2;
  const double r9 = r7 * r2;
  const Mat3 I = Mat3::Identity();
  // d/dx_k of (5/2) q x_i / r^5
  far = 2.5 * (2.0 * x * Sx.transpose() / r5 + q * I / r5 - 5.0 * q * x * x.transpose() / r7);
  // d/dx_k of S x / r^5 - (5/2) q x / r^7
  near = S / r5 - 5.0 * Sx * x.transpose() / r7 -
         2.5 * (2.0 * x * Sx.transpose() / r7 + q * I / r7 - 7.0 * q * x * x.transpose() / r9);
}

}  // namespace detail

/// Full velocity gradient of V[S] (S inside the unit ball).
inline Mat3 stresslet_velocity_gradient(const TraceFreeSymMat& s, const Vec3& x) {
  const Mat3 S = s.matrix();
  if (x.squaredNorm() < 1.0) return S;
  Mat3 far, near;
  detail::stresslet_gradient_parts(S, x, far, near);
  return far + near;
}

/// P[S](x) = 5 (S : x x^T) / |x|^5.
inline double stresslet_pressure(const TraceFreeSymMat& s, const Vec3& x) {
  const double r2 = x.squaredNorm();
  if (!(r2 > 0.0)) throw std::domain_error("stresslet_pressure: singular at x = 0");
  return 5.0 * x.dot(s.matrix() * x) / (r2 * r2 * std::sqrt(r2));
}

/// Newtonian stress 2 mu D(V) - mu P I of the exterior field, |x| >= 1.
inline Mat3 stresslet_stress(const TraceFreeSymMat& s, const Vec3& x, double mu) {
  if (x.squaredNorm() < 1.0 - 1e-14) {
    throw std::domain_error("stresslet_stress: point inside the unit ball");
  }
  Mat3 far, near;
  detail::stresslet_gradient_parts(s.matrix(), x, far, near);
  const Mat3 G = far + near;
  return mu * (G + G.transpose()) - mu * stresslet_pressure(s, x) * Mat3::Identity();
}

struct GradientSplit {
  Mat3 stresslet;  // D of the |x|^-2 stresslet term, ~ r^3 / |x|^3
  Mat3 remainder;  // ~ r^5 / |x|^5
};

/// Symmetric gradient of r V[S](x / r) split into its stresslet part and the
/// faster-decaying remainder.
inline GradientSplit stresslet_gradient_split(const TraceFreeSymMat& s, const Vec3& x, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("stresslet_gradient_split: r must be positive");
  if (!(x.norm() > r)) throw std::domain_error("stresslet_gradient_split: point at or inside the ball");
  Mat3 far, near;
  detail::stresslet_gradient_parts(s.matrix(), x / r, far, near);
  return {sym(far), sym(near)};
}

/// Velocity of the ball field r V[S]((x - c)/r).
inline Vec3 ball_velocity(const TraceFreeSymMat& s, const Vec3& c, double r, const Vec3& x) {
  return r * stresslet_velocity(s, (x - c) / r);
}

/// Velocity gradient of r V[S]((x - c)/r).
inline Mat3 ball_velocity_gradient(const TraceFreeSymMat& s, const Vec3& c, double r, const Vec3& x) {
  return stresslet_velocity_gradient(s, (x - c) / r);
}

/// Strain-only fast path for the reflection sweeps: D of the ball field at an
/// exterior point, using the raw matrix to avoid re-validating S.
inline Mat3 ball_strain_exterior(const Mat3& S, const Vec3& y) {
  Mat3 far, near;
  detail::stresslet_gradient_parts(S, y, far, near);
  return sym(far + near);
}

/// Symmetric first moment of the traction jump across the surface of a ball of
/// radius r carrying the field r V[E](x/r) in a fluid of viscosity mu. The
/// interior stress is that of the rigid strain extension, 2 mu E.
inline TraceFreeSymMat isolated_stresslet_strength(double r, const TraceFreeSymMat& e, double mu,
                                                   int order = 24) {
  if (!(r > 0.0)) throw std::invalid_argument("isolated_stresslet_strength: r must be positive");
  const Mat3 inner = 2.0 * mu * e.matrix();
  Mat3 moment = Mat3::Zero();
  for (const SpherePoint& p : sphere_rule(order)) {
    const Vec3& nu = p.direction;
    // the exterior stress is scale invariant under x -> x / r
    const Vec3 jump = (inner - stresslet_stress(e, nu, mu)) * nu;
    moment += p.weight * 0.5 * (nu * jump.transpose() + jump * nu.transpose());
  }
  return TraceFreeSymMat::project(moment * (r * r * r));
}

/// Closed form of isolated_stresslet_strength: 5 mu vol(B_r) E.
inline TraceFreeSymMat stresslet_strength_closed_form(double r, const TraceFreeSymMat& e, double mu) {
  return e * (5.0 * mu * 4.0 * pi / 3.0 * r * r * r);
}

// ---------------------------------------------------------------------------
// Test fields for the distributional identity

template <class F>
concept SmoothTestField = requires(const F& f, const Vec3& x) {
  { f.velocity(x) } -> std::convertible_to<Vec3>;
  { f.gradient(x) } -> std::convertible_to<Mat3>;
  { f.center() } -> std::convertible_to<Vec3>;
  { f.support_radius() } -> std::convertible_to<double>;
};

/// psi = curl(beta(|x - c|) A(x)) with A(x) = a0 + B (x - c) and the C^2 bump
/// beta(s) = (1 - s^2/R^2)^4 on s < R. Divergence free and compactly supported.
class CurlBumpField {
 public:
  CurlBumpField(Vec3 center, double radius, Vec3 a0, Mat3 b)
      : c_(center), R_(radius), a0_(a0), B_(b) {
    if (!(radius > 0.0)) throw std::invalid_argument("CurlBumpField: radius must be positive");
  }

  Vec3 center() const { return c_; }
  double support_radius() const { return R_; }

  Vec3 velocity(const Vec3& x) const {
    const Vec3 y = x - c_;
    const double w = 1.0 - y.squaredNorm() / (R_ * R_);
    if (w <= 0.0) return Vec3::Zero();
    const double beta = w * w * w * w;
    const Vec3 grad_beta = -8.0 * w * w * w * y / (R_ * R_);
    return grad_beta.cross(A(y)) + beta * curl_A();
  }

  Mat3 gradient(const Vec3& x) const {
    const Vec3 y = x - c_;
    const double R2 = R_ * R_;
    const double w = 1.0 - y.squaredNorm() / R2;
    if (w <= 0.0) return Mat3::Zero();
    const Vec3 gb = -8.0 * w * w * w * y / R2;
    const Mat3 hb = -8.0 * w * w * w / R2 * Mat3::Identity() + 48.0 * w * w / (R2 * R2) * y * y.transpose();
    const Vec3 a = A(y);
    // d_m psi_i = eps_ijk (d_jm beta A_k + d_j beta B_km + d_m beta B_kj), A linear
    Mat3 g = Mat3::Zero();
    for (int i = 0; i < 3; ++i) {
      for (int m = 0; m < 3; ++m) {
        double v = 0.0;
        for (int j = 0; j < 3; ++j) {
          for (int k = 0; k < 3; ++k) {
            const double e = levi_civita(i, j, k);
            if (e == 0.0) continue;
            v += e * (hb(j, m) * a[k] + gb[j] * B_(k, m) + gb[m] * B_(k, j));
          }
        }
        g(i, m) = v;
      }
    }
    return g;
  }

 private:
  Vec3 A(const Vec3& y) const { return a0_ + B_ * y; }
  Vec3 curl_A() const { return Vec3(B_(2, 1) - B_(1, 2), B_(0, 2) - B_(2, 0), B_(1, 0) - B_(0, 1)); }
  static double levi_civita(int i, int j, int k) {
    return static_cast<double>((i - j) * (j - k) * (k - i)) / 2.0;
  }

  Vec3 c_;
  double R_;
  Vec3 a0_;
  Mat3 B_;
};

struct DistributionalCheck {
  double residual = 0.0;   // |int sigma(V,P) : grad psi - int_B 5 mu S : grad psi|
  double grad_sup = 0.0;   // max |grad psi| over the quadrature nodes
};

/// Weak-form check of -div sigma(V[S], P[S]) = -div(5 mu S 1_B) against a
/// compactly supported divergence-free test field. Spherical coordinates about
/// the ball center, polar axis through the test field center, and at each radius
/// only the cap that meets the support. Radial panels break at the unit sphere
/// and where the cap becomes the full sphere, so every panel is smooth.
template <SmoothTestField F>
DistributionalCheck distributional_identity_check(const TraceFreeSymMat& s, double mu, const F& psi,
                                                  int order = 32) {
  const Vec3 c = psi.center();
  const double R = psi.support_radius();
  const double d = c.norm();

  Vec3 axis = d > 0.0 ? Vec3(c / d) : Vec3::UnitZ();
  Vec3 e1 = axis.unitOrthogonal();
  Vec3 e2 = axis.cross(e1);

  const double lo = std::max(0.0, d - R), hi = d + R;
  std::vector<double> cuts{lo, hi};
  for (double b : {1.0, R - d}) {
    if (b > lo && b < hi) cuts.push_back(b);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> breaks;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    breaks.push_back(cuts[k]);
    breaks.push_back(0.5 * (cuts[k] + cuts[k + 1]));
  }
  breaks.push_back(cuts.back());

  DistributionalCheck out;
  double total = 0.0;
  double max_div = 0.0;
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const QuadratureRule radial = gauss_legendre(order, breaks[p], breaks[p + 1]);
    const bool inside = breaks[p + 1] <= 1.0;
    for (int a = 0; a < order; ++a) {
      const double rho = radial.nodes[a];
      // |x - c| < R  <=>  cos(theta) > t
      double t = d > 0.0 ? (rho * rho + d * d - R * R) / (2.0 * rho * d) : -1.0;
      t = std::clamp(t, -1.0, 1.0);
      if (t >= 1.0) continue;
      const QuadratureRule polar = gauss_legendre(order, t, 1.0);
      for (int b = 0; b < order; ++b) {
        const double ct = polar.nodes[b];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int k = 0; k < 2 * order; ++k) {
          const double phi = pi * (k + 0.5) / order;
          const Vec3 x = rho * (st * std::cos(phi) * e1 + st * std::sin(phi) * e2 + ct * axis);
          const Mat3 g = psi.gradient(x);
          const double gn = g.norm();
          if (gn == 0.0) continue;
          out.grad_sup = std::max(out.grad_sup, gn);
          max_div = std::max(max_div, std::abs(g.trace()));
          const double w = radial.weights[a] * polar.weights[b] * (pi / order) * rho * rho;
          // inside, sigma of the rigid extension is 2 mu S, minus the 5 mu S source
          const double f = inside ? -3.0 * mu * s.matrix().cwiseProduct(g).sum()
                                  : stresslet_stress(s, x, mu).cwiseProduct(g).sum();
          total += w * f;
        }
      }
    }
  }
  if (max_div > 1e-8 * std::max(out.grad_sup, 1e-300)) {
    throw std::invalid_argument("distributional_identity_check: test field is not divergence free");
  }
  out.residual = std::abs(total);
  return out;
}

template <SmoothTestField F>
double distributional_identity_residual(const TraceFreeSymMat& s, double mu, const F& psi, int order = 32) {
  return distributional_identity_check(s, mu, psi, order).residual;
}

}  // namespace dilute
