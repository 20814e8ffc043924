#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dilute/kernels.hpp"
#include "dilute/quadrature.hpp"

using namespace dilute;

namespace {

std::mt19937_64& rng() {
  static std::mt19937_64 g(12345);
  return g;
}

double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng()); }

Vec3 random_direction() {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng()), n(rng()), n(rng()));
  return v.normalized();
}

TraceFreeSymMat random_strain() {
  return TraceFreeSymMat::project(Mat3::NullaryExpr([](Eigen::Index, Eigen::Index) { return uniform(-1, 1); }));
}

// fourth-order central differences of the velocity: first and second derivatives
Mat3 fd_gradient(const TraceFreeSymMat& s, const Vec3& x, double h) {
  Mat3 g;
  for (int k = 0; k < 3; ++k) {
    const Vec3 e = h * Vec3::Unit(k);
    g.col(k) = (-stresslet_velocity(s, x + 2 * e) + 8 * stresslet_velocity(s, x + e) - 8 * stresslet_velocity(s, x - e) +
                stresslet_velocity(s, x - 2 * e)) /
               (12 * h);
  }
  return g;
}

Vec3 fd_laplacian(const TraceFreeSymMat& s, const Vec3& x, double h) {
  Vec3 lap = Vec3::Zero();
  for (int k = 0; k < 3; ++k) {
    const Vec3 e = h * Vec3::Unit(k);
    lap += (-stresslet_velocity(s, x + 2 * e) + 16 * stresslet_velocity(s, x + e) - 30 * stresslet_velocity(s, x) +
            16 * stresslet_velocity(s, x - e) - stresslet_velocity(s, x - 2 * e)) /
           (12 * h * h);
  }
  return lap;
}

Vec3 fd_pressure_gradient(const TraceFreeSymMat& s, const Vec3& x, double h) {
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    const Vec3 e = h * Vec3::Unit(k);
    g[k] = (-stresslet_pressure(s, x + 2 * e) + 8 * stresslet_pressure(s, x + e) - 8 * stresslet_pressure(s, x - e) +
            stresslet_pressure(s, x - 2 * e)) /
           (12 * h);
  }
  return g;
}

struct SurfaceLoads {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

SurfaceLoads loads(const TraceFreeSymMat& s, double mu, double radius) {
  SurfaceLoads out;
  for (const SpherePoint& p : sphere_rule(24)) {
    const Vec3 x = radius * p.direction;
    const Vec3 t = stresslet_stress(s, x, mu) * p.direction;
    const double w = p.weight * radius * radius;
    out.force += w * t;
    out.torque += w * x.cross(t);
  }
  return out;
}

// divergence free in no sense: a plain bump times a constant vector
struct CompressibleBump {
  Vec3 velocity(const Vec3& x) const {
    const double w = 1.0 - x.squaredNorm() / 4.0;
    return w > 0 ? Vec3(w * w * w, 0, 0) : Vec3::Zero();
  }
  Mat3 gradient(const Vec3& x) const {
    const double w = 1.0 - x.squaredNorm() / 4.0;
    Mat3 g = Mat3::Zero();
    if (w > 0) g.row(0) = -1.5 * w * w * x.transpose();
    return g;
  }
  Vec3 center() const { return Vec3::Zero(); }
  double support_radius() const { return 2.0; }
};

CurlBumpField random_test_field() {
  const Vec3 c(uniform(-1.5, 1.5), uniform(-1.5, 1.5), uniform(-1.5, 1.5));
  const double R = uniform(1.0, 2.5);
  const Mat3 B = Mat3::NullaryExpr([](Eigen::Index, Eigen::Index) { return uniform(-1, 1); });
  return CurlBumpField(c, R, Vec3(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)), B);
}

}  // namespace

// ---------------------------------------------------------------------------
// Oseen tensor

TEST(Oseen, UnitAxis) {
  const Mat3 U = oseen_tensor(Vec3(1, 0, 0));
  EXPECT_NEAR(U(0, 0), 1.0 / (4.0 * pi), 1e-16);
  EXPECT_NEAR(U(0, 0), 0.0795775, 1e-7);
  EXPECT_NEAR(U(1, 1), 1.0 / (8.0 * pi), 1e-16);
  EXPECT_NEAR(U(2, 2), 1.0 / (8.0 * pi), 1e-16);
  EXPECT_EQ(U(0, 1), 0.0);
}

TEST(Oseen, HomogeneityAndEvenness) {
  for (int t = 0; t < 100; ++t) {
    const Vec3 x = uniform(0.1, 5.0) * random_direction();
    const Mat3 U = oseen_tensor(x);
    EXPECT_LE((oseen_tensor(2.0 * x) - 0.5 * U).norm(), 1e-15 * U.norm());
    EXPECT_LE((oseen_tensor(-x) - U).norm(), 1e-15 * U.norm());
    EXPECT_LE((U - U.transpose()).norm(), 0.0);
  }
}

TEST(Oseen, RejectsOrigin) { EXPECT_THROW(oseen_tensor(Vec3::Zero()), std::domain_error); }

// ---------------------------------------------------------------------------
// Stresslet velocity and pressure

TEST(Stresslet, BoundaryShearExample) {
  const TraceFreeSymMat S(0, 0, 0, 1, 0, 0);
  EXPECT_LE(stresslet_velocity(S, Vec3(0, 0, 1)).norm(), 1e-16);
}

TEST(Stresslet, ZeroStrain) {
  for (int t = 0; t < 20; ++t) {
    EXPECT_EQ(stresslet_velocity(TraceFreeSymMat::zero(), uniform(0.2, 5) * random_direction()), Vec3::Zero());
  }
}

TEST(Stresslet, AxialExample) {
  // term by term: (5/2) 8 (2,0,0)/32 + (4,0,0)/32 - (5/2) 8 (2,0,0)/128
  const TraceFreeSymMat S(2, -1, -1, 0, 0, 0);
  const Vec3 v = stresslet_velocity(S, Vec3(2, 0, 0));
  const double expected = 2.5 * 8 * 2 / 32.0 + 4 / 32.0 - 2.5 * 8 * 2 / 128.0;
  EXPECT_NEAR(expected, 1.0625, 1e-15);
  EXPECT_NEAR(v.x(), 1.0625, 1e-15);
  EXPECT_NEAR(v.y(), 0.0, 1e-16);
  EXPECT_NEAR(v.z(), 0.0, 1e-16);
}

TEST(Stresslet, BoundaryIdentity) {
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const TraceFreeSymMat S = random_strain();
    const Vec3 x = random_direction();
    worst = std::max(worst, (stresslet_velocity(S, x) - S.matrix() * x).norm());
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Stresslet, ContinuityAndDecay) {
  const TraceFreeSymMat S = random_strain();
  const Vec3 d = random_direction();
  const Vec3 in = stresslet_velocity(S, (1.0 - 1e-12) * d), out = stresslet_velocity(S, (1.0 + 1e-12) * d);
  EXPECT_LT((in - out).norm(), 1e-10);
  // |x|^2 V -> (5/2) q(d) d at infinity
  const double q = d.dot(S.matrix() * d);
  const Vec3 far = 1e8 * stresslet_velocity(S, 1e4 * d);
  EXPECT_NEAR((far - 2.5 * q * d).norm(), 0.0, 1e-6);
}

TEST(Stresslet, Linearity) {
  for (int t = 0; t < 100; ++t) {
    const TraceFreeSymMat A = random_strain(), B = random_strain();
    const double a = uniform(-3, 3), b = uniform(-3, 3);
    const Vec3 x = uniform(0.3, 4.0) * random_direction();
    const Vec3 lhs = stresslet_velocity(A * a + B * b, x);
    const Vec3 rhs = a * stresslet_velocity(A, x) + b * stresslet_velocity(B, x);
    EXPECT_LE((lhs - rhs).norm(), 1e-14 * (1.0 + rhs.norm()));
  }
}

TEST(Stresslet, DivergenceFreeAtMillionPoints) {
  double worst = 0.0;
  const TraceFreeSymMat S = random_strain();
  std::mt19937_64 g(99);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(1.0, 20.0);
  for (int t = 0; t < 1000000; ++t) {
    const Vec3 x = u(g) * Vec3(n(g), n(g), n(g)).normalized();
    const Mat3 G = stresslet_velocity_gradient(S, x);
    worst = std::max(worst, std::abs(G.trace()) / G.norm());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Stresslet, GradientMatchesFiniteDifferences) {
  for (int t = 0; t < 200; ++t) {
    const TraceFreeSymMat S = random_strain();
    const Vec3 x = uniform(1.1, 6.0) * random_direction();
    const Mat3 G = stresslet_velocity_gradient(S, x);
    EXPECT_LE((G - fd_gradient(S, x, 1e-3)).norm(), 1e-9 * std::max(1.0, G.norm()));
  }
}

TEST(Stresslet, StokesResidual) {
  // -mu Lap V + grad(mu P) = 0, fourth-order differences
  const double mu = 1.7;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const TraceFreeSymMat S = random_strain();
    const Vec3 x = uniform(1.2, 5.0) * random_direction();
    const double h = 1e-3 * x.norm();
    const Vec3 visc = mu * fd_laplacian(S, x, h);
    const Vec3 grad_p = mu * fd_pressure_gradient(S, x, h);
    worst = std::max(worst, (grad_p - visc).norm() / std::max(visc.norm(), grad_p.norm()));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Pressure, Values) {
  const TraceFreeSymMat S(2, -1, -1, 0, 0, 0);
  EXPECT_NEAR(stresslet_pressure(S, Vec3(1, 0, 0)), 10.0, 1e-15);
  for (int t = 0; t < 50; ++t) {
    const Vec3 x = uniform(0.2, 3.0) * random_direction();
    const TraceFreeSymMat R = random_strain();
    EXPECT_NEAR(stresslet_pressure(R, 2.0 * x), stresslet_pressure(R, x) / 8.0,
                1e-14 * std::abs(stresslet_pressure(R, x)) + 1e-300);
  }
  EXPECT_THROW(stresslet_pressure(S, Vec3::Zero()), std::domain_error);
}

TEST(Pressure, SphericalMeanVanishes) {
  for (int t = 0; t < 10; ++t) {
    const TraceFreeSymMat S = random_strain();
    double mean = 0.0;
    for (const SpherePoint& p : sphere_rule(24)) mean += p.weight * stresslet_pressure(S, p.direction);
    EXPECT_LT(std::abs(mean / (4.0 * pi)), 1e-10);
  }
}

// ---------------------------------------------------------------------------
// Stress

TEST(Stress, TraceIsMinusThreePressure) {
  const double mu = 0.8;
  for (int t = 0; t < 100; ++t) {
    const TraceFreeSymMat S = random_strain();
    const Vec3 x = uniform(1.0, 5.0) * random_direction();
    const Mat3 sigma = stresslet_stress(S, x, mu);
    EXPECT_NEAR(sigma.trace(), -3.0 * mu * stresslet_pressure(S, x), 1e-12 * (1.0 + sigma.norm()));
  }
  EXPECT_THROW(stresslet_stress(random_strain(), Vec3(0.5, 0, 0), 1.0), std::domain_error);
}

TEST(Stress, ForceAndTorqueFree) {
  for (int t = 0; t < 5; ++t) {
    const TraceFreeSymMat S = random_strain();
    const double mu = uniform(0.5, 2.0);
    const double scale = mu * S.norm();
    for (double radius : {1.5, 2.0, 3.0}) {
      const SurfaceLoads l = loads(S, mu, radius);
      EXPECT_LT(l.force.norm(), 1e-8 * scale);
      EXPECT_LT(l.torque.norm(), 1e-8 * scale);
    }
    // two quadrature radii agree with each other
    const SurfaceLoads a = loads(S, mu, 1.5), b = loads(S, mu, 3.0);
    EXPECT_LT((a.force - b.force).norm(), 1e-8 * scale);
    EXPECT_LT((a.torque - b.torque).norm(), 1e-8 * scale);
  }
}

TEST(Stress, ExteriorTractionOnUnitSphere) {
  // sigma nu = -3 mu S nu on |x| = 1
  const TraceFreeSymMat S = random_strain();
  for (int t = 0; t < 50; ++t) {
    const Vec3 nu = random_direction();
    const Vec3 traction = stresslet_stress(S, nu, 1.3) * nu;
    EXPECT_LT((traction + 3.0 * 1.3 * S.matrix() * nu).norm(), 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Gradient split

TEST(GradientSplit, SumMatchesFiniteDifferences) {
  for (int t = 0; t < 50; ++t) {
    const TraceFreeSymMat S = random_strain();
    const double r = uniform(0.01, 1.0);
    const Vec3 x = 3.0 * r * random_direction();
    const GradientSplit g = stresslet_gradient_split(S, x, r);
    // D of r V[S](x / r) by differences of the velocity, step 1e-5 (in units of |x|)
    const double h = 1e-5 * x.norm();
    Mat3 fd;
    for (int k = 0; k < 3; ++k) {
      const Vec3 e = h * Vec3::Unit(k);
      fd.col(k) = r * (stresslet_velocity(S, (x + e) / r) - stresslet_velocity(S, (x - e) / r)) / (2 * h);
    }
    const Mat3 D = sym(fd);
    EXPECT_LE((g.stresslet + g.remainder - D).norm(), 1e-8 * D.norm());
  }
}

TEST(GradientSplit, RemainderDecay) {
  double worst = 0.0;
  for (int t = 0; t < 2000; ++t) {
    const TraceFreeSymMat S = random_strain();
    const double r = uniform(0.01, 0.1);
    const double rho = std::exp(uniform(std::log(2.0), std::log(100.0)));
    const GradientSplit g = stresslet_gradient_split(S, rho * r * random_direction(), r);
    worst = std::max(worst, g.remainder.norm() * std::pow(rho, 5) / S.norm());
  }
  // a fixed constant; the closed form gives at most about 25
  EXPECT_LT(worst, 50.0);
  EXPECT_GT(worst, 1.0);
}

TEST(GradientSplit, StressletPartScalesAsRadiusCubed) {
  const TraceFreeSymMat S = random_strain();
  const Vec3 x = 0.5 * random_direction();
  const GradientSplit a = stresslet_gradient_split(S, x, 0.05), b = stresslet_gradient_split(S, x, 0.1);
  EXPECT_LE((b.stresslet - 8.0 * a.stresslet).norm(), 1e-13 * b.stresslet.norm());
  EXPECT_LE((b.remainder - 32.0 * a.remainder).norm(), 1e-13 * b.remainder.norm());
  EXPECT_THROW(stresslet_gradient_split(S, 0.049 * x.normalized(), 0.05), std::domain_error);
}

// ---------------------------------------------------------------------------
// Distributional identity

TEST(Distributional, DisjointSupport) {
  const TraceFreeSymMat S = random_strain();
  // support in the shell 2 < |x| < 4 around the ball, away from it
  const CurlBumpField psi(Vec3(3, 0, 0), 0.9, Vec3(0.3, -0.2, 1.0), Mat3::Identity());
  const DistributionalCheck c = distributional_identity_check(S, 1.0, psi, 32);
  EXPECT_LT(c.residual, 1e-10 * S.norm() * c.grad_sup);
}

TEST(Distributional, ZeroStrainIsExact) {
  const CurlBumpField psi = random_test_field();
  EXPECT_EQ(distributional_identity_residual(TraceFreeSymMat::zero(), 1.0, psi, 16), 0.0);
}

TEST(Distributional, RandomFieldsBelowTolerance) {
  for (int t = 0; t < 10; ++t) {
    const TraceFreeSymMat S = random_strain();
    const double mu = uniform(0.5, 2.0);
    const CurlBumpField psi = random_test_field();
    const DistributionalCheck c32 = distributional_identity_check(S, mu, psi, 32);
    EXPECT_LT(c32.residual, 1e-4 * mu * S.norm() * c32.grad_sup);
    // Richardson-style oracle: refining the rule moves the value toward 0
    const double r48 = distributional_identity_check(S, mu, psi, 48).residual;
    EXPECT_LT(r48, 1e-4 * mu * S.norm() * c32.grad_sup);
  }
}

TEST(Distributional, WrongCoefficientIsDetected) {
  // the same integral with the interior source dropped is far from zero
  const TraceFreeSymMat S(1, -1, 0, 0.5, 0, 0);
  const CurlBumpField psi(Vec3(0.2, 0.1, 0.0), 2.0, Vec3(0.1, 0.2, 0.3), Mat3::Identity() + Mat3::Random());
  const DistributionalCheck c = distributional_identity_check(S, 1.0, psi, 32);
  double interior = 0.0;
  const QuadratureRule gl = gauss_legendre(32, 0.0, 1.0);
  for (int a = 0; a < 32; ++a) {
    for (const SpherePoint& p : sphere_rule(32)) {
      const Vec3 x = gl.nodes[a] * p.direction;
      interior += gl.weights[a] * p.weight * gl.nodes[a] * gl.nodes[a] * 5.0 * S.matrix().cwiseProduct(psi.gradient(x)).sum();
    }
  }
  EXPECT_GT(std::abs(interior), 1e3 * c.residual);
}

TEST(Distributional, RejectsCompressibleField) {
  EXPECT_THROW(distributional_identity_check(random_strain(), 1.0, CompressibleBump{}, 16), std::invalid_argument);
}

TEST(CurlBump, GradientMatchesFiniteDifferences) {
  const CurlBumpField psi = random_test_field();
  for (int t = 0; t < 50; ++t) {
    const Vec3 x = psi.center() + uniform(0.0, 0.95) * psi.support_radius() * random_direction();
    Mat3 fd;
    const double h = 1e-5;
    for (int k = 0; k < 3; ++k) {
      const Vec3 e = h * Vec3::Unit(k);
      fd.col(k) = (psi.velocity(x + e) - psi.velocity(x - e)) / (2 * h);
    }
    const Mat3 g = psi.gradient(x);
    EXPECT_LE((g - fd).norm(), 1e-7 * std::max(1.0, g.norm()));
    EXPECT_LE(std::abs(g.trace()), 1e-12 * std::max(1.0, g.norm()));
  }
}

// ---------------------------------------------------------------------------
// Stresslet strength

TEST(Strength, UnitBallUnitViscosity) {
  const TraceFreeSymMat E = random_strain();
  const TraceFreeSymMat s = isolated_stresslet_strength(1.0, E, 1.0);
  EXPECT_NEAR(20.0 * pi / 3.0, 20.943951, 1e-6);
  EXPECT_LE((s.matrix() - 20.0 * pi / 3.0 * E.matrix()).norm(), 1e-10 * E.norm());
  EXPECT_LE((s - stresslet_strength_closed_form(1.0, E, 1.0)).norm(), 1e-10 * E.norm());
}

TEST(Strength, ScalesAsVolume) {
  const TraceFreeSymMat E = random_strain();
  const TraceFreeSymMat a = isolated_stresslet_strength(0.1, E, 2.0), b = isolated_stresslet_strength(0.2, E, 2.0);
  EXPECT_LE((b.matrix() - 8.0 * a.matrix()).norm(), 1e-12 * b.norm());
  EXPECT_EQ(isolated_stresslet_strength(1.0, TraceFreeSymMat::zero(), 1.0).norm(), 0.0);
  EXPECT_THROW(isolated_stresslet_strength(0.0, E, 1.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Quadrature

TEST(Quadrature, GaussLegendreExactness) {
  for (int n : {1, 2, 5, 12, 32}) {
    const QuadratureRule q = gauss_legendre(n);
    for (int deg = 0; deg < 2 * n; ++deg) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += q.weights[i] * std::pow(q.nodes[i], deg);
      EXPECT_NEAR(s, deg % 2 ? 0.0 : 2.0 / (deg + 1), 1e-13) << n << " " << deg;
    }
  }
}

TEST(Quadrature, SphereMoments) {
  const auto rule = sphere_rule(24);
  double w = 0.0;
  Mat3 m = Mat3::Zero();
  for (const SpherePoint& p : rule) {
    w += p.weight;
    m += p.weight * p.direction * p.direction.transpose();
  }
  EXPECT_NEAR(w, 4.0 * pi, 1e-12);
  EXPECT_LE((m - 4.0 * pi / 3.0 * Mat3::Identity()).norm(), 1e-12);
}
