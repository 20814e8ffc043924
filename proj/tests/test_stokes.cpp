#include <gtest/gtest.h>

#include <cmath>

#include "dilute/quadrature.hpp"
#include "dilute/stokes.hpp"

using namespace dilute;

namespace {

const Vec3 kCenter(0.5, 0.5, 0.5);
constexpr double kWidth = 0.1;

// Stokes flow (mu = 1) of the unit-mass gaussian force blob of width w along F:
// u = G F - Hess(K) F with G = erf(r / (sqrt 2 w)) / (4 pi r) and Lap K = G.
Vec3 blob_velocity(const Vec3& y, double w, const Vec3& F) {
  const double r = std::max(y.norm(), 1e-12);
  auto G = [&](double s) { return std::erf(s / (std::sqrt(2.0) * w)) / (4.0 * pi * s); };
  const QuadratureRule q = gauss_legendre(40, 0.0, r);
  double moment = 0.0;
  for (int k = 0; k < 40; ++k) moment += q.weights[k] * q.nodes[k] * q.nodes[k] * G(q.nodes[k]);
  const double K1 = moment / (r * r), K2 = G(r) - 2.0 * K1 / r;
  const Vec3 e = y / r;
  const Mat3 H = K1 / r * (Mat3::Identity() - e * e.transpose()) + K2 * e * e.transpose();
  return G(r) * F - H * F;
}

Forcing blob_forcing() {
  return {"blob", [](const Vec3& x) -> Vec3 {
            return std::exp(-(x - kCenter).squaredNorm() / (2 * kWidth * kWidth)) /
                   std::pow(2 * pi * kWidth * kWidth, 1.5) * Vec3::UnitX();
          }};
}

double bump_density(const Vec3& x) {
  const double w = 1.0 - (x - kCenter).squaredNorm() / (0.4 * 0.4);
  return w > 0.0 ? w * w * w : 0.0;
}

double max_norm(const std::vector<Vec3>& v) {
  double m = 0.0;
  for (const Vec3& x : v) m = std::max(m, x.norm());
  return m;
}

}  // namespace

TEST(EinsteinModel, Viscosity) {
  const EinsteinModel m(2.0, 0.04, DensityField::uniform(Box::unit_cube(), 4));
  EXPECT_NEAR(m.viscosity(Vec3(0.5, 0.5, 0.5)), 2.0 * 1.1, 1e-14);
  EXPECT_NEAR(m.viscosity(Vec3(3, 3, 3)), 2.0, 1e-14);
  EXPECT_THROW(EinsteinModel(0.0, 0.01, DensityField::uniform(Box::unit_cube(), 2)), std::invalid_argument);
  EXPECT_THROW(EinsteinModel(1.0, -0.01, DensityField::uniform(Box::unit_cube(), 2)), std::invalid_argument);
}

TEST(Forcing, Families) {
  for (const char* name : {"bump", "gaussian", "shear", "point-smoothed"}) {
    const Forcing f = make_forcing(name);
    EXPECT_EQ(f.family, name);
    EXPECT_EQ(f(Vec3(1.5, 0.5, 0.5)), Vec3::Zero());
  }
  EXPECT_THROW(make_forcing("vortex"), std::invalid_argument);
}

TEST(Forcing, BumpIsDivergenceFree) {
  const Forcing f = make_forcing("bump", Box::unit_cube(), 2.0);
  const double h = 1e-5;
  for (const Vec3& x : {Vec3(0.4, 0.5, 0.6), Vec3(0.7, 0.6, 0.45), Vec3(0.3, 0.3, 0.5)}) {
    double div = 0.0;
    for (int k = 0; k < 3; ++k) div += (f(x + h * Vec3::Unit(k)) - f(x - h * Vec3::Unit(k)))[k] / (2 * h);
    EXPECT_LT(std::abs(div), 1e-6 * f(x).norm() + 1e-9);
    EXPECT_NEAR(f(x).z(), 0.0, 1e-15);
  }
  EXPECT_EQ(f(Vec3(0.1, 0.1, 0.1)), Vec3::Zero());
}

TEST(Forcing, PointSmoothedHasUnitMass) {
  const Forcing f = make_forcing("point-smoothed", Box::unit_cube(), 3.0);
  const QuadratureRule gl = gauss_legendre(20, 0.0, 0.1);
  double mass = 0.0;
  for (int a = 0; a < 20; ++a)
    for (const SpherePoint& p : sphere_rule(8)) mass += gl.weights[a] * p.weight * gl.nodes[a] * gl.nodes[a] * f(kCenter + gl.nodes[a] * p.direction).x();
  EXPECT_NEAR(mass, 3.0, 1e-12);
}

TEST(StokesSolver, ConvergesToBlobSolution) {
  double prev = std::numeric_limits<double>::infinity();
  for (int n : {16, 32}) {
    const UniformGrid g(Box::unit_cube(), n);
    const GridVectorField u = solve_stokes(blob_forcing(), 2.0, g);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Vec3 exact = 0.5 * blob_velocity(g.center(i) - kCenter, kWidth, Vec3::UnitX());
      err = std::max(err, (u.values()[i] - exact).norm());
      scale = std::max(scale, exact.norm());
    }
    // second order: the error drops by about 4 per halving
    if (std::isfinite(prev)) {
      EXPECT_GT(prev / err, 3.0);
    }
    prev = err;
    EXPECT_LT(err, 0.02 * scale);
  }
  EXPECT_THROW(solve_stokes(blob_forcing(), 0.0, UniformGrid(Box::unit_cube(), 4)), std::invalid_argument);
}

TEST(EinsteinSolver, ZeroLambdaIsStokes) {
  const UniformGrid g(Box::unit_cube(), 12);
  const Forcing f = make_forcing("bump");
  const EinsteinSolution s = solve_einstein(f, EinsteinModel(1.0, 0.0, DensityField::uniform(Box::unit_cube(), 4)), g);
  EXPECT_EQ(s.iterations, 1);
  EXPECT_TRUE(s.increments.empty());
  const GridVectorField u0 = solve_stokes(f, 1.0, g);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(s.field.values()[i], u0.values()[i]);
}

TEST(EinsteinSolver, FixedPointResidualAndContraction) {
  const UniformGrid g(Box::unit_cube(), 24);
  OseenConvolver conv(g);
  const Forcing f = make_forcing("bump");
  const DensityField rho = DensityField::uniform(Box::unit_cube(), 8);
  std::vector<double> first_ratio;
  for (double lam : {0.02, 0.04}) {
    const EinsteinModel model(1.0, lam, rho);
    const EinsteinSolution s = solve_einstein(f, model, g, 1e-12, 100, &conv);
    ASSERT_GE(s.increments.size(), 2u);
    first_ratio.push_back(s.increments[1] / s.increments[0]);
    const GridVectorField u0 = solve_stokes(f, 1.0, g, &conv);
    const auto grad = grid_gradient(g, s.field.values());
    std::vector<Mat3> tau(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) tau[i] = 5.0 * lam * rho(g.center(i)) * sym(grad[i]);
    const auto corr = conv.stress_divergence(tau);
    double res = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) res = std::max(res, (s.field.values()[i] - u0.values()[i] - corr[i]).norm());
    EXPECT_LT(res, 1e-10 * max_norm(u0.values()));
    // the suspension dissipates more: less power for the same forcing
    const double p_e = forcing_pairing(f, FlowField::from_grid("uE", s.field), Box::unit_cube(), 24);
    const double p_0 = forcing_pairing(f, FlowField::from_grid("u0", u0), Box::unit_cube(), 24);
    EXPECT_LT(p_e, p_0);
    EXPECT_GT(p_e, p_0 / (1.0 + 2.5 * lam) * 0.99);
  }
  // contraction factor grows linearly with lambda
  EXPECT_NEAR(first_ratio[1] / first_ratio[0], 2.0, 0.1);
}

TEST(EinsteinSolver, LinearResponseMatchesForcePath) {
  // (u_E - u_0) / lambda -> U * div(5 rho D u_0) as lambda -> 0; the oracle applies the
  // Oseen tensor to the analytic divergence of the analytic blob flow. lambda is small
  // because rho peaks near 25.
  const double lam = 1e-4;
  auto u0 = [](const Vec3& x) { return blob_velocity(x - kCenter + Vec3(1e-7, 0, 0), kWidth, Vec3::UnitX()); };
  std::vector<double> errs;
  for (int n : {16, 24}) {
    const UniformGrid g(Box::unit_cube(), n);
    OseenConvolver conv(g);
    const DensityField rho = DensityField::from_function(Box::unit_cube(), n, bump_density);
    const double norm = rho(kCenter) / bump_density(kCenter);
    auto stress = [&](const Vec3& x) {
      const double h = 1e-4;
      Mat3 grad;
      for (int k = 0; k < 3; ++k) grad.col(k) = (u0(x + h * Vec3::Unit(k)) - u0(x - h * Vec3::Unit(k))) / (2 * h);
      return Mat3(5.0 * norm * bump_density(x) * sym(grad));
    };
    std::vector<Vec3> div(g.size(), Vec3::Zero());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Vec3 x = g.center(i);
      if (bump_density(x) == 0.0) continue;
      const double h = 1e-3;
      for (int k = 0; k < 3; ++k) div[i] += (stress(x + h * Vec3::Unit(k)) - stress(x - h * Vec3::Unit(k))).col(k) / (2 * h);
    }
    const std::vector<Vec3> oracle = conv.oseen(div);

    const Forcing f = blob_forcing();
    const GridVectorField base = solve_stokes(f, 1.0, g, &conv);
    const EinsteinSolution s = solve_einstein(f, EinsteinModel(1.0, lam, rho), g, 1e-14, 100, &conv);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      err = std::max(err, ((s.field.values()[i] - base.values()[i]) / lam - oracle[i]).norm());
    }
    errs.push_back(err / max_norm(oracle));
  }
  EXPECT_GT(errs[0] / errs[1], 1.5);
  EXPECT_LT(errs[1], 0.06);
}

TEST(EinsteinSolver, DetectsDivergence) {
  const UniformGrid g(Box::unit_cube(), 12);
  const DensityField rho = DensityField::from_function(Box::unit_cube(), 12, bump_density);
  try {
    solve_einstein(make_forcing("bump"), EinsteinModel(1.0, 5.0, rho), g, 1e-12);
    FAIL() << "expected EinsteinDivergence";
  } catch (const EinsteinDivergence& e) {
    EXPECT_GE(e.ratio(), 1.0);
  }
}

// ---------------------------------------------------------------------------
// Norms

TEST(Norms, ConstantAndLinearFields) {
  const FlowField one("one", [](const Vec3&) -> Vec3 { return Vec3(0, 3, 4); },
                      [](const Vec3&) -> Mat3 { return Mat3::Zero(); });
  const Box region{Vec3(0.25, 0.25, 0.25), Vec3(0.75, 0.75, 0.75)};
  EXPECT_NEAR(field_norm(one, region, nullptr, 2.0, NormKind::value, 8), 5.0 * std::sqrt(0.125), 1e-12);
  EXPECT_NEAR(field_norm(one, region, nullptr, 1.0, NormKind::value, 8), 5.0 * 0.125, 1e-12);
  EXPECT_EQ(field_norm(one, region, nullptr, 2.0, NormKind::gradient, 8), 0.0);
  // stratified sampling of x^2 over the unit cube: int = 1/3
  const FlowField lin("lin", [](const Vec3& x) -> Vec3 { return Vec3(x.x(), 0, 0); },
                      [](const Vec3&) -> Mat3 { return Mat3::Identity(); });
  EXPECT_NEAR(std::pow(field_norm(lin, Box::unit_cube(), nullptr, 2.0, NormKind::value, 32), 2), 1.0 / 3.0, 1e-4);
  EXPECT_NEAR(field_norm(lin, Box::unit_cube(), nullptr, 2.0, NormKind::gradient, 4), std::sqrt(3.0), 1e-12);
  EXPECT_THROW(field_norm(one, region, nullptr, 0.5, NormKind::value), std::invalid_argument);
}

TEST(Norms, ExclusionMatchesZeroInsideBalls) {
  std::vector<Vec3> c;
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 5; ++i) c.emplace_back((i + 0.5) / 5, (j + 0.5) / 5, (k + 0.5) / 5);
  for (std::size_t count : {c.size(), std::size_t{20}}) {
    const BallConfiguration cfg(std::vector<Vec3>(c.begin(), c.begin() + count), 0.07);
    const FlowField f("f", [](const Vec3& x) -> Vec3 { return Vec3(1.0 + x.y(), 0, x.z()); },
                      [](const Vec3&) -> Mat3 { return Mat3::Zero(); });
    const double excluded = field_norm(f, Box::unit_cube(), &cfg, 2.0, NormKind::value, 24, 9);
    const FlowField masked("m",
                           [&](const Vec3& x) -> Vec3 { return cfg.ball_containing(x) >= 0 ? Vec3::Zero() : f.velocity(x); },
                           [](const Vec3&) -> Mat3 { return Mat3::Zero(); });
    EXPECT_NEAR(excluded, field_norm(masked, Box::unit_cube(), nullptr, 2.0, NormKind::value, 24, 9), 1e-12);
  }
  const BallConfiguration cover({Vec3(0.5, 0.5, 0.5)}, 0.01, Box::unit_cube());
  const Box tiny{Vec3::Constant(0.499), Vec3::Constant(0.501)};
  EXPECT_THROW(field_norm(FlowField::zero(), tiny, &cover, 2.0, NormKind::value, 2), std::invalid_argument);
}

TEST(Norms, ThreadCountDoesNotMatter) {
  const FlowField f("f", [](const Vec3& x) -> Vec3 { return Vec3(std::sin(7 * x.x()), x.y() * x.z(), 1.0); },
                    [](const Vec3&) -> Mat3 { return Mat3::Zero(); });
  ::setenv("DILUTE_THREADS", "1", 1);
  const double a = field_norm(f, Box::unit_cube(), nullptr, 2.0, NormKind::value, 16, 3);
  ::setenv("DILUTE_THREADS", "4", 1);
  const double b = field_norm(f, Box::unit_cube(), nullptr, 2.0, NormKind::value, 16, 3);
  ::unsetenv("DILUTE_THREADS");
  EXPECT_EQ(a, b);
}

TEST(Norms, ForcingPairingMidpoint) {
  const Forcing f{"c", [](const Vec3&) -> Vec3 { return Vec3(1, 0, 0); }};
  const FlowField u("u", [](const Vec3& x) -> Vec3 { return Vec3(x.x() + 2 * x.y(), 5, 0); },
                    [](const Vec3&) -> Mat3 { return Mat3::Zero(); });
  EXPECT_NEAR(forcing_pairing(f, u, Box::unit_cube(), 8), 1.5, 1e-13);
}

// ---------------------------------------------------------------------------
// Particles and the corrector

namespace {

std::vector<Vec3> small_lattice() {
  std::vector<Vec3> c;
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) c.emplace_back((i + 0.5) / 4, (j + 0.5) / 4, (k + 0.5) / 4);
  return c;
}

}  // namespace

TEST(Particles, RigidAtCenters) {
  const BallConfiguration cfg(small_lattice(), 0.04);
  const Mat3 A = (Mat3() << 0.1, 0.7, 0.0, -0.2, 0.3, 0.5, 0.4, 0.0, -0.4).finished();
  const FlowField background("lin", [A](const Vec3& x) -> Vec3 { return A * x; }, [A](const Vec3&) -> Mat3 { return A; });
  ReflectionOptions opt;
  opt.tol = 1e-12;
  const ParticleSolution sol = solve_particles(cfg, background, opt);
  for (const Vec3& x : cfg.centers()) EXPECT_LT(sym(sol.field.gradient(x)).norm(), 1e-11);
  // the disturbance decays away from the suspension
  const Vec3 far(20, 20, 20);
  EXPECT_LT((sol.field.velocity(far) - A * far).norm(), 1e-3 * (A * far).norm());
}

TEST(Corrector, MatchesTestFieldStrainAtCenters) {
  const BallConfiguration cfg(small_lattice(), 0.03);
  const DensityField rho = DensityField::uniform(Box::unit_cube(), 8);
  const CurlBumpField phi(kCenter, 0.45, Vec3(0.3, -0.1, 0.2), Mat3::Identity() * 0.4);
  const UniformGrid g(Box::unit_cube(), 16);
  const PhiNSolution s = solve_phi_n(cfg, 0.5, phi, rho, cfg.volume_fraction(), 1.0, 1e-12, g);
  for (const Vec3& x : cfg.centers()) {
    EXPECT_LT((sym(s.field.gradient(x)) - sym(phi.gradient(x))).norm(), 1e-9 * (1.0 + phi.gradient(x).norm()));
  }
  // with every index bad only the grid part remains in the approximation
  const FlowField bare = assemble_phi_app(cfg, 10.0, phi, rho, cfg.volume_fraction(), 1.0, g);
  EXPECT_EQ(bare.tag(), "phi_R3");
}
