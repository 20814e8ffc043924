#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dilute/config.hpp"
#include "dilute/flow.hpp"
#include "dilute/grid.hpp"
#include "dilute/kernels.hpp"
#include "dilute/parallel.hpp"
#include "dilute/point_process.hpp"
#include "dilute/reflections.hpp"
#include "dilute/types.hpp"

namespace dilute {

// ---------------------------------------------------------------------------
// Effective medium

/// Viscosity mu_E = mu (1 + 5/2 lambda rho) of the homogenized fluid.
struct EinsteinModel {
  double mu = 1.0;
  double lambda = 0.0;
  std::shared_ptr<const DensityField> rho;

  EinsteinModel(double mu_, double lambda_, DensityField rho_)
      : mu(mu_), lambda(lambda_), rho(std::make_shared<const DensityField>(std::move(rho_))) {
    if (!(mu > 0.0)) throw std::invalid_argument("EinsteinModel: mu must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("EinsteinModel: lambda must be >= 0");
  }

  double viscosity(const Vec3& x) const { return mu * (1.0 + 2.5 * lambda * (*rho)(x)); }
};

// ---------------------------------------------------------------------------
// Forcing families

struct Forcing {
  std::string family;
  std::function<Vec3(const Vec3&)> f;
  Vec3 operator()(const Vec3& x) const { return f(x); }
};

/// Named forcings on the domain box. All vanish outside the box.
///  bump:           curl((1 - s^2/R^2)^4 a) centered in the box, R = 0.35 side, a = amplitude e_z (divergence free)
///  gaussian:       amplitude exp(-s^2 / (2 w^2)) e_x, w = 0.1 side
///  shear:          amplitude sin(2 pi (z - z0) / side) e_x
///  point-smoothed: unit-mass (1 - s^2/eps^2)^2 bump of radius eps = 0.1 side times amplitude e_x
inline Forcing make_forcing(const std::string& family, const Box& box = Box::unit_cube(), double amplitude = 1.0) {
  const Vec3 c = box.center();
  const double side = box.extent().minCoeff();
  auto inside = [box](const Vec3& x) { return box.contains(x); };
  if (family == "bump") {
    const double R = 0.35 * side;
    const Vec3 a = amplitude * Vec3::UnitZ();
    return {family, [=](const Vec3& x) -> Vec3 {
              const Vec3 y = x - c;
              const double w = 1.0 - y.squaredNorm() / (R * R);
              if (w <= 0.0 || !inside(x)) return Vec3::Zero();
              const Vec3 grad = -8.0 * w * w * w * y / (R * R);
              return grad.cross(a);
            }};
  }
  if (family == "gaussian") {
    const double w = 0.1 * side;
    return {family, [=](const Vec3& x) -> Vec3 {
              if (!inside(x)) return Vec3::Zero();
              return amplitude * std::exp(-(x - c).squaredNorm() / (2.0 * w * w)) * Vec3::UnitX();
            }};
  }
  if (family == "shear") {
    return {family, [=](const Vec3& x) -> Vec3 {
              if (!inside(x)) return Vec3::Zero();
              return amplitude * std::sin(2.0 * pi * (x.z() - box.min.z()) / side) * Vec3::UnitX();
            }};
  }
  if (family == "point-smoothed") {
    const double eps = 0.1 * side;
    const double mass = 32.0 * pi * eps * eps * eps / 105.0;  // int (1 - s^2/eps^2)^2
    return {family, [=](const Vec3& x) -> Vec3 {
              const double w = 1.0 - (x - c).squaredNorm() / (eps * eps);
              if (w <= 0.0 || !inside(x)) return Vec3::Zero();
              return amplitude * w * w / mass * Vec3::UnitX();
            }};
  }
  throw std::invalid_argument("unknown forcing family '" + family + "'");
}

// ---------------------------------------------------------------------------
// Grid solvers

/// Plain Stokes velocity (1/mu) U * f on the grid.
inline GridVectorField solve_stokes(const Forcing& f, double mu, const UniformGrid& grid, OseenConvolver* conv = nullptr) {
  if (!(mu > 0.0)) throw std::invalid_argument("solve_stokes: mu must be positive");
  std::unique_ptr<OseenConvolver> own;
  if (!conv) conv = (own = std::make_unique<OseenConvolver>(grid)).get();
  std::vector<Vec3> fv(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) fv[i] = f(grid.center(i));
  std::vector<Vec3> u = conv->oseen(fv);
  for (Vec3& v : u) v /= mu;
  return GridVectorField(grid, std::move(u));
}

class EinsteinDivergence : public std::runtime_error {
 public:
  EinsteinDivergence(const std::string& what, double ratio) : std::runtime_error(what), ratio_(ratio) {}
  double ratio() const { return ratio_; }

 private:
  double ratio_;
};

struct EinsteinSolution {
  GridVectorField field;
  int iterations = 0;
  std::vector<double> increments;  // max-norm of successive differences
};

/// Fixed point u = u0 + U * div(5 lambda rho D u) with u0 = (1/mu) U * f.
/// Stops when the max-norm increment is <= tol; aborts when an increment fails
/// to shrink.
inline EinsteinSolution solve_einstein(const Forcing& f, const EinsteinModel& model, const UniformGrid& grid,
                                       double tol = 1e-8, int max_iterations = 100,
                                       OseenConvolver* conv = nullptr) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_einstein: tol must be positive");
  std::unique_ptr<OseenConvolver> own;
  if (!conv) conv = (own = std::make_unique<OseenConvolver>(grid)).get();
  GridVectorField u0 = solve_stokes(f, model.mu, grid, conv);
  EinsteinSolution out{u0, 1, {}};
  if (model.lambda == 0.0) return out;

  std::vector<double> weight(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) weight[i] = 5.0 * model.lambda * (*model.rho)(grid.center(i));

  std::vector<Vec3> u = u0.values();
  std::vector<Mat3> tau(grid.size());
  for (int it = 1;; ++it) {
    const std::vector<Mat3> grad = grid_gradient(grid, u);
    for (std::size_t i = 0; i < grid.size(); ++i) tau[i] = weight[i] * sym(grad[i]);
    std::vector<Vec3> next = conv->stress_divergence(tau);
    double inc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      next[i] += u0.values()[i];
      inc = std::max(inc, (next[i] - u[i]).cwiseAbs().maxCoeff());
    }
    u = std::move(next);
    out.increments.push_back(inc);
    out.iterations = it + 1;
    if (inc <= tol) break;
    const auto& h = out.increments;
    if (h.size() >= 2 && h[h.size() - 1] >= h[h.size() - 2]) {
      const double ratio = h[h.size() - 1] / h[h.size() - 2];
      throw EinsteinDivergence("solve_einstein: increment ratio " + std::to_string(ratio) + " >= 1", ratio);
    }
    if (it >= max_iterations) throw EinsteinDivergence("solve_einstein: iteration limit reached", h.back() / h[h.size() - 2]);
  }
  out.field = GridVectorField(grid, std::move(u));
  return out;
}

/// phi_R3 = U * div(5 lambda rho D phi) on the grid (mu cancels).
template <SmoothTestField F>
GridVectorField phi_R3(const F& phi, const DensityField& rho, double lambda, double mu, const UniformGrid& grid,
                       OseenConvolver* conv = nullptr) {
  if (!(mu > 0.0)) throw std::invalid_argument("phi_R3: mu must be positive");
  std::unique_ptr<OseenConvolver> own;
  if (!conv) conv = (own = std::make_unique<OseenConvolver>(grid)).get();
  std::vector<Mat3> tau(grid.size());
  bool any = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec3 x = grid.center(i);
    const double w = 5.0 * lambda * rho(x);
    tau[i] = w == 0.0 ? Mat3::Zero() : Mat3(w * sym(phi.gradient(x)));
    any = any || !tau[i].isZero(0.0);
  }
  if (!any) return GridVectorField(grid, std::vector<Vec3>(grid.size(), Vec3::Zero()));
  return GridVectorField(grid, conv->stress_divergence(tau));
}

/// phi_app = phi_R3 + sum over good indices of r V[D phi(x_i)]((x - x_i)/r).
template <SmoothTestField F>
FlowField assemble_phi_app(const BallConfiguration& config, double eta, const F& phi, const DensityField& rho,
                           double lambda, double mu, const UniformGrid& grid, OseenConvolver* conv = nullptr) {
  const GoodBadPartition part = partition_good_bad(config, eta);
  FlowField out = FlowField::from_grid("phi_R3", phi_R3(phi, rho, lambda, mu, grid, conv));
  if (part.good.empty()) return out;
  std::vector<Vec3> centers;
  std::vector<TraceFreeSymMat> strains;
  for (std::size_t i : part.good) {
    centers.push_back(config.center(i));
    strains.push_back(TraceFreeSymMat::project(phi.gradient(config.center(i))));
  }
  return out + StressletSum(std::move(centers), config.radius(), std::move(strains), mu).as_field("good_stresslets");
}

struct PhiNSolution {
  FlowField field;
  FlowField approximation;
  StressletState correction;
};

/// phi_app plus the reflections correction whose ball strain data is
/// D(phi - phi_app) at the centers.
template <SmoothTestField F>
PhiNSolution solve_phi_n(const BallConfiguration& config, double eta, const F& phi, const DensityField& rho,
                         double lambda, double mu, double tol, const UniformGrid& grid,
                         OseenConvolver* conv = nullptr) {
  FlowField app = assemble_phi_app(config, eta, phi, rho, lambda, mu, grid, conv);
  std::vector<TraceFreeSymMat> data;
  data.reserve(config.size());
  for (const Vec3& x : config.centers()) data.push_back(TraceFreeSymMat::project(phi.gradient(x) - app.gradient(x)));
  ReflectionOptions opt;
  opt.mu = mu;
  opt.tol = tol;
  StressletState st = reflections_solve(config, data, opt);
  FlowField total = app + stresslet_field(config, st, mu).as_field("correction");
  return {total, app, std::move(st)};
}

// ---------------------------------------------------------------------------
// Particle suspension

struct ParticleSolution {
  FlowField field;   // u0 - sum_j r V[S_j]
  StressletSum disturbance;
  StressletState state;
};

/// Rigid force- and torque-free balls in the background flow u0: strains from
/// the reflections with ambient strain D u0(x_i).
inline ParticleSolution solve_particles(const BallConfiguration& config, const FlowField& background,
                                        const ReflectionOptions& opt = {}) {
  std::vector<TraceFreeSymMat> E;
  E.reserve(config.size());
  for (const Vec3& x : config.centers()) E.push_back(TraceFreeSymMat::project(background.gradient(x)));
  StressletState st = reflections_solve(config, E, opt);
  StressletSum dist = stresslet_field(config, st, opt.mu);
  FlowField u = background - dist.as_field("disturbance");
  return {u, dist, std::move(st)};
}

// ---------------------------------------------------------------------------
// Norms

enum class NormKind { value, gradient };

/// Stratified Monte-Carlo L^p norms of several quantities on the same sample
/// points: `eval(x, out)` writes one magnitude per quantity. One jittered point
/// per stratum of an m^3 split of the region; points inside excluded balls
/// count as zero.
inline std::vector<double> sampled_norms(const Box& region, const BallConfiguration* exclude, double p, int strata,
                                         std::size_t quantities,
                                         const std::function<void(const Vec3&, std::span<double>)>& eval,
                                         std::uint64_t seed = 0) {
  if (!(p >= 1.0)) throw std::invalid_argument("field_norm: p must be >= 1");
  if (!region.valid()) throw std::invalid_argument("field_norm: empty region");
  if (strata < 1) throw std::invalid_argument("field_norm: need at least one stratum");
  const std::size_t m = static_cast<std::size_t>(strata);
  const std::size_t total = m * m * m;
  const Vec3 step = region.extent() / static_cast<double>(strata);

  std::unique_ptr<CellGrid> cells;
  if (exclude && exclude->size() >= 64) cells = std::make_unique<CellGrid>(exclude->centers(), exclude->radius());

  // one stream per z-slab keeps the sample set independent of the thread count
  std::vector<std::vector<double>> slab_sums(m, std::vector<double>(quantities, 0.0));
  std::vector<std::size_t> slab_kept(m, 0);
  parallel_for(m, [&](std::size_t k) {
    Stream rng(seed, k);
    std::vector<double> vals(quantities);
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        const Vec3 x = region.min + step.cwiseProduct(Vec3(i + rng.uniform(), j + rng.uniform(), k + rng.uniform()));
        if (exclude) {
          bool inside = false;
          const double r2 = exclude->radius() * exclude->radius();
          if (cells) {
            cells->visit_shell(cells->cell_of(x), 0, [&](std::size_t b) {
              inside = inside || (x - exclude->center(b)).squaredNorm() < r2;
            });
            if (!inside) {
              cells->visit_shell(cells->cell_of(x), 1, [&](std::size_t b) {
                inside = inside || (x - exclude->center(b)).squaredNorm() < r2;
              });
            }
          } else {
            inside = exclude->ball_containing(x) >= 0;
          }
          if (inside) continue;
        }
        eval(x, vals);
        for (std::size_t q = 0; q < quantities; ++q) slab_sums[k][q] += std::pow(std::abs(vals[q]), p);
        ++slab_kept[k];
      }
    }
  }, 1);
  std::size_t kept = 0;
  std::vector<double> sums(quantities, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    kept += slab_kept[k];
    for (std::size_t q = 0; q < quantities; ++q) sums[q] += slab_sums[k][q];
  }
  if (kept == 0) throw std::invalid_argument("field_norm: region fully excluded");
  std::vector<double> out(quantities);
  for (std::size_t q = 0; q < quantities; ++q) {
    out[q] = std::pow(sums[q] * region.volume() / static_cast<double>(total), 1.0 / p);
  }
  return out;
}

inline std::vector<double> field_norms(std::span<const FlowField> fields, const Box& region,
                                       const BallConfiguration* exclude, double p, NormKind kind, int strata = 64,
                                       std::uint64_t seed = 0) {
  return sampled_norms(region, exclude, p, strata, fields.size(), [&](const Vec3& x, std::span<double> out) {
    for (std::size_t q = 0; q < fields.size(); ++q) {
      out[q] = kind == NormKind::value ? fields[q].velocity(x).norm() : fields[q].gradient(x).norm();
    }
  }, seed);
}

inline double field_norm(const FlowField& field, const Box& region, const BallConfiguration* exclude, double p,
                         NormKind kind, int strata = 64, std::uint64_t seed = 0) {
  return field_norms(std::span<const FlowField>(&field, 1), region, exclude, p, kind, strata, seed)[0];
}

/// Midpoint rule for int_region f . u on an m^3 cell split.
inline double forcing_pairing(const Forcing& f, const FlowField& u, const Box& region, int cells = 32) {
  const Vec3 step = region.extent() / static_cast<double>(cells);
  const auto m = static_cast<std::size_t>(cells);
  std::vector<double> slab(m, 0.0);
  parallel_for(m, [&](std::size_t k) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        const Vec3 x = region.min + step.cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5));
        const Vec3 fx = f(x);
        if (!fx.isZero(0.0)) slab[k] += fx.dot(u.velocity(x));
      }
    }
  }, 1);
  double s = 0.0;
  for (double v : slab) s += v;
  return s * step.prod();
}

}  // namespace dilute
