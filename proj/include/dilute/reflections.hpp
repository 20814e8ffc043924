#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dilute/config.hpp"
#include "dilute/flow.hpp"
#include "dilute/kernels.hpp"
#include "dilute/parallel.hpp"
#include "dilute/quadrature.hpp"
#include "dilute/types.hpp"

namespace dilute {

enum class SweepScheme { jacobi, gauss_seidel };

struct ReflectionOptions {
  double mu = 1.0;
  double tol = 1e-8;
  int max_sweeps = 100;
  SweepScheme scheme = SweepScheme::jacobi;
};

/// Converged per-ball strains S_i and stresslet strengths 5 mu vol(B) S_i.
struct StressletState {
  std::vector<TraceFreeSymMat> strains;
  std::vector<TraceFreeSymMat> strengths;
  int sweeps = 0;
  std::vector<double> residual_history;  // max_i |S_i^{k+1} - S_i^k| per sweep
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Strain at center i induced by the other balls' fields r V[S_j]((x - x_j)/r).
inline Mat3 interaction_strain(const BallConfiguration& config, const std::vector<Mat3>& S, std::size_t i) {
  const double inv_r = 1.0 / config.radius();
  Mat3 acc = Mat3::Zero();
  const Vec3& xi = config.center(i);
  for (std::size_t j = 0; j < config.size(); ++j) {
    if (j == i) continue;
    acc += ball_strain_exterior(S[j], (xi - config.center(j)) * inv_r);
  }
  return acc;
}

/// Method of reflections for rigid balls in ambient strains E_i: the fixed
/// point of S_i = E_i - sum_{j != i} D[r V[S_j]((. - x_j)/r)](x_i), started at
/// S = E. Throws NonConvergence when the residual stops decreasing after the
/// first sweep or max_sweeps is exhausted.
inline StressletState reflections_solve(const BallConfiguration& config, const std::vector<TraceFreeSymMat>& ambient,
                                        const ReflectionOptions& opt = {}) {
  const std::size_t n = config.size();
  if (ambient.size() != n) throw std::invalid_argument("reflections_solve: one ambient strain per ball required");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("reflections_solve: tol must be positive");
  if (opt.max_sweeps < 1) throw std::invalid_argument("reflections_solve: max_sweeps must be >= 1");
  if (n > 1 && !(config.min_gap() > 2.0 * config.radius())) {
    throw std::invalid_argument("reflections_solve: balls touch");
  }

  std::vector<Mat3> E(n), S(n), next(n);
  for (std::size_t i = 0; i < n; ++i) S[i] = E[i] = ambient[i].matrix();

  StressletState state;
  for (int sweep = 1;; ++sweep) {
    double residual = 0.0;
    if (opt.scheme == SweepScheme::jacobi) {
      std::vector<double> change(n);
      parallel_for(n, [&](std::size_t i) {
        next[i] = E[i] - interaction_strain(config, S, i);
        change[i] = (next[i] - S[i]).norm();
      }, 16);
      for (double c : change) residual = std::max(residual, c);
      std::swap(S, next);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const Mat3 updated = E[i] - interaction_strain(config, S, i);
        residual = std::max(residual, (updated - S[i]).norm());
        S[i] = updated;
      }
    }
    state.residual_history.push_back(residual);
    state.sweeps = sweep;
    if (residual <= opt.tol) break;
    const auto& h = state.residual_history;
    if (h.size() >= 2 && !(h[h.size() - 1] < h[h.size() - 2])) {
      throw NonConvergence("reflections_solve: residual stopped decreasing at sweep " + std::to_string(sweep), h);
    }
    if (sweep >= opt.max_sweeps) {
      throw NonConvergence("reflections_solve: no convergence in " + std::to_string(sweep) + " sweeps", h);
    }
  }
  const double strength = 5.0 * opt.mu * config.ball_volume();
  state.strains.reserve(n);
  state.strengths.reserve(n);
  for (const Mat3& s : S) {
    state.strains.push_back(TraceFreeSymMat::project(s));
    state.strengths.push_back(state.strains.back() * strength);
  }
  return state;
}

inline StressletState reflections_solve(const BallConfiguration& config,
                                        const std::function<TraceFreeSymMat(const Vec3&)>& ambient,
                                        const ReflectionOptions& opt = {}) {
  std::vector<TraceFreeSymMat> E;
  E.reserve(config.size());
  for (const Vec3& x : config.centers()) E.push_back(ambient(x));
  return reflections_solve(config, E, opt);
}

/// Disturbance field sum_j r V[S_j]((x - x_j)/r) of a solved state.
inline StressletSum stresslet_field(const BallConfiguration& config, const StressletState& state, double mu = 1.0) {
  return StressletSum(config.centers(), config.radius(), state.strains, mu);
}

/// mu_eff / mu = 1 + sum_i 5 vol(B_i) S_i : E / (2 |O| E : E) for a constant
/// ambient strain E, with |O| the domain box volume.
inline double effective_viscosity_estimate(const BallConfiguration& config, double mu, const TraceFreeSymMat& E,
                                           double tol = 1e-8, StressletState* state_out = nullptr,
                                           SweepScheme scheme = SweepScheme::jacobi) {
  const double ee = E.dot(E);
  if (!(ee > 0.0)) throw std::invalid_argument("effective_viscosity_estimate: E must be nonzero");
  const Box& dom = config.domain();
  for (const Vec3& c : config.centers()) {
    if (!dom.contains(c)) throw std::invalid_argument("effective_viscosity_estimate: ball outside the domain");
  }
  // solve at unit scale so the absolute tolerance is relative to |E|
  const double scale = std::sqrt(ee);
  ReflectionOptions opt;
  opt.mu = mu;
  opt.tol = tol;
  opt.scheme = scheme;
  StressletState state = reflections_solve(config, std::vector<TraceFreeSymMat>(config.size(), E * (1.0 / scale)), opt);
  double sum = 0.0;
  for (const auto& s : state.strains) sum += s.dot(E) * scale;
  const double ratio = 1.0 + 5.0 * config.ball_volume() * sum / (2.0 * dom.volume() * ee);
  if (state_out) {
    for (auto& s : state.strains) s = s * scale;
    for (auto& s : state.strengths) s = s * scale;
    *state_out = std::move(state);
  }
  return ratio;
}

/// Exterior Dirichlet energy int 2 mu |D u|^2 of a stresslet superposition,
/// from the boundary identity -sum_i int_{dB_i} u . sigma(u) nu with nu the
/// outward ball normal (the far field decays like |x|^-2).
inline double exterior_energy(const StressletSum& field, const BallConfiguration& config, double mu,
                              int order = 24) {
  const auto rule = sphere_rule(order);
  const double r = config.radius();
  double total = 0.0;
  for (const Vec3& c : config.centers()) {
    for (const SpherePoint& p : rule) {
      // evaluate just outside the surface so every ball term uses its exterior form
      const Vec3 x = c + r * (1.0 + 1e-14) * p.direction;
      const Vec3 u = field.velocity(x);
      const Mat3 g = field.gradient(x);
      const Mat3 sigma = mu * (g + g.transpose()) - field.pressure(x) * Mat3::Identity();
      total -= p.weight * r * r * u.dot(sigma * p.direction);
    }
  }
  return total;
}

}  // namespace dilute
