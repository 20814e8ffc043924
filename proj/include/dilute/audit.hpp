#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dilute/config.hpp"
#include "dilute/kernels.hpp"
#include "dilute/neighbors.hpp"
#include "dilute/point_process.hpp"
#include "dilute/types.hpp"

namespace dilute {

// ---------------------------------------------------------------------------
// Minimal separation

struct B1Result {
  bool pass = true;
  double min_gap = std::numeric_limits<double>::infinity();
};

inline B1Result check_B1(std::span<const Vec3> centers, double radius, double M) {
  if (!(M > 2.0)) throw std::invalid_argument("check_B1: M must exceed 2");
  B1Result out;
  if (centers.size() < 2) return out;
  const auto nn = nearest_neighbor_distances(centers);
  out.min_gap = *std::min_element(nn.begin(), nn.end());
  out.pass = out.min_gap >= M * radius;
  return out;
}

inline B1Result check_B1(const BallConfiguration& config, double M) {
  if (!(M > 2.0)) throw std::invalid_argument("check_B1: M must exceed 2");
  B1Result out;
  if (config.size() < 2) return out;
  out.min_gap = config.min_gap();
  out.pass = out.min_gap >= M * config.radius();
  return out;
}

// ---------------------------------------------------------------------------
// Close-pair profile

struct B2Row {
  double eta = 0.0;
  std::size_t count = 0;  // #{i : some j != i within eta n^{-1/3}}
  double ratio = 0.0;     // count / (eta^3 n)
};

using B2Profile = std::vector<B2Row>;

/// 25 log-spaced thresholds on [0.05, 4].
inline std::vector<double> default_b2_etas(int count = 25, double lo = 0.05, double hi = 4.0) {
  std::vector<double> etas(count);
  for (int k = 0; k < count; ++k) {
    etas[k] = count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1));
  }
  return etas;
}

inline B2Profile b2_profile(std::span<const Vec3> centers, std::span<const double> etas) {
  for (std::size_t k = 0; k < etas.size(); ++k) {
    if (!(etas[k] > 0.0)) throw std::invalid_argument("b2_profile: thresholds must be positive");
    if (k > 0 && etas[k] < etas[k - 1]) throw std::invalid_argument("b2_profile: thresholds must be sorted");
  }
  const std::size_t n = centers.size();
  std::vector<double> nn = nearest_neighbor_distances(centers);
  std::sort(nn.begin(), nn.end());
  const double scale = n > 0 ? std::cbrt(1.0 / static_cast<double>(n)) : 0.0;
  B2Profile out;
  out.reserve(etas.size());
  for (double eta : etas) {
    B2Row row;
    row.eta = eta;
    row.count = static_cast<std::size_t>(std::upper_bound(nn.begin(), nn.end(), eta * scale) - nn.begin());
    row.ratio = n > 0 ? static_cast<double>(row.count) / (eta * eta * eta * static_cast<double>(n)) : 0.0;
    out.push_back(row);
  }
  return out;
}

inline B2Profile b2_profile(const BallConfiguration& config, std::span<const double> etas) {
  return b2_profile(config.centers(), etas);
}

/// Largest ratio over rows with eta in [lo, hi] (0 when none qualify).
inline double b2_max_ratio(const B2Profile& profile, double lo = 0.0,
                           double hi = std::numeric_limits<double>::infinity()) {
  double m = 0.0;
  for (const B2Row& r : profile) {
    if (r.eta >= lo && r.eta <= hi) m = std::max(m, r.ratio);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Empirical measure against the density

struct ScalarTest {
  std::function<double(const Vec3&)> f;
  double sup = 1.0;  // sup norm of f on the domain
};

/// cos(pi a u) cos(pi b v) cos(pi c w) in box-normalized coordinates for
/// a, b, c in 0..degree, plus `bumps` seeded (1 - s^2/R^2)^3 bumps.
inline std::vector<ScalarTest> default_a0_tests(const Box& box = Box::unit_cube(), int degree = 3, int bumps = 10,
                                                std::uint64_t seed = 0) {
  std::vector<ScalarTest> tests;
  const Vec3 lo = box.min, ext = box.extent();
  for (int a = 0; a <= degree; ++a) {
    for (int b = 0; b <= degree; ++b) {
      for (int c = 0; c <= degree; ++c) {
        tests.push_back({[=](const Vec3& x) {
                           const Vec3 u = (x - lo).cwiseQuotient(ext);
                           return std::cos(pi * a * u.x()) * std::cos(pi * b * u.y()) * std::cos(pi * c * u.z());
                         },
                         1.0});
      }
    }
  }
  Stream rng(seed, 0);
  for (int k = 0; k < bumps; ++k) {
    const double R = rng.uniform(0.1, 0.3) * ext.minCoeff();
    const Vec3 center = rng.uniform_in(box);
    tests.push_back({[=](const Vec3& x) {
                       const double w = 1.0 - (x - center).squaredNorm() / (R * R);
                       return w > 0.0 ? w * w * w : 0.0;
                     },
                     1.0});
  }
  return tests;
}

/// (1/n) sum g(x_i) - int g rho, unnormalized.
inline double a0_deviation(std::span<const Vec3> points, const DensityField& rho,
                           const std::function<double(const Vec3&)>& g) {
  if (points.empty()) throw std::invalid_argument("a0_deviation: no points");
  double s = 0.0;
  for (const Vec3& x : points) s += g(x);
  return s / static_cast<double>(points.size()) - rho.integrate(g);
}

inline double a0_discrepancy(std::span<const Vec3> points, const DensityField& rho,
                             std::span<const ScalarTest> tests) {
  if (tests.empty()) throw std::invalid_argument("a0_discrepancy: empty test list");
  double worst = 0.0;
  for (const ScalarTest& t : tests) {
    if (!(t.sup > 0.0)) throw std::invalid_argument("a0_discrepancy: test with zero sup norm");
    worst = std::max(worst, std::abs(a0_deviation(points, rho, t.f)) / t.sup);
  }
  return worst;
}

inline double a0_discrepancy(const BallConfiguration& config, const DensityField& rho,
                             std::span<const ScalarTest> tests) {
  return a0_discrepancy(config.centers(), rho, tests);
}

// ---------------------------------------------------------------------------
// Ball-indicator sums against lambda rho D(phi)

/// Frobenius norm of sum_i D phi(x_i) int_{B_i} g - lambda int rho D phi g,
/// with int_{B_i} g = vol (g(x_i) + r^2/10 Laplacian g(x_i)) and lambda the
/// configuration's volume fraction. The Laplacian is a central difference.
template <SmoothTestField F>
double weak_star_lemma_residual(const BallConfiguration& config, const DensityField& rho, const F& phi,
                                const std::function<double(const Vec3&)>& g) {
  const double r = config.radius();
  const double vol = config.ball_volume();
  const double h = 1e-3;
  Mat3 sum = Mat3::Zero();
  for (const Vec3& x : config.centers()) {
    const double g0 = g(x);
    double lap = 0.0;
    for (int d = 0; d < 3; ++d) {
      const Vec3 e = h * Vec3::Unit(d);
      lap += (g(x + e) - 2.0 * g0 + g(x - e)) / (h * h);
    }
    sum += sym(phi.gradient(x)) * (vol * (g0 + r * r / 10.0 * lap));
  }
  Mat3 mean = Mat3::Zero();
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      mean(a, b) = mean(b, a) = rho.integrate([&](const Vec3& y) { return sym(phi.gradient(y))(a, b) * g(y); });
    }
  }
  return (sum - config.volume_fraction() * mean).norm();
}

// ---------------------------------------------------------------------------
// Two-point correlation

struct PairCorrelation {
  std::vector<double> edges;     // bin k covers [edges[k], edges[k+1])
  std::vector<double> estimate;  // rho_2 per bin
  std::vector<std::size_t> counts;
  std::vector<bool> empty;
  std::vector<double> ratio;     // estimate / intensity^2
  double intensity = 0.0;
  std::size_t samples = 0;
};

inline std::vector<double> linear_bins(double lo, double hi, int count) {
  if (!(hi > lo) || count < 1) throw std::invalid_argument("linear_bins: bad range");
  std::vector<double> e(count + 1);
  for (int k = 0; k <= count; ++k) e[k] = lo + (hi - lo) * k / count;
  return e;
}

/// Distance-histogram estimator with translation edge correction: every
/// ordered pair is weighted by 1/|W intersect (W + x - y)|, then divided by
/// the shell volume and the sample count. Intensity is the mean count / |W|.
inline PairCorrelation pair_correlation_estimate(std::span<const std::vector<Vec3>> samples, const Box& window,
                                                 std::span<const double> edges) {
  if (samples.size() < 20) throw std::invalid_argument("pair_correlation_estimate: need at least 20 samples");
  if (edges.size() < 2) throw std::invalid_argument("pair_correlation_estimate: need at least one bin");
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (!(edges[k] > edges[k - 1]) || edges[0] < 0.0) {
      throw std::invalid_argument("pair_correlation_estimate: bin edges must increase from >= 0");
    }
  }
  const std::size_t bins = edges.size() - 1;
  const Vec3 L = window.extent();
  if (!(edges.back() < L.minCoeff())) {
    throw std::invalid_argument("pair_correlation_estimate: bins must stay below the window width");
  }
  PairCorrelation out;
  out.edges.assign(edges.begin(), edges.end());
  out.samples = samples.size();
  std::vector<double> weighted(bins, 0.0);
  out.counts.assign(bins, 0);
  double total_points = 0.0;
  for (const auto& pts : samples) {
    total_points += static_cast<double>(pts.size());
    for_each_close_pair(pts, edges.back(), [&](std::size_t i, std::size_t j, double d) {
      if (d < edges.front() || d >= edges.back()) return;
      const auto k = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), d) - edges.begin()) - 1;
      const Vec3 diff = (pts[i] - pts[j]).cwiseAbs();
      const double overlap = (L - diff).prod();
      weighted[k] += 2.0 / overlap;  // ordered pairs
      out.counts[k] += 2;
    });
  }
  out.intensity = total_points / (static_cast<double>(samples.size()) * window.volume());
  out.estimate.resize(bins);
  out.ratio.resize(bins);
  out.empty.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double shell = 4.0 * pi / 3.0 * (std::pow(edges[k + 1], 3) - std::pow(edges[k], 3));
    out.estimate[k] = weighted[k] / (shell * static_cast<double>(samples.size()));
    out.empty[k] = out.counts[k] == 0;
    out.ratio[k] = out.intensity > 0.0 ? out.estimate[k] / (out.intensity * out.intensity) : 0.0;
  }
  return out;
}

}  // namespace dilute
