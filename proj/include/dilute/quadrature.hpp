#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dilute/types.hpp"

namespace dilute {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  QuadratureRule q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.nodes[i] = -x;
    q.nodes[n - 1 - i] = x;
    q.weights[i] = q.weights[n - 1 - i] = w;
  }
  return q;
}

/// Gauss-Legendre rule mapped to [a, b].
inline QuadratureRule gauss_legendre(int n, double a, double b) {
  QuadratureRule q = gauss_legendre(n);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    q.nodes[i] = mid + half * q.nodes[i];
    q.weights[i] *= half;
  }
  return q;
}

struct SpherePoint {
  Vec3 direction;
  double weight;  // solid-angle weight; weights sum to 4 pi
};

/// Product rule on the unit sphere: `order` Gauss-Legendre nodes in cos(theta)
/// times 2*order equispaced azimuths.
inline std::vector<SpherePoint> sphere_rule(int order = 24) {
  const QuadratureRule gl = gauss_legendre(order);
  const int nphi = 2 * order;
  std::vector<SpherePoint> pts;
  pts.reserve(static_cast<std::size_t>(order) * nphi);
  for (int a = 0; a < order; ++a) {
    const double ct = gl.nodes[a];
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int b = 0; b < nphi; ++b) {
      const double phi = 2.0 * pi * (b + 0.5) / nphi;
      pts.push_back({Vec3(st * std::cos(phi), st * std::sin(phi), ct), gl.weights[a] * 2.0 * pi / nphi});
    }
  }
  return pts;
}

}  // namespace dilute
