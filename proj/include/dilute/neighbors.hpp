#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "dilute/types.hpp"

namespace dilute {

/// Below this size pair searches are exhaustive; above it a uniform cell grid
/// is used. Both paths return identical results.
inline constexpr std::size_t kCellGridThreshold = 10000;

/// Uniform cell list over the bounding box of a point set.
class CellGrid {
 public:
  CellGrid(std::span<const Vec3> points, double cell_size) : points_(points) {
    lo_ = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (const Vec3& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    if (points.empty()) lo_ = hi = Vec3::Zero();
    const double span = (hi - lo_).maxCoeff();
    // keep the grid below ~ 2 cells per point
    const double min_cell = span / std::max(1.0, std::cbrt(2.0 * points.size()));
    cell_ = std::max({cell_size, min_cell, 1e-300});
    for (int k = 0; k < 3; ++k) {
      dims_[k] = static_cast<long>(std::floor((hi[k] - lo_[k]) / cell_)) + 1;
    }
    heads_.assign(static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]), -1);
    next_.assign(points.size(), -1);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const long c = flat(cell_of(points[i]));
      next_[i] = heads_[static_cast<std::size_t>(c)];
      heads_[static_cast<std::size_t>(c)] = static_cast<long>(i);
    }
  }

  double cell_size() const { return cell_; }

  std::array<long, 3> cell_of(const Vec3& p) const {
    std::array<long, 3> c{};
    for (int k = 0; k < 3; ++k) {
      c[k] = std::clamp(static_cast<long>(std::floor((p[k] - lo_[k]) / cell_)), 0L, dims_[k] - 1);
    }
    return c;
  }

  /// Visits every stored index whose cell lies within `reach` cells of `c`
  /// (Chebyshev distance).
  template <class F>
  void visit_shell(const std::array<long, 3>& c, long reach, F&& f) const {
    for (long dz = -reach; dz <= reach; ++dz) {
      for (long dy = -reach; dy <= reach; ++dy) {
        for (long dx = -reach; dx <= reach; ++dx) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != reach) continue;
          const std::array<long, 3> q{c[0] + dx, c[1] + dy, c[2] + dz};
          if (q[0] < 0 || q[1] < 0 || q[2] < 0 || q[0] >= dims_[0] || q[1] >= dims_[1] ||
              q[2] >= dims_[2]) {
            continue;
          }
          for (long j = heads_[static_cast<std::size_t>(flat(q))]; j >= 0;
               j = next_[static_cast<std::size_t>(j)]) {
            f(static_cast<std::size_t>(j));
          }
        }
      }
    }
  }

  long max_reach() const { return std::max({dims_[0], dims_[1], dims_[2]}); }

 private:
  long flat(const std::array<long, 3>& c) const { return (c[2] * dims_[1] + c[1]) * dims_[0] + c[0]; }

  std::span<const Vec3> points_;
  Vec3 lo_;
  double cell_ = 1.0;
  std::array<long, 3> dims_{1, 1, 1};
  std::vector<long> heads_;
  std::vector<long> next_;
};

/// Distance from each point to its nearest other point (+inf for a lone point).
inline std::vector<double> nearest_neighbor_distances(std::span<const Vec3> points) {
  const std::size_t n = points.size();
  std::vector<double> nn(n, std::numeric_limits<double>::infinity());
  if (n < 2) return nn;
  if (n < kCellGridThreshold) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = (points[i] - points[j]).norm();
        nn[i] = std::min(nn[i], d);
        nn[j] = std::min(nn[j], d);
      }
    }
    return nn;
  }
  const CellGrid grid(points, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = grid.cell_of(points[i]);
    double best = std::numeric_limits<double>::infinity();
    for (long reach = 0; reach <= grid.max_reach(); ++reach) {
      // every point in shells beyond `reach` is at least (reach) cells away
      if (best <= static_cast<double>(reach - 1) * grid.cell_size()) break;
      grid.visit_shell(c, reach, [&](std::size_t j) {
        if (j != i) best = std::min(best, (points[i] - points[j]).norm());
      });
    }
    nn[i] = best;
  }
  return nn;
}

/// Calls f(i, j, distance) for every unordered pair i < j closer than `cutoff`
/// (distance <= cutoff).
template <class F>
void for_each_close_pair(std::span<const Vec3> points, double cutoff, F&& f) {
  const std::size_t n = points.size();
  if (n < kCellGridThreshold) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = (points[i] - points[j]).norm();
        if (d <= cutoff) f(i, j, d);
      }
    }
    return;
  }
  const CellGrid grid(points, cutoff);
  const long reach_max = static_cast<long>(std::ceil(cutoff / grid.cell_size()));
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = grid.cell_of(points[i]);
    for (long reach = 0; reach <= reach_max; ++reach) {
      grid.visit_shell(c, reach, [&](std::size_t j) {
        if (j <= i) return;
        const double d = (points[i] - points[j]).norm();
        if (d <= cutoff) f(i, j, d);
      });
    }
  }
}

}  // namespace dilute
