#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dilute/neighbors.hpp"
#include "dilute/types.hpp"

namespace dilute {

/// Volume fraction of n balls of radius r in a domain of unit measure.
inline double volume_fraction(std::size_t n, double r) {
  if (n < 1 || !(r > 0.0) || !std::isfinite(r)) {
    throw std::invalid_argument("volume_fraction: need n >= 1 and r > 0");
  }
  return 4.0 * pi / 3.0 * static_cast<double>(n) * r * r * r;
}

/// Inverse of volume_fraction in r.
inline double radius_for(std::size_t n, double lambda) {
  if (n < 1 || !(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("radius_for: need n >= 1 and lambda > 0");
  }
  return std::cbrt(3.0 * lambda / (4.0 * pi * static_cast<double>(n)));
}

/// n closed, pairwise disjoint balls of common radius inside a bounding box.
class BallConfiguration {
 public:
  BallConfiguration(std::vector<Vec3> centers, double radius, Box domain = Box::unit_cube())
      : centers_(std::move(centers)), radius_(radius), domain_(domain) {
    if (centers_.empty()) throw std::invalid_argument("BallConfiguration: no centers");
    if (!(radius_ > 0.0) || !std::isfinite(radius_)) {
      throw std::invalid_argument("BallConfiguration: radius must be positive");
    }
    if (!domain_.valid()) throw std::invalid_argument("BallConfiguration: empty domain box");
    for (const Vec3& c : centers_) {
      if (!c.allFinite() || !domain_.contains(c)) {
        throw std::invalid_argument("BallConfiguration: center outside the domain box");
      }
    }
    nn_ = nearest_neighbor_distances(centers_);
    min_gap_ = *std::min_element(nn_.begin(), nn_.end());
    if (min_gap_ < 2.0 * radius_) {
      throw std::invalid_argument("BallConfiguration: balls overlap (min gap " +
                                  std::to_string(min_gap_) + " < 2r)");
    }
  }

  std::size_t size() const { return centers_.size(); }
  const std::vector<Vec3>& centers() const { return centers_; }
  const Vec3& center(std::size_t i) const { return centers_[i]; }
  double radius() const { return radius_; }
  const Box& domain() const { return domain_; }

  double volume_fraction() const { return dilute::volume_fraction(size(), radius_); }
  double ball_volume() const { return 4.0 * pi / 3.0 * radius_ * radius_ * radius_; }

  /// Nearest-neighbour distance of every center (+inf when n = 1).
  const std::vector<double>& nearest_neighbor() const { return nn_; }
  double min_gap() const { return min_gap_; }

  /// Index of a ball containing x, or -1.
  long ball_containing(const Vec3& x) const {
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      if ((x - centers_[i]).squaredNorm() < radius_ * radius_) return static_cast<long>(i);
    }
    return -1;
  }

  BallConfiguration translated(const Vec3& shift) const {
    std::vector<Vec3> c = centers_;
    for (Vec3& x : c) x += shift;
    return BallConfiguration(std::move(c), radius_, Box{domain_.min + shift, domain_.max + shift});
  }

 private:
  std::vector<Vec3> centers_;
  double radius_;
  Box domain_;
  std::vector<double> nn_;
  double min_gap_;
};

/// Piecewise-constant density on an axis-aligned grid of cubic cells.
/// Values are stored x fastest, then y, then z.
class DensityField {
 public:
  DensityField(Vec3 origin, std::array<int, 3> dims, double spacing, std::vector<double> values)
      : origin_(origin), dims_(dims), h_(spacing), values_(std::move(values)) {
    if (dims_[0] < 1 || dims_[1] < 1 || dims_[2] < 1 || !(h_ > 0.0)) {
      throw std::invalid_argument("DensityField: bad grid");
    }
    if (values_.size() != cell_count()) {
      throw std::invalid_argument("DensityField: value count does not match dims");
    }
    double total = 0.0;
    for (double v : values_) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("DensityField: negative or non-finite value");
      }
      total += v;
    }
    total *= h_ * h_ * h_;
    if (std::abs(total - 1.0) > 1e-3) {
      throw std::invalid_argument("DensityField: integral " + std::to_string(total) + " != 1");
    }
  }

  /// rho = 1/|box| on an N-cell-per-longest-side grid over `box`.
  static DensityField uniform(const Box& box, int cells_per_side) {
    const double h = box.extent().maxCoeff() / cells_per_side;
    std::array<int, 3> dims{};
    for (int k = 0; k < 3; ++k) dims[k] = std::max(1, static_cast<int>(std::lround(box.extent()[k] / h)));
    const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    const double v = 1.0 / (static_cast<double>(count) * h * h * h);
    return DensityField(box.min, dims, h, std::vector<double>(count, v));
  }

  /// Samples a nonnegative function at cell centers and rescales it to unit mass.
  static DensityField from_function(const Box& box, int cells_per_side,
                                    const std::function<double(const Vec3&)>& f) {
    const double h = box.extent().maxCoeff() / cells_per_side;
    std::array<int, 3> dims{};
    for (int k = 0; k < 3; ++k) dims[k] = std::max(1, static_cast<int>(std::lround(box.extent()[k] / h)));
    std::vector<double> v(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
    double total = 0.0;
    std::size_t idx = 0;
    for (int k = 0; k < dims[2]; ++k) {
      for (int j = 0; j < dims[1]; ++j) {
        for (int i = 0; i < dims[0]; ++i, ++idx) {
          const Vec3 x = box.min + h * Vec3(i + 0.5, j + 0.5, k + 0.5);
          v[idx] = std::max(0.0, f(x));
          total += v[idx];
        }
      }
    }
    if (!(total > 0.0)) throw std::invalid_argument("DensityField: function has no mass");
    for (double& x : v) x /= total * h * h * h;
    return DensityField(box.min, dims, h, std::move(v));
  }

  const Vec3& origin() const { return origin_; }
  const std::array<int, 3>& dims() const { return dims_; }
  double spacing() const { return h_; }
  double cell_volume() const { return h_ * h_ * h_; }
  std::size_t cell_count() const { return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]; }
  const std::vector<double>& values() const { return values_; }
  Box box() const {
    return Box{origin_, origin_ + h_ * Vec3(dims_[0], dims_[1], dims_[2])};
  }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
  }
  Vec3 cell_center(int i, int j, int k) const { return origin_ + h_ * Vec3(i + 0.5, j + 0.5, k + 0.5); }

  /// Zero outside the grid.
  double operator()(const Vec3& x) const {
    std::array<int, 3> c{};
    for (int d = 0; d < 3; ++d) {
      const double t = (x[d] - origin_[d]) / h_;
      if (t < 0.0 || t >= dims_[d]) return 0.0;
      c[d] = static_cast<int>(t);
    }
    return values_[index(c[0], c[1], c[2])];
  }

  /// Midpoint quadrature of rho * g.
  double integrate(const std::function<double(const Vec3&)>& g) const {
    double s = 0.0;
    for (int k = 0; k < dims_[2]; ++k) {
      for (int j = 0; j < dims_[1]; ++j) {
        for (int i = 0; i < dims_[0]; ++i) {
          const double v = values_[index(i, j, k)];
          if (v != 0.0) s += v * g(cell_center(i, j, k));
        }
      }
    }
    return s * cell_volume();
  }

 private:
  Vec3 origin_;
  std::array<int, 3> dims_;
  double h_;
  std::vector<double> values_;
};

/// Indices whose nearest neighbour is at least eta * n^{-1/3} away (good) and the rest.
struct GoodBadPartition {
  double eta = 0.0;
  std::vector<std::size_t> good;
  std::vector<std::size_t> bad;
};

inline GoodBadPartition partition_good_bad(const BallConfiguration& config, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("partition_good_bad: eta must be positive");
  const double threshold = eta * std::pow(static_cast<double>(config.size()), -1.0 / 3.0);
  GoodBadPartition p;
  p.eta = eta;
  const auto& nn = config.nearest_neighbor();
  for (std::size_t i = 0; i < config.size(); ++i) {
    (nn[i] >= threshold ? p.good : p.bad).push_back(i);
  }
  return p;
}

/// eta = lambda^theta with theta restricted to (0, 1/3).
inline double select_eta(double lambda, double theta) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("select_eta: lambda must be in (0,1)");
  if (!(theta > 0.0 && theta < 1.0 / 3.0)) throw std::invalid_argument("select_eta: theta must be in (0,1/3)");
  return std::pow(lambda, theta);
}

inline constexpr double kDefaultTheta = 0.15;

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline nlohmann::json to_json(const BallConfiguration& c) {
  nlohmann::json centers = nlohmann::json::array();
  for (const Vec3& x : c.centers()) centers.push_back(to_json(x));
  return {{"centers", centers},
          {"radius", c.radius()},
          {"domain", {{"min", to_json(c.domain().min)}, {"max", to_json(c.domain().max)}}}};
}

inline BallConfiguration configuration_from_json(const nlohmann::json& j) {
  std::vector<Vec3> centers;
  for (const auto& c : j.at("centers")) centers.push_back(vec3_from_json(c));
  Box domain = Box::unit_cube();
  if (j.contains("domain")) {
    domain.min = vec3_from_json(j["domain"].at("min"));
    domain.max = vec3_from_json(j["domain"].at("max"));
  }
  return BallConfiguration(std::move(centers), j.at("radius").get<double>(), domain);
}

inline nlohmann::json to_json(const DensityField& d) {
  return {{"dims", d.dims()},
          {"spacing", d.spacing()},
          {"origin", to_json(d.origin())},
          {"values", d.values()}};
}

inline DensityField density_from_json(const nlohmann::json& j) {
  Vec3 origin = j.contains("origin") ? vec3_from_json(j["origin"]) : Vec3::Zero();
  return DensityField(origin, j.at("dims").get<std::array<int, 3>>(), j.at("spacing").get<double>(),
                      j.at("values").get<std::vector<double>>());
}

}  // namespace dilute
