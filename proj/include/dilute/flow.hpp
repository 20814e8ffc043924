#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dilute/config.hpp"
#include "dilute/grid.hpp"
#include "dilute/kernels.hpp"
#include "dilute/types.hpp"

namespace dilute {

/// An evaluable velocity field with its gradient and, when known, pressure.
/// Copies share the underlying data.
class FlowField {
 public:
  using VectorFn = std::function<Vec3(const Vec3&)>;
  using MatrixFn = std::function<Mat3(const Vec3&)>;
  using ScalarFn = std::function<double(const Vec3&)>;

  FlowField() : FlowField(zero()) {}
  FlowField(std::string tag, VectorFn velocity, MatrixFn gradient, ScalarFn pressure = {})
      : tag_(std::move(tag)), velocity_(std::move(velocity)), gradient_(std::move(gradient)),
        pressure_(std::move(pressure)) {}

  static FlowField zero() {
    return FlowField("zero", [](const Vec3&) -> Vec3 { return Vec3::Zero(); },
                     [](const Vec3&) -> Mat3 { return Mat3::Zero(); }, [](const Vec3&) { return 0.0; });
  }

  /// Wraps any object with velocity(x) and gradient(x).
  template <class T>
  static FlowField wrap(std::string tag, std::shared_ptr<const T> field) {
    return FlowField(
        std::move(tag), [field](const Vec3& x) -> Vec3 { return field->velocity(x); },
        [field](const Vec3& x) -> Mat3 { return field->gradient(x); });
  }

  static FlowField from_grid(std::string tag, GridVectorField field) {
    return wrap(std::move(tag), std::make_shared<const GridVectorField>(std::move(field)));
  }

  const std::string& tag() const { return tag_; }
  Vec3 velocity(const Vec3& x) const { return velocity_(x); }
  Mat3 gradient(const Vec3& x) const { return gradient_(x); }
  bool has_pressure() const { return static_cast<bool>(pressure_); }
  double pressure(const Vec3& x) const {
    if (!pressure_) throw std::logic_error("FlowField '" + tag_ + "' carries no pressure");
    return pressure_(x);
  }

  FlowField operator+(const FlowField& o) const { return combine(o, 1.0); }
  FlowField operator-(const FlowField& o) const { return combine(o, -1.0); }
  FlowField scaled(double a) const {
    ScalarFn p;
    if (pressure_) p = [f = pressure_, a](const Vec3& x) { return a * f(x); };
    return FlowField(
        tag_, [f = velocity_, a](const Vec3& x) -> Vec3 { return a * f(x); },
        [f = gradient_, a](const Vec3& x) -> Mat3 { return a * f(x); }, std::move(p));
  }

 private:
  FlowField combine(const FlowField& o, double sign) const {
    ScalarFn p;
    if (pressure_ && o.pressure_) {
      p = [a = pressure_, b = o.pressure_, sign](const Vec3& x) { return a(x) + sign * b(x); };
    }
    return FlowField(
        tag_ + (sign > 0 ? "+" : "-") + o.tag_,
        [a = velocity_, b = o.velocity_, sign](const Vec3& x) -> Vec3 { return a(x) + sign * b(x); },
        [a = gradient_, b = o.gradient_, sign](const Vec3& x) -> Mat3 { return a(x) + sign * b(x); },
        std::move(p));
  }

  std::string tag_;
  VectorFn velocity_;
  MatrixFn gradient_;
  ScalarFn pressure_;
};

/// sum_j r V[S_j]((x - x_j) / r) over a set of balls; inside ball j its term
/// is the rigid strain extension S_j (x - x_j) and contributes no pressure.
class StressletSum {
 public:
  StressletSum(std::vector<Vec3> centers, double radius, std::vector<TraceFreeSymMat> strains, double mu = 1.0)
      : centers_(std::move(centers)), r_(radius), mu_(mu) {
    if (centers_.size() != strains.size()) throw std::invalid_argument("StressletSum: size mismatch");
    if (!(r_ > 0.0)) throw std::invalid_argument("StressletSum: radius must be positive");
    strains_.reserve(strains.size());
    for (const auto& s : strains) strains_.push_back(s.matrix());
  }

  std::size_t size() const { return centers_.size(); }

  Vec3 velocity(const Vec3& x) const {
    Vec3 u = Vec3::Zero();
    const double r2 = r_ * r_;
    for (std::size_t j = 0; j < centers_.size(); ++j) {
      const Vec3 y = x - centers_[j];
      const double d2 = y.squaredNorm();
      const Mat3& S = strains_[j];
      if (d2 < r2) {
        u += S * y;
        continue;
      }
      // r V[S](y / r) = (5/2) r^3 (q/|y|^5 - r^2 q/|y|^7) y + r^5 S y / |y|^5, q = y.S.y
      const double q = y.dot(S * y);
      const double inv2 = 1.0 / d2;
      const double inv5 = inv2 * inv2 / std::sqrt(d2);
      const double r3 = r2 * r_;
      u += (2.5 * r3 * q * inv5 * (1.0 - r2 * inv2)) * y + (r3 * r2 * inv5) * (S * y);
    }
    return u;
  }

  Mat3 gradient(const Vec3& x) const {
    Mat3 g = Mat3::Zero();
    for (std::size_t j = 0; j < centers_.size(); ++j) {
      const Vec3 y = (x - centers_[j]) / r_;
      if (y.squaredNorm() < 1.0) {
        g += strains_[j];
        continue;
      }
      Mat3 far, near;
      detail::stresslet_gradient_parts(strains_[j], y, far, near);
      g += far + near;
    }
    return g;
  }

  double pressure(const Vec3& x) const {
    double p = 0.0;
    for (std::size_t j = 0; j < centers_.size(); ++j) {
      const Vec3 y = (x - centers_[j]) / r_;
      const double d2 = y.squaredNorm();
      if (d2 < 1.0) continue;
      p += 5.0 * mu_ * y.dot(strains_[j] * y) / (d2 * d2 * std::sqrt(d2));
    }
    return p;
  }

  FlowField as_field(std::string tag = "stresslets") const {
    auto self = std::make_shared<const StressletSum>(*this);
    return FlowField(
        std::move(tag), [self](const Vec3& x) -> Vec3 { return self->velocity(x); },
        [self](const Vec3& x) -> Mat3 { return self->gradient(x); },
        [self](const Vec3& x) { return self->pressure(x); });
  }

 private:
  std::vector<Vec3> centers_;
  double r_;
  double mu_;
  std::vector<Mat3> strains_;
};

}  // namespace dilute
