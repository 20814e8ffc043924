#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dilute {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double pi = std::numbers::pi;

/// Axis-aligned box [min, max].
struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();

  static Box unit_cube() { return Box{}; }

  Vec3 extent() const { return max - min; }
  double volume() const {
    const Vec3 e = extent();
    return e.x() * e.y() * e.z();
  }
  Vec3 center() const { return 0.5 * (min + max); }
  bool contains(const Vec3& x, double slack = 0.0) const {
    for (int k = 0; k < 3; ++k) {
      if (x[k] < min[k] - slack || x[k] > max[k] + slack) return false;
    }
    return true;
  }
  bool valid() const { return (max.array() > min.array()).all(); }
  Box padded(double pad) const {
    return Box{(min.array() - pad).matrix(), (max.array() + pad).matrix()};
  }
};

/// Symmetric trace-free 3x3 matrix stored by its six upper-triangular entries
/// (xx, yy, zz, xy, xz, yz).
class TraceFreeSymMat {
 public:
  TraceFreeSymMat() = default;

  TraceFreeSymMat(double xx, double yy, double zz, double xy, double xz, double yz)
      : e_{xx, yy, zz, xy, xz, yz} {
    check_trace();
  }

  /// Exact symmetric matrix; throws if its trace is not negligible.
  static TraceFreeSymMat from_matrix(const Mat3& m) {
    const Mat3 s = 0.5 * (m + m.transpose());
    return TraceFreeSymMat(s(0, 0), s(1, 1), s(2, 2), s(0, 1), s(0, 2), s(1, 2));
  }

  /// Symmetric trace-free part of an arbitrary matrix.
  static TraceFreeSymMat project(const Mat3& m) {
    Mat3 s = 0.5 * (m + m.transpose());
    s.diagonal().array() -= s.trace() / 3.0;
    TraceFreeSymMat out;
    out.e_ = {s(0, 0), s(1, 1), s(2, 2), s(0, 1), s(0, 2), s(1, 2)};
    return out;
  }

  static TraceFreeSymMat zero() { return {}; }

  Mat3 matrix() const {
    Mat3 m;
    m << e_[0], e_[3], e_[4],
         e_[3], e_[1], e_[5],
         e_[4], e_[5], e_[2];
    return m;
  }

  const std::array<double, 6>& entries() const { return e_; }
  double operator()(int i, int j) const { return matrix()(i, j); }

  double norm() const { return matrix().norm(); }
  double dot(const TraceFreeSymMat& o) const { return (matrix().cwiseProduct(o.matrix())).sum(); }

  TraceFreeSymMat operator+(const TraceFreeSymMat& o) const { return combine(o, 1.0); }
  TraceFreeSymMat operator-(const TraceFreeSymMat& o) const { return combine(o, -1.0); }
  TraceFreeSymMat operator*(double a) const {
    TraceFreeSymMat out = *this;
    for (double& v : out.e_) v *= a;
    return out;
  }
  friend TraceFreeSymMat operator*(double a, const TraceFreeSymMat& s) { return s * a; }
  bool operator==(const TraceFreeSymMat&) const = default;

 private:
  TraceFreeSymMat combine(const TraceFreeSymMat& o, double sign) const {
    TraceFreeSymMat out = *this;
    for (int k = 0; k < 6; ++k) out.e_[k] += sign * o.e_[k];
    return out;
  }

  void check_trace() const {
    const double tr = e_[0] + e_[1] + e_[2];
    double fro2 = e_[0] * e_[0] + e_[1] * e_[1] + e_[2] * e_[2];
    fro2 += 2.0 * (e_[3] * e_[3] + e_[4] * e_[4] + e_[5] * e_[5]);
    if (!std::isfinite(tr) || std::abs(tr) > 1e-12 * std::sqrt(fro2)) {
      throw std::invalid_argument("TraceFreeSymMat: trace " + std::to_string(tr) + " is not zero");
    }
  }

  std::array<double, 6> e_{};
};

/// Per-ball rigid motion u + omega x (x - x_i).
struct RigidMotion {
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();

  RigidMotion() = default;
  RigidMotion(const Vec3& u, const Vec3& w) : translation(u), rotation(w) {
    if (!translation.allFinite() || !rotation.allFinite()) {
      throw std::invalid_argument("RigidMotion: non-finite entries");
    }
  }
  Vec3 velocity(const Vec3& offset) const { return translation + rotation.cross(offset); }
};

inline Mat3 sym(const Mat3& m) { return 0.5 * (m + m.transpose()); }

}  // namespace dilute
