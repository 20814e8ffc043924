#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

#include "dilute/types.hpp"

namespace dilute {

/// Cubic cells of side h over a box; values live at cell centers, stored x
/// fastest, then y, then z.
struct UniformGrid {
  Box box;
  std::array<int, 3> dims{};
  double h = 0.0;

  UniformGrid() = default;
  UniformGrid(const Box& b, int cells_per_side) : box(b) {
    if (cells_per_side < 2) throw std::invalid_argument("UniformGrid: need at least 2 cells per side");
    if (!b.valid()) throw std::invalid_argument("UniformGrid: empty box");
    h = b.extent().maxCoeff() / cells_per_side;
    for (int k = 0; k < 3; ++k) dims[k] = std::max(2, static_cast<int>(std::lround(b.extent()[k] / h)));
    box.max = box.min + h * Vec3(dims[0], dims[1], dims[2]);
  }

  std::size_t size() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
  double cell_volume() const { return h * h * h; }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  std::array<int, 3> unflatten(std::size_t idx) const {
    const int i = static_cast<int>(idx % dims[0]);
    const int j = static_cast<int>((idx / dims[0]) % dims[1]);
    const int k = static_cast<int>(idx / (static_cast<std::size_t>(dims[0]) * dims[1]));
    return {i, j, k};
  }
  Vec3 center(int i, int j, int k) const { return box.min + h * Vec3(i + 0.5, j + 0.5, k + 0.5); }
  Vec3 center(std::size_t idx) const {
    const auto c = unflatten(idx);
    return center(c[0], c[1], c[2]);
  }
};

/// Second-order finite-difference velocity gradient (grad(i, j) = d_j u_i)
/// of a cell-centered vector field; one-sided stencils on the faces.
inline std::vector<Mat3> grid_gradient(const UniformGrid& g, const std::vector<Vec3>& u) {
  if (u.size() != g.size()) throw std::invalid_argument("grid_gradient: size mismatch");
  std::vector<Mat3> out(g.size());
  const double inv = 1.0 / (2.0 * g.h);
  for (int k = 0; k < g.dims[2]; ++k) {
    for (int j = 0; j < g.dims[1]; ++j) {
      for (int i = 0; i < g.dims[0]; ++i) {
        const std::array<int, 3> c{i, j, k};
        Mat3 m;
        for (int d = 0; d < 3; ++d) {
          auto at = [&](int off) {
            std::array<int, 3> q = c;
            q[d] += off;
            return u[g.index(q[0], q[1], q[2])];
          };
          Vec3 du;
          if (c[d] == 0) {
            du = (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv;
          } else if (c[d] == g.dims[d] - 1) {
            du = (3.0 * at(0) - 4.0 * at(-1) + at(-2)) * inv;
          } else {
            du = (at(1) - at(-1)) * inv;
          }
          m.col(d) = du;
        }
        out[g.index(i, j, k)] = m;
      }
    }
  }
  return out;
}

/// Trilinear interpolation between cell centers; points outside the center
/// lattice are clamped onto it.
template <class T>
T trilinear(const UniformGrid& g, const std::vector<T>& values, const Vec3& x) {
  std::array<int, 3> i0{};
  std::array<double, 3> t{};
  for (int d = 0; d < 3; ++d) {
    const double s = std::clamp((x[d] - g.box.min[d]) / g.h - 0.5, 0.0, static_cast<double>(g.dims[d] - 1));
    i0[d] = std::min(static_cast<int>(s), g.dims[d] - 2);
    t[d] = s - i0[d];
  }
  T acc = values[g.index(i0[0], i0[1], i0[2])] * 0.0;
  for (int c = 0; c < 8; ++c) {
    const int a = c & 1, b = (c >> 1) & 1, e = (c >> 2) & 1;
    const double w = (a ? t[0] : 1.0 - t[0]) * (b ? t[1] : 1.0 - t[1]) * (e ? t[2] : 1.0 - t[2]);
    if (w != 0.0) acc += w * values[g.index(i0[0] + a, i0[1] + b, i0[2] + e)];
  }
  return acc;
}

/// Cell-centered velocity samples with their finite-difference gradients.
class GridVectorField {
 public:
  GridVectorField(UniformGrid grid, std::vector<Vec3> values)
      : grid_(std::move(grid)), values_(std::move(values)), grad_(grid_gradient(grid_, values_)) {}

  const UniformGrid& grid() const { return grid_; }
  const std::vector<Vec3>& values() const { return values_; }
  const std::vector<Mat3>& gradients() const { return grad_; }

  Vec3 velocity(const Vec3& x) const { return trilinear(grid_, values_, x); }

  /// Interpolated gradient with its trace removed (the continuum field is solenoidal).
  Mat3 gradient(const Vec3& x) const {
    Mat3 m = trilinear(grid_, grad_, x);
    m.diagonal().array() -= m.trace() / 3.0;
    return m;
  }

 private:
  UniformGrid grid_;
  std::vector<Vec3> values_;
  std::vector<Mat3> grad_;
};

/// Free-space convolutions with the Oseen tensor on a cell-centered grid,
/// evaluated at the same cell centers by zero-padded FFTs. The kernel over the
/// singular cell is replaced by its average over the ball of equal volume.
class OseenConvolver {
 public:
  explicit OseenConvolver(const UniformGrid& grid) : grid_(grid) {
    for (int d = 0; d < 3; ++d) pad_[d] = 2 * grid.dims[d];
    real_count_ = static_cast<std::size_t>(pad_[0]) * pad_[1] * pad_[2];
    complex_count_ = static_cast<std::size_t>(pad_[2]) * pad_[1] * (pad_[0] / 2 + 1);
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * real_count_));
    spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * complex_count_));
    if (!real_ || !spec_) throw std::bad_alloc();
    // fftw is row-major with the last index fastest: (z, y, x)
    forward_ = fftw_plan_dft_r2c_3d(pad_[2], pad_[1], pad_[0], real_, spec_, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_3d(pad_[2], pad_[1], pad_[0], spec_, real_, FFTW_ESTIMATE);
  }
  ~OseenConvolver() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  OseenConvolver(const OseenConvolver&) = delete;
  OseenConvolver& operator=(const OseenConvolver&) = delete;

  const UniformGrid& grid() const { return grid_; }

  /// u(x_a) = sum_b U(x_a - x_b) f_b h^3.
  std::vector<Vec3> oseen(const std::vector<Vec3>& f) {
    if (f.size() != grid_.size()) throw std::invalid_argument("OseenConvolver: size mismatch");
    ensure_oseen_kernel();
    std::array<Spectrum, 3> fh;
    for (int b = 0; b < 3; ++b) fh[b] = transform([&](std::size_t i) { return f[i][b]; });
    std::vector<Vec3> u(grid_.size());
    Spectrum acc(complex_count_);
    for (int a = 0; a < 3; ++a) {
      std::fill(acc.begin(), acc.end(), std::complex<double>(0.0));
      for (int b = 0; b < 3; ++b) {
        const Spectrum& k = oseen_hat_[sym_index(a, b)];
        for (std::size_t m = 0; m < complex_count_; ++m) acc[m] += k[m] * fh[b][m];
      }
      inverse(acc, [&](std::size_t i, double v) { u[i][a] = v; });
    }
    return u;
  }

  /// u = U * div(tau) for symmetric tau, with the derivative moved onto the
  /// kernel: u_i(x) = int d_k U_ij(x - y) tau_jk(y) dy.
  std::vector<Vec3> stress_divergence(const std::vector<Mat3>& tau) {
    if (tau.size() != grid_.size()) throw std::invalid_argument("OseenConvolver: size mismatch");
    ensure_stress_kernel();
    std::array<Spectrum, 6> th;
    for (int p = 0; p < 6; ++p) {
      const auto [j, k] = pair_of(p);
      th[p] = transform([&](std::size_t i) { return 0.5 * (tau[i](j, k) + tau[i](k, j)); });
    }
    const Spectrum trh = transform([&](std::size_t i) { return tau[i].trace(); });
    std::vector<Vec3> u(grid_.size());
    Spectrum acc(complex_count_);
    for (int a = 0; a < 3; ++a) {
      for (std::size_t m = 0; m < complex_count_; ++m) acc[m] = radial_hat_[a][m] * trh[m];
      for (int p = 0; p < 6; ++p) {
        const auto [j, k] = pair_of(p);
        const double mult = j == k ? -3.0 : -6.0;
        const Spectrum& q = cubic_hat_[triple_index(a, j, k)];
        for (std::size_t m = 0; m < complex_count_; ++m) acc[m] += mult * q[m] * th[p][m];
      }
      inverse(acc, [&](std::size_t i, double v) { u[i][a] = v / (8.0 * pi); });
    }
    return u;
  }

 private:
  using Spectrum = std::vector<std::complex<double>>;

  static int sym_index(int a, int b) {
    if (a > b) std::swap(a, b);
    static constexpr int table[3][3] = {{0, 3, 4}, {3, 1, 5}, {4, 5, 2}};
    return table[a][b];
  }
  static std::pair<int, int> pair_of(int p) {
    static constexpr int j[6] = {0, 1, 2, 0, 0, 1};
    static constexpr int k[6] = {0, 1, 2, 1, 2, 2};
    return {j[p], k[p]};
  }
  static int triple_index(int a, int b, int c) {
    // number of occurrences of 1 and 2 identifies a sorted triple
    const int n1 = (a == 1) + (b == 1) + (c == 1);
    const int n2 = (a == 2) + (b == 2) + (c == 2);
    return n2 * (9 - n2) / 2 + n1;  // 0..9 over n1 + n2 <= 3
  }

  /// Signed padded offset of index m along axis d, or a sentinel for the
  /// unused wrap-around plane.
  bool offset(int d, int m, int& out) const {
    const int half = pad_[d] / 2;
    if (m == half) return false;
    out = m < half ? m : m - pad_[d];
    return true;
  }

  template <class KernelFn>
  Spectrum kernel_spectrum(KernelFn&& kernel) {
    std::size_t idx = 0;
    for (int k = 0; k < pad_[2]; ++k) {
      for (int j = 0; j < pad_[1]; ++j) {
        for (int i = 0; i < pad_[0]; ++i, ++idx) {
          int oi, oj, ok;
          if (!offset(0, i, oi) || !offset(1, j, oj) || !offset(2, k, ok)) {
            real_[idx] = 0.0;
            continue;
          }
          real_[idx] = kernel(grid_.h * Vec3(oi, oj, ok), oi == 0 && oj == 0 && ok == 0);
        }
      }
    }
    fftw_execute(forward_);
    return copy_spectrum();
  }

  void ensure_oseen_kernel() {
    if (!oseen_hat_.empty()) return;
    const double a_eq = std::cbrt(3.0 / (4.0 * pi)) * grid_.h;
    const double scale = grid_.cell_volume() / static_cast<double>(real_count_);
    for (int p = 0; p < 6; ++p) {
      const auto [a, b] = pair_of(p);
      oseen_hat_.push_back(kernel_spectrum([&](const Vec3& z, bool singular) {
        if (singular) return a == b ? scale / (4.0 * pi * a_eq) : 0.0;
        const double r = z.norm();
        return scale * ((a == b ? 1.0 / r : 0.0) + z[a] * z[b] / (r * r * r)) / (8.0 * pi);
      }));
    }
  }

  void ensure_stress_kernel() {
    if (!cubic_hat_.empty()) return;
    const double scale = grid_.cell_volume() / static_cast<double>(real_count_);
    // odd kernels: the ball average over the singular cell vanishes
    for (int a = 0; a < 3; ++a) {
      radial_hat_.push_back(kernel_spectrum([&](const Vec3& z, bool singular) {
        if (singular) return 0.0;
        const double r = z.norm();
        return scale * z[a] / (r * r * r);
      }));
    }
    cubic_hat_.resize(10);
    for (int a = 0; a < 3; ++a) {
      for (int b = a; b < 3; ++b) {
        for (int c = b; c < 3; ++c) {
          cubic_hat_[triple_index(a, b, c)] = kernel_spectrum([&](const Vec3& z, bool singular) {
            if (singular) return 0.0;
            const double r2 = z.squaredNorm();
            return scale * z[a] * z[b] * z[c] / (r2 * r2 * std::sqrt(r2));
          });
        }
      }
    }
  }

  template <class Src>
  Spectrum transform(Src&& src) {
    std::fill(real_, real_ + real_count_, 0.0);
    for (int k = 0; k < grid_.dims[2]; ++k) {
      for (int j = 0; j < grid_.dims[1]; ++j) {
        for (int i = 0; i < grid_.dims[0]; ++i) {
          real_[pad_index(i, j, k)] = src(grid_.index(i, j, k));
        }
      }
    }
    fftw_execute(forward_);
    return copy_spectrum();
  }

  template <class Sink>
  void inverse(const Spectrum& s, Sink&& sink) {
    for (std::size_t m = 0; m < complex_count_; ++m) {
      spec_[m][0] = s[m].real();
      spec_[m][1] = s[m].imag();
    }
    fftw_execute(backward_);
    for (int k = 0; k < grid_.dims[2]; ++k) {
      for (int j = 0; j < grid_.dims[1]; ++j) {
        for (int i = 0; i < grid_.dims[0]; ++i) sink(grid_.index(i, j, k), real_[pad_index(i, j, k)]);
      }
    }
  }

  Spectrum copy_spectrum() const {
    Spectrum s(complex_count_);
    for (std::size_t m = 0; m < complex_count_; ++m) s[m] = {spec_[m][0], spec_[m][1]};
    return s;
  }

  std::size_t pad_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * pad_[1] + j) * pad_[0] + i;
  }

  UniformGrid grid_;
  std::array<int, 3> pad_{};
  std::size_t real_count_ = 0, complex_count_ = 0;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_{}, backward_{};
  std::vector<Spectrum> oseen_hat_;
  std::vector<Spectrum> radial_hat_;
  std::vector<Spectrum> cubic_hat_;
};

}  // namespace dilute
