#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dilute/neighbors.hpp"
#include "dilute/types.hpp"

namespace dilute {

/// Random stream used by every sampler: std::mt19937_64 seeded through
/// std::seed_seq{seed_lo32, seed_hi32, stream_lo32, stream_hi32}. One stream per
/// sample; ensembles use stream = sample index.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  Vec3 uniform_in(const Box& b) {
    return Vec3(uniform(b.min.x(), b.max.x()), uniform(b.min.y(), b.max.y()), uniform(b.min.z(), b.max.z()));
  }
  Vec3 unit_vector() {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 2.0 * pi);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3(s * std::cos(phi), s * std::sin(phi), z);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<std::uint64_t>(mean)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

enum class ProcessKind { hardcore_poisson, lattice, clustered };

inline std::string to_string(ProcessKind k) {
  switch (k) {
    case ProcessKind::hardcore_poisson: return "hardcore_poisson";
    case ProcessKind::lattice: return "lattice";
    case ProcessKind::clustered: return "clustered";
  }
  return "?";
}

inline ProcessKind process_kind_from_string(const std::string& s) {
  if (s == "hardcore_poisson") return ProcessKind::hardcore_poisson;
  if (s == "lattice") return ProcessKind::lattice;
  if (s == "clustered") return ProcessKind::clustered;
  throw std::invalid_argument("unknown process kind '" + s + "'");
}

struct ProcessSpec {
  ProcessKind kind = ProcessKind::hardcore_poisson;
  double intensity = 1000.0;  // points per unit volume (parent intensity for hard-core Poisson)
  double hardcore = 0.0;      // R
  Box window = Box::unit_cube();
  std::uint64_t seed = 0;
  double pair_fraction = 0.0;  // clustered: fraction q of base points receiving a twin
  double pair_gap = 0.0;       // clustered: twin distance g

  void validate() const {
    if (!(intensity > 0.0) || !std::isfinite(intensity)) throw std::invalid_argument("ProcessSpec: intensity must be positive");
    if (!(hardcore >= 0.0)) throw std::invalid_argument("ProcessSpec: hard-core radius must be >= 0");
    if (!window.valid()) throw std::invalid_argument("ProcessSpec: empty window");
    if (kind == ProcessKind::hardcore_poisson) {
      const double packing = intensity * 4.0 * pi / 3.0 * std::pow(0.5 * hardcore, 3);
      if (!(packing < 0.2)) {
        throw std::invalid_argument("ProcessSpec: hard-core radius beyond the jamming limit (packing " +
                                    std::to_string(packing) + " >= 0.2)");
      }
    }
  }
};

/// Poisson parent on the window padded by R, then every point with another
/// parent point closer than R is deleted (both members of a close pair go).
inline std::vector<Vec3> sample_hardcore_poisson(const ProcessSpec& spec, std::uint64_t stream = 0) {
  if (spec.kind != ProcessKind::hardcore_poisson) throw std::invalid_argument("sample_hardcore_poisson: wrong kind");
  spec.validate();
  Stream rng(spec.seed, stream);
  const Box outer = spec.window.padded(spec.hardcore);
  const std::uint64_t count = rng.poisson(spec.intensity * outer.volume());
  std::vector<Vec3> parent(count);
  for (Vec3& p : parent) p = rng.uniform_in(outer);

  std::vector<char> doomed(parent.size(), 0);
  if (spec.hardcore > 0.0) {
    for_each_close_pair(parent, spec.hardcore, [&](std::size_t i, std::size_t j, double d) {
      if (d < spec.hardcore) doomed[i] = doomed[j] = 1;
    });
  }
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < parent.size(); ++i) {
    if (!doomed[i] && spec.window.contains(parent[i])) out.push_back(parent[i]);
  }
  return out;
}

/// Points per axis of the cubic lattice holding about intensity * |window| points.
inline std::array<int, 3> lattice_dims(const ProcessSpec& spec) {
  const double target = std::ceil(spec.intensity * spec.window.volume() - 1e-9);
  const double a = std::cbrt(spec.window.volume() / target);
  std::array<int, 3> m{};
  for (int k = 0; k < 3; ++k) m[k] = std::max(1, static_cast<int>(std::lround(spec.window.extent()[k] / a)));
  return m;
}

/// Cell-centered cubic lattice, no jitter.
inline std::vector<Vec3> sample_lattice(const ProcessSpec& spec) {
  if (spec.kind == ProcessKind::hardcore_poisson) throw std::invalid_argument("sample_lattice: wrong kind");
  spec.validate();
  const auto m = lattice_dims(spec);
  const Vec3 step = spec.window.extent().cwiseQuotient(Vec3(m[0], m[1], m[2]));
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(m[0]) * m[1] * m[2]);
  for (int k = 0; k < m[2]; ++k) {
    for (int j = 0; j < m[1]; ++j) {
      for (int i = 0; i < m[0]; ++i) {
        out.push_back(spec.window.min + step.cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5)));
      }
    }
  }
  return out;
}

/// Lattice base where a fraction q of the sites receive a twin at distance g
/// in a random direction. Twins are appended after the base sites.
inline std::vector<Vec3> sample_clustered(const ProcessSpec& spec, std::uint64_t stream = 0) {
  if (spec.kind != ProcessKind::clustered) throw std::invalid_argument("sample_clustered: wrong kind");
  if (!(spec.pair_fraction >= 0.0 && spec.pair_fraction <= 1.0)) {
    throw std::invalid_argument("sample_clustered: pair fraction must be in [0, 1]");
  }
  if (!(spec.pair_gap > 0.0)) throw std::invalid_argument("sample_clustered: pair gap must be positive");
  std::vector<Vec3> base = sample_lattice(spec);
  if (spec.pair_fraction == 0.0) return base;
  const auto m = lattice_dims(spec);
  const double spacing = (spec.window.extent().cwiseQuotient(Vec3(m[0], m[1], m[2]))).minCoeff();
  if (!(spec.pair_gap < 0.5 * spacing)) {
    throw std::invalid_argument("sample_clustered: pair gap must be below half the lattice spacing");
  }
  Stream rng(spec.seed, stream);
  std::vector<std::size_t> order(base.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with the stream's own uniform draws
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  const auto twins = static_cast<std::size_t>(std::llround(spec.pair_fraction * static_cast<double>(base.size())));
  std::vector<Vec3> out = base;
  for (std::size_t t = 0; t < twins; ++t) out.push_back(base[order[t]] + spec.pair_gap * rng.unit_vector());
  return out;
}

inline std::vector<Vec3> sample(const ProcessSpec& spec, std::uint64_t stream = 0) {
  switch (spec.kind) {
    case ProcessKind::hardcore_poisson: return sample_hardcore_poisson(spec, stream);
    case ProcessKind::lattice: return sample_lattice(spec);
    case ProcessKind::clustered: return sample_clustered(spec, stream);
  }
  return {};
}

/// Retained intensity of the thinned process: delta exp(-delta 4/3 pi R^3).
inline double hardcore_retained_intensity(double parent_intensity, double hardcore) {
  return parent_intensity * std::exp(-parent_intensity * 4.0 * pi / 3.0 * std::pow(hardcore, 3));
}

/// Hard-core Poisson spec over `window` whose expected retained count is
/// `count`, with hard-core distance R = kappa * count^{-1/3} (the scaling of a
/// fixed unit-intensity process shrunk to n points). Takes the low-density
/// branch of delta exp(-delta v) = target.
inline ProcessSpec hardcore_spec_for_count(double count, double kappa, const Box& window, std::uint64_t seed) {
  if (!(count > 0.0) || !(kappa >= 0.0)) throw std::invalid_argument("hardcore_spec_for_count: bad arguments");
  ProcessSpec spec;
  spec.kind = ProcessKind::hardcore_poisson;
  spec.window = window;
  spec.seed = seed;
  spec.hardcore = kappa * std::cbrt(window.volume() / count);
  const double target = count / window.volume();
  const double v = 4.0 * pi / 3.0 * std::pow(spec.hardcore, 3);
  if (v == 0.0) {
    spec.intensity = target;
    return spec;
  }
  if (target * v >= std::exp(-1.0)) {
    throw std::invalid_argument("hardcore_spec_for_count: count unreachable with this hard core");
  }
  // x exp(-x) = target v on x in (0, 1)
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mid * std::exp(-mid) < target * v ? lo : hi) = mid;
  }
  spec.intensity = 0.5 * (lo + hi) / v;
  return spec;
}

}  // namespace dilute
