#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "dilute/audit.hpp"
#include "dilute/config.hpp"
#include "dilute/grid.hpp"
#include "dilute/point_process.hpp"
#include "dilute/reflections.hpp"
#include "dilute/stokes.hpp"

namespace dilute {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One (cell, seed) experiment row.
struct SweepRecord {
  std::size_t n = 0;  // sampled ball count
  double lambda = 0.0;
  double r_n = 0.0;
  double eta = kNaN;
  double theta = kNaN;
  std::uint64_t seed = 0;
  std::string process;
  double mu_eff_over_mu = kNaN;
  double err_einstein = kNaN;  // |u_n - u_E| in L2(K)
  double err_naive = kNaN;     // |u_n - u_0| in L2(K)
  double a0_discrepancy = kNaN;
  double b2_max_ratio = kNaN;
  int sweeps = 0;
  double wall_time = 0.0;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
  bool skipped() const { return status.rfind("skipped-infeasible", 0) == 0; }
};

inline const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{
      "n",         "lambda",         "r_n",         "eta",       "theta",   "seed",
      "process",   "mu_eff_over_mu", "err_einstein", "err_naive", "a0_discrepancy",
      "b2_max_ratio", "sweeps",      "wall_time",   "status"};
  return cols;
}

// ---------------------------------------------------------------------------
// Rate fitting

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t count = 0;
};

/// Least squares of log err against log lambda.
inline RateFit fit_rate(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 points");
  double sx = 0, sy = 0;
  for (const auto& [l, e] : points) {
    if (!(l > 0.0) || !(e > 0.0) || !std::isfinite(l) || !std::isfinite(e)) {
      throw std::invalid_argument("fit_rate: values must be positive and finite");
    }
    sx += std::log(l);
    sy += std::log(e);
  }
  const double m = static_cast<double>(points.size());
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [l, e] : points) {
    const double dx = std::log(l) - mx, dy = std::log(e) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_rate: lambda values must not all coincide");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  f.count = points.size();
  return f;
}

inline double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// ---------------------------------------------------------------------------
// Plans

struct SweepPlan {
  std::vector<double> lambdas;
  std::vector<std::size_t> ns;
  std::vector<std::uint64_t> seeds;
  std::vector<ProcessKind> processes{ProcessKind::hardcore_poisson};
  double theta = kDefaultTheta;
  double kappa = 0.35;         // hard-core distance times n^{1/3}
  double pair_fraction = 0.5;  // clustered
  double pair_gap = 1e-3;      // clustered
  std::string forcing = "bump";
  double amplitude = 1.0;
  double mu = 1.0;
  int grid = 64;
  int strata = 32;
  double tol = 1e-8;
  int max_sweeps = 100;
  Box domain = Box::unit_cube();
  std::optional<Box> probe;  // defaults to the central half-size cube
  bool viscosity = true;
  bool model_errors = true;
  bool audits = true;
  bool timing = false;

  Box probe_region() const {
    if (probe) return *probe;
    const Vec3 c = domain.center(), half = 0.25 * domain.extent();
    return Box{c - half, c + half};
  }

  void validate() const {
    if (lambdas.empty() || ns.empty() || seeds.empty() || processes.empty()) {
      throw std::invalid_argument("sweep plan: lambdas, ns, seeds and processes must be nonempty");
    }
    for (double l : lambdas) {
      if (!(l >= 0.0 && l < 1.0)) throw std::invalid_argument("sweep plan: lambda must be in [0, 1)");
    }
    for (std::size_t n : ns) {
      if (n < 1) throw std::invalid_argument("sweep plan: n must be >= 1");
    }
    if (!(theta > 0.0 && theta < 1.0 / 3.0)) throw std::invalid_argument("sweep plan: theta must be in (0, 1/3)");
    if (grid < 4 || strata < 1) throw std::invalid_argument("sweep plan: grid >= 4 and strata >= 1 required");
  }
};

inline SweepPlan plan_from_json(const nlohmann::json& j) {
  SweepPlan p;
  p.lambdas = j.at("lambdas").get<std::vector<double>>();
  p.ns = j.at("ns").get<std::vector<std::size_t>>();
  if (j.contains("seeds")) {
    p.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  } else {
    const auto count = j.at("seed_count").get<std::uint64_t>();
    const auto base = j.value("seed_base", std::uint64_t{0});
    for (std::uint64_t s = 0; s < count; ++s) p.seeds.push_back(base + s);
  }
  if (j.contains("process")) {
    p.processes.clear();
    if (j["process"].is_array()) {
      for (const auto& s : j["process"]) p.processes.push_back(process_kind_from_string(s.get<std::string>()));
    } else {
      p.processes.push_back(process_kind_from_string(j["process"].get<std::string>()));
    }
  }
  p.theta = j.value("theta", p.theta);
  p.kappa = j.value("kappa", p.kappa);
  p.pair_fraction = j.value("pair_fraction", p.pair_fraction);
  p.pair_gap = j.value("pair_gap", p.pair_gap);
  p.forcing = j.value("forcing", p.forcing);
  p.amplitude = j.value("amplitude", p.amplitude);
  p.mu = j.value("mu", p.mu);
  p.grid = j.value("grid", p.grid);
  p.strata = j.value("strata", p.strata);
  p.tol = j.value("tol", p.tol);
  p.max_sweeps = j.value("max_sweeps", p.max_sweeps);
  if (j.contains("probe")) p.probe = Box{vec3_from_json(j["probe"].at("min")), vec3_from_json(j["probe"].at("max"))};
  p.viscosity = j.value("viscosity", p.viscosity);
  p.model_errors = j.value("model_errors", p.model_errors);
  p.audits = j.value("audits", p.audits);
  p.timing = j.value("timing", p.timing);
  p.validate();
  return p;
}

/// Process spec producing about n points in the domain.
inline ProcessSpec process_for(const SweepPlan& plan, ProcessKind kind, std::size_t n, std::uint64_t seed) {
  if (kind == ProcessKind::hardcore_poisson) {
    return hardcore_spec_for_count(static_cast<double>(n), plan.kappa, plan.domain, seed);
  }
  ProcessSpec s;
  s.kind = kind;
  s.window = plan.domain;
  s.seed = seed;
  s.intensity = static_cast<double>(n) / plan.domain.volume();
  if (kind == ProcessKind::clustered) {
    // n counts base plus twins
    s.intensity /= 1.0 + plan.pair_fraction;
    s.pair_fraction = plan.pair_fraction;
    s.pair_gap = plan.pair_gap;
  }
  return s;
}

/// Separation every sample of the process is guaranteed to have.
inline double guaranteed_separation(const ProcessSpec& s) {
  switch (s.kind) {
    case ProcessKind::hardcore_poisson: return s.hardcore;
    case ProcessKind::lattice: {
      const auto m = lattice_dims(s);
      return s.window.extent().cwiseQuotient(Vec3(m[0], m[1], m[2])).minCoeff();
    }
    case ProcessKind::clustered: {
      if (s.pair_fraction > 0.0) return s.pair_gap;
      ProcessSpec base = s;
      base.kind = ProcessKind::lattice;
      return guaranteed_separation(base);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Sweep execution

/// Grid fields shared by all cells with the same lambda.
struct ModelFields {
  std::shared_ptr<const GridVectorField> u0;
  std::shared_ptr<const GridVectorField> gap;  // u0 - u_E
};

class SweepRunner {
 public:
  explicit SweepRunner(SweepPlan plan)
      : plan_(std::move(plan)), forcing_(make_forcing(plan_.forcing, plan_.domain, plan_.amplitude)),
        rho_(DensityField::uniform(plan_.domain, 16)) {
    plan_.validate();
  }

  const SweepPlan& plan() const { return plan_; }

  std::vector<SweepRecord> run() {
    std::vector<SweepRecord> out;
    for (double lambda : plan_.lambdas) {
      for (std::size_t n : plan_.ns) {
        for (ProcessKind kind : plan_.processes) {
          for (std::uint64_t seed : plan_.seeds) out.push_back(run_one(lambda, n, kind, seed));
        }
      }
    }
    std::stable_sort(out.begin(), out.end(), [](const SweepRecord& a, const SweepRecord& b) {
      return std::tie(a.lambda, a.process, a.n, a.seed) < std::tie(b.lambda, b.process, b.n, b.seed);
    });
    return out;
  }

  SweepRecord run_one(double lambda, std::size_t n_target, ProcessKind kind, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepRecord rec;
    rec.lambda = lambda;
    rec.theta = plan_.theta;
    rec.seed = seed;
    rec.process = to_string(kind);
    try {
      fill(rec, lambda, n_target, kind, seed);
    } catch (const NonConvergence& e) {
      rec.status = std::string("nonconvergence: ") + e.what();
    } catch (const std::exception& e) {
      rec.status = std::string("error: ") + e.what();
    }
    if (plan_.timing) rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }

  const ModelFields& model_fields(double lambda) {
    auto it = models_.find(lambda);
    if (it != models_.end()) return it->second;
    if (!grid_) {
      grid_ = std::make_unique<UniformGrid>(plan_.domain, plan_.grid);
      conv_ = std::make_unique<OseenConvolver>(*grid_);
    }
    if (!u0_) u0_ = std::make_shared<const GridVectorField>(solve_stokes(forcing_, plan_.mu, *grid_, conv_.get()));
    ModelFields m;
    m.u0 = u0_;
    EinsteinModel model(plan_.mu, lambda, rho_);
    EinsteinSolution e = solve_einstein(forcing_, model, *grid_, plan_.tol * 1e-2, 200, conv_.get());
    std::vector<Vec3> gap(grid_->size());
    for (std::size_t i = 0; i < gap.size(); ++i) gap[i] = u0_->values()[i] - e.field.values()[i];
    m.gap = std::make_shared<const GridVectorField>(*grid_, std::move(gap));
    return models_.emplace(lambda, std::move(m)).first->second;
  }

 private:
  void fill(SweepRecord& rec, double lambda, std::size_t n_target, ProcessKind kind, std::uint64_t seed) {
    const ProcessSpec spec = process_for(plan_, kind, n_target, seed);
    if (lambda > 0.0) {
      const double r_planned = radius_for(n_target, lambda);
      const double sep = guaranteed_separation(spec);
      if (sep < 2.0 * r_planned) {
        rec.status = "skipped-infeasible: guaranteed separation " + fmt(sep) + " below ball diameter " +
                     fmt(2.0 * r_planned);
        return;
      }
    }
    const std::vector<Vec3> pts = sample(spec, 0);
    rec.n = pts.size();
    if (pts.empty()) throw std::runtime_error("empty sample");
    if (lambda > 0.0) rec.eta = select_eta(lambda, plan_.theta);

    if (plan_.audits) {
      const auto tests = default_a0_tests(plan_.domain, 3, 10, 0);
      rec.a0_discrepancy = a0_discrepancy(pts, rho_, tests);
      const auto etas = default_b2_etas();
      rec.b2_max_ratio = b2_max_ratio(b2_profile(pts, etas), 0.2, 2.0);
    }

    if (lambda == 0.0) {
      // no balls: u_n = u_E = u_0
      rec.r_n = 0.0;
      rec.mu_eff_over_mu = 1.0;
      if (plan_.model_errors) rec.err_einstein = rec.err_naive = 0.0;
      return;
    }

    rec.r_n = radius_for(pts.size(), lambda);
    const BallConfiguration config(pts, rec.r_n, plan_.domain);
    if (config.size() > 1 && !(config.min_gap() > 2.0 * rec.r_n)) throw std::runtime_error("balls overlap");

    if (plan_.viscosity) {
      StressletState st;
      rec.mu_eff_over_mu =
          effective_viscosity_estimate(config, plan_.mu, TraceFreeSymMat(0, 0, 0, 1, 0, 0), plan_.tol, &st);
      rec.sweeps = st.sweeps;
    }
    if (plan_.model_errors) {
      const ModelFields& m = model_fields(lambda);
      ReflectionOptions opt;
      opt.mu = plan_.mu;
      opt.tol = plan_.tol;
      opt.max_sweeps = plan_.max_sweeps;
      const FlowField background = FlowField::wrap("u0", m.u0);
      const ParticleSolution sol = solve_particles(config, background, opt);
      if (!plan_.viscosity) rec.sweeps = sol.state.sweeps;
      // u_n - u_E = (u0 - u_E) - disturbance and u_n - u_0 = -disturbance, on the same samples
      const auto norms = sampled_norms(plan_.probe_region(), &config, 2.0, plan_.strata, 2,
                                       [&](const Vec3& x, std::span<double> out) {
                                         const Vec3 d = sol.disturbance.velocity(x);
                                         out[0] = (m.gap->velocity(x) - d).norm();
                                         out[1] = d.norm();
                                       },
                                       seed);
      rec.err_einstein = norms[0];
      rec.err_naive = norms[1];
    }
  }

  static std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }

  SweepPlan plan_;
  Forcing forcing_;
  DensityField rho_;
  std::unique_ptr<UniformGrid> grid_;
  std::unique_ptr<OseenConvolver> conv_;
  std::shared_ptr<const GridVectorField> u0_;
  std::map<double, ModelFields> models_;
};

inline std::vector<SweepRecord> run_sweep(const SweepPlan& plan) { return SweepRunner(plan).run(); }

/// Exit status contract: every record succeeded or was skipped as infeasible.
inline bool all_cells_acceptable(std::span<const SweepRecord> records) {
  return std::all_of(records.begin(), records.end(), [](const SweepRecord& r) { return r.ok() || r.skipped(); });
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string to_csv(std::span<const SweepRecord> records) {
  if (records.empty()) throw std::invalid_argument("report: no records");
  std::ostringstream os;
  const auto& cols = sweep_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
  os << '\n';
  for (const SweepRecord& r : records) {
    os << r.n << ',' << format_double(r.lambda) << ',' << format_double(r.r_n) << ',' << format_double(r.eta) << ','
       << format_double(r.theta) << ',' << r.seed << ',' << csv_escape(r.process) << ','
       << format_double(r.mu_eff_over_mu) << ',' << format_double(r.err_einstein) << ','
       << format_double(r.err_naive) << ',' << format_double(r.a0_discrepancy) << ','
       << format_double(r.b2_max_ratio) << ',' << r.sweeps << ',' << format_double(r.wall_time) << ','
       << csv_escape(r.status) << '\n';
  }
  return os.str();
}

inline std::string json_number(double v) { return std::isfinite(v) ? format_double(v) : "null"; }

inline std::string to_json_text(std::span<const SweepRecord> records) {
  if (records.empty()) throw std::invalid_argument("report: no records");
  std::ostringstream os;
  os << "[\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SweepRecord& r = records[i];
    os << "  {\"n\": " << r.n << ", \"lambda\": " << json_number(r.lambda) << ", \"r_n\": " << json_number(r.r_n)
       << ", \"eta\": " << json_number(r.eta) << ", \"theta\": " << json_number(r.theta) << ", \"seed\": " << r.seed
       << ", \"process\": " << nlohmann::json(r.process).dump()
       << ", \"mu_eff_over_mu\": " << json_number(r.mu_eff_over_mu)
       << ", \"err_einstein\": " << json_number(r.err_einstein) << ", \"err_naive\": " << json_number(r.err_naive)
       << ", \"a0_discrepancy\": " << json_number(r.a0_discrepancy)
       << ", \"b2_max_ratio\": " << json_number(r.b2_max_ratio) << ", \"sweeps\": " << r.sweeps
       << ", \"wall_time\": " << json_number(r.wall_time) << ", \"status\": " << nlohmann::json(r.status).dump()
       << "}" << (i + 1 < records.size() ? "," : "") << "\n";
  }
  os << "]\n";
  return os.str();
}

enum class ReportFormat { csv, json };

inline void report(std::span<const SweepRecord> records, ReportFormat format, const std::string& path) {
  const std::string text = format == ReportFormat::csv ? to_csv(records) : to_json_text(records);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("report: cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw std::runtime_error("report: write to '" + path + "' failed");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

inline double json_double(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

}  // namespace detail

inline std::vector<SweepRecord> parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("parse_csv: empty input");
  if (detail::split_csv_line(line) != sweep_columns()) throw std::invalid_argument("parse_csv: unexpected header");
  std::vector<SweepRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != sweep_columns().size()) throw std::invalid_argument("parse_csv: wrong field count");
    SweepRecord r;
    r.n = std::stoull(f[0]);
    r.lambda = detail::parse_double(f[1]);
    r.r_n = detail::parse_double(f[2]);
    r.eta = detail::parse_double(f[3]);
    r.theta = detail::parse_double(f[4]);
    r.seed = std::stoull(f[5]);
    r.process = f[6];
    r.mu_eff_over_mu = detail::parse_double(f[7]);
    r.err_einstein = detail::parse_double(f[8]);
    r.err_naive = detail::parse_double(f[9]);
    r.a0_discrepancy = detail::parse_double(f[10]);
    r.b2_max_ratio = detail::parse_double(f[11]);
    r.sweeps = std::stoi(f[12]);
    r.wall_time = detail::parse_double(f[13]);
    r.status = f[14];
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<SweepRecord> parse_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  std::vector<SweepRecord> out;
  for (const auto& o : j) {
    SweepRecord r;
    r.n = o.at("n").get<std::size_t>();
    r.lambda = detail::json_double(o.at("lambda"));
    r.r_n = detail::json_double(o.at("r_n"));
    r.eta = detail::json_double(o.at("eta"));
    r.theta = detail::json_double(o.at("theta"));
    r.seed = o.at("seed").get<std::uint64_t>();
    r.process = o.at("process").get<std::string>();
    r.mu_eff_over_mu = detail::json_double(o.at("mu_eff_over_mu"));
    r.err_einstein = detail::json_double(o.at("err_einstein"));
    r.err_naive = detail::json_double(o.at("err_naive"));
    r.a0_discrepancy = detail::json_double(o.at("a0_discrepancy"));
    r.b2_max_ratio = detail::json_double(o.at("b2_max_ratio"));
    r.sweeps = o.at("sweeps").get<int>();
    r.wall_time = detail::json_double(o.at("wall_time"));
    r.status = o.at("status").get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

/// Medians over seeds of the successful records of one (lambda, process) group.
struct GroupSummary {
  double lambda = 0.0;
  std::string process;
  std::size_t records = 0;
  double err_einstein = kNaN;
  double err_naive = kNaN;
  double mu_eff_over_mu = kNaN;
};

inline std::vector<GroupSummary> summarize(std::span<const SweepRecord> records) {
  std::map<std::pair<double, std::string>, std::vector<const SweepRecord*>> groups;
  for (const auto& r : records) {
    if (r.ok()) groups[{r.lambda, r.process}].push_back(&r);
  }
  std::vector<GroupSummary> out;
  for (const auto& [key, rs] : groups) {
    GroupSummary g;
    g.lambda = key.first;
    g.process = key.second;
    g.records = rs.size();
    std::vector<double> ee, en, mu;
    for (const SweepRecord* r : rs) {
      ee.push_back(r->err_einstein);
      en.push_back(r->err_naive);
      mu.push_back(r->mu_eff_over_mu);
    }
    g.err_einstein = median(ee);
    g.err_naive = median(en);
    g.mu_eff_over_mu = median(mu);
    out.push_back(g);
  }
  return out;
}

}  // namespace dilute
