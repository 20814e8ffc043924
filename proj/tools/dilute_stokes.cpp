// dilute-stokes: command-line front end for configuration generation, audits,
// flow solves, viscosity estimates and parameter sweeps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dilute/dilute.hpp"

using nlohmann::json;
using namespace dilute;

namespace {

struct ProcessFlags {
  std::string process = "hardcore_poisson";
  double n = 1000;
  double kappa = 0.35;
  double hardcore = -1.0;
  double intensity = -1.0;
  double pair_fraction = 0.5;
  double pair_gap = 1e-3;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  void add(CLI::App* app) {
    app->add_option("--process", process, "hardcore_poisson | lattice | clustered")->capture_default_str();
    app->add_option("--n", n, "target point count")->capture_default_str();
    app->add_option("--kappa", kappa, "hard-core distance times n^(1/3)")->capture_default_str();
    app->add_option("--hardcore", hardcore, "explicit hard-core distance (overrides --kappa)");
    app->add_option("--intensity", intensity, "explicit intensity (overrides --n)");
    app->add_option("--pair-fraction", pair_fraction, "clustered: fraction of sites with a twin")->capture_default_str();
    app->add_option("--pair-gap", pair_gap, "clustered: twin distance")->capture_default_str();
    app->add_option("--seed", seed, "random seed")->capture_default_str();
    app->add_option("--stream", stream, "stream index within the seed")->capture_default_str();
  }

  ProcessSpec spec() const {
    ProcessSpec s;
    s.kind = process_kind_from_string(process);
    s.seed = seed;
    if (s.kind == ProcessKind::hardcore_poisson && intensity <= 0.0 && hardcore < 0.0) {
      return hardcore_spec_for_count(n, kappa, s.window, seed);
    }
    s.intensity = intensity > 0.0 ? intensity : n;
    if (s.kind == ProcessKind::hardcore_poisson) s.hardcore = std::max(0.0, hardcore);
    if (s.kind == ProcessKind::clustered) {
      s.pair_fraction = pair_fraction;
      s.pair_gap = pair_gap;
      if (intensity <= 0.0) s.intensity = n / (1.0 + pair_fraction);
    }
    return s;
  }
};

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  return json::parse(f);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << text;
}

DensityField density_for(const std::string& path, const Box& domain) {
  if (!path.empty()) return density_from_json(read_json(path));
  return DensityField::uniform(domain, 32);
}

json b2_json(const B2Profile& profile) {
  json rows = json::array();
  for (const auto& r : profile) rows.push_back({{"eta", r.eta}, {"count", r.count}, {"ratio", r.ratio}});
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dilute Stokes suspensions: configurations, audits, solvers and sweeps"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "sample a ball configuration");
  ProcessFlags gen_proc;
  gen_proc.add(gen);
  double gen_lambda = -1.0, gen_radius = -1.0;
  std::string gen_out;
  gen->add_option("--lambda", gen_lambda, "volume fraction (sets the radius from the sampled count)");
  gen->add_option("--radius", gen_radius, "explicit ball radius");
  gen->add_option("-o,--out", gen_out, "output file (default stdout)");

  // check
  auto* check = app.add_subcommand("check", "audit a configuration");
  std::string check_config, check_density;
  double check_M = 4.0;
  int check_etas = 25, pc_samples = 0, pc_bins = 20;
  double pc_rmax = 0.2;
  ProcessFlags check_proc;
  check->add_option("--config", check_config, "configuration JSON")->required();
  check->add_option("--density", check_density, "density JSON (default uniform)");
  check->add_option("--M", check_M, "separation multiple for the minimal-gap check")->capture_default_str();
  check->add_option("--etas", check_etas, "number of log-spaced thresholds on [0.05, 4]")->capture_default_str();
  check->add_option("--pc-samples", pc_samples, "ensemble size for the pair correlation (0 = skip, else >= 20)")
      ->capture_default_str();
  check->add_option("--pc-bins", pc_bins, "pair correlation bins")->capture_default_str();
  check->add_option("--pc-rmax", pc_rmax, "pair correlation range")->capture_default_str();
  check_proc.add(check);

  // solve
  auto* solve = app.add_subcommand("solve", "particle, Einstein and plain Stokes flows for one configuration");
  std::string solve_config, solve_density, solve_forcing = "bump", solve_csv, solve_json;
  double solve_lambda = -1.0, solve_eta = -1.0, solve_theta = kDefaultTheta, solve_mu = 1.0, solve_tol = 1e-8,
         solve_amp = 1.0;
  int solve_grid = 64, solve_probes = 16, solve_strata = 32;
  std::uint64_t solve_seed = 0;
  solve->add_option("--config", solve_config, "configuration JSON")->required();
  solve->add_option("--density", solve_density, "density JSON (default uniform)");
  solve->add_option("--forcing", solve_forcing, "bump | gaussian | shear | point-smoothed")->capture_default_str();
  solve->add_option("--amplitude", solve_amp, "forcing amplitude")->capture_default_str();
  solve->add_option("--lambda", solve_lambda, "volume fraction of the effective model (default: the configuration's)");
  solve->add_option("--eta", solve_eta, "good/bad threshold (default lambda^theta)");
  solve->add_option("--theta", solve_theta, "exponent in eta = lambda^theta")->capture_default_str();
  solve->add_option("--mu", solve_mu, "viscosity")->capture_default_str();
  solve->add_option("--tol", solve_tol, "solver tolerance")->capture_default_str();
  solve->add_option("--grid", solve_grid, "cells per side")->capture_default_str();
  solve->add_option("--probes", solve_probes, "probe lattice points per side in the central cube")->capture_default_str();
  solve->add_option("--strata", solve_strata, "Monte-Carlo strata per side for norms")->capture_default_str();
  solve->add_option("--seed", solve_seed, "sampling seed for norms")->capture_default_str();
  solve->add_option("--csv", solve_csv, "probe velocities CSV (default: not written)");
  solve->add_option("--json", solve_json, "summary JSON (default stdout)");

  // visc
  auto* visc = app.add_subcommand("visc", "effective viscosity of a configuration");
  std::string visc_config;
  double visc_lambda = 0.01, visc_mu = 1.0, visc_tol = 1e-8;
  bool visc_gs = false;
  ProcessFlags visc_proc;
  visc->add_option("--config", visc_config, "configuration JSON (else sampled from the process flags)");
  visc->add_option("--lambda", visc_lambda, "volume fraction when sampling")->capture_default_str();
  visc->add_option("--mu", visc_mu, "viscosity")->capture_default_str();
  visc->add_option("--tol", visc_tol, "reflections tolerance")->capture_default_str();
  visc->add_flag("--gauss-seidel", visc_gs, "sequential sweeps instead of simultaneous ones");
  visc_proc.add(visc);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a JSON sweep plan");
  std::string plan_path, sweep_csv, sweep_json;
  bool sweep_timing = false;
  sweep->add_option("--plan", plan_path, "plan JSON")->required();
  sweep->add_option("--csv", sweep_csv, "records CSV output");
  sweep->add_option("--json", sweep_json, "records JSON output");
  sweep->add_flag("--timing", sweep_timing, "record wall times (breaks byte-identical reruns)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const ProcessSpec spec = gen_proc.spec();
      const auto pts = sample(spec, gen_proc.stream);
      if (pts.empty()) throw std::runtime_error("the sample is empty");
      double r = gen_radius;
      if (r <= 0.0) {
        if (gen_lambda <= 0.0) throw std::runtime_error("give --lambda or --radius");
        r = radius_for(pts.size(), gen_lambda);
      }
      const BallConfiguration config(pts, r, spec.window);
      write_text(gen_out, to_json(config).dump() + "\n");
      return 0;
    }

    if (*check) {
      const BallConfiguration config = configuration_from_json(read_json(check_config));
      const DensityField rho = density_for(check_density, config.domain());
      json out;
      const B1Result b1 = check_B1(config, check_M);
      out["b1"] = {{"M", check_M}, {"pass", b1.pass}, {"min_gap", std::isfinite(b1.min_gap) ? json(b1.min_gap) : json()}};
      const auto etas = default_b2_etas(check_etas);
      const B2Profile profile = b2_profile(config, etas);
      out["b2_profile"] = b2_json(profile);
      const auto tests = default_a0_tests(config.domain());
      out["a0"] = {{"discrepancy", a0_discrepancy(config, rho, tests)}, {"tests", tests.size()}};
      if (pc_samples > 0) {
        const ProcessSpec spec = check_proc.spec();
        std::vector<std::vector<Vec3>> ensemble;
        for (int s = 0; s < pc_samples; ++s) ensemble.push_back(sample(spec, static_cast<std::uint64_t>(s)));
        const auto edges = linear_bins(0.0, pc_rmax, pc_bins);
        const PairCorrelation pc = pair_correlation_estimate(ensemble, spec.window, edges);
        json bins = json::array();
        for (std::size_t k = 0; k < pc.estimate.size(); ++k) {
          bins.push_back({{"r_lo", pc.edges[k]}, {"r_hi", pc.edges[k + 1]}, {"rho2", pc.estimate[k]},
                          {"ratio", pc.ratio[k]}, {"pairs", pc.counts[k]}, {"empty", static_cast<bool>(pc.empty[k])}});
        }
        out["pair_correlation"] = {{"intensity", pc.intensity}, {"samples", pc.samples}, {"bins", bins}};
      } else {
        out["pair_correlation"] = nullptr;
      }
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*solve) {
      const BallConfiguration config = configuration_from_json(read_json(solve_config));
      const DensityField rho = density_for(solve_density, config.domain());
      const double lambda = solve_lambda >= 0.0 ? solve_lambda : config.volume_fraction() / config.domain().volume();
      const double eta = solve_eta > 0.0 ? solve_eta : select_eta(lambda, solve_theta);
      const Forcing f = make_forcing(solve_forcing, config.domain(), solve_amp);
      const UniformGrid grid(config.domain(), solve_grid);
      OseenConvolver conv(grid);
      const EinsteinSolution ue = solve_einstein(f, EinsteinModel(solve_mu, lambda, rho), grid, solve_tol, 200, &conv);
      auto u0 = std::make_shared<const GridVectorField>(solve_stokes(f, solve_mu, grid, &conv));
      ReflectionOptions opt;
      opt.mu = solve_mu;
      opt.tol = solve_tol;
      const ParticleSolution un = solve_particles(config, FlowField::wrap("u0", u0), opt);
      const FlowField uE = FlowField::from_grid("u_E", ue.field);
      const FlowField u0f = FlowField::wrap("u0", u0);
      const Vec3 c = config.domain().center(), half = 0.25 * config.domain().extent();
      const Box K{c - half, c + half};
      const std::vector<FlowField> diffs{un.field - uE, un.field - u0f, u0f};
      const auto norms = field_norms(diffs, K, &config, 2.0, NormKind::value, solve_strata, solve_seed);
      const GoodBadPartition part = partition_good_bad(config, eta);

      if (!solve_csv.empty()) {
        std::ostringstream os;
        os << "x,y,z,ux,uy,uz\n";
        const int m = solve_probes;
        for (int k = 0; k < m; ++k) {
          for (int j = 0; j < m; ++j) {
            for (int i = 0; i < m; ++i) {
              const Vec3 x = K.min + K.extent().cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5) / m);
              const Vec3 u = un.field.velocity(x);
              os << format_double(x.x()) << ',' << format_double(x.y()) << ',' << format_double(x.z()) << ','
                 << format_double(u.x()) << ',' << format_double(u.y()) << ',' << format_double(u.z()) << '\n';
            }
          }
        }
        write_text(solve_csv, os.str());
      }
      json summary = {{"n", config.size()},
                      {"radius", config.radius()},
                      {"lambda", lambda},
                      {"eta", eta},
                      {"good", part.good.size()},
                      {"bad", part.bad.size()},
                      {"sweeps", un.state.sweeps},
                      {"residual_history", un.state.residual_history},
                      {"einstein_iterations", ue.iterations},
                      {"einstein_increments", ue.increments},
                      {"err_einstein", norms[0]},
                      {"err_naive", norms[1]},
                      {"norm_u0", norms[2]},
                      {"forcing", f.family},
                      {"grid", grid.dims[0]}};
      write_text(solve_json, summary.dump(2) + "\n");
      return 0;
    }

    if (*visc) {
      std::optional<BallConfiguration> config;
      std::uint64_t seed = visc_proc.seed;
      if (!visc_config.empty()) {
        config.emplace(configuration_from_json(read_json(visc_config)));
      } else {
        const ProcessSpec spec = visc_proc.spec();
        const auto pts = sample(spec, visc_proc.stream);
        if (pts.empty()) throw std::runtime_error("the sample is empty");
        config.emplace(pts, radius_for(pts.size(), visc_lambda), spec.window);
      }
      StressletState st;
      const double ratio = effective_viscosity_estimate(*config, visc_mu, TraceFreeSymMat(0, 0, 0, 1, 0, 0), visc_tol,
                                                        &st, visc_gs ? SweepScheme::gauss_seidel : SweepScheme::jacobi);
      const json out = {{"mu_eff_over_mu", ratio},
                        {"lambda", config->volume_fraction() / config->domain().volume()},
                        {"n", config->size()},
                        {"seed", seed},
                        {"sweeps", st.sweeps}};
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*sweep) {
      SweepPlan plan = plan_from_json(read_json(plan_path));
      if (sweep_timing) plan.timing = true;
      const auto records = run_sweep(plan);
      if (!sweep_csv.empty()) report(records, ReportFormat::csv, sweep_csv);
      if (!sweep_json.empty()) report(records, ReportFormat::json, sweep_json);
      if (sweep_csv.empty() && sweep_json.empty()) std::cout << to_csv(records);
      std::size_t bad = 0;
      for (const auto& r : records) {
        if (!r.ok() && !r.skipped()) {
          ++bad;
          std::fprintf(stderr, "lambda=%g n=%zu seed=%llu: %s\n", r.lambda, r.n,
                       static_cast<unsigned long long>(r.seed), r.status.c_str());
        }
      }
      return bad == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dilute-stokes: %s\n", e.what());
    return 2;
  }
  return 0;
}
