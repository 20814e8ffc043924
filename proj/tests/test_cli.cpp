#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#ifndef DILUTE_CLI
#error "DILUTE_CLI must name the command-line binary"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int status = -1;
  std::string out;
};

CliResult run(const std::string& args) {
  const std::string cmd = std::string(DILUTE_CLI) + " " + args + " 2>/dev/null";
  CliResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("dilute_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenWritesConfiguration) {
  const CliResult a = run("gen --n 300 --seed 4 --lambda 0.01 -o " + path("c.json"));
  ASSERT_EQ(a.status, 0);
  const json j = json::parse(slurp(path("c.json")));
  const auto n = j.at("centers").size();
  EXPECT_GT(n, 200u);
  const double r = j.at("radius").get<double>();
  EXPECT_NEAR(4.0 / 3.0 * M_PI * r * r * r * n, 0.01, 1e-12);

  const CliResult b = run("gen --n 300 --seed 4 --lambda 0.01");
  EXPECT_EQ(b.status, 0);
  EXPECT_EQ(b.out, slurp(path("c.json")));
  EXPECT_NE(run("gen --n 300 --seed 5 --lambda 0.01").out, b.out);
}

TEST_F(Cli, GenRejectsBadInput) {
  EXPECT_EQ(run("gen --n 300").status, 2);
  EXPECT_EQ(run("gen --process gibbs --radius 0.01").status, 2);
  EXPECT_NE(run("gen --bogus").status, 0);
  EXPECT_NE(run("").status, 0);
}

TEST_F(Cli, CheckReportsAudits) {
  ASSERT_EQ(run("gen --process lattice --n 1000 --radius 0.005 -o " + path("lat.json")).status, 0);
  const CliResult a = run("check --config " + path("lat.json") + " --M 10");
  ASSERT_EQ(a.status, 0);
  const json j = json::parse(a.out);
  EXPECT_TRUE(j["b1"]["pass"].get<bool>());
  EXPECT_NEAR(j["b1"]["min_gap"].get<double>(), 0.1, 1e-12);
  EXPECT_EQ(j["b2_profile"].size(), 25u);
  EXPECT_LT(j["a0"]["discrepancy"].get<double>(), 1e-2);
  EXPECT_TRUE(j["pair_correlation"].is_null());

  const CliResult b = run("check --config " + path("lat.json") + " --M 30");
  ASSERT_EQ(b.status, 0);
  EXPECT_FALSE(json::parse(b.out)["b1"]["pass"].get<bool>());

  const CliResult pc = run("check --config " + path("lat.json") + " --pc-samples 20 --n 200 --pc-bins 4 --pc-rmax 0.2");
  ASSERT_EQ(pc.status, 0);
  EXPECT_EQ(json::parse(pc.out)["pair_correlation"]["bins"].size(), 4u);
  EXPECT_EQ(run("check --config " + path("missing.json")).status, 2);
}

TEST_F(Cli, ViscosityOfSampledAndStoredConfigs) {
  const CliResult a = run("visc --process lattice --n 125 --lambda 0.001");
  ASSERT_EQ(a.status, 0);
  const json j = json::parse(a.out);
  EXPECT_EQ(j["n"].get<int>(), 125);
  EXPECT_NEAR(j["lambda"].get<double>(), 0.001, 1e-15);
  EXPECT_NEAR((j["mu_eff_over_mu"].get<double>() - 1.0) / 0.001, 2.5, 0.05);

  ASSERT_EQ(run("gen --process lattice --n 1 --radius 0.2 -o " + path("one.json")).status, 0);
  const CliResult b = run("visc --config " + path("one.json") + " --gauss-seidel");
  ASSERT_EQ(b.status, 0);
  const double lam = 4.0 / 3.0 * M_PI * 0.008;
  EXPECT_NEAR(json::parse(b.out)["mu_eff_over_mu"].get<double>(), 1.0 + 2.5 * lam, 1e-12);
}

TEST_F(Cli, SolveSummaryAndProbes) {
  ASSERT_EQ(run("gen --n 100 --seed 2 --lambda 0.01 -o " + path("c.json")).status, 0);
  const CliResult a = run("solve --config " + path("c.json") + " --grid 8 --strata 4 --probes 3 --csv " + path("p.csv"));
  ASSERT_EQ(a.status, 0);
  const json j = json::parse(a.out);
  EXPECT_NEAR(j["lambda"].get<double>(), 0.01, 1e-12);
  EXPECT_EQ(j["good"].get<std::size_t>() + j["bad"].get<std::size_t>(), j["n"].get<std::size_t>());
  EXPECT_GT(j["err_naive"].get<double>(), 0.0);
  EXPECT_GT(j["norm_u0"].get<double>(), j["err_naive"].get<double>());
  const std::string csv = slurp(path("p.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 28);
  EXPECT_EQ(run("solve --config " + path("c.json") + " --grid 8 --forcing nope").status, 2);
}

TEST_F(Cli, SweepIsByteIdenticalAcrossRuns) {
  std::ofstream(path("plan.json")) << R"({"lambdas": [0.0, 0.01], "ns": [80], "seeds": [1, 2], "grid": 8, "strata": 4})";
  ASSERT_EQ(run("sweep --plan " + path("plan.json") + " --csv " + path("a.csv") + " --json " + path("a.json")).status, 0);
  ASSERT_EQ(run("sweep --plan " + path("plan.json") + " --csv " + path("b.csv")).status, 0);
  const std::string a = slurp(path("a.csv"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(path("b.csv")));
  EXPECT_EQ(json::parse(slurp(path("a.json"))).size(), 4u);
  // without output paths the CSV goes to stdout
  EXPECT_EQ(run("sweep --plan " + path("plan.json")).out, a);
}

TEST_F(Cli, SweepExitCodes) {
  std::ofstream(path("skip.json")) << R"({"lambdas": [0.3], "ns": [60], "seeds": [1], "grid": 8, "strata": 4})";
  const CliResult skip = run("sweep --plan " + path("skip.json"));
  EXPECT_EQ(skip.status, 0);
  EXPECT_NE(skip.out.find("skipped-infeasible"), std::string::npos);
  std::ofstream(path("bad.json")) << R"({"lambdas": [0.01], "ns": [60]})";
  EXPECT_EQ(run("sweep --plan " + path("bad.json")).status, 2);
  EXPECT_NE(run("sweep").status, 0);
}
