#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "ness/analysis.hpp"
#include "ness/predictions.hpp"

using namespace ness;
namespace fs = std::filesystem;

namespace {

ChainParameters chain(int n, double delta, double f, double gamma) {
  ChainParameters p;
  p.n_sites = n;
  p.interaction = delta;
  p.bias = f;
  p.dephasing = gamma;
  return p;
}

SolverOptions exact_opts() {
  SolverOptions o;
  o.kind = SolverKind::kExact;
  return o;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ness_test_analysis_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Fits.

TEST(Fit, PurePowerRecoversSynthetic) {
  std::vector<double> xs{1, 2, 4, 8, 16}, ys;
  for (double x : xs) ys.push_back(2.0 / x);
  const auto r = fit_power_law(xs, ys);
  EXPECT_NEAR(r.prefactor, 2.0, 1e-6);
  EXPECT_NEAR(r.exponent, 1.0, 1e-6);
  EXPECT_LT(r.residual, 1e-10);
}

TEST(Fit, PowerPlusOffsetRecoversSynthetic) {
  std::vector<double> xs, ys;
  for (int n = 8; n <= 40; n += 4) {
    xs.push_back(n);
    ys.push_back(3.906 * std::pow(n, -1.066) + 0.995);
  }
  const auto r = fit_power_law(xs, ys, FitModel::kPowerPlusOffset);
  EXPECT_NEAR(r.prefactor, 3.906, 1e-4);
  EXPECT_NEAR(r.exponent, 1.066, 1e-4);
  EXPECT_NEAR(r.offset, 0.995, 1e-4);
  EXPECT_GE(r.residual, 0.0);
}

TEST(Fit, ThresholdPower) {
  std::vector<double> xs, ys;
  for (double d = 0.5; d <= 4.0; d += 0.25) {
    xs.push_back(d);
    ys.push_back(d > 1.07 ? 0.3 * std::pow(d - 1.07, 0.819) : 0.0);
  }
  const auto r = fit_threshold_power(xs, ys);
  EXPECT_NEAR(r.offset, 1.07, 1e-4);
  EXPECT_NEAR(r.exponent, 0.819, 1e-4);
  EXPECT_NEAR(r.prefactor, 0.3, 1e-4);
}

TEST(Fit, RejectsBadInput) {
  EXPECT_THROW(fit_power_law({1, 2, 3}, {1, -1, 2}), ValidationError);
  EXPECT_THROW(fit_power_law({0, 2, 3}, {1, 1, 2}), ValidationError);
  EXPECT_THROW(fit_power_law({1, 2}, {1, 2}), ValidationError);
  EXPECT_THROW(fit_power_law({1, 2, 3}, {1, 2}), ValidationError);
}

TEST(Fit, ThresholdBisection) {
  auto g = [](double d) { return d > 1.3 ? d - 1.3 : 0.0; };
  EXPECT_NEAR(locate_threshold(g, 0.0, 3.0, 1e-6), 1.3, 1e-6);
  EXPECT_THROW(locate_threshold(g, 2.0, 3.0), BracketError);
}

// ---------------------------------------------------------------------------
// Sweeps.

TEST(Sweep, ValidationAndGridOrder) {
  SweepConfig c;
  c.biases = {};
  EXPECT_THROW(c.validate(), ValidationError);
  c = SweepConfig{};
  c.solver.exact_max_sites = 12;
  EXPECT_THROW(c.validate(), ValidationError);
  c = SweepConfig{};
  c.n_sites = {3, 4};
  c.biases = {0.1, 0.2};
  c.dephasings = {0.0, 0.5};
  const auto g = c.grid();
  ASSERT_EQ(g.size(), 8u);
  EXPECT_EQ(g[0].n_sites, 3);
  EXPECT_EQ(g[1].dephasing, 0.5);
  EXPECT_EQ(g[2].bias, 0.2);
  EXPECT_EQ(g[4].n_sites, 4);
}

TEST(Sweep, DeterministicAndSignSymmetric) {
  SweepConfig c;
  c.n_sites = {4};
  c.interactions = {1.5};
  c.biases = {-0.6, 0.6};
  c.dephasings = {0.0, 0.3};
  c.solver = exact_opts();
  c.threads = 3;
  c.csv_path = scratch("det_a.csv").string();
  const auto a = run_sweep(c);
  c.csv_path = scratch("det_b.csv").string();
  c.threads = 1;
  run_sweep(c);
  // Thread count is echoed in the preamble; the data rows must agree byte for byte.
  auto body = [](std::string t) { return t.substr(t.find('\n') + 1); };
  EXPECT_EQ(body(slurp(scratch("det_a.csv"))), body(slurp(scratch("det_b.csv"))));
  ASSERT_EQ(a.size(), 4u);
  for (int k = 0; k < 2; ++k) {
    EXPECT_TRUE(a[k].ok());
    EXPECT_NEAR(a[k].observables.current, -a[k + 2].observables.current, 1e-10);
  }
  EXPECT_FALSE(fs::exists(scratch("det_a.csv.journal")));
  const std::string csv = slurp(scratch("det_a.csv"));
  EXPECT_NE(csv.find(std::string(kSweepCsvHeader) + "\n"), std::string::npos);
  EXPECT_EQ(csv.rfind("# ness ", 0), 0u);
}

TEST(Sweep, ResumesFromJournal) {
  SweepConfig c;
  c.n_sites = {3};
  c.biases = {0.2, 0.4};
  c.solver = exact_opts();
  c.threads = 1;
  c.csv_path = scratch("resume.csv").string();
  auto first = solve_point(c.grid()[0], c.solver);
  first.observables.current = 123.0;  // marker: must be reused, not recomputed
  {
    std::ofstream j(c.csv_path + ".journal");
    j << to_json(first).dump() << '\n' << "{\"torn";
  }
  const auto rows = run_sweep(c);
  EXPECT_EQ(rows[0].observables.current, 123.0);
  EXPECT_NE(rows[1].observables.current, 123.0);
  EXPECT_TRUE(rows[1].ok());
  EXPECT_FALSE(fs::exists(c.csv_path + ".journal"));
}

TEST(Sweep, PointFailureRecordedAndSweepContinues) {
  SweepConfig c;
  c.n_sites = {5, 3};
  c.solver = exact_opts();
  c.solver.exact_max_sites = 4;
  c.threads = 1;
  const auto rows = run_sweep(c);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].ok());
  EXPECT_FALSE(rows[0].report.converged);
  EXPECT_NE(csv_row(rows[0]).find(",nan,"), std::string::npos);
  EXPECT_TRUE(rows[1].ok());
}

TEST(Sweep, WeakInteractionDephasingDegrades) {
  SweepConfig c;
  c.n_sites = {6};
  c.interactions = {0.5};
  c.biases = {0.25, 1.0};
  c.dephasings = {0.0, 0.1, 0.5, 1.0};
  c.solver = exact_opts();
  const auto rows = run_sweep(c);
  for (int f = 0; f < 2; ++f)
    for (int g = 0; g < 3; ++g)
      EXPECT_LT(std::abs(rows[4 * f + g + 1].observables.current), std::abs(rows[4 * f + g].observables.current));
}

TEST(Sweep, AutoSelectsBySize) {
  SolverOptions o;
  o.exact_max_sites = 4;
  o.schedule.stages = {{0.1, 2, 5.0}};
  o.schedule.drift_tol = 1.0;
  EXPECT_EQ(solve_point(chain(4, 0, 0.5, 0), o).solver, "exact");
  EXPECT_EQ(solve_point(chain(5, 0, 0.5, 0), o).solver, "mpo");
}

// ---------------------------------------------------------------------------
// Optimal dephasing.

TEST(GammaOpt, ZeroWithoutInteraction) {
  for (int n : {4, 5})
    for (double f : {0.1, 1.0}) {
      const auto r = find_gamma_opt(chain(n, 0.0, f, 0.0), exact_opts());
      EXPECT_EQ(r.gamma_opt, 0.0);
      EXPECT_NEAR(r.current_max, std::abs(predict::delta0_current(n, f, 1.0, 0.0)), 1e-8);
    }
}

TEST(GammaOpt, EdgeMaximumIsBracketError) {
  GammaOptOptions go;
  go.scan_lo = 1e-4;
  go.scan_hi = 1e-3;
  go.scan_points = 3;
  try {
    find_gamma_opt(chain(4, 3.0, 1.0, 0.0), exact_opts(), go);
    FAIL() << "expected a bracket error";
  } catch (const BracketError& e) {
    EXPECT_EQ(e.scan().size(), 4u);
  }
  go.scan_points = 1;
  EXPECT_THROW(find_gamma_opt(chain(4, 3.0, 1.0, 0.0), exact_opts(), go), ValidationError);
}

// ---------------------------------------------------------------------------
// Diffusion and correlations.

TEST(Diffusion, RowAndValidation) {
  EXPECT_THROW(diffusion_check({4, 6}, chain(4, 0, 1, 1), exact_opts()), ValidationError);
  const auto r = diffusion_check({5, 6, 7}, chain(5, 0.0, 0.5, 1.0), exact_opts());
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) {
    EXPECT_GT(row.ratio, 0.0);
    EXPECT_GT(row.density_drop, 0.0);
  }
  // Non-interacting, strongly dephased: the ratio falls off like a diffusive
  // 1/length.
  EXPECT_GT(r.fit.exponent, 0.7);
  EXPECT_LT(r.fit.exponent, 1.3);
}

TEST(Correlations, MaximallyMixedIsUncorrelated) {
  const auto rec = measure(DensityMatrix::maximally_mixed(6), chain(6, 1.0, 0.5, 0.0));
  const auto prof = correlation_profile(rec);
  ASSERT_EQ(prof.size(), 3u);
  EXPECT_EQ(prof[0].i, 3);
  EXPECT_EQ(prof[0].j, 4);
  EXPECT_NEAR(prof[0].r, 1.0 / 6.0, 1e-15);
  EXPECT_TRUE(prof[2].boundary);
  for (const auto& pt : prof) EXPECT_NEAR(pt.c, 0.0, 1e-14);
  EXPECT_FALSE(sign_change_position(prof).has_value());
}

TEST(Correlations, SignChangeInterpolates) {
  std::vector<CorrelationPoint> prof{{5, 6, 0.1, -0.2, false}, {4, 7, 0.3, 0.2, false}, {1, 10, 0.9, -1.0, true}};
  EXPECT_NEAR(*sign_change_position(prof), 0.2, 1e-15);
  prof[1].c = -0.1;
  EXPECT_FALSE(sign_change_position(prof).has_value());
}

// Scaled-down ordering analogue of the entropy peak near Delta = 1.
TEST(Entropy, PeaksNearIsotropicPoint) {
  auto s = [](double d) { return solve_point(chain(8, d, 0.1, 0.0), exact_opts()).observables.entropy; };
  const double s1 = s(1.0);
  EXPECT_GT(s1, s(2.0));
  EXPECT_GT(s1, s(0.25));
}
