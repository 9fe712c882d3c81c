#include <gtest/gtest.h>

#include <numeric>

#include "ness/exact_solver.hpp"
#include "ness/predictions.hpp"
#include "ness/toy_model.hpp"
#include "oracle.hpp"

using namespace ness;

namespace {

ToyParameters toy(int k, double delta, double coupling, double f, double gamma) {
  return ToyParameters{k, delta, coupling, f, gamma};
}

ChainParameters chain(int n, double delta, double f, double gamma, double coupling = 1.0) {
  ChainParameters p;
  p.n_sites = n;
  p.interaction = delta;
  p.bias = f;
  p.dephasing = gamma;
  p.coupling = coupling;
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Toy model.

TEST(Toy, Validation) {
  EXPECT_THROW(toy(1, 1, 1, 0.5, 0).validate(), ValidationError);
  EXPECT_THROW(toy(3, 1, 0, 0.5, 0).validate(), ValidationError);
  EXPECT_THROW(toy(3, 1, 1, -0.1, 0).validate(), ValidationError);
  EXPECT_THROW(toy(3, 1, 1, 0.5, -1).validate(), ValidationError);
}

TEST(Toy, GeneratorMatchesDenseOracle) {
  const auto p = toy(4, 1.5, 0.6, 0.3, 0.05);
  const auto gen = toy_generator(p);
  ASSERT_EQ(gen.size(), 25);
  std::vector<oracle::M> ls;
  for (const auto& j : toy_jump_operators(p)) ls.push_back(DenseMatrix(j.op));
  const DenseMatrix h = DenseMatrix(toy_hamiltonian(p));
  const auto ref = oracle::dense_ness(h, ls);
  EXPECT_LT(trace_distance(toy_ness(p), ref), 1e-10);
  // Jump operators from the stated forms: L_L^- = sqrt(Gamma(1+f)/2) |s><1|.
  const DenseMatrix ll = DenseMatrix(toy_jump_operators(p)[1].op);
  EXPECT_NEAR(std::abs(ll(4, 0)), std::sqrt(0.6 * 1.3 / 2), 1e-15);
  EXPECT_NEAR(h(3, 3).real(), 1.5, 1e-15);
  EXPECT_NEAR(h(0, 1).real(), 0.5, 1e-15);
}

TEST(Toy, TracePreserving) {
  const auto gen = toy_generator(toy(6, 2.0, 1.0, 0.7, 0.1));
  const DenseVector tr = gen.space.trace_functional();
  EXPECT_LT((tr.transpose() * DenseMatrix(gen.matrix)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Toy, ZeroBiasIsMaximallyMixed) {
  const auto p = toy(6, 2.0, 1.0, 0.0, 0.1);
  const DenseMatrix rho = toy_ness(p);
  EXPECT_LT((rho - DenseMatrix::Identity(7, 7) / 7.0).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(toy_ness_current(p), 0.0, 1e-12);
}

TEST(Toy, InsulatingPoint) { EXPECT_LE(std::abs(toy_ness_current(toy(20, 10, 1, 1, 0))), 1e-10); }

TEST(Toy, DephasedCurrentAtFullBias) {
  const double j = toy_ness_current(toy(20, 10, 1, 1, 1e-3)) * 100.0;
  EXPECT_NEAR(j / 0.038, 1.0, 0.05);
}

TEST(Toy, ClosedFormLimits) {
  EXPECT_NEAR(toy_closed_form(toy(20, 10, 0.1, 1.0, 0.01)), 2.0 * 19 * 0.01 / 100.0, 1e-15);
  EXPECT_DOUBLE_EQ(toy_closed_form(toy(20, 10, 0.1, 0.0, 0.01)), 0.0);
  const double eps = 1e-6;
  const double near = toy_closed_form(toy(7, 3, 0.5, 1 - eps, 0.0));
  EXPECT_NEAR(near / (0.25 * 6 * eps * 0.5 / 9.0), 1.0, 1e-4);
}

TEST(Toy, ConvergesToClosedFormWithDelta) {
  std::vector<double> err;
  for (double d : {5.0, 10.0, 30.0}) {
    const auto p = toy(10, d, 0.1, 0.5, 0.01);
    err.push_back(std::abs(toy_ness_current(p) / toy_closed_form(p) - 1.0));
  }
  EXPECT_GT(err[0], err[1]);
  EXPECT_GT(err[1], err[2]);
  EXPECT_LT(err[2], 0.02);
}

TEST(Toy, NegativeDifferentialConductivity) {
  auto scan = [](int k) {
    std::vector<double> j;
    for (int i = 0; i <= 20; ++i) j.push_back(toy_ness_current(toy(k, 2.0, 1.0, i / 20.0, 0.0)));
    return j;
  };
  const auto j20 = scan(20);
  const auto best = std::max_element(j20.begin(), j20.end()) - j20.begin();
  EXPECT_GT(best, 0);
  EXPECT_LT(best, 20);
  EXPECT_LT(j20.back(), j20[best]);
  const auto j2 = scan(2);
  for (std::size_t i = 0; i + 1 < j2.size(); ++i) EXPECT_LE(j2[i], j2[i + 1] + 1e-14);
  const auto j3 = scan(3);
  EXPECT_LT(j3.back(), *std::max_element(j3.begin(), j3.end()));
}

TEST(Toy, DephasingEnhancesAtFullBias) {
  double prev = -1.0;
  for (double g : {0.0, 0.025, 0.05, 0.075, 0.1}) {
    const double j = toy_ness_current(toy(20, 2.0, 1.0, 1.0, g));
    EXPECT_GT(j, prev);
    prev = j;
  }
}

TEST(Toy, BoundStateAndAnsatz) {
  const auto b = toy_bound_state(20, 10.0);
  EXPECT_GE(b.ansatz_overlap, 1.0 - 1e-4);
  const auto s = toy_spectrum(toy(20, 2.0, 1.0, 0, 0));
  // One isolated level above the band [-1, 1].
  EXPECT_GT(s[20], 1.5);
  EXPECT_LT(s[19], 1.0 + 1e-12);
  const RealVector a = toy_dark_state(20, 10.0);
  EXPECT_NEAR(a[0] / a[19], std::pow(20.0, -19), 1e-30);
  EXPECT_LT((toy_dark_state(20, -10.0).cwiseAbs() - a.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(toy_dark_state(20, 0.4), ValidationError);
}

TEST(Toy, Correspondence) {
  const auto rows = correspondence_check(20, 10.0, 1.0, {0.0, 1e-3, 5e-3});
  EXPECT_NEAR(rows[0].current_dephased, rows[0].current_backward, 1e-12);
  EXPECT_LE(rows[1].mismatch, 0.05);
  EXPECT_GT(rows[2].mismatch, rows[1].mismatch);
  EXPECT_THROW(correspondence_check(20, 10.0, 1.0, {0.2}), ValidationError);
}

// ---------------------------------------------------------------------------
// Predictions.

TEST(Predict, DeltaZeroCurrent) {
  EXPECT_NEAR(predict::delta0_current(5, 0.5, 1.0, 0.1), -0.2150537634408602, 1e-15);
  EXPECT_EQ(predict::delta0_current(5, 0.0, 1.0, 0.1), 0.0);
  EXPECT_EQ(predict::delta0_current(5, 0.5, 1.0, 0.0), predict::delta0_current(50, 0.5, 1.0, 0.0));
}

TEST(Predict, DeltaZeroMatchesExactSolver) {
  for (int n : {3, 4, 5})
    for (double f : {0.3, 1.0})
      for (double g : {0.0, 0.2})
        for (double c : {0.5, 2.0}) {
          const double exact = solve_exact(chain(n, 0.0, f, g, c)).observables.current;
          EXPECT_NEAR(exact, predict::delta0_current(n, f, c, g), 1e-7);
        }
}

TEST(Predict, DomainDeviation) {
  EXPECT_NEAR(predict::domain_deviation(6, 12, 10.0, 7), 2.5e-3, 1e-15);
  EXPECT_NEAR(predict::domain_deviation(6, 12, 10.0, 6), 2.5e-3, 1e-15);
  EXPECT_NEAR(predict::domain_deviation(6, 12, 10.0, 9), std::pow(0.05, 6), 1e-20);
  for (int n = 0; n <= 8; ++n)
    for (int j = 1; j <= 8; ++j)
      EXPECT_DOUBLE_EQ(predict::domain_deviation(n, 8, 3.0, j), predict::domain_deviation(8 - n, 8, 3.0, 9 - j));
  EXPECT_THROW(predict::domain_deviation(3, 8, 3.0, 0), ValidationError);
  EXPECT_THROW(predict::domain_deviation(9, 8, 3.0, 1), ValidationError);
  EXPECT_THROW(predict::domain_deviation(3, 8, 0.5, 1), ValidationError);
}

// Balance equations written out as a dense linear system with the
// normalization row; independent of the library's inward recursion.
TEST(Predict, DetailedBalanceAgainstLinearSolve) {
  const int n = 6;
  const double delta = 1.0, x = 0.5;  // moderate x keeps every p_n well resolved
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 2, n + 1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 2);
  auto up = [&](int k) { return std::pow(x, 2.0 * k); };
  auto down = [&](int k) { return std::pow(x, 2.0 * (n - k)); };
  for (int k = 0; k <= n; ++k) {
    a(k, k) -= (k < n ? up(k) : 0.0) + (k > 0 ? down(k) : 0.0);
    if (k > 0) a(k, k - 1) += up(k - 1);
    if (k < n) a(k, k + 1) += down(k + 1);
  }
  a.row(n + 1).setOnes();
  b[n + 1] = 1.0;
  const Eigen::VectorXd ref = a.colPivHouseholderQr().solve(b);
  const auto p = predict::sector_probs_detailed_balance(n, delta);
  for (int k = 0; k <= n; ++k) EXPECT_NEAR(p[k] / ref[k], 1.0, 1e-8) << k;
}

TEST(Predict, SectorProbabilities) {
  const auto c = predict::sector_probs_closed_form(6, 10.0);
  const auto d = predict::sector_probs_detailed_balance(6, 10.0);
  EXPECT_NEAR(std::accumulate(c.begin(), c.end(), 0.0), 1.0, 1e-14);
  EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-14);
  for (int k = 1; k <= 5; ++k) EXPECT_NEAR(c[k] / d[k], 1.0, 1e-6);
  for (const auto& p : {c, d}) {
    EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), 3);
    for (double v : p) EXPECT_GT(v, 0.0);
    for (int k = 0; k < 3; ++k) EXPECT_LT(p[k], p[k + 1]);
    for (int k = 3; k < 6; ++k) EXPECT_GT(p[k], p[k + 1]);
  }
}

TEST(Predict, PurityAndLocalization) {
  EXPECT_NEAR(1.0 - predict::purity_prediction(10.0), 0.01, 1e-15);
  EXPECT_NEAR(predict::localization_length(10.0), 1.0 / std::log(20.0), 1e-15);
  EXPECT_NEAR(predict::localization_length(10.0), 0.334, 1e-3);
  EXPECT_THROW(predict::purity_prediction(0.9), ValidationError);
}
