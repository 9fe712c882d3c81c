#include <gtest/gtest.h>

#include <random>

#include "ness/liouvillian.hpp"
#include "ness/model.hpp"
#include "oracle.hpp"

using namespace ness;

namespace {

DenseMatrix dense(const SparseMatrix& m) { return DenseMatrix(m); }

ChainParameters chain(int n, double delta, double f, double gamma, double b = 0.0, double coupling = 1.0) {
  ChainParameters p;
  p.n_sites = n;
  p.interaction = delta;
  p.bias = f;
  p.dephasing = gamma;
  p.staggered = b;
  p.coupling = coupling;
  return p;
}

DenseMatrix random_state(int d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  DenseMatrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = Complex(g(rng), g(rng));
  DenseMatrix r = a * a.adjoint();
  return r / r.trace();
}

}  // namespace

TEST(Basis, SiteOneIsMostSignificant) {
  EXPECT_EQ(basis::occupation(0b1000, 1, 4), 1);
  EXPECT_EQ(basis::occupation(0b1000, 4, 4), 0);
  EXPECT_EQ(basis::from_occupations({1, 0, 0, 1}), 0b1001u);
  EXPECT_EQ(basis::domain_state(2, 5), 0b11000u);
  EXPECT_EQ(basis::sector_states(6, 3).size(), 20u);
  EXPECT_DOUBLE_EQ(binomial(12, 6), 924.0);
}

TEST(Parameters, Validation) {
  EXPECT_THROW(chain(1, 0, 0, 0).validate(), ValidationError);
  EXPECT_THROW(chain(4, 0, 1.5, 0).validate(), ValidationError);
  EXPECT_THROW(chain(4, 0, 0, -0.1).validate(), ValidationError);
  EXPECT_THROW(chain(4, 0, 0, 0, 0, 0.0).validate(), ValidationError);
  auto p = chain(4, 0, 0, 0);
  p.hopping = 0.0;
  EXPECT_THROW(p.validate(), ValidationError);
  EXPECT_NO_THROW(chain(4, 1, -1, 0).validate());
}

TEST(Hamiltonian, TwoSiteExamples) {
  auto p = chain(2, 0, 0, 0);
  const DenseMatrix h = dense(build_hamiltonian(p));
  EXPECT_EQ(h(0b01, 0b10), Complex(0.5));
  EXPECT_EQ(h(0b10, 0b01), Complex(0.5));
  EXPECT_NEAR(h.diagonal().cwiseAbs().maxCoeff(), 0.0, 1e-15);

  p.hopping = 1e-300;  // effectively no hopping while staying valid
  p.interaction = 2.0;
  const DenseMatrix d = dense(build_hamiltonian(p));
  EXPECT_NEAR(d(0b00, 0b00).real(), 0.5, 1e-15);
  EXPECT_NEAR(d(0b11, 0b11).real(), 0.5, 1e-15);
  EXPECT_NEAR(d(0b01, 0b01).real(), -0.5, 1e-15);
  EXPECT_NEAR(d(0b10, 0b10).real(), -0.5, 1e-15);
}

TEST(Hamiltonian, MatchesKroneckerOracle) {
  for (int n : {2, 3, 5}) {
    const auto p = chain(n, 1.7, 0, 0, 0.3);
    const DenseMatrix h = dense(build_hamiltonian(p));
    EXPECT_LT((h - oracle::hamiltonian(n, 1.0, 1.7, 0.3)).cwiseAbs().maxCoeff(), 1e-13) << "N=" << n;
    EXPECT_LT((h - h.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    const DenseMatrix nt = dense(total_number_operator(n));
    EXPECT_LT((h * nt - nt * h).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(build_hamiltonian(chain(15, 0, 0, 0)), SolverError);
}

TEST(Operators, NumberKineticCurrent) {
  const int n = 4;
  for (int j = 1; j <= n; ++j) {
    EXPECT_LT((dense(number_operator(j, n)) - oracle::num(j, n)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(dense(number_operator(j, n)).trace().real() / 16.0, 0.5, 1e-15);
  }
  for (int j = 1; j < n; ++j) {
    const DenseMatrix jj = dense(current_operator(j, n));
    EXPECT_LT((jj - oracle::current(j, n)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((jj - jj.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
  }
  const DenseMatrix j2 = dense(current_operator(1, 2));
  EXPECT_EQ(j2(0b01, 0b10), Complex(0.0, 2.0));
  EXPECT_EQ(j2(0b10, 0b01), Complex(0.0, -2.0));
  EXPECT_NEAR(dense(kinetic_operator(n)).col(0).norm(), 0.0, 1e-15);
  EXPECT_THROW(current_operator(0, n), ValidationError);
  EXPECT_THROW(current_operator(n, n), ValidationError);
  EXPECT_THROW(number_operator(n + 1, n), ValidationError);
}

// Heisenberg continuity under the generator Hamiltonian:
// i[H_gen, n_j] = J_j - J_{j-1} (forward flow gives negative J).
TEST(Operators, CurrentObeysContinuity) {
  const int n = 5;
  const auto p = chain(n, 0.8, 0, 0);
  const DenseMatrix h = dense(generator_hamiltonian(p));
  for (int j = 2; j < n; ++j) {
    const DenseMatrix nj = dense(number_operator(j, n));
    const DenseMatrix lhs = kI * (h * nj - nj * h);
    const DenseMatrix rhs = dense(current_operator(j, n)) - dense(current_operator(j - 1, n));
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12) << "site " << j;
  }
}

TEST(JumpOperators, RatesAndCount) {
  auto ops = build_jump_operators(chain(4, 0, 0, 0));
  ASSERT_EQ(ops.size(), 4u);
  for (const auto& l : ops) EXPECT_NEAR(dense(l.op).cwiseAbs().maxCoeff(), std::sqrt(0.5), 1e-15);
  ops = build_jump_operators(chain(4, 0, 1, 0));
  EXPECT_NEAR(dense(ops[0].op).norm(), 0.0, 1e-15);
  EXPECT_NEAR(dense(ops[3].op).norm(), 0.0, 1e-15);
  EXPECT_GT(dense(ops[1].op).norm(), 0.0);
  EXPECT_GT(dense(ops[2].op).norm(), 0.0);
  ops = build_jump_operators(chain(3, 0, 0.3, 0.2, 0, 0.7));
  ASSERT_EQ(ops.size(), 7u);
  const auto ref = oracle::jumps(3, 0.7, 0.3, 0.2);
  for (std::size_t k = 0; k < ops.size(); ++k) EXPECT_LT((dense(ops[k].op) - ref[k]).cwiseAbs().maxCoeff(), 1e-15);
}

// Particle-hole conjugation with reflection keeps the forward drive: each
// boundary process maps onto the opposite boundary's process at the same f.
TEST(Symmetry, ParticleHoleReflectionPreservesDrive) {
  const int n = 4;
  const DenseMatrix u = dense(particle_hole_reflection(n));
  EXPECT_LT((u * u.adjoint() - DenseMatrix::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-15);
  const auto ops = build_jump_operators(chain(n, 1.3, 0.4, 0.1));
  for (const auto& l : ops) {
    const DenseMatrix m = u * dense(l.op) * u.adjoint();
    bool found = false;
    for (const auto& k : ops) {
      const DenseMatrix other = dense(k.op);
      if (std::abs(std::abs(m.cwiseProduct(other.conjugate()).sum()) - m.squaredNorm()) < 1e-12 &&
          std::abs(m.squaredNorm() - other.squaredNorm()) < 1e-12)
        found = true;
    }
    EXPECT_TRUE(found) << l.label;
  }
  const DenseMatrix h = dense(build_hamiltonian(chain(n, 1.3, 0, 0)));
  EXPECT_LT((u * h * u.adjoint() - h).cwiseAbs().maxCoeff(), 1e-12);
  for (int j = 1; j < n; ++j) {
    const DenseMatrix mapped = u * dense(current_operator(j, n)) * u.adjoint();
    EXPECT_LT((mapped - dense(current_operator(n - j, n))).cwiseAbs().maxCoeff(), 1e-14) << j;
  }
}

TEST(Generator, FullSpaceMatchesDenseLindblad) {
  const int n = 3;
  const auto p = chain(n, 1.1, 0.35, 0.2, 0.15, 0.8);
  const auto gen = chain_generator_full(p);
  ASSERT_EQ(gen.size(), 64);
  const DenseMatrix rho = random_state(8, 3);
  const auto ref = oracle::lindblad(kExchangeScale * oracle::hamiltonian(n, 1.0, 1.1, 0.15), oracle::jumps(n, 0.8, 0.35, 0.2), rho);
  EXPECT_LT((gen.apply(rho) - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Generator, NumberConservingSubspace) {
  const int n = 4;
  const auto p = chain(n, 0.7, 0.5, 0.1);
  const auto sub = chain_generator(p);
  const auto full = chain_generator_full(p);
  EXPECT_EQ(sub.size(), 70);
  EXPECT_EQ(sub.space.size(), static_cast<std::int64_t>(binomial(2 * n, n)));
  for (std::int64_t k = 0; k < sub.size(); ++k) {
    auto [a, b] = sub.space.unit(k);
    EXPECT_EQ(sub.space.index(a, b), k);
    EXPECT_EQ(std::popcount(static_cast<unsigned>(a)), std::popcount(static_cast<unsigned>(b)));
  }
  // Block-diagonal states stay block-diagonal; both representations agree.
  DenseMatrix rho = random_state(16, 5);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      if (std::popcount(unsigned(i)) != std::popcount(unsigned(j))) rho(i, j) = 0.0;
  EXPECT_LT((sub.apply(rho) - full.apply(rho)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Generator, TracePreserving) {
  for (const auto& p : {chain(3, 0.5, 0.2, 0.0), chain(4, 2.0, -0.7, 0.3, 0.4)}) {
    for (const auto& gen : {chain_generator(p), chain_generator_full(p)}) {
      const DenseVector tr = gen.space.trace_functional();
      const DenseVector col_sums = (tr.transpose() * DenseMatrix(gen.matrix)).transpose();
      EXPECT_LT(col_sums.cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Generator, CapacityGuard) {
  EXPECT_THROW(chain_generator(chain(11, 0, 0, 0)), CapacityError);
  EXPECT_THROW(vectorize(identity_operator(3), {}, 4), CapacityError);
}
