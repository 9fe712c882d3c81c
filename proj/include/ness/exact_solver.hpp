#pragma once

// Exact (dense-state) stationary solver for the driven chain: time
// integration of the vectorized generator, direct and Krylov null-space
// solves, the observable record, and number-sector spectra.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/SparseLU>

#include "ness/core.hpp"
#include "ness/liouvillian.hpp"
#include "ness/model.hpp"

namespace ness {

inline constexpr int kDefaultNullspaceCap = 8;

class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(DenseMatrix m) : m_(std::move(m)) {}

  static DensityMatrix maximally_mixed(int n_sites) {
    const auto d = basis::dimension(n_sites);
    return DensityMatrix(DenseMatrix::Identity(d, d) / static_cast<double>(d));
  }

  static DensityMatrix product(const std::vector<int>& occupations) {
    const auto d = basis::dimension(static_cast<int>(occupations.size()));
    DenseMatrix m = DenseMatrix::Zero(d, d);
    const auto s = static_cast<Eigen::Index>(basis::from_occupations(occupations));
    m(s, s) = 1.0;
    return DensityMatrix(std::move(m));
  }

  // Random full-rank state: G G^+ / tr for a complex Gaussian G.
  static DensityMatrix random(int n_sites, std::uint64_t seed) {
    const auto d = basis::dimension(n_sites);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    DenseMatrix a(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = 0; i < d; ++i) a(i, j) = Complex(g(rng), g(rng));
    DenseMatrix m = a * a.adjoint();
    m /= m.trace();
    return DensityMatrix(std::move(m));
  }

  const DenseMatrix& matrix() const { return m_; }
  Eigen::Index dimension() const { return m_.rows(); }
  int n_sites() const { return std::countr_zero(static_cast<std::uint64_t>(m_.rows())); }

  Complex trace() const { return m_.trace(); }
  double hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
  double purity() const { return m_.cwiseAbs2().sum(); }

  struct Check {
    double trace_error;
    double hermiticity_error;
    double min_eigenvalue;
    bool ok;
  };

  Check check(double herm_tol = 1e-10, double trace_tol = 1e-10, double pos_tol = 1e-8) const {
    Check c{std::abs(trace() - 1.0), hermiticity_error(), min_eigenvalue(), false};
    c.ok = c.trace_error <= trace_tol && c.hermiticity_error <= herm_tol && c.min_eigenvalue >= -pos_tol;
    return c;
  }

 private:
  DenseMatrix m_;
};

inline double trace_distance(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix d = a - b;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return trace_distance(a.matrix(), b.matrix());
}

struct ObservableRecord {
  double current = 0.0;
  std::vector<double> current_profile;  // bonds 1..N-1
  std::vector<double> density_profile;  // sites 1..N
  Eigen::MatrixXd correlations;         // C_ij, 0-based
  double entropy = 0.0;
  double purity = 0.0;
  std::vector<double> sector_probs;  // n = 0..N
  double dissipation = 0.0;          // dE_gamma/dt in units of H

  double homogeneity() const {
    double h = 0.0;
    for (double j : current_profile) h = std::max(h, std::abs(j - current));
    return h;
  }
};

// Entropy of the normalized squared Schmidt spectrum, base 2.
inline double schmidt_entropy(const RealVector& singular_values) {
  const double norm = singular_values.squaredNorm();
  if (norm <= 0.0) return 0.0;
  double s = 0.0;
  for (Eigen::Index k = 0; k < singular_values.size(); ++k) {
    const double p = singular_values[k] * singular_values[k] / norm;
    if (p > 1e-300) s -= p * std::log2(p);
  }
  return std::max(0.0, s);
}

// Singular values of rho reshaped as (left-half operator) x (right-half
// operator); matrix units are Hilbert-Schmidt orthonormal so these are the
// operator Schmidt coefficients.
inline RealVector operator_schmidt_values(const DenseMatrix& rho, int n_sites, int left_sites) {
  const int right_sites = n_sites - left_sites;
  const std::int64_t dl = basis::dimension(left_sites);
  const std::int64_t dr = basis::dimension(right_sites);
  DenseMatrix r(dl * dl, dr * dr);
  for (std::int64_t b = 0; b < rho.cols(); ++b)
    for (std::int64_t a = 0; a < rho.rows(); ++a) {
      const std::int64_t al = a >> right_sites, ar = a & (dr - 1);
      const std::int64_t bl = b >> right_sites, br = b & (dr - 1);
      r(al + dl * bl, ar + dr * br) = rho(a, b);
    }
  Eigen::BDCSVD<DenseMatrix> svd(r);
  return svd.singularValues();
}

namespace detail {

inline double expectation(const SparseMatrix& op, const DenseMatrix& rho) {
  Complex acc = 0.0;
  for (Eigen::Index c = 0; c < op.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(op, c); it; ++it) acc += it.value() * rho(c, it.row());
  return acc.real();
}

}  // namespace detail

inline ObservableRecord measure(const DensityMatrix& state, const ChainParameters& p) {
  p.validate();
  const int n = p.n_sites;
  const DenseMatrix& rho = state.matrix();
  if (rho.rows() != basis::dimension(n)) throw ValidationError("state dimension does not match n_sites");

  ObservableRecord rec;
  for (int j = 1; j < n; ++j) rec.current_profile.push_back(detail::expectation(current_operator(j, n), rho));
  rec.current = std::accumulate(rec.current_profile.begin(), rec.current_profile.end(), 0.0) /
                static_cast<double>(rec.current_profile.size());

  const auto d = rho.rows();
  std::vector<double> diag(static_cast<std::size_t>(d));
  for (Eigen::Index s = 0; s < d; ++s) diag[static_cast<std::size_t>(s)] = rho(s, s).real();

  rec.density_profile.assign(static_cast<std::size_t>(n), 0.0);
  rec.sector_probs.assign(static_cast<std::size_t>(n) + 1, 0.0);
  Eigen::MatrixXd nn = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index s = 0; s < d; ++s) {
    const double w = diag[static_cast<std::size_t>(s)];
    const auto st = static_cast<basis::State>(s);
    rec.sector_probs[static_cast<std::size_t>(basis::particle_number(st))] += w;
    for (int i = 1; i <= n; ++i) {
      if (!basis::occupation(st, i, n)) continue;
      rec.density_profile[static_cast<std::size_t>(i - 1)] += w;
      for (int j = 1; j <= n; ++j)
        if (basis::occupation(st, j, n)) nn(i - 1, j - 1) += w;
    }
  }
  rec.correlations.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      rec.correlations(i, j) = nn(i, j) - rec.density_profile[static_cast<std::size_t>(i)] *
                                              rec.density_profile[static_cast<std::size_t>(j)];

  rec.entropy = schmidt_entropy(operator_schmidt_values(rho, n, n / 2));
  rec.purity = state.purity();

  double kinetic = 0.0;
  for (int j = 1; j < n; ++j) kinetic += detail::expectation(bond_kinetic_operator(j, n), rho);
  rec.dissipation = -2.0 * p.dephasing * p.hopping * kinetic;
  return rec;
}

struct ConvergenceReport {
  bool converged = false;
  double time = 0.0;
  long steps = 0;
  double residual = std::numeric_limits<double>::infinity();
  double homogeneity = std::numeric_limits<double>::infinity();
  // Worst violations seen at state checks (only when checks are enabled).
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
  int iterations = 0;  // Krylov iterations for null-space solves
  std::string message;
};

// Packed-vector access to the observables needed while integrating.
class PackedProbe {
 public:
  PackedProbe(const OperatorSpace& space, int n_sites) : space_(&space) {
    for (int j = 1; j < n_sites; ++j) bonds_.push_back(terms_of(current_operator(j, n_sites)));
  }

  std::vector<double> currents(const DenseVector& v) const {
    std::vector<double> out;
    out.reserve(bonds_.size());
    for (const auto& b : bonds_) {
      Complex acc = 0.0;
      for (auto [k, c] : b) acc += c * v[k];
      out.push_back(acc.real());
    }
    return out;
  }

  static double homogeneity(const std::vector<double>& j) {
    const double mean = std::accumulate(j.begin(), j.end(), 0.0) / static_cast<double>(j.size());
    double h = 0.0;
    for (double x : j) h = std::max(h, std::abs(x - mean));
    return h;
  }

 private:
  // tr(O rho) = sum_{a,b} O(b, a) rho(a, b)
  std::vector<std::pair<std::int64_t, Complex>> terms_of(const SparseMatrix& op) const {
    std::vector<std::pair<std::int64_t, Complex>> out;
    for (Eigen::Index a = 0; a < op.outerSize(); ++a)
      for (SparseMatrix::InnerIterator it(op, a); it; ++it) {
        const auto k = space_->index(a, it.row());
        if (k >= 0) out.emplace_back(k, it.value());
      }
    return out;
  }

  const OperatorSpace* space_;
  std::vector<std::vector<std::pair<std::int64_t, Complex>>> bonds_;
};

namespace detail {

// Per-sector trace, Hermiticity and positivity of a packed number-conserving
// state (block diagonal by construction).
inline void check_packed_state(const OperatorSpace& space, const DenseVector& v, ConvergenceReport& rep) {
  const Complex tr = space.trace_functional().transpose() * v;
  rep.max_trace_error = std::max(rep.max_trace_error, std::abs(tr - 1.0));
  if (space.is_full()) {
    DensityMatrix rho(space.unpack(v));
    rep.max_hermiticity_error = std::max(rep.max_hermiticity_error, rho.hermiticity_error());
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, rho.min_eigenvalue());
    return;
  }
  const int n_sites = space.n_sites();
  for (int n = 0; n <= n_sites; ++n) {
    const auto off = space.sector_offset(n);
    const auto dn = static_cast<Eigen::Index>(std::llround(binomial(n_sites, n)));
    Eigen::Map<const DenseMatrix> block(v.data() + off, dn, dn);
    rep.max_hermiticity_error =
        std::max(rep.max_hermiticity_error, (block - block.adjoint()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(0.5 * (block + block.adjoint()), Eigen::EigenvaluesOnly);
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, es.eigenvalues().minCoeff());
  }
}

}  // namespace detail

struct EvolveOptions {
  double step = 0.0;         // 0 selects step_factor / (|H|_inf + Gamma + N gamma)
  double step_factor = 0.05;
  double tol = 1e-10;
  double max_time = 1e5;
  long check_interval = 50;  // steps between convergence checks
  bool adaptive = false;     // Dormand-Prince 5(4) with local error control
  double adaptive_tol = 1e-12;
  bool check_states = false;  // trace / Hermiticity / positivity at every check
};

inline double default_step(const ChainParameters& p, double factor) {
  const SparseMatrix h = generator_hamiltonian(p);
  double norm = 0.0;
  for (Eigen::Index c = 0; c < h.outerSize(); ++c) {
    double col = 0.0;
    for (SparseMatrix::InnerIterator it(h, c); it; ++it) col += std::abs(it.value());
    norm = std::max(norm, col);
  }
  return factor / (norm + p.coupling + p.n_sites * p.dephasing);
}

// Integrates d vec(rho)/dt = M vec(rho) from rho0 until both the generator
// residual |M vec rho|_inf and the bond-current spread fall below tol.
// Components of rho0 outside the generator's operator space (coherences
// between particle-number sectors) decay independently and are dropped.
inline std::pair<DensityMatrix, ConvergenceReport> evolve_to_ness(const SparseSuperoperator& gen,
                                                                  const DensityMatrix& rho0,
                                                                  const ChainParameters& p,
                                                                  EvolveOptions opts = {}) {
  p.validate();
  if (rho0.dimension() != gen.space.hilbert_dim()) throw ValidationError("initial state dimension mismatch");
  const double h = opts.step > 0.0 ? opts.step : default_step(p, opts.step_factor);
  const PackedProbe probe(gen.space, p.n_sites);
  const SparseMatrix& m = gen.matrix;

  DenseVector v = gen.space.pack(rho0.matrix());
  ConvergenceReport rep;
  if (opts.check_states) detail::check_packed_state(gen.space, v, rep);

  auto converged_at = [&](const DenseVector& mv) {
    rep.residual = mv.cwiseAbs().maxCoeff();
    rep.homogeneity = PackedProbe::homogeneity(probe.currents(v));
    if (opts.check_states) detail::check_packed_state(gen.space, v, rep);
    return rep.residual <= opts.tol && rep.homogeneity <= opts.tol;
  };

  if (!opts.adaptive) {
    DenseVector k1, k2, k3, k4;
    while (rep.time < opts.max_time) {
      k1 = m * v;
      if (rep.steps % opts.check_interval == 0 && converged_at(k1)) {
        rep.converged = true;
        break;
      }
      k2 = m * (v + 0.5 * h * k1);
      k3 = m * (v + 0.5 * h * k2);
      k4 = m * (v + h * k3);
      v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      rep.time += h;
      ++rep.steps;
    }
  } else {
    // Dormand-Prince 5(4), FSAL.
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    (void)c2, (void)c3, (void)c4, (void)c5;
    double step = h;
    DenseVector k1 = m * v, k2, k3, k4, k5, k6, k7, y;
    long checks = 0;
    while (rep.time < opts.max_time) {
      if (checks++ % opts.check_interval == 0 && converged_at(k1)) {
        rep.converged = true;
        break;
      }
      k2 = m * (v + step * a21 * k1);
      k3 = m * (v + step * (a31 * k1 + a32 * k2));
      k4 = m * (v + step * (a41 * k1 + a42 * k2 + a43 * k3));
      k5 = m * (v + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      k6 = m * (v + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      y = v + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = m * y;
      const double err =
          (step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)).cwiseAbs().maxCoeff();
      if (err <= opts.adaptive_tol || step < 1e-12) {
        v = std::move(y);
        k1 = std::move(k7);
        rep.time += step;
        ++rep.steps;
      }
      const double scale = err > 0.0 ? 0.9 * std::pow(opts.adaptive_tol / err, 0.2) : 5.0;
      step *= std::clamp(scale, 0.2, 5.0);
    }
  }
  if (!rep.converged) {
    const DenseVector mv = m * v;
    converged_at(mv);
    std::ostringstream os;
    os << "no stationary state within t=" << opts.max_time << " (residual " << rep.residual
       << ", current spread " << rep.homogeneity << ")";
    rep.message = os.str();
  }
  DenseMatrix rho = gen.space.unpack(v);
  return {DensityMatrix(std::move(rho)), rep};
}

enum class NullspaceMethod { kAuto, kDirect, kKrylov };

struct NullspaceOptions {
  NullspaceMethod method = NullspaceMethod::kAuto;
  std::int64_t direct_max_size = 1000;  // auto switches to Krylov above this
  double degeneracy_threshold = 1e-10;
  double residual_tol = 1e-10;  // on |M vec rho|_inf after trace normalization
  double krylov_rtol = 1e-13;
  int krylov_restart = 80;
  int krylov_max_iterations = 20000;
  bool krylov_uniqueness_check = true;  // second solve from a different start
};

namespace detail {

inline void check_degenerate_eigen(double smallest, double threshold) {
  if (smallest <= threshold) {
    std::ostringstream os;
    os << "stationary state is not unique: a second generator eigenvalue has modulus " << smallest;
    throw DegenerateKernelError(os.str());
  }
}

// Bordered system: the first diagonal row is replaced by the trace row.
inline SparseMatrix bordered(const SparseSuperoperator& gen, std::int64_t& pinned_row) {
  pinned_row = gen.space.index(0, 0);
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(gen.matrix.nonZeros() + gen.space.hilbert_dim()));
  for (Eigen::Index c = 0; c < gen.matrix.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(gen.matrix, c); it; ++it)
      if (it.row() != pinned_row) t.emplace_back(it.row(), it.col(), it.value());
  for (std::int64_t a = 0; a < gen.space.hilbert_dim(); ++a) t.emplace_back(pinned_row, gen.space.index(a, a), 1.0);
  SparseMatrix b(gen.size(), gen.size());
  b.setFromTriplets(t.begin(), t.end());
  b.makeCompressed();
  return b;
}

inline DenseVector solve_direct(const SparseSuperoperator& gen, const NullspaceOptions& opts) {
  std::int64_t pinned = 0;
  const SparseMatrix b64 = bordered(gen, pinned);
  const Eigen::SparseMatrix<Complex> b = b64;
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(b);
  if (lu.info() != Eigen::Success)
    throw DegenerateKernelError("bordered generator is singular: " + lu.lastErrorMessage());
  DenseVector rhs = DenseVector::Zero(gen.size());
  rhs[pinned] = 1.0;
  DenseVector x = lu.solve(rhs);
  if (!x.allFinite()) throw DegenerateKernelError("bordered generator is numerically singular");

  // Inverse iteration on the bordered matrix estimates its smallest
  // eigenvalue modulus, which is the second-smallest of the generator.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  DenseVector w(gen.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = Complex(g(rng), g(rng));
  w.normalize();
  double growth = 0.0;
  for (int it = 0; it < 4; ++it) {
    DenseVector z = lu.solve(w);
    growth = z.norm();
    if (!std::isfinite(growth)) throw DegenerateKernelError("bordered generator is numerically singular");
    w = z / growth;
  }
  check_degenerate_eigen(1.0 / growth, opts.degeneracy_threshold);
  return x;
}

// Inverse of S(X) = K X + X K^+ sector by sector, through the eigenbasis
// of each sector block of K.
class SylvesterPreconditioner {
 public:
  explicit SylvesterPreconditioner(const SparseSuperoperator& gen) : space_(&gen.space) {
    const int n_sites = gen.space.n_sites();
    const SparseMatrix& k = gen.effective_hamiltonian;
    for (int n = 0; n <= n_sites; ++n) {
      const auto states = basis::sector_states(n_sites, n);
      const auto dn = static_cast<Eigen::Index>(states.size());
      DenseMatrix kn = DenseMatrix::Zero(dn, dn);
      for (Eigen::Index j = 0; j < dn; ++j)
        for (SparseMatrix::InnerIterator it(k, static_cast<Eigen::Index>(states[static_cast<std::size_t>(j)])); it;
             ++it) {
          const auto pos = std::lower_bound(states.begin(), states.end(), static_cast<basis::State>(it.row()));
          if (pos != states.end() && *pos == static_cast<basis::State>(it.row()))
            kn(pos - states.begin(), j) = it.value();
        }
      Eigen::ComplexEigenSolver<DenseMatrix> es(kn);
      Block blk;
      blk.v = es.eigenvectors();
      blk.v_inv = blk.v.inverse();
      const auto& lam = es.eigenvalues();
      blk.denom.resize(dn, dn);
      for (Eigen::Index j = 0; j < dn; ++j)
        for (Eigen::Index i = 0; i < dn; ++i) blk.denom(i, j) = 1.0 / (lam[i] + std::conj(lam[j]));
      blocks_.push_back(std::move(blk));
    }
  }

  DenseVector apply(const DenseVector& x) const {
    DenseVector out(x.size());
    for (std::size_t n = 0; n < blocks_.size(); ++n) {
      const auto& blk = blocks_[n];
      const auto dn = blk.v.rows();
      const auto off = space_->sector_offset(static_cast<int>(n));
      Eigen::Map<const DenseMatrix> b(x.data() + off, dn, dn);
      Eigen::Map<DenseMatrix> y(out.data() + off, dn, dn);
      DenseMatrix c = blk.v_inv * b * blk.v_inv.adjoint();
      c = c.cwiseProduct(blk.denom);
      y = blk.v * c * blk.v.adjoint();
    }
    return out;
  }

 private:
  struct Block {
    DenseMatrix v, v_inv, denom;
  };
  const OperatorSpace* space_;
  std::vector<Block> blocks_;
};

// Right-preconditioned restarted GMRES for M y = b.
inline DenseVector gmres(const SparseMatrix& a, const SylvesterPreconditioner& pre, const DenseVector& b,
                         const NullspaceOptions& opts, int& iterations, double& rel_residual) {
  const auto n = b.size();
  const int m = opts.krylov_restart;
  const double bnorm = b.norm();
  DenseVector y = DenseVector::Zero(n);
  iterations = 0;
  rel_residual = 1.0;
  if (bnorm == 0.0) {
    rel_residual = 0.0;
    return y;
  }
  DenseMatrix v(n, m + 1), z(n, m);
  DenseMatrix h = DenseMatrix::Zero(m + 1, m);
  std::vector<Complex> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m));
  DenseVector g(m + 1);
  while (iterations < opts.krylov_max_iterations) {
    DenseVector r = b - a * y;
    const double beta = r.norm();
    rel_residual = beta / bnorm;
    if (rel_residual <= opts.krylov_rtol) break;
    v.col(0) = r / beta;
    g.setZero();
    g[0] = beta;
    h.setZero();
    int k = 0;
    for (; k < m && iterations < opts.krylov_max_iterations; ++k, ++iterations) {
      z.col(k) = pre.apply(v.col(k));
      DenseVector w = a * z.col(k);
      for (int i = 0; i <= k; ++i) {
        h(i, k) = v.col(i).dot(w);
        w -= h(i, k) * v.col(i);
      }
      for (int i = 0; i <= k; ++i) {  // second Gram-Schmidt pass
        const Complex c = v.col(i).dot(w);
        h(i, k) += c;
        w -= c * v.col(i);
      }
      h(k + 1, k) = w.norm();
      if (std::abs(h(k + 1, k)) > 0.0) v.col(k + 1) = w / h(k + 1, k);
      for (int i = 0; i < k; ++i) {
        const Complex t = std::conj(cs[i]) * h(i, k) + std::conj(sn[i]) * h(i + 1, k);
        h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
        h(i, k) = t;
      }
      const double denom = std::hypot(std::abs(h(k, k)), std::abs(h(k + 1, k)));
      if (denom == 0.0) {
        cs[k] = 1.0;
        sn[k] = 0.0;
      } else {
        cs[k] = h(k, k) / denom;
        sn[k] = h(k + 1, k) / denom;
      }
      h(k, k) = std::conj(cs[k]) * h(k, k) + std::conj(sn[k]) * h(k + 1, k);
      h(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = std::conj(cs[k]) * g[k];
      rel_residual = std::abs(g[k + 1]) / bnorm;
      if (rel_residual <= opts.krylov_rtol) {
        ++k;
        ++iterations;
        break;
      }
    }
    DenseVector coef = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    y += z.leftCols(k) * coef;
    if (rel_residual <= opts.krylov_rtol) break;
  }
  rel_residual = (b - a * y).norm() / bnorm;
  return y;
}

inline DenseVector solve_krylov(const SparseSuperoperator& gen, const NullspaceOptions& opts, const DenseVector& x0,
                                ConvergenceReport& rep) {
  const SylvesterPreconditioner pre(gen);
  const DenseVector b = -(gen.matrix * x0);
  int iters = 0;
  double rel = 1.0;
  const DenseVector y = gmres(gen.matrix, pre, b, opts, iters, rel);
  rep.iterations += iters;
  return x0 + y;  // a kernel vector up to normalization
}

}  // namespace detail

inline DensityMatrix finalize_kernel_vector(const SparseSuperoperator& gen, const DenseVector& x) {
  DenseMatrix rho = gen.space.unpack(x);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const Complex tr = rho.trace();
  if (std::abs(tr) == 0.0) throw SolverError("kernel vector has zero trace");
  rho /= tr;
  return DensityMatrix(std::move(rho));
}

// Stationary state as the normalized kernel vector of the generator.
inline DensityMatrix ness_nullspace(const SparseSuperoperator& gen, const NullspaceOptions& opts = {},
                                    ConvergenceReport* report = nullptr) {
  ConvergenceReport rep;
  const bool krylov_possible = !gen.space.is_full();
  bool use_krylov = false;
  switch (opts.method) {
    case NullspaceMethod::kAuto: use_krylov = krylov_possible && gen.size() > opts.direct_max_size; break;
    case NullspaceMethod::kDirect: use_krylov = false; break;
    case NullspaceMethod::kKrylov:
      if (!krylov_possible) throw ValidationError("Krylov null-space solve needs a number-conserving space");
      use_krylov = true;
      break;
  }
  DenseVector x;
  if (use_krylov) {
    const auto d = gen.space.hilbert_dim();
    DenseVector x0 = gen.space.pack(DenseMatrix::Identity(d, d) / static_cast<double>(d));
    x = detail::solve_krylov(gen, opts, x0, rep);
    if (opts.krylov_uniqueness_check) {
      DenseMatrix alt = DenseMatrix::Zero(d, d);
      for (Eigen::Index s = 0; s < d; ++s) alt(s, s) = 1.0 + 0.5 * std::sin(1.0 + 3.0 * static_cast<double>(s));
      alt /= alt.trace();
      const DenseVector x1 = detail::solve_krylov(gen, opts, gen.space.pack(alt), rep);
      const double dist =
          trace_distance(finalize_kernel_vector(gen, x).matrix(), finalize_kernel_vector(gen, x1).matrix());
      if (dist > 1e-6) {
        std::ostringstream os;
        os << "stationary state is not unique: two starts differ by trace distance " << dist;
        throw DegenerateKernelError(os.str());
      }
    }
  } else {
    x = detail::solve_direct(gen, opts);
  }
  DensityMatrix rho = finalize_kernel_vector(gen, x);
  rep.residual = (gen.matrix * gen.space.pack(rho.matrix())).cwiseAbs().maxCoeff();
  rep.converged = rep.residual <= opts.residual_tol;
  if (!rep.converged) {
    std::ostringstream os;
    os << "null-space residual " << rep.residual << " above " << opts.residual_tol;
    rep.message = os.str();
  }
  if (report) *report = rep;
  if (!rep.converged && !report) throw ConvergenceError(rep.message);
  return rho;
}

struct ExactSolution {
  DensityMatrix state;
  ObservableRecord observables;
  ConvergenceReport report;
};

// Stationary state of the chain by the null-space route.
inline ExactSolution solve_exact(const ChainParameters& p, const NullspaceOptions& opts = {},
                                 int max_sites = kDefaultNullspaceCap) {
  const auto gen = chain_generator(p, max_sites);
  ConvergenceReport rep;
  DensityMatrix rho = ness_nullspace(gen, opts, &rep);
  ObservableRecord obs = measure(rho, p);
  rep.homogeneity = obs.homogeneity();
  return {std::move(rho), std::move(obs), rep};
}

// ---------------------------------------------------------------------------
// Number-sector spectra and bound domain states.

struct SectorSpectrum {
  int n_sites = 0;
  int particles = 0;
  std::vector<basis::State> states;
  RealVector energies;  // ascending
  DenseMatrix vectors;  // columns, in the `states` ordering
};

inline constexpr Eigen::Index kDefaultSectorCap = 5000;

inline SectorSpectrum sector_spectrum(const SparseMatrix& h, int n_sites, int particles,
                                      Eigen::Index max_dim = kDefaultSectorCap) {
  if (particles < 0 || particles > n_sites) throw ValidationError("particle number outside 0..N");
  if (h.rows() != basis::dimension(n_sites)) throw ValidationError("Hamiltonian dimension does not match n_sites");
  SectorSpectrum out;
  out.n_sites = n_sites;
  out.particles = particles;
  out.states = basis::sector_states(n_sites, particles);
  const auto dn = static_cast<Eigen::Index>(out.states.size());
  if (dn > max_dim) {
    std::ostringstream os;
    os << "sector dimension " << dn << " exceeds the dense eigensolver cap " << max_dim;
    throw CapacityError(os.str());
  }
  DenseMatrix block = DenseMatrix::Zero(dn, dn);
  for (Eigen::Index j = 0; j < dn; ++j)
    for (SparseMatrix::InnerIterator it(h, static_cast<Eigen::Index>(out.states[static_cast<std::size_t>(j)])); it;
         ++it) {
      const auto pos = std::lower_bound(out.states.begin(), out.states.end(), static_cast<basis::State>(it.row()));
      if (pos == out.states.end() || *pos != static_cast<basis::State>(it.row()))
        throw ValidationError("Hamiltonian does not conserve particle number");
      block(pos - out.states.begin(), j) = it.value();
    }
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(block);
  out.energies = es.eigenvalues();
  out.vectors = es.eigenvectors();
  return out;
}

// Energy offset 1/4 Delta (N - 1) that places the empty chain at zero.
inline double spectrum_shift(const ChainParameters& p) { return 0.25 * p.interaction * (p.n_sites - 1); }

struct BoundDomainState {
  Eigen::Index index = 0;  // eigenvector column
  double energy = 0.0;
  double overlap = 0.0;  // |<B_n|Psi>|^2
  bool extremal = false;  // highest (Delta > 0) or lowest (Delta < 0) in the sector
  double gap = 0.0;       // separation from the nearest other eigenvalue
  std::vector<double> deviation;  // |<n_j> - <B_n|n_j|B_n>|, sites 1..N
};

// Psi_D(n): the sector eigenstate with the largest weight on the domain
// configuration |B_n> = |1..10..0>. The mirrored domain |0..01..1> is
// degenerate with it to numerical precision, so the eigensolver may return
// any mixture of the pair; |B_n> is therefore projected onto the whole
// (numerically) degenerate eigenspace of the best-overlap column.
inline BoundDomainState bound_domain_state(const SectorSpectrum& spec, double cluster_tol = 1e-9) {
  const auto domain = basis::domain_state(spec.particles, spec.n_sites);
  const auto pos = std::find(spec.states.begin(), spec.states.end(), domain);
  const auto row = pos - spec.states.begin();
  BoundDomainState out;
  const auto dn = spec.energies.size();
  double best = -1.0;
  for (Eigen::Index c = 0; c < dn; ++c) {
    const double w = std::norm(spec.vectors(row, c));
    if (w > best) {
      best = w;
      out.index = c;
    }
  }
  out.energy = spec.energies[out.index];
  const double scale = std::max(1.0, spec.energies.cwiseAbs().maxCoeff());
  DenseVector psi = DenseVector::Zero(dn);
  Eigen::Index lo = out.index, hi = out.index;
  out.gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < dn; ++c) {
    const double de = std::abs(spec.energies[c] - out.energy);
    if (de <= cluster_tol * scale) {
      psi += spec.vectors.col(c) * std::conj(spec.vectors(row, c));
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    } else {
      out.gap = std::min(out.gap, de);
    }
  }
  out.overlap = psi.squaredNorm();
  psi /= std::sqrt(out.overlap);
  out.extremal = lo == 0 || hi == dn - 1;
  out.deviation.assign(static_cast<std::size_t>(spec.n_sites), 0.0);
  for (int j = 1; j <= spec.n_sites; ++j) {
    double nj = 0.0;
    for (Eigen::Index r = 0; r < dn; ++r)
      if (basis::occupation(spec.states[static_cast<std::size_t>(r)], j, spec.n_sites)) nj += std::norm(psi[r]);
    out.deviation[static_cast<std::size_t>(j - 1)] = std::abs(nj - basis::occupation(domain, j, spec.n_sites));
  }
  return out;
}

}  // namespace ness
