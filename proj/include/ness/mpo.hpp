#pragma once

// Matrix-product-operator representation of rho and its Trotterized
// evolution under the chain generator.
//
// Site tensors carry one operator index p = ket + 2 * bra per site, i.e. the
// local matrix units E_{ket,bra}. These are Hilbert-Schmidt orthonormal, so
// bond singular values are the operator Schmidt coefficients of rho.
//
// Storage: site j is a (Dl * 4) x Dr matrix with row index l + Dl * p. The
// same memory read as Dl x (4 * Dr) has column index p + 4 * r, which is what
// makes the two-site merge and split below plain matrix products.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "ness/core.hpp"
#include "ness/exact_solver.hpp"
#include "ness/liouvillian.hpp"
#include "ness/model.hpp"

namespace ness {

struct TruncationPolicy {
  int chi_max = 128;
  double svd_cutoff = 1e-10;  // discarded share of sum s^2 per bond
  bool renormalize_trace = false;

  void validate() const {
    if (chi_max < 1) throw ValidationError("chi_max must be >= 1");
    if (!(svd_cutoff >= 0.0 && svd_cutoff < 1.0)) throw ValidationError("svd_cutoff must lie in [0, 1)");
  }
};

struct MpoState {
  std::vector<DenseMatrix> sites;
  int center = -1;  // 0-based orthogonality center, -1 if not canonical
  double time = 0.0;
  double truncation_weight = 0.0;  // accumulated discarded weight
  RealVector center_spectrum;      // Schmidt values at the central bond, descending

  int n_sites() const { return static_cast<int>(sites.size()); }
  Eigen::Index left_dim(int j) const { return sites[static_cast<std::size_t>(j)].rows() / 4; }
  Eigen::Index right_dim(int j) const { return sites[static_cast<std::size_t>(j)].cols(); }

  std::vector<int> bond_dims() const {
    std::vector<int> out;
    for (int j = 0; j + 1 < n_sites(); ++j) out.push_back(static_cast<int>(right_dim(j)));
    return out;
  }
  int max_bond() const {
    const auto d = bond_dims();
    return d.empty() ? 1 : *std::max_element(d.begin(), d.end());
  }
};

namespace mpo_detail {

inline constexpr std::array<int, 4> kKet{0, 1, 0, 1};
inline constexpr std::array<int, 4> kBra{0, 0, 1, 1};

// Weights w_p with tr(O E_p) = sum_p w_p for a single-site operator O.
inline std::array<Complex, 4> weights(const DenseMatrix& o) {
  std::array<Complex, 4> w{};
  for (int p = 0; p < 4; ++p) w[static_cast<std::size_t>(p)] = o(kBra[p], kKet[p]);
  return w;
}

inline const std::array<Complex, 4> kTraceWeights{1.0, 0.0, 0.0, 1.0};
inline const std::array<Complex, 4> kNumberWeights{0.0, 0.0, 0.0, 1.0};

inline DenseMatrix product_site(const std::array<Complex, 4>& v) {
  DenseMatrix a(4, 1);
  for (int p = 0; p < 4; ++p) a(p, 0) = v[static_cast<std::size_t>(p)];
  return a;
}

// Sum_p w_p A[p] as a Dl x Dr matrix.
inline DenseMatrix transfer(const DenseMatrix& a, const std::array<Complex, 4>& w) {
  const auto dl = a.rows() / 4;
  DenseMatrix t = DenseMatrix::Zero(dl, a.cols());
  for (int p = 0; p < 4; ++p)
    if (w[static_cast<std::size_t>(p)] != 0.0) t += w[static_cast<std::size_t>(p)] * a.middleRows(p * dl, dl);
  return t;
}

// Dl x (4 Dr) view of a site tensor.
inline Eigen::Map<const DenseMatrix> wide(const DenseMatrix& a) {
  return {a.data(), a.rows() / 4, 4 * a.cols()};
}

inline DenseMatrix tall_from_wide(const DenseMatrix& w) {
  DenseMatrix a(w.rows() * 4, w.cols() / 4);
  Eigen::Map<DenseMatrix>(a.data(), w.rows(), w.cols()) = w;
  return a;
}

}  // namespace mpo_detail

inline MpoState mpo_from_local(const std::vector<std::array<Complex, 4>>& local) {
  if (local.size() < 2) throw ValidationError("an MPO needs at least two sites");
  MpoState s;
  for (const auto& v : local) s.sites.push_back(mpo_detail::product_site(v));
  s.center = 0;  // bond dimension 1: every site is trivially an isometry up to scale
  return s;
}

inline MpoState mpo_identity(int n_sites) {
  if (n_sites < 2) throw ValidationError("n_sites must be >= 2");
  return mpo_from_local(std::vector<std::array<Complex, 4>>(static_cast<std::size_t>(n_sites), {0.5, 0.0, 0.0, 0.5}));
}

inline MpoState mpo_from_product(const std::vector<int>& occupations) {
  std::vector<std::array<Complex, 4>> local;
  for (int o : occupations) {
    if (o != 0 && o != 1) throw ValidationError("occupations must be 0 or 1");
    local.push_back(o ? std::array<Complex, 4>{0.0, 0.0, 0.0, 1.0} : std::array<Complex, 4>{1.0, 0.0, 0.0, 0.0});
  }
  return mpo_from_local(local);
}

// Product of diagonal single-site states with the given <n_j>.
inline MpoState mpo_from_densities(const std::vector<double>& densities) {
  std::vector<std::array<Complex, 4>> local;
  for (double n : densities) {
    if (!(n >= 0.0 && n <= 1.0)) throw ValidationError("densities must lie in [0, 1]");
    local.push_back({1.0 - n, 0.0, 0.0, n});
  }
  return mpo_from_local(local);
}

// Moves the orthogonality center to site c by QR sweeps from both ends.
inline void canonicalize(MpoState& s, int c) {
  const int n = s.n_sites();
  if (c < 0 || c >= n) throw ValidationError("canonical center out of range");
  for (int j = 0; j < c; ++j) {
    auto& a = s.sites[static_cast<std::size_t>(j)];
    Eigen::HouseholderQR<DenseMatrix> qr(a);
    const auto k = std::min(a.rows(), a.cols());
    DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(a.rows(), k);
    DenseMatrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    a = std::move(q);
    auto& next = s.sites[static_cast<std::size_t>(j + 1)];
    next = mpo_detail::tall_from_wide(r * mpo_detail::wide(next));
  }
  for (int j = n - 1; j > c; --j) {
    auto& a = s.sites[static_cast<std::size_t>(j)];
    const DenseMatrix w = mpo_detail::wide(a);
    Eigen::HouseholderQR<DenseMatrix> qr(w.adjoint());
    const auto k = std::min(w.rows(), w.cols());
    DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(w.cols(), k);
    DenseMatrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    a = mpo_detail::tall_from_wide(q.adjoint());
    auto& prev = s.sites[static_cast<std::size_t>(j - 1)];
    prev = prev * r.adjoint();
  }
  s.center = c;
}

inline RealVector schmidt_values_at(MpoState s, int bond) {
  if (bond < 0 || bond + 1 >= s.n_sites()) throw ValidationError("bond index out of range");
  canonicalize(s, bond);
  Eigen::BDCSVD<DenseMatrix> svd(s.sites[static_cast<std::size_t>(bond)]);
  return svd.singularValues();
}

// ---------------------------------------------------------------------------
// Two-site gates.

namespace mpo_detail {

// Two-site operator index q = pL + 4 pR from the two-site Hilbert-space vec
// index a + 4 b, where a = 2 ketL + ketR and b = 2 braL + braR.
inline int q_of_vec(int vec) {
  const int a = vec % 4, b = vec / 4;
  const int pl = (a >> 1) + 2 * (b >> 1);
  const int pr = (a & 1) + 2 * (b & 1);
  return pl + 4 * pr;
}

// Share of site j's single-site generator carried by bond b (0-based).
inline double site_share(int site, int bond, int n_sites) {
  if (site != bond && site != bond + 1) return 0.0;
  if (site == 0 || site == n_sites - 1) return 1.0;
  return 0.5;
}

}  // namespace mpo_detail

// Local generator of bond b (0-based, sites b and b+1) in the q index:
// exchange-scaled hopping and interaction, plus the shares of staggered
// potential, boundary jumps and dephasing of both sites.
inline DenseMatrix bond_generator(const ChainParameters& p, int bond) {
  p.validate();
  const int n = p.n_sites;
  if (bond < 0 || bond + 1 >= n) throw ValidationError("bond index out of range");
  const double s = kExchangeScale;
  SparseMatrix h = SparseMatrix(s * 0.5 * p.hopping * bond_kinetic_operator(1, 2));
  const SparseMatrix id = identity_operator(2);
  h += s * p.interaction * SparseMatrix((number_operator(1, 2) - 0.5 * id) * (number_operator(2, 2) - 0.5 * id));
  std::vector<SparseMatrix> jumps;
  for (int local = 1; local <= 2; ++local) {
    const int site = bond + local - 1;  // 0-based chain site
    const double w = mpo_detail::site_share(site, bond, n);
    if (p.staggered != 0.0) {
      const double sign = ((site + 1) % 2 == 0) ? 1.0 : -1.0;
      h += (s * w * p.staggered * sign) * number_operator(local, 2);
    }
    if (site == 0) {
      jumps.push_back(std::sqrt(w * p.coupling * (1.0 - p.bias) / 2.0) * annihilation_operator(local, 2));
      jumps.push_back(std::sqrt(w * p.coupling * (1.0 + p.bias) / 2.0) * creation_operator(local, 2));
    }
    if (site == n - 1) {
      jumps.push_back(std::sqrt(w * p.coupling * (1.0 + p.bias) / 2.0) * annihilation_operator(local, 2));
      jumps.push_back(std::sqrt(w * p.coupling * (1.0 - p.bias) / 2.0) * creation_operator(local, 2));
    }
    if (p.dephasing > 0.0) jumps.push_back(std::sqrt(w * p.dephasing) * parity_operator(local, 2));
  }
  h.makeCompressed();
  const auto sup = assemble_superoperator(h, jumps, OperatorSpace::full(4));
  const DenseMatrix m = DenseMatrix(sup.matrix);
  DenseMatrix g(16, 16);
  for (int c = 0; c < 16; ++c)
    for (int r = 0; r < 16; ++r) g(mpo_detail::q_of_vec(r), mpo_detail::q_of_vec(c)) = m(r, c);
  return g;
}

struct SplitStats {
  double discarded = 0.0;  // relative discarded weight
  Eigen::Index kept = 0;
};

namespace mpo_detail {

inline constexpr double kSvdReconstructionTol = 1e-12;

// Applies gate g to sites (j, j+1) and splits with truncation. The center
// ends on j+1 when moving right, on j otherwise.
inline SplitStats apply_gate(MpoState& s, int j, const DenseMatrix& g, const TruncationPolicy& pol, bool move_right) {
  auto& a = s.sites[static_cast<std::size_t>(j)];
  auto& b = s.sites[static_cast<std::size_t>(j + 1)];
  const auto dl = a.rows() / 4;
  const auto dr = b.cols();
  DenseMatrix theta = a * wide(b);  // (dl*4) x (4*dr)
  {
    Eigen::Matrix<Complex, 16, Eigen::Dynamic> x(16, dl * dr);
    for (Eigen::Index r = 0; r < dr; ++r)
      for (int pr = 0; pr < 4; ++pr)
        for (int pl = 0; pl < 4; ++pl)
          for (Eigen::Index l = 0; l < dl; ++l) x(pl + 4 * pr, l + dl * r) = theta(l + dl * pl, pr + 4 * r);
    const Eigen::Matrix<Complex, 16, Eigen::Dynamic> y = g * x;
    for (Eigen::Index r = 0; r < dr; ++r)
      for (int pr = 0; pr < 4; ++pr)
        for (int pl = 0; pl < 4; ++pl)
          for (Eigen::Index l = 0; l < dl; ++l) theta(l + dl * pl, pr + 4 * r) = y(pl + 4 * pr, l + dl * r);
  }
  // Divide-and-conquer SVD is fast but in Eigen 3.4 occasionally returns an
  // inaccurate factorization; those cases are caught by the reconstruction
  // check and redone with one-sided Jacobi.
  DenseMatrix uu, vv;
  RealVector sv;
  {
    Eigen::BDCSVD<DenseMatrix> bdc(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double scale = theta.norm();
    const double err =
        (bdc.matrixU() * bdc.singularValues().cast<Complex>().asDiagonal() * bdc.matrixV().adjoint() - theta).norm();
    if (bdc.info() == Eigen::Success && err <= kSvdReconstructionTol * scale) {
      uu = bdc.matrixU();
      vv = bdc.matrixV();
      sv = bdc.singularValues();
    } else {
      Eigen::JacobiSVD<DenseMatrix> jac(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
      uu = jac.matrixU();
      vv = jac.matrixV();
      sv = jac.singularValues();
    }
  }
  const double total = sv.squaredNorm();
  Eigen::Index keep = std::min<Eigen::Index>(sv.size(), pol.chi_max);
  double tail = 0.0;
  for (Eigen::Index k = keep; k < sv.size(); ++k) tail += sv[k] * sv[k];
  while (keep > 1 && total > 0.0 && (tail + sv[keep - 1] * sv[keep - 1]) <= pol.svd_cutoff * total) {
    tail += sv[keep - 1] * sv[keep - 1];
    --keep;
  }
  SplitStats st{total > 0.0 ? tail / total : 0.0, keep};
  const auto u = uu.leftCols(keep);
  const auto v = vv.leftCols(keep);
  const auto sk = sv.head(keep).cast<Complex>().asDiagonal();
  if (move_right) {
    a = u;
    b = tall_from_wide(sk * v.adjoint());
    s.center = j + 1;
  } else {
    a = u * sk;
    b = tall_from_wide(v.adjoint());
    s.center = j;
  }
  if (j + 1 == s.n_sites() / 2) s.center_spectrum = sv.head(keep);
  s.truncation_weight += st.discarded;
  return st;
}

}  // namespace mpo_detail

inline Complex mpo_trace(const MpoState& s) {
  DenseMatrix env = DenseMatrix::Identity(1, 1);
  for (const auto& a : s.sites) env = env * mpo_detail::transfer(a, mpo_detail::kTraceWeights);
  return env(0, 0);
}

inline void renormalize_trace(MpoState& s) {
  const Complex tr = mpo_trace(s);
  if (std::abs(tr) == 0.0) throw SolverError("MPO trace vanished");
  const int c = s.center >= 0 ? s.center : 0;
  s.sites[static_cast<std::size_t>(c)] /= tr;
}

// Symmetric product-formula propagator: for step tau, bonds 1..N-2 at tau/2
// left to right, bond N-1 at tau, then back at tau/2. With order 4 three such
// steps are composed with the Yoshida weights.
class TrotterPropagator {
 public:
  TrotterPropagator(const ChainParameters& p, double dt, int order = 2) : n_(p.n_sites), dt_(dt), order_(order) {
    p.validate();
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
    if (order != 2 && order != 4) throw ValidationError("Trotter order must be 2 or 4");
    for (int b = 0; b + 1 < n_; ++b) generators_.push_back(bond_generator(p, b));
    if (order == 2) {
      substeps_.push_back(make_substep(dt));
    } else {
      const double c = std::cbrt(2.0);
      const double w1 = 1.0 / (2.0 - c), w0 = -c / (2.0 - c);
      substeps_.push_back(make_substep(w1 * dt));
      substeps_.push_back(make_substep(w0 * dt));
      substeps_.push_back(substeps_.front());
    }
  }

  double dt() const { return dt_; }
  int order() const { return order_; }

  // Returns the largest relative discarded weight over the step.
  double step(MpoState& s, const TruncationPolicy& pol) const {
    if (s.n_sites() != n_) throw ValidationError("MPO length does not match the parameters");
    if (s.center != 0) canonicalize(s, 0);
    double worst = 0.0;
    for (const auto& sub : substeps_) {
      for (int b = 0; b + 2 < n_; ++b)
        worst = std::max(worst, mpo_detail::apply_gate(s, b, sub.half[static_cast<std::size_t>(b)], pol, true).discarded);
      worst = std::max(worst, mpo_detail::apply_gate(s, n_ - 2, sub.full_last, pol, false).discarded);
      for (int b = n_ - 3; b >= 0; --b)
        worst = std::max(worst, mpo_detail::apply_gate(s, b, sub.half[static_cast<std::size_t>(b)], pol, false).discarded);
    }
    s.time += dt_;
    if (pol.renormalize_trace) renormalize_trace(s);
    return worst;
  }

 private:
  struct Substep {
    std::vector<DenseMatrix> half;
    DenseMatrix full_last;
  };

  Substep make_substep(double tau) const {
    Substep sub;
    for (int b = 0; b + 2 < n_; ++b) sub.half.push_back((generators_[static_cast<std::size_t>(b)] * (0.5 * tau)).exp());
    sub.full_last = (generators_.back() * tau).exp();
    return sub;
  }

  int n_;
  double dt_;
  int order_;
  std::vector<DenseMatrix> generators_;
  std::vector<Substep> substeps_;
};

inline MpoState trotter_sweep(MpoState state, const ChainParameters& p, double dt, const TruncationPolicy& policy,
                              int order = 2) {
  policy.validate();
  TrotterPropagator(p, dt, order).step(state, policy);
  return state;
}

// ---------------------------------------------------------------------------
// Measurement.

namespace mpo_detail {

// Left environments: left[j] contracts sites < j with the trace weights.
inline std::vector<DenseMatrix> left_envs(const MpoState& s) {
  std::vector<DenseMatrix> out{DenseMatrix::Identity(1, 1)};
  for (const auto& a : s.sites) out.push_back(out.back() * transfer(a, kTraceWeights));
  return out;
}

// right[j] contracts sites >= j.
inline std::vector<DenseMatrix> right_envs(const MpoState& s) {
  const int n = s.n_sites();
  std::vector<DenseMatrix> out(static_cast<std::size_t>(n) + 1);
  out[static_cast<std::size_t>(n)] = DenseMatrix::Identity(1, 1);
  for (int j = n - 1; j >= 0; --j)
    out[static_cast<std::size_t>(j)] =
        transfer(s.sites[static_cast<std::size_t>(j)], kTraceWeights) * out[static_cast<std::size_t>(j + 1)];
  return out;
}

// tr(O rho) for a two-site operator O on sites (j, j+1), O given on the
// two-site Hilbert space with site j as the high bit.
inline Complex two_site_expectation(const MpoState& s, int j, const DenseMatrix& o, const std::vector<DenseMatrix>& left,
                                    const std::vector<DenseMatrix>& right) {
  const auto& a = s.sites[static_cast<std::size_t>(j)];
  const auto& b = s.sites[static_cast<std::size_t>(j + 1)];
  const auto dl = a.rows() / 4;
  const auto dm = b.rows() / 4;
  DenseMatrix acc = DenseMatrix::Zero(left[static_cast<std::size_t>(j)].rows(), b.cols());
  for (int pl = 0; pl < 4; ++pl) {
    DenseMatrix la = left[static_cast<std::size_t>(j)] * a.middleRows(pl * dl, dl);
    for (int pr = 0; pr < 4; ++pr) {
      const int ket = 2 * kKet[pl] + kKet[pr];
      const int bra = 2 * kBra[pl] + kBra[pr];
      const Complex w = o(bra, ket);
      if (w != 0.0) acc += w * (la * b.middleRows(pr * dm, dm));
    }
  }
  return (acc * right[static_cast<std::size_t>(j + 2)])(0, 0);
}

inline DenseMatrix two_site_current() {
  DenseMatrix j = DenseMatrix(current_operator(1, 2));
  return j;
}

}  // namespace mpo_detail

// Bond currents, normalized by the trace, for 0-based bonds.
inline std::vector<double> mpo_currents(const MpoState& s, const std::vector<int>& bonds) {
  const auto left = mpo_detail::left_envs(s);
  const auto right = mpo_detail::right_envs(s);
  const Complex tr = left.back()(0, 0);
  const DenseMatrix jop = mpo_detail::two_site_current();
  std::vector<double> out;
  for (int b : bonds) out.push_back((mpo_detail::two_site_expectation(s, b, jop, left, right) / tr).real());
  return out;
}

inline ObservableRecord measure_mpo(const MpoState& state, const ChainParameters& p) {
  p.validate();
  const int n = state.n_sites();
  if (n != p.n_sites) throw ValidationError("MPO length does not match n_sites");
  using namespace mpo_detail;
  const auto left = left_envs(state);
  const auto right = right_envs(state);
  const Complex tr = left.back()(0, 0);
  if (std::abs(tr) == 0.0) throw SolverError("MPO trace vanished");

  ObservableRecord rec;
  const DenseMatrix jop = two_site_current();
  const DenseMatrix kop = DenseMatrix(bond_kinetic_operator(1, 2));
  double kinetic = 0.0;
  for (int b = 0; b + 1 < n; ++b) {
    rec.current_profile.push_back((two_site_expectation(state, b, jop, left, right) / tr).real());
    kinetic += (two_site_expectation(state, b, kop, left, right) / tr).real();
  }
  rec.current = std::accumulate(rec.current_profile.begin(), rec.current_profile.end(), 0.0) /
                static_cast<double>(rec.current_profile.size());
  rec.dissipation = -2.0 * p.dephasing * p.hopping * kinetic;

  std::vector<DenseMatrix> tn;
  for (const auto& a : state.sites) tn.push_back(transfer(a, kNumberWeights));
  for (int j = 0; j < n; ++j)
    rec.density_profile.push_back(
        ((left[static_cast<std::size_t>(j)] * tn[static_cast<std::size_t>(j)] * right[static_cast<std::size_t>(j + 1)])(0, 0) / tr)
            .real());
  rec.correlations = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double ni = rec.density_profile[static_cast<std::size_t>(i)];
    rec.correlations(i, i) = ni - ni * ni;
    DenseMatrix env = left[static_cast<std::size_t>(i)] * tn[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < n; ++j) {
      const double nn = ((env * tn[static_cast<std::size_t>(j)] * right[static_cast<std::size_t>(j + 1)])(0, 0) / tr).real();
      rec.correlations(i, j) = rec.correlations(j, i) = nn - ni * rec.density_profile[static_cast<std::size_t>(j)];
      env = env * transfer(state.sites[static_cast<std::size_t>(j)], kTraceWeights);
    }
  }

  // Particle-number distribution by carrying one environment per count.
  std::vector<DenseMatrix> poly{DenseMatrix::Identity(1, 1)};
  for (const auto& a : state.sites) {
    const DenseMatrix t0 = transfer(a, {1.0, 0.0, 0.0, 0.0});
    const DenseMatrix t1 = transfer(a, {0.0, 0.0, 0.0, 1.0});
    std::vector<DenseMatrix> next(poly.size() + 1, DenseMatrix::Zero(1, a.cols()));
    for (std::size_t k = 0; k < poly.size(); ++k) {
      next[k] += poly[k] * t0;
      next[k + 1] += poly[k] * t1;
    }
    poly = std::move(next);
  }
  for (const auto& e : poly) rec.sector_probs.push_back((e(0, 0) / tr).real());

  MpoState c = state;
  canonicalize(c, n / 2 - 1);
  const auto& center = c.sites[static_cast<std::size_t>(n / 2 - 1)];
  const RealVector sv = Eigen::BDCSVD<DenseMatrix>(center).singularValues();
  rec.entropy = schmidt_entropy(sv);
  rec.purity = center.squaredNorm() / std::norm(tr);
  return rec;
}

// Dense rho (trace-normalized) for small chains.
inline DenseMatrix to_dense(const MpoState& s, int max_sites = 12) {
  const int n = s.n_sites();
  detail::check_dimension(n, max_sites);
  // rows: operator multi-index p_1 + 4 p_2 + ...; columns: right bond
  DenseMatrix acc = s.sites.front();
  for (int j = 1; j < n; ++j) {
    const auto& a = s.sites[static_cast<std::size_t>(j)];
    const auto dm = a.rows() / 4;
    const auto prev = acc.rows();
    DenseMatrix next(prev * 4, a.cols());
    for (int p = 0; p < 4; ++p) next.middleRows(p * prev, prev) = acc * a.middleRows(p * dm, dm);
    acc = std::move(next);
  }
  const auto d = basis::dimension(n);
  DenseMatrix rho = DenseMatrix::Zero(d, d);
  for (Eigen::Index idx = 0; idx < acc.rows(); ++idx) {
    std::int64_t ket = 0, bra = 0;
    Eigen::Index rest = idx;
    for (int j = 0; j < n; ++j) {
      const int p = static_cast<int>(rest % 4);
      rest /= 4;
      ket |= static_cast<std::int64_t>(mpo_detail::kKet[p]) << (n - 1 - j);
      bra |= static_cast<std::int64_t>(mpo_detail::kBra[p]) << (n - 1 - j);
    }
    rho(ket, bra) = acc(idx, 0);
  }
  return rho / rho.trace();
}

// ---------------------------------------------------------------------------
// Evolution to the stationary state.

struct MpoStage {
  double dt = 0.1;
  int order = 2;
  double max_time = 1000.0;
};

struct NessSchedule {
  std::vector<MpoStage> stages{{0.1, 2, 1000.0}};
  double drift_tol = 1e-6;     // max |dJ/dt| over probe bonds
  double check_interval = 1.0;  // model time between drift checks
  double truncation_budget = 1e-4;  // accumulated discarded weight flagged above this
  std::vector<int> probe_bonds;     // 0-based; empty selects first, middle, last

  void validate() const {
    if (stages.empty()) throw ValidationError("schedule needs at least one stage");
    for (const auto& st : stages) {
      if (!(st.dt > 0.0)) throw ValidationError("stage dt must be > 0");
      if (st.order != 2 && st.order != 4) throw ValidationError("stage order must be 2 or 4");
      if (!(st.max_time > 0.0)) throw ValidationError("stage max_time must be > 0");
    }
    if (!(drift_tol > 0.0) || !(check_interval > 0.0)) throw ValidationError("tolerances must be > 0");
  }
};

struct MpoRunReport {
  ConvergenceReport convergence;
  double drift = std::numeric_limits<double>::infinity();
  double truncation_weight = 0.0;
  double max_step_discard = 0.0;
  int max_bond = 1;
  bool truncation_budget_exceeded = false;
  double trace = 1.0;
  std::vector<int> stage_steps;
};

inline std::pair<MpoState, MpoRunReport> evolve_mpo(MpoState state, const ChainParameters& p,
                                                    const TruncationPolicy& policy, const NessSchedule& schedule) {
  p.validate();
  policy.validate();
  schedule.validate();
  const int n = p.n_sites;
  if (state.n_sites() != n) throw ValidationError("initial MPO length does not match n_sites");
  std::vector<int> probes = schedule.probe_bonds;
  if (probes.empty()) probes = n > 3 ? std::vector<int>{0, (n - 1) / 2, n - 2} : std::vector<int>{0, n - 2};
  for (int b : probes)
    if (b < 0 || b + 1 >= n) throw ValidationError("probe bond out of range");

  MpoRunReport rep;
  auto& conv = rep.convergence;
  for (const auto& stage : schedule.stages) {
    const TrotterPropagator prop(p, stage.dt, stage.order);
    const long per_check = std::max<long>(1, std::lround(schedule.check_interval / stage.dt));
    const double interval = static_cast<double>(per_check) * stage.dt;
    std::vector<double> last = mpo_currents(state, probes);
    double stage_time = 0.0;
    int steps = 0;
    bool done = false;
    while (stage_time < stage.max_time && !done) {
      for (long k = 0; k < per_check; ++k) {
        rep.max_step_discard = std::max(rep.max_step_discard, prop.step(state, policy));
        ++steps;
      }
      stage_time += interval;
      const auto now = mpo_currents(state, probes);
      rep.drift = 0.0;
      for (std::size_t i = 0; i < now.size(); ++i) rep.drift = std::max(rep.drift, std::abs(now[i] - last[i]) / interval);
      last = now;
      done = rep.drift <= schedule.drift_tol;
    }
    rep.stage_steps.push_back(steps);
    conv.steps += steps;
    conv.converged = done;
  }
  conv.time = state.time;
  rep.truncation_weight = state.truncation_weight;
  rep.max_bond = state.max_bond();
  rep.truncation_budget_exceeded = state.truncation_weight > schedule.truncation_budget;
  rep.trace = mpo_trace(state).real();
  {
    std::vector<int> all;
    for (int b = 0; b + 1 < n; ++b) all.push_back(b);
    const auto j = mpo_currents(state, all);
    conv.homogeneity = PackedProbe::homogeneity(j);
  }
  conv.residual = rep.drift;
  std::ostringstream os;
  if (!conv.converged) os << "current drift " << rep.drift << " above " << schedule.drift_tol << " at t=" << state.time;
  if (rep.truncation_budget_exceeded) {
    if (!os.str().empty()) os << "; ";
    os << "truncation weight " << state.truncation_weight << " exceeds budget " << schedule.truncation_budget;
  }
  conv.message = os.str();
  state.center_spectrum = schmidt_values_at(state, n / 2 - 1);
  return {std::move(state), std::move(rep)};
}

// Starts from the product state with the linear density profile between
// the reservoir values (1 + f)/2 and (1 - f)/2.
inline std::pair<MpoState, MpoRunReport> run_to_ness_mpo(const ChainParameters& p, const TruncationPolicy& policy,
                                                         const NessSchedule& schedule) {
  p.validate();
  const int n = p.n_sites;
  std::vector<double> dens;
  const double hi = 0.5 * (1.0 + p.bias), lo = 0.5 * (1.0 - p.bias);
  for (int j = 0; j < n; ++j) dens.push_back(hi + (lo - hi) * (j + 0.5) / n);
  return evolve_mpo(mpo_from_densities(dens), p, policy, schedule);
}

}  // namespace ness
