#pragma once

// (K+1)-state toy model: configurations |1>..|K> on a hopping line with |K>
// raised by Delta, and an auxiliary state |s> through which the boundary
// configurations |1> and |K> are pumped. Index k-1 holds |k>, index K holds |s>.

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ness/core.hpp"
#include "ness/exact_solver.hpp"
#include "ness/liouvillian.hpp"

namespace ness {

struct ToyParameters {
  int n_levels = 3;          // K
  double interaction = 0.0;  // Delta
  double coupling = 1.0;     // Gamma
  double bias = 0.0;         // f
  double dephasing = 0.0;    // gamma

  void validate() const {
    if (n_levels < 2) throw ValidationError("toy model needs K >= 2");
    if (n_levels > 4000) throw CapacityError("toy model K above the dense cap of 4000");
    if (!(coupling > 0.0)) throw ValidationError("coupling must be > 0");
    if (!(dephasing >= 0.0)) throw ValidationError("dephasing must be >= 0");
    if (!(bias >= 0.0 && bias <= 1.0)) throw ValidationError("toy bias must lie in [0, 1]");
    if (!std::isfinite(interaction)) throw ValidationError("interaction must be finite");
  }
  std::int64_t dimension() const { return n_levels + 1; }
  std::int64_t aux() const { return n_levels; }
};

inline SparseMatrix toy_hamiltonian(const ToyParameters& p) {
  p.validate();
  const int k = p.n_levels;
  std::vector<Triplet> t;
  for (int i = 0; i + 1 < k; ++i) {
    t.emplace_back(i, i + 1, 0.5);
    t.emplace_back(i + 1, i, 0.5);
  }
  if (p.interaction != 0.0) t.emplace_back(k - 1, k - 1, p.interaction);
  return detail::from_triplets(p.dimension(), t);
}

// J = -i sum_k (|k><k+1| - h.c.)
inline SparseMatrix toy_current_operator(const ToyParameters& p) {
  p.validate();
  std::vector<Triplet> t;
  for (int i = 0; i + 1 < p.n_levels; ++i) {
    t.emplace_back(i, i + 1, -kI);
    t.emplace_back(i + 1, i, kI);
  }
  return detail::from_triplets(p.dimension(), t);
}

inline std::vector<JumpOperator> toy_jump_operators(const ToyParameters& p) {
  p.validate();
  const std::int64_t d = p.dimension(), s = p.aux(), last = p.n_levels - 1;
  auto unit = [d](std::int64_t to, std::int64_t from, double amp) {
    return detail::from_triplets(d, {Triplet(to, from, amp)});
  };
  const double g = p.coupling, f = p.bias;
  std::vector<JumpOperator> out;
  out.push_back({unit(0, s, std::sqrt(g * (1.0 - f) / 2.0)), "L_L+"});
  out.push_back({unit(s, 0, std::sqrt(g * (1.0 + f) / 2.0)), "L_L-"});
  out.push_back({unit(last, s, std::sqrt(g * (1.0 + f) / 2.0)), "L_R+"});
  out.push_back({unit(s, last, std::sqrt(g * (1.0 - f) / 2.0)), "L_R-"});
  if (p.dephasing > 0.0) {
    std::vector<Triplet> z;
    for (std::int64_t i = 0; i < d; ++i) z.emplace_back(i, i, i == last ? -1.0 : 1.0);
    out.push_back({std::sqrt(p.dephasing) * detail::from_triplets(d, z), "L_Z"});
  }
  return out;
}

inline SparseSuperoperator toy_generator(const ToyParameters& p) {
  const auto jumps = operators_of(toy_jump_operators(p));
  return assemble_superoperator(toy_hamiltonian(p), jumps, OperatorSpace::full(p.dimension()));
}

inline DenseMatrix toy_ness(const ToyParameters& p) {
  NullspaceOptions opts;
  opts.method = NullspaceMethod::kDirect;
  return ness_nullspace(toy_generator(p), opts).matrix();
}

inline double toy_ness_current(const ToyParameters& p) {
  const DenseMatrix rho = toy_ness(p);
  return detail::expectation(toy_current_operator(p), rho);
}

// Leading order in 1/Delta; evaluated verbatim whatever the regime.
inline double toy_closed_form(const ToyParameters& p) {
  const double k = p.n_levels, f = p.bias, g = p.dephasing, G = p.coupling, d = p.interaction;
  const double num = (k - 1.0) * (8.0 * g * f + (1.0 - f) * f * G);
  const double den = (k + 1.0) - 2.0 * (k - 2.0) * f + (k - 1.0) * f * f;
  return num / den / (d * d);
}

// Normalized ansatz sum_{k=0}^{K-1} |2 Delta|^{-k} |K-k> on the K+1 states.
inline RealVector toy_dark_state(int n_levels, double interaction) {
  if (n_levels < 2) throw ValidationError("toy model needs K >= 2");
  if (!(std::abs(interaction) > 0.5)) throw ValidationError("dark-state ansatz needs |Delta| > 1/2");
  RealVector v = RealVector::Zero(n_levels + 1);
  const double x = 1.0 / std::abs(2.0 * interaction);
  double amp = 1.0;
  for (int k = 0; k < n_levels; ++k, amp *= x) v[n_levels - 1 - k] = amp;
  return v / v.norm();
}

struct ToyBoundState {
  double energy = 0.0;
  double gap = 0.0;  // to the nearest configuration-band eigenvalue
  DenseVector vector;  // on the K+1 states, |s> component zero
  double ansatz_overlap = 0.0;  // |<ansatz|exact>|^2
};

// Extremal eigenstate of the configuration block (|s> excluded): highest
// for Delta > 0, lowest for Delta < 0.
inline ToyBoundState toy_bound_state(int n_levels, double interaction) {
  ToyParameters p;
  p.n_levels = n_levels;
  p.interaction = interaction;
  const DenseMatrix h = DenseMatrix(toy_hamiltonian(p)).topLeftCorner(n_levels, n_levels);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h);
  const Eigen::Index idx = interaction >= 0.0 ? n_levels - 1 : 0;
  const Eigen::Index nb = interaction >= 0.0 ? n_levels - 2 : 1;
  ToyBoundState out;
  out.energy = es.eigenvalues()[idx];
  out.gap = std::abs(out.energy - es.eigenvalues()[nb]);
  out.vector = DenseVector::Zero(n_levels + 1);
  out.vector.head(n_levels) = es.eigenvectors().col(idx);
  if (std::abs(interaction) > 0.5) {
    const RealVector a = toy_dark_state(n_levels, interaction);
    out.ansatz_overlap = std::norm(a.cast<Complex>().dot(out.vector));
  }
  return out;
}

// Eigenvalues of the full toy Hamiltonian, |s> included at energy 0.
inline RealVector toy_spectrum(const ToyParameters& p) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(DenseMatrix(toy_hamiltonian(p)), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

struct CorrespondenceRow {
  double dephasing = 0.0;
  double equivalent_bias = 1.0;  // 1 - 8 gamma / Gamma
  double current_dephased = 0.0;   // f = 1, gamma
  double current_backward = 0.0;   // f = 1 - 8 gamma / Gamma, gamma = 0
  double mismatch = 0.0;           // relative, against the dephased side
};

inline std::vector<CorrespondenceRow> correspondence_check(int n_levels, double interaction, double coupling,
                                                           const std::vector<double>& gammas) {
  std::vector<CorrespondenceRow> out;
  for (double g : gammas) {
    CorrespondenceRow row;
    row.dephasing = g;
    row.equivalent_bias = 1.0 - 8.0 * g / coupling;
    if (!(row.equivalent_bias >= 0.0 && row.equivalent_bias <= 1.0)) {
      std::ostringstream os;
      os << "gamma=" << g << " maps to f=" << row.equivalent_bias << " outside [0, 1]";
      throw ValidationError(os.str());
    }
    ToyParameters a{n_levels, interaction, coupling, 1.0, g};
    ToyParameters b{n_levels, interaction, coupling, row.equivalent_bias, 0.0};
    row.current_dephased = toy_ness_current(a);
    row.current_backward = toy_ness_current(b);
    const double diff = std::abs(row.current_dephased - row.current_backward);
    const double ref = std::abs(row.current_dephased);
    row.mismatch = ref > 0.0 ? diff / ref : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    out.push_back(row);
  }
  return out;
}

}  // namespace ness
