#pragma once

// Chain Hamiltonian, jump operators and measurement operators of the
// boundary-driven, dephased spinless-fermion chain, built directly in the
// spin (XXZ) picture. Hopping is nearest-neighbour only, so Jordan-Wigner
// strings cancel and no fermionic signs appear anywhere in this module.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ness/core.hpp"

namespace ness {

struct ChainParameters {
  int n_sites = 2;
  double hopping = 1.0;      // tau
  double interaction = 0.0;  // Delta
  double coupling = 1.0;     // Gamma
  double bias = 0.0;         // f
  double dephasing = 0.0;    // gamma
  double staggered = 0.0;    // B

  void validate() const {
    auto fail = [](const std::string& what) { throw ValidationError(what); };
    if (n_sites < 2) fail("n_sites must be >= 2");
    if (n_sites > basis::kMaxSites) fail("n_sites exceeds the basis word size");
    if (!(coupling > 0.0)) fail("coupling must be > 0");
    if (!(dephasing >= 0.0)) fail("dephasing must be >= 0");
    if (!(std::abs(bias) <= 1.0)) fail("bias must satisfy |f| <= 1");
    if (hopping == 0.0 || !std::isfinite(hopping)) fail("hopping must be finite and nonzero");
    if (!std::isfinite(interaction) || !std::isfinite(staggered))
      fail("interaction and staggered potential must be finite");
  }
};

// The Lindblad generator evolves with kExchangeScale * H, i.e. the Hamiltonian
// written in XXZ exchange units, sum_j [tau (s^x s^x + s^y s^y) + Delta s^z s^z]
// with Pauli matrices s. Rates Gamma and gamma are quoted in these units.
// Spectra and dark-state analysis use H itself.
inline constexpr double kExchangeScale = 4.0;

inline constexpr int kDefaultOperatorCap = 14;

namespace detail {

inline void check_dimension(int n_sites, int cap) {
  if (n_sites > cap) {
    std::ostringstream os;
    os << "N=" << n_sites << " exceeds the exact-method cap of " << cap << " sites";
    throw CapacityError(os.str());
  }
}

inline void check_site(int j, int lo, int hi, const char* what) {
  if (j < lo || j > hi) {
    std::ostringstream os;
    os << what << " index " << j << " outside [" << lo << ", " << hi << "]";
    throw ValidationError(os.str());
  }
}

inline SparseMatrix from_triplets(std::int64_t dim, const std::vector<Triplet>& t) {
  SparseMatrix m(dim, dim);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

}  // namespace detail

// H = sum_j [ tau/2 (c+_j c_{j+1} + h.c.) + Delta (n_j - 1/2)(n_{j+1} - 1/2) ]
//     + B sum_j (-1)^j n_j
inline SparseMatrix build_hamiltonian(const ChainParameters& p,
                                      int max_sites = kDefaultOperatorCap) {
  p.validate();
  detail::check_dimension(p.n_sites, max_sites);
  const int n = p.n_sites;
  const auto dim = basis::dimension(n);
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(dim) * static_cast<std::size_t>(n));
  for (basis::State s = 0; s < static_cast<basis::State>(dim); ++s) {
    double diag = 0.0;
    for (int j = 1; j < n; ++j) {
      const int a = basis::occupation(s, j, n);
      const int b = basis::occupation(s, j + 1, n);
      diag += p.interaction * (a - 0.5) * (b - 0.5);
      if (a != b) {
        const auto s2 = basis::flip(basis::flip(s, j, n), j + 1, n);
        t.emplace_back(static_cast<std::int64_t>(s2), static_cast<std::int64_t>(s),
                       0.5 * p.hopping);
      }
    }
    if (p.staggered != 0.0)
      for (int j = 1; j <= n; ++j)
        diag += p.staggered * ((j % 2 == 0) ? 1.0 : -1.0) * basis::occupation(s, j, n);
    if (diag != 0.0) t.emplace_back(static_cast<std::int64_t>(s), static_cast<std::int64_t>(s), diag);
  }
  return detail::from_triplets(dim, t);
}

// Hamiltonian entering the master equation (exchange units).
inline SparseMatrix generator_hamiltonian(const ChainParameters& p,
                                          int max_sites = kDefaultOperatorCap) {
  SparseMatrix h = build_hamiltonian(p, max_sites);
  h *= Complex(kExchangeScale);
  return h;
}

inline SparseMatrix annihilation_operator(int j, int n_sites) {
  detail::check_site(j, 1, n_sites, "site");
  const auto dim = basis::dimension(n_sites);
  std::vector<Triplet> t;
  for (basis::State s = 0; s < static_cast<basis::State>(dim); ++s)
    if (basis::occupation(s, j, n_sites) == 1)
      t.emplace_back(static_cast<std::int64_t>(basis::flip(s, j, n_sites)),
                     static_cast<std::int64_t>(s), 1.0);
  return detail::from_triplets(dim, t);
}

inline SparseMatrix creation_operator(int j, int n_sites) {
  return SparseMatrix(annihilation_operator(j, n_sites).adjoint());
}

inline SparseMatrix identity_operator(int n_sites) {
  const auto dim = basis::dimension(n_sites);
  SparseMatrix id(dim, dim);
  id.setIdentity();
  return id;
}

inline SparseMatrix number_operator(int j, int n_sites) {
  detail::check_site(j, 1, n_sites, "site");
  const auto dim = basis::dimension(n_sites);
  std::vector<Triplet> t;
  for (basis::State s = 0; s < static_cast<basis::State>(dim); ++s)
    if (basis::occupation(s, j, n_sites) == 1)
      t.emplace_back(static_cast<std::int64_t>(s), static_cast<std::int64_t>(s), 1.0);
  return detail::from_triplets(dim, t);
}

inline SparseMatrix total_number_operator(int n_sites) {
  const auto dim = basis::dimension(n_sites);
  std::vector<Triplet> t;
  for (basis::State s = 0; s < static_cast<basis::State>(dim); ++s)
    if (int k = basis::particle_number(s); k > 0)
      t.emplace_back(static_cast<std::int64_t>(s), static_cast<std::int64_t>(s), double(k));
  return detail::from_triplets(dim, t);
}

// Bond kinetic term c+_j c_{j+1} + h.c.
inline SparseMatrix bond_kinetic_operator(int j, int n_sites) {
  detail::check_site(j, 1, n_sites - 1, "bond");
  const auto dim = basis::dimension(n_sites);
  std::vector<Triplet> t;
  for (basis::State s = 0; s < static_cast<basis::State>(dim); ++s)
    if (basis::occupation(s, j, n_sites) != basis::occupation(s, j + 1, n_sites))
      t.emplace_back(static_cast<std::int64_t>(basis::flip(basis::flip(s, j, n_sites), j + 1, n_sites)),
                     static_cast<std::int64_t>(s), 1.0);
  return detail::from_triplets(dim, t);
}

// sum_j (c+_j c_{j+1} + h.c.)
inline SparseMatrix kinetic_operator(int n_sites) {
  SparseMatrix k(basis::dimension(n_sites), basis::dimension(n_sites));
  for (int j = 1; j < n_sites; ++j) k += bond_kinetic_operator(j, n_sites);
  return k;
}

// Bond current J_j = -2i (c+_j c_{j+1} - c+_{j+1} c_j): the spin current of
// the exchange-normalized chain. J_j|..1_j 0_{j+1}..> = 2i|..0_j 1_{j+1}..>,
// so forward (left-to-right) particle flow gives a negative expectation.
inline SparseMatrix current_operator(int j, int n_sites) {
  detail::check_site(j, 1, n_sites - 1, "bond");
  const auto dim = basis::dimension(n_sites);
  std::vector<Triplet> t;
  for (basis::State s = 0; s < static_cast<basis::State>(dim); ++s) {
    const int a = basis::occupation(s, j, n_sites);
    const int b = basis::occupation(s, j + 1, n_sites);
    if (a == b) continue;
    const auto s2 = basis::flip(basis::flip(s, j, n_sites), j + 1, n_sites);
    // a=1,b=0: -c+_{j+1} c_j moves the particle right, coefficient -2i * -1.
    const Complex amp = (a == 1) ? Complex(0.0, 2.0) : Complex(0.0, -2.0);
    t.emplace_back(static_cast<std::int64_t>(s2), static_cast<std::int64_t>(s), amp);
  }
  return detail::from_triplets(dim, t);
}

// sigma^z_j = 1 - 2 n_j
inline SparseMatrix parity_operator(int j, int n_sites) {
  return SparseMatrix(identity_operator(n_sites) - 2.0 * number_operator(j, n_sites));
}

struct JumpOperator {
  SparseMatrix op;
  std::string label;
};

// Four boundary operators followed by one dephasing operator per site
// (omitted when gamma = 0).
inline std::vector<JumpOperator> build_jump_operators(const ChainParameters& p,
                                                      int max_sites = kDefaultOperatorCap) {
  p.validate();
  detail::check_dimension(p.n_sites, max_sites);
  const int n = p.n_sites;
  const double g = p.coupling;
  const double f = p.bias;
  std::vector<JumpOperator> out;
  out.push_back({std::sqrt(g * (1.0 - f) / 2.0) * annihilation_operator(1, n), "L_L+"});
  out.push_back({std::sqrt(g * (1.0 + f) / 2.0) * creation_operator(1, n), "L_L-"});
  out.push_back({std::sqrt(g * (1.0 + f) / 2.0) * annihilation_operator(n, n), "L_R+"});
  out.push_back({std::sqrt(g * (1.0 - f) / 2.0) * creation_operator(n, n), "L_R-"});
  if (p.dephasing > 0.0)
    for (int j = 1; j <= n; ++j)
      out.push_back({std::sqrt(p.dephasing) * parity_operator(j, n), "L_d" + std::to_string(j)});
  return out;
}

// Particle-hole conjugation combined with the reflection j -> N + 1 - j.
inline SparseMatrix particle_hole_reflection(int n_sites) {
  const auto dim = basis::dimension(n_sites);
  std::vector<Triplet> t;
  for (basis::State s = 0; s < static_cast<basis::State>(dim); ++s) {
    basis::State r = 0;
    for (int j = 1; j <= n_sites; ++j)
      if (basis::occupation(s, j, n_sites) == 0) r |= basis::State{1} << basis::bit_of(n_sites + 1 - j, n_sites);
    t.emplace_back(static_cast<std::int64_t>(r), static_cast<std::int64_t>(s), 1.0);
  }
  return detail::from_triplets(dim, t);
}

// Spatial reflection j -> N + 1 - j.
inline SparseMatrix reflection_operator(int n_sites) {
  const auto dim = basis::dimension(n_sites);
  std::vector<Triplet> t;
  for (basis::State s = 0; s < static_cast<basis::State>(dim); ++s) {
    basis::State r = 0;
    for (int j = 1; j <= n_sites; ++j)
      if (basis::occupation(s, j, n_sites) == 1) r |= basis::State{1} << basis::bit_of(n_sites + 1 - j, n_sites);
    t.emplace_back(static_cast<std::int64_t>(r), static_cast<std::int64_t>(s), 1.0);
  }
  return detail::from_triplets(dim, t);
}

}  // namespace ness
