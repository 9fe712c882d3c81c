#pragma once

#include <bit>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ness {

using Complex = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor, std::int64_t>;
using DenseMatrix = Eigen::MatrixXcd;
using DenseVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Triplet = Eigen::Triplet<Complex, std::int64_t>;

inline constexpr Complex kI{0.0, 1.0};

// Error categories. The CLI maps ValidationError to exit code 2 and
// SolverError (and subclasses) to exit code 3.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CapacityError : public SolverError {
 public:
  using SolverError::SolverError;
};

class DegenerateKernelError : public SolverError {
 public:
  using SolverError::SolverError;
};

class ConvergenceError : public SolverError {
 public:
  using SolverError::SolverError;
};

// Occupation-number basis shared by every module.
//
// A basis state of an N-site chain is an integer s in [0, 2^N). Site j
// (1-based) is stored in bit (N - j), so site 1 is the most significant bit
// and the binary literal of s reads left to right along the chain:
// for N = 4, |1100> is s = 0b1100 = 12.
namespace basis {

using State = std::uint64_t;

inline constexpr int kMaxSites = 30;

inline std::int64_t dimension(int n_sites) {
  return std::int64_t{1} << n_sites;
}

inline int bit_of(int site, int n_sites) { return n_sites - site; }

inline int occupation(State s, int site, int n_sites) {
  return static_cast<int>((s >> bit_of(site, n_sites)) & 1U);
}

inline State flip(State s, int site, int n_sites) {
  return s ^ (State{1} << bit_of(site, n_sites));
}

inline int particle_number(State s) { return std::popcount(s); }

// Builds the state from a left-to-right occupation list.
inline State from_occupations(const std::vector<int>& occ) {
  State s = 0;
  for (int v : occ) s = (s << 1) | static_cast<State>(v != 0);
  return s;
}

// |1...10...0> with `filled` particles pinned at the left boundary.
inline State domain_state(int filled, int n_sites) {
  State s = 0;
  for (int j = 1; j <= filled; ++j) s |= State{1} << bit_of(j, n_sites);
  return s;
}

// All basis states with exactly n particles, in increasing order.
inline std::vector<State> sector_states(int n_sites, int n) {
  std::vector<State> out;
  const State dim = State{1} << n_sites;
  for (State s = 0; s < dim; ++s)
    if (particle_number(s) == n) out.push_back(s);
  return out;
}

}  // namespace basis

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace ness
