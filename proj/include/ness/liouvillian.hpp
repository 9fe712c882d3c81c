#pragma once

// Vectorized Lindblad generator.
//
// rho is column-stacked: vec(rho)[i + d*j] = rho(i, j). The generator is
// assembled from its action on matrix units E_ab = |a><b|,
//
//   M(E_ab) = K E_ab + E_ab K^+ + sum_k L_k E_ab L_k^+,
//   K = -i H - 1/2 sum_k L_k^+ L_k,
//
// either on the full operator space (dimension d^2) or on the invariant
// subspace of matrix units whose ket and bra carry the same particle number.

#include <algorithm>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <vector>

#include "ness/core.hpp"
#include "ness/model.hpp"

namespace ness {

inline constexpr int kDefaultVectorizedCap = 10;

// Enumerates the matrix units (a, b) spanned by a superoperator and maps
// them to vector positions.
class OperatorSpace {
 public:
  // Full space, column-stacked.
  static OperatorSpace full(std::int64_t hilbert_dim) {
    OperatorSpace s;
    s.dim_ = hilbert_dim;
    s.dense_index_ = true;
    s.size_ = hilbert_dim * hilbert_dim;
    return s;
  }

  // Pairs with popcount(a) == popcount(b), grouped by particle number and
  // column-stacked inside each group.
  static OperatorSpace number_conserving(int n_sites) {
    OperatorSpace s;
    s.dim_ = basis::dimension(n_sites);
    s.n_sites_ = n_sites;
    s.dense_index_ = false;
    s.lookup_ = std::make_shared<std::vector<std::int64_t>>(
        static_cast<std::size_t>(s.dim_ * s.dim_), -1);
    auto& lookup = *s.lookup_;
    std::int64_t next = 0;
    s.sector_offsets_.push_back(0);
    for (int n = 0; n <= n_sites; ++n) {
      const auto states = basis::sector_states(n_sites, n);
      for (auto b : states)
        for (auto a : states) {
          lookup[static_cast<std::size_t>(a + s.dim_ * b)] = next++;
          s.pairs_.emplace_back(static_cast<std::int64_t>(a), static_cast<std::int64_t>(b));
        }
      s.sector_offsets_.push_back(next);
    }
    s.size_ = next;
    return s;
  }

  std::int64_t hilbert_dim() const { return dim_; }
  std::int64_t size() const { return size_; }
  bool is_full() const { return dense_index_; }

  // Number-conserving spaces only: sector n occupies positions
  // [sector_offset(n), sector_offset(n + 1)) as a column-major block over
  // basis::sector_states(N, n).
  int n_sites() const { return n_sites_; }
  int sector_count() const { return static_cast<int>(sector_offsets_.size()) - 1; }
  std::int64_t sector_offset(int n) const { return sector_offsets_[static_cast<std::size_t>(n)]; }

  // Position of E_ab, or -1 when the unit lies outside the space.
  std::int64_t index(std::int64_t a, std::int64_t b) const {
    if (dense_index_) return a + dim_ * b;
    return (*lookup_)[static_cast<std::size_t>(a + dim_ * b)];
  }

  std::pair<std::int64_t, std::int64_t> unit(std::int64_t k) const {
    if (dense_index_) return {k % dim_, k / dim_};
    return pairs_[static_cast<std::size_t>(k)];
  }

  // Row vector v with v . vec(rho) = tr(rho).
  DenseVector trace_functional() const {
    DenseVector t = DenseVector::Zero(size_);
    for (std::int64_t a = 0; a < dim_; ++a) t[index(a, a)] = 1.0;
    return t;
  }

  DenseVector pack(const DenseMatrix& rho) const {
    DenseVector v(size_);
    for (std::int64_t k = 0; k < size_; ++k) {
      auto [a, b] = unit(k);
      v[k] = rho(a, b);
    }
    return v;
  }

  DenseMatrix unpack(const DenseVector& v) const {
    DenseMatrix rho = DenseMatrix::Zero(dim_, dim_);
    for (std::int64_t k = 0; k < size_; ++k) {
      auto [a, b] = unit(k);
      rho(a, b) = v[k];
    }
    return rho;
  }

 private:
  std::int64_t dim_ = 0;
  std::int64_t size_ = 0;
  int n_sites_ = 0;
  bool dense_index_ = true;
  std::shared_ptr<std::vector<std::int64_t>> lookup_;
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs_;
  std::vector<std::int64_t> sector_offsets_;
};

struct SparseSuperoperator {
  OperatorSpace space;
  SparseMatrix matrix;
  // K = -iH - 1/2 sum_k L_k^+ L_k; the generator is K rho + rho K^+ plus jump terms.
  SparseMatrix effective_hamiltonian;

  std::int64_t size() const { return space.size(); }

  DenseVector apply(const DenseVector& v) const { return matrix * v; }

  DenseMatrix apply(const DenseMatrix& rho) const { return space.unpack(matrix * space.pack(rho)); }
};

namespace detail {

inline void check_same_dimension(const SparseMatrix& h, std::span<const SparseMatrix> jumps) {
  if (h.rows() != h.cols()) throw ValidationError("Hamiltonian must be square");
  for (const auto& l : jumps)
    if (l.rows() != h.rows() || l.cols() != h.cols())
      throw ValidationError("jump operator dimension does not match the Hamiltonian");
}

}  // namespace detail

inline SparseMatrix effective_hamiltonian(const SparseMatrix& h, std::span<const SparseMatrix> jumps) {
  SparseMatrix k = SparseMatrix(-kI * h);
  for (const auto& l : jumps) k -= 0.5 * SparseMatrix(l.adjoint() * l);
  k.makeCompressed();
  return k;
}

inline SparseSuperoperator assemble_superoperator(const SparseMatrix& h,
                                                  std::span<const SparseMatrix> jumps,
                                                  OperatorSpace space) {
  detail::check_same_dimension(h, jumps);
  if (space.hilbert_dim() != h.rows()) throw ValidationError("operator space does not match operator dimension");

  const SparseMatrix k = effective_hamiltonian(h, jumps);
  // (E_ab K^+)(a, b') = conj(K(b', b)); iterate column b of K.
  const SparseMatrix& kcols = k;

  std::vector<Triplet> t;
  const std::int64_t size = space.size();
  t.reserve(static_cast<std::size_t>(size) * 16);
  std::vector<std::pair<std::int64_t, Complex>> la, lb;
  for (std::int64_t col = 0; col < size; ++col) {
    auto [a, b] = space.unit(col);
    for (SparseMatrix::InnerIterator it(kcols, a); it; ++it) {
      const auto row = space.index(it.row(), b);
      if (row >= 0) t.emplace_back(row, col, it.value());
    }
    for (SparseMatrix::InnerIterator it(kcols, b); it; ++it) {
      const auto row = space.index(a, it.row());
      if (row >= 0) t.emplace_back(row, col, std::conj(it.value()));
    }
    for (const auto& l : jumps) {
      la.clear();
      lb.clear();
      for (SparseMatrix::InnerIterator it(l, a); it; ++it) la.emplace_back(it.row(), it.value());
      if (la.empty()) continue;
      for (SparseMatrix::InnerIterator it(l, b); it; ++it) lb.emplace_back(it.row(), it.value());
      for (auto [ra, va] : la)
        for (auto [rb, vb] : lb) {
          const auto row = space.index(ra, rb);
          if (row >= 0) t.emplace_back(row, col, va * std::conj(vb));
        }
    }
  }
  SparseMatrix m(size, size);
  m.setFromTriplets(t.begin(), t.end());
  m.prune(Complex(0.0), 0.0);
  m.makeCompressed();
  return {std::move(space), std::move(m), k};
}

// Full column-stacked generator, d^2 x d^2.
inline SparseSuperoperator vectorize(const SparseMatrix& h, std::span<const SparseMatrix> jumps,
                                     std::int64_t max_dim = basis::dimension(kDefaultVectorizedCap)) {
  if (h.rows() > max_dim) {
    std::ostringstream os;
    os << "Hilbert dimension " << h.rows() << " exceeds the vectorized cap " << max_dim;
    throw CapacityError(os.str());
  }
  return assemble_superoperator(h, jumps, OperatorSpace::full(h.rows()));
}

inline std::vector<SparseMatrix> operators_of(const std::vector<JumpOperator>& jumps) {
  std::vector<SparseMatrix> out;
  out.reserve(jumps.size());
  for (const auto& j : jumps) out.push_back(j.op);
  return out;
}

// Generator of the driven chain restricted to the number-conserving
// operator subspace, which contains the stationary state.
inline SparseSuperoperator chain_generator(const ChainParameters& p,
                                           int max_sites = kDefaultVectorizedCap) {
  p.validate();
  detail::check_dimension(p.n_sites, max_sites);
  const auto h = generator_hamiltonian(p);
  const auto jumps = operators_of(build_jump_operators(p));
  return assemble_superoperator(h, jumps, OperatorSpace::number_conserving(p.n_sites));
}

inline SparseSuperoperator chain_generator_full(const ChainParameters& p,
                                                int max_sites = kDefaultVectorizedCap) {
  p.validate();
  detail::check_dimension(p.n_sites, max_sites);
  const auto h = generator_hamiltonian(p);
  const auto jumps = operators_of(build_jump_operators(p));
  return vectorize(h, jumps);
}

}  // namespace ness
