#pragma once

// Test-only reference implementations built from Kronecker products of
// 2x2 matrices and the Lindblad equation written out densely. They share
// nothing with the library's bit-level builders.

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace oracle {

using C = std::complex<double>;
using M = Eigen::MatrixXcd;

inline M eye(int d) { return M::Identity(d, d); }

inline M kron(const M& a, const M& b) {
  M out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Local basis {|0>, |1>} = {empty, occupied}; site 1 is the leftmost factor.
inline M lowering() {
  M a = M::Zero(2, 2);
  a(0, 1) = 1.0;
  return a;
}
inline M occupied() {
  M n = M::Zero(2, 2);
  n(1, 1) = 1.0;
  return n;
}

inline M at(const M& op, int site, int n) {
  M out = eye(1);
  for (int j = 1; j <= n; ++j) out = kron(out, j == site ? op : eye(2));
  return out;
}

inline M c(int j, int n) { return at(lowering(), j, n); }
inline M cd(int j, int n) { return at(lowering().adjoint(), j, n); }
inline M num(int j, int n) { return at(occupied(), j, n); }

inline M hamiltonian(int n, double tau, double delta, double b = 0.0) {
  const int d = 1 << n;
  M h = M::Zero(d, d);
  for (int j = 1; j < n; ++j) {
    h += 0.5 * tau * (cd(j, n) * c(j + 1, n) + cd(j + 1, n) * c(j, n));
    h += delta * (num(j, n) - 0.5 * eye(d)) * (num(j + 1, n) - 0.5 * eye(d));
  }
  for (int j = 1; j <= n; ++j) h += b * ((j % 2 == 0) ? 1.0 : -1.0) * num(j, n);
  return h;
}

inline std::vector<M> jumps(int n, double coupling, double f, double gamma) {
  std::vector<M> out{std::sqrt(coupling * (1 - f) / 2) * c(1, n), std::sqrt(coupling * (1 + f) / 2) * cd(1, n),
                     std::sqrt(coupling * (1 + f) / 2) * c(n, n), std::sqrt(coupling * (1 - f) / 2) * cd(n, n)};
  const int d = 1 << n;
  if (gamma > 0)
    for (int j = 1; j <= n; ++j) out.push_back(std::sqrt(gamma) * (eye(d) - 2.0 * num(j, n)));
  return out;
}

inline M lindblad(const M& h, const std::vector<M>& ls, const M& rho) {
  const C i(0, 1);
  M out = -i * (h * rho - rho * h);
  for (const auto& l : ls) {
    const M ll = l.adjoint() * l;
    out += l * rho * l.adjoint() - 0.5 * (ll * rho + rho * ll);
  }
  return out;
}

// Stationary state by dense SVD of the column-stacked generator.
inline M dense_ness(const M& h, const std::vector<M>& ls) {
  const auto d = h.rows();
  M gen(d * d, d * d);
  for (Eigen::Index col = 0; col < d * d; ++col) {
    M e = M::Zero(d, d);
    e(col % d, col / d) = 1.0;
    const M r = lindblad(h, ls, e);
    gen.col(col) = Eigen::Map<const Eigen::VectorXcd>(r.data(), d * d);
  }
  Eigen::JacobiSVD<M> svd(gen, Eigen::ComputeFullV);
  const Eigen::VectorXcd v = svd.matrixV().col(d * d - 1);
  M rho = Eigen::Map<const M>(v.data(), d, d);
  rho /= rho.trace();
  return 0.5 * (rho + rho.adjoint());
}

inline M current(int j, int n) {
  const C i(0, 1);
  return -2.0 * i * (cd(j, n) * c(j + 1, n) - cd(j + 1, n) * c(j, n));
}

}  // namespace oracle
