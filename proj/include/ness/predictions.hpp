#pragma once

// Closed-form and perturbative reference values.

#include <cmath>
#include <vector>

#include "ness/core.hpp"

namespace ness::predict {

namespace detail {

inline double suppression(double interaction) {
  if (!(std::abs(interaction) > 0.5)) throw ValidationError("strong-coupling forms need |Delta| > 1/2");
  return 1.0 / std::abs(2.0 * interaction);
}

inline void normalize(std::vector<double>& p) {
  double s = 0.0;
  for (double x : p) s += x;
  for (double& x : p) x /= s;
}

}  // namespace detail

// Non-interacting current; negative for forward bias in the current-operator
// convention of the chain model.
inline double delta0_current(int n_sites, double bias, double coupling, double dephasing) {
  if (!(coupling > 0.0)) throw ValidationError("coupling must be > 0");
  if (n_sites < 2) throw ValidationError("n_sites must be >= 2");
  return -2.0 * bias / (coupling / 4.0 + 4.0 / coupling + (n_sites - 1) * dephasing);
}

// Density deviation of the bound domain state from |B_n> at site j.
inline double domain_deviation(int n, int n_sites, double interaction, int j) {
  if (n_sites < 1 || n < 0 || n > n_sites) throw ValidationError("particle number outside 0..N");
  if (j < 1 || j > n_sites) throw ValidationError("site index outside 1..N");
  const double x = detail::suppression(interaction);
  return j <= n ? std::pow(x, 2.0 * (n - j + 1)) : std::pow(x, 2.0 * (j - n));
}

inline std::vector<double> sector_probs_closed_form(int n_sites, double interaction) {
  const double x = detail::suppression(interaction);
  std::vector<double> p;
  for (int n = 0; n <= n_sites; ++n) {
    const double d = n - 0.5 * n_sites;
    p.push_back(std::pow(x, 2.0 * d * d));
  }
  detail::normalize(p);
  return p;
}

// Stationary solution of the sector balance: sector n is left upward at rate
// x^{2n} (hole at site 1) and downward at rate x^{2(N-n)} (particle at site
// N), x = 1/|2 Delta|. Sectors form a birth-death chain, so the balance
// equations reduce to p_{n+1} down(n+1) = p_n up(n); these are solved in log
// space inward from n = 0 and n = N and joined at the middle sector.
inline std::vector<double> sector_probs_detailed_balance(int n_sites, double interaction) {
  if (n_sites < 1) throw ValidationError("n_sites must be >= 1");
  const double lx = std::log(detail::suppression(interaction));
  auto log_up = [&](int n) { return 2.0 * n * lx; };
  auto log_down = [&](int n) { return 2.0 * (n_sites - n) * lx; };
  const int mid = n_sites / 2;
  std::vector<double> lp(static_cast<std::size_t>(n_sites) + 1, 0.0);
  for (int n = 0; n < mid; ++n)
    lp[static_cast<std::size_t>(n + 1)] = lp[static_cast<std::size_t>(n)] + log_up(n) - log_down(n + 1);
  std::vector<double> rp(static_cast<std::size_t>(n_sites) + 1, 0.0);
  for (int n = n_sites; n > mid; --n)
    rp[static_cast<std::size_t>(n - 1)] = rp[static_cast<std::size_t>(n)] + log_down(n) - log_up(n - 1);
  const double shift = lp[static_cast<std::size_t>(mid)] - rp[static_cast<std::size_t>(mid)];
  for (int n = mid + 1; n <= n_sites; ++n) lp[static_cast<std::size_t>(n)] = rp[static_cast<std::size_t>(n)] + shift;
  const double top = lp[static_cast<std::size_t>(mid)];
  std::vector<double> p;
  for (double v : lp) p.push_back(std::exp(v - top));
  detail::normalize(p);
  return p;
}

inline double purity_prediction(double interaction) {
  if (!(std::abs(interaction) > 1.0)) throw ValidationError("purity form needs |Delta| > 1");
  return 1.0 - 1.0 / (interaction * interaction);
}

inline double localization_length(double interaction) {
  if (!(std::abs(interaction) > 1.0)) throw ValidationError("localization length needs |Delta| > 1");
  return 1.0 / std::log(std::abs(2.0 * interaction));
}

}  // namespace ness::predict
