#pragma once

// Parameter sweeps, optimal-dephasing search, power-law fits, diffusive
// scaling and correlation profiles on top of the exact and MPO solvers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ness/exact_solver.hpp"
#include "ness/io.hpp"
#include "ness/model.hpp"
#include "ness/mpo.hpp"

namespace ness {

enum class SolverKind { kExact, kMpo, kAuto };

inline std::string to_string(SolverKind k) {
  switch (k) {
    case SolverKind::kExact: return "exact";
    case SolverKind::kMpo: return "mpo";
    case SolverKind::kAuto: return "auto";
  }
  return "auto";
}

inline SolverKind solver_kind_from_string(const std::string& s) {
  if (s == "exact") return SolverKind::kExact;
  if (s == "mpo") return SolverKind::kMpo;
  if (s == "auto") return SolverKind::kAuto;
  throw ValidationError("solver must be exact, mpo or auto (got '" + s + "')");
}

struct SolverOptions {
  SolverKind kind = SolverKind::kAuto;
  int exact_max_sites = kDefaultNullspaceCap;  // auto switches to MPO above this
  NullspaceOptions nullspace;
  TruncationPolicy policy;
  NessSchedule schedule;
};

struct SolvedPoint {
  ChainParameters params;
  std::string solver;
  ObservableRecord observables;
  ConvergenceReport report;
  double truncation_weight = 0.0;
  std::string error;  // solver failure, empty on success

  bool ok() const { return error.empty(); }
  bool measured() const { return !observables.current_profile.empty(); }
};

// Single stationary-state solve. Solver failures are captured in the
// returned record; invalid parameters still throw.
inline SolvedPoint solve_point(const ChainParameters& p, const SolverOptions& opts) {
  p.validate();
  SolvedPoint out;
  out.params = p;
  const bool exact = opts.kind == SolverKind::kExact ||
                     (opts.kind == SolverKind::kAuto && p.n_sites <= opts.exact_max_sites);
  out.solver = exact ? "exact" : "mpo";
  try {
    if (exact) {
      auto sol = solve_exact(p, opts.nullspace, opts.exact_max_sites);
      out.observables = std::move(sol.observables);
      out.report = sol.report;
    } else {
      auto [state, rep] = run_to_ness_mpo(p, opts.policy, opts.schedule);
      out.observables = measure_mpo(state, p);
      out.report = rep.convergence;
      out.truncation_weight = rep.truncation_weight;
    }
    if (!out.report.converged && out.error.empty())
      out.error = out.report.message.empty() ? "not converged" : out.report.message;
  } catch (const SolverError& e) {
    out.error = e.what();
    out.report.converged = false;
  }
  return out;
}

inline double current_of(const ChainParameters& p, const SolverOptions& opts) {
  const auto r = solve_point(p, opts);
  if (!r.ok()) throw SolverError(r.error);
  return r.observables.current;
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepConfig {
  std::vector<int> n_sites{4};
  std::vector<double> interactions{0.0};
  std::vector<double> biases{0.5};
  std::vector<double> dephasings{0.0};
  std::vector<double> staggered{0.0};
  double hopping = 1.0;
  double coupling = 1.0;
  SolverOptions solver;
  int threads = 0;  // 0 selects hardware concurrency
  std::string csv_path;
  std::string json_path;

  void validate() const {
    if (n_sites.empty() || interactions.empty() || biases.empty() || dephasings.empty() || staggered.empty())
      throw ValidationError("sweep grids must be non-empty");
    if (solver.exact_max_sites > kDefaultVectorizedCap)
      throw ValidationError("auto-by-size threshold exceeds the exact-solver cap");
    for (const auto& p : grid()) p.validate();
  }

  std::vector<ChainParameters> grid() const {
    std::vector<ChainParameters> out;
    for (int n : n_sites)
      for (double d : interactions)
        for (double f : biases)
          for (double g : dephasings)
            for (double b : staggered) {
              ChainParameters p;
              p.n_sites = n;
              p.hopping = hopping;
              p.interaction = d;
              p.coupling = coupling;
              p.bias = f;
              p.dephasing = g;
              p.staggered = b;
              out.push_back(p);
            }
    return out;
  }
};

inline Json to_json(const SweepConfig& c) {
  return Json{{"n_sites", c.n_sites},
              {"interactions", c.interactions},
              {"biases", c.biases},
              {"dephasings", c.dephasings},
              {"staggered", c.staggered},
              {"hopping", c.hopping},
              {"coupling", c.coupling},
              {"solver", to_string(c.solver.kind)},
              {"exact_max_sites", c.solver.exact_max_sites},
              {"chi_max", c.solver.policy.chi_max},
              {"svd_cutoff", c.solver.policy.svd_cutoff},
              {"drift_tol", c.solver.schedule.drift_tol},
              {"threads", c.threads}};
}

inline const char* kSweepCsvHeader = "N,Delta,f,gamma,B,solver,J,S,purity,converged,residual";

inline std::string csv_row(const SolvedPoint& r) {
  std::ostringstream os;
  const auto& p = r.params;
  os << p.n_sites << ',' << csv_number(p.interaction) << ',' << csv_number(p.bias) << ','
     << csv_number(p.dephasing) << ',' << csv_number(p.staggered) << ',' << r.solver << ','
     << csv_number(r.measured() ? r.observables.current : NAN) << ','
     << csv_number(r.measured() ? r.observables.entropy : NAN) << ','
     << csv_number(r.measured() ? r.observables.purity : NAN) << ',' << (r.report.converged ? "true" : "false")
     << ',' << csv_number(r.report.residual);
  return os.str();
}

inline Json to_json(const SolvedPoint& r) {
  Json j{{"parameters", to_json(r.params)}, {"solver", r.solver}, {"convergence", to_json(r.report)}};
  if (r.measured()) j["observables"] = to_json(r.observables);
  if (r.solver == "mpo") j["truncation_weight"] = r.truncation_weight;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline std::string sweep_csv(const std::vector<SolvedPoint>& rows, const Json& config) {
  std::ostringstream os;
  os << "# ness " << kVersion << " schema_version=" << kSchemaVersion << " config=" << config.dump() << '\n';
  os << kSweepCsvHeader << '\n';
  for (const auto& r : rows) os << csv_row(r) << '\n';
  return os.str();
}

inline Json sweep_json(const std::vector<SolvedPoint>& rows, const Json& config) {
  Json out{{"schema_version", kSchemaVersion}, {"code_version", kVersion}, {"config", config}};
  Json arr = Json::array();
  for (const auto& r : rows) arr.push_back(to_json(r));
  out["rows"] = std::move(arr);
  return out;
}

namespace analysis_detail {

inline std::string point_key(const ChainParameters& p) {
  std::ostringstream os;
  os << std::setprecision(17) << p.n_sites << '|' << p.hopping << '|' << p.interaction << '|' << p.coupling << '|'
     << p.bias << '|' << p.dephasing << '|' << p.staggered;
  return os.str();
}

inline SolvedPoint point_from_journal(const Json& j) {
  SolvedPoint r;
  r.params = chain_parameters_from_json(j.at("parameters"));
  r.solver = j.at("solver").get<std::string>();
  const auto& c = j.at("convergence");
  r.report.converged = c.at("converged").get<bool>();
  r.report.residual = c.at("residual").is_null() ? NAN : c.at("residual").get<double>();
  r.report.homogeneity = c.at("homogeneity").is_null() ? NAN : c.at("homogeneity").get<double>();
  r.report.time = c.at("time").get<double>();
  r.report.steps = c.at("steps").get<long>();
  r.report.iterations = c.at("iterations").get<int>();
  r.report.message = c.at("message").get<std::string>();
  r.error = j.value("error", std::string{});
  r.truncation_weight = j.value("truncation_weight", 0.0);
  if (j.contains("observables")) {
    const auto& o = j.at("observables");
    auto& rec = r.observables;
    rec.current = o.at("current").get<double>();
    rec.current_profile = o.at("current_profile").get<std::vector<double>>();
    rec.density_profile = o.at("density_profile").get<std::vector<double>>();
    const auto rows = o.at("correlations").get<std::vector<std::vector<double>>>();
    rec.correlations.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < rows[i].size(); ++k)
        rec.correlations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    rec.entropy = o.at("entropy").get<double>();
    rec.purity = o.at("purity").get<double>();
    rec.sector_probs = o.at("sector_probs").get<std::vector<double>>();
    rec.dissipation = o.at("dissipation").get<double>();
  }
  return r;
}

}  // namespace analysis_detail

// Runs every grid point on a work queue. Finished points are appended to
// `<csv_path>.journal` as they complete so an interrupted sweep resumes
// where it stopped; the CSV and JSON outputs are written in grid order.
inline std::vector<SolvedPoint> run_sweep(const SweepConfig& config, const Json& effective_config = Json()) {
  config.validate();
  const auto grid = config.grid();
  std::vector<std::optional<SolvedPoint>> rows(grid.size());

  const std::string journal = config.csv_path.empty() ? std::string{} : config.csv_path + ".journal";
  if (!journal.empty() && std::filesystem::exists(journal)) {
    std::map<std::string, SolvedPoint> done;
    std::ifstream in(journal);
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      try {
        auto r = analysis_detail::point_from_journal(Json::parse(line));
        done.emplace(analysis_detail::point_key(r.params), std::move(r));
      } catch (const std::exception&) {
        // a torn final line from an interrupted run is recomputed
      }
    }
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (auto it = done.find(analysis_detail::point_key(grid[i])); it != done.end()) rows[i] = it->second;
  }

  std::mutex write_mutex;
  std::ofstream journal_out;
  if (!journal.empty()) journal_out.open(journal, std::ios::app);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      if (rows[i]) continue;
      SolvedPoint r = solve_point(grid[i], config.solver);
      std::lock_guard lock(write_mutex);
      if (journal_out) journal_out << to_json(r).dump() << '\n' << std::flush;
      rows[i] = std::move(r);
    }
  };
  unsigned threads = config.threads > 0 ? static_cast<unsigned>(config.threads) : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(grid.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::vector<SolvedPoint> out;
  for (auto& r : rows) out.push_back(std::move(*r));
  const Json cfg = effective_config.is_null() ? to_json(config) : effective_config;
  if (!config.csv_path.empty()) write_text(config.csv_path, sweep_csv(out, cfg));
  if (!config.json_path.empty()) write_text(config.json_path, sweep_json(out, cfg).dump(2) + "\n");
  if (journal_out) {
    journal_out.close();
    std::filesystem::remove(journal);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimal dephasing.

class BracketError : public SolverError {
 public:
  BracketError(const std::string& what, std::vector<std::pair<double, double>> scan)
      : SolverError(what), scan_(std::move(scan)) {}
  const std::vector<std::pair<double, double>>& scan() const { return scan_; }

 private:
  std::vector<std::pair<double, double>> scan_;
};

struct GammaOptOptions {
  double tol = 1e-3;  // final bracket width in gamma
  double scan_lo = 1e-3;
  double scan_hi = 10.0;
  int scan_points = 8;  // log-spaced, in addition to gamma = 0
};

struct GammaOptResult {
  double gamma_opt = 0.0;
  double current_max = 0.0;  // |<J>| at gamma_opt
  std::vector<std::pair<double, double>> scan;  // (gamma, |<J>|)
  int evaluations = 0;
};

// Maximizes |<J>| over gamma >= 0 for the parameters in `base` (its
// dephasing is ignored): coarse scan, unimodality check, golden section.
inline GammaOptResult find_gamma_opt(const ChainParameters& base, const SolverOptions& opts,
                                     const GammaOptOptions& go = {}) {
  base.validate();
  if (go.scan_points < 2 || !(go.scan_lo > 0.0) || !(go.scan_hi > go.scan_lo) || !(go.tol > 0.0))
    throw ValidationError("invalid gamma_opt scan settings");
  GammaOptResult res;
  auto eval = [&](double g) {
    ChainParameters p = base;
    p.dephasing = g;
    ++res.evaluations;
    return std::abs(current_of(p, opts));
  };
  std::vector<double> gs{0.0};
  for (int k = 0; k < go.scan_points; ++k)
    gs.push_back(go.scan_lo * std::pow(go.scan_hi / go.scan_lo, static_cast<double>(k) / (go.scan_points - 1)));
  for (double g : gs) res.scan.emplace_back(g, eval(g));

  const auto best = static_cast<std::size_t>(
      std::max_element(res.scan.begin(), res.scan.end(), [](auto& a, auto& b) { return a.second < b.second; }) -
      res.scan.begin());
  const double slack = 1e-9 * res.scan[best].second;
  for (std::size_t k = 0; k + 1 < res.scan.size(); ++k) {
    const bool rising = res.scan[k + 1].second >= res.scan[k].second - slack;
    const bool falling = res.scan[k + 1].second <= res.scan[k].second + slack;
    if ((k < best && !rising) || (k >= best && !falling)) {
      std::ostringstream os;
      os << "|<J>|(gamma) is not unimodal on the scan:";
      for (auto [g, j] : res.scan) os << " (" << g << ", " << j << ")";
      throw BracketError(os.str(), res.scan);
    }
  }
  if (best == 0) {
    res.gamma_opt = 0.0;
    res.current_max = res.scan[0].second;
    return res;
  }
  if (best + 1 == res.scan.size()) {
    std::ostringstream os;
    os << "|<J>| still rising at the scan edge gamma=" << res.scan.back().first;
    throw BracketError(os.str(), res.scan);
  }

  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = res.scan[best - 1].first, b = res.scan[best + 1].first;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = eval(c), fd = eval(d);
  while (b - a > go.tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = eval(d);
    }
  }
  res.gamma_opt = fc > fd ? c : d;
  res.current_max = std::max(fc, fd);
  if (res.scan[best].second > res.current_max) {
    res.gamma_opt = res.scan[best].first;
    res.current_max = res.scan[best].second;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Fits.

enum class FitModel { kPurePower, kPowerPlusOffset };

struct FitResult {
  FitModel model = FitModel::kPurePower;
  double exponent = 0.0;   // alpha / b / beta
  double prefactor = 0.0;  // kappa / a / c1
  double offset = 0.0;     // c, or the threshold Delta_0 of the threshold form
  double residual = 0.0;   // RMS of residuals (log space for the pure power law)
};

namespace analysis_detail {

inline void check_fit_input(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ValidationError("fit needs equally many x and y values");
  if (xs.size() < 3) throw ValidationError("fit needs at least 3 points");
}

// Minimizes f on [a, b] by golden section.
inline double golden_minimize(const std::function<double(double)>& f, double a, double b, double tol) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

// Scans a grid and refines the best cell by golden section.
inline double scan_minimize(const std::function<double(double)>& f, double lo, double hi, int cells, double tol) {
  double best_x = lo, best_f = f(lo);
  for (int k = 1; k <= cells; ++k) {
    const double x = lo + (hi - lo) * k / cells;
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  const double h = (hi - lo) / cells;
  return golden_minimize(f, std::max(lo, best_x - h), std::min(hi, best_x + h), tol);
}

// Linear least squares y = u * g(x) + v, returns (u, v, rms).
inline std::tuple<double, double, double> linear_fit(const std::vector<double>& g, const std::vector<double>& y) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, 0) = g[static_cast<std::size_t>(i)];
    a(i, 1) = 1.0;
    b[i] = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
  const double rms = std::sqrt((a * c - b).squaredNorm() / static_cast<double>(n));
  return {c[0], c[1], rms};
}

}  // namespace analysis_detail

// Pure power law y = kappa x^{-alpha}, or y = a x^{-b} + c.
inline FitResult fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys,
                               FitModel model = FitModel::kPurePower) {
  analysis_detail::check_fit_input(xs, ys);
  for (double x : xs)
    if (!(x > 0.0)) throw ValidationError("power-law fit needs positive x");
  FitResult r;
  r.model = model;
  if (model == FitModel::kPurePower) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!(ys[i] > 0.0)) throw ValidationError("log-space fit needs positive y");
      lx.push_back(std::log(xs[i]));
      ly.push_back(std::log(ys[i]));
    }
    const auto [slope, icpt, rms] = analysis_detail::linear_fit(lx, ly);
    r.exponent = -slope;
    r.prefactor = std::exp(icpt);
    r.residual = rms;
    return r;
  }
  // Variable projection: for fixed b the model is linear in (a, c).
  auto rms_at = [&](double b) {
    std::vector<double> g;
    for (double x : xs) g.push_back(std::pow(x, -b));
    return std::get<2>(analysis_detail::linear_fit(g, ys));
  };
  const double b = analysis_detail::scan_minimize(rms_at, 1e-3, 6.0, 600, 1e-12);
  std::vector<double> g;
  for (double x : xs) g.push_back(std::pow(x, -b));
  const auto [a, c, rms] = analysis_detail::linear_fit(g, ys);
  r.exponent = b;
  r.prefactor = a;
  r.offset = c;
  r.residual = rms;
  return r;
}

// Threshold form y = c1 (x - x0)^beta over points with y > 0; offset holds x0.
inline FitResult fit_threshold_power(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<double> px, py;
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i)
    if (ys[i] > 0.0) {
      px.push_back(xs[i]);
      py.push_back(ys[i]);
    }
  analysis_detail::check_fit_input(px, py);
  const double xmin = *std::min_element(px.begin(), px.end());
  const double span = *std::max_element(px.begin(), px.end()) - xmin;
  auto fit_at = [&](double x0) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < px.size(); ++i) {
      lx.push_back(std::log(px[i] - x0));
      ly.push_back(std::log(py[i]));
    }
    return analysis_detail::linear_fit(lx, ly);
  };
  const double lo = xmin - 10.0 * std::max(span, 1.0);
  const double hi = xmin - 1e-9 * std::max(span, 1.0);
  const double x0 = analysis_detail::scan_minimize([&](double x) { return std::get<2>(fit_at(x)); }, lo, hi, 2000, 1e-12);
  const auto [slope, icpt, rms] = fit_at(x0);
  FitResult r;
  r.model = FitModel::kPowerPlusOffset;
  r.exponent = slope;
  r.prefactor = std::exp(icpt);
  r.offset = x0;
  r.residual = rms;
  return r;
}

// Bisection for the interaction at which gamma_opt first becomes positive.
inline double locate_threshold(const std::function<double(double)>& gamma_opt_of, double lo, double hi,
                               double tol = 1e-3) {
  if (!(gamma_opt_of(lo) <= 0.0) || !(gamma_opt_of(hi) > 0.0))
    throw BracketError("threshold not bracketed: need gamma_opt(lo) = 0 and gamma_opt(hi) > 0", {});
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (gamma_opt_of(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Diffusive scaling.

struct DiffusionRow {
  int n_sites = 0;
  double current = 0.0;
  double density_drop = 0.0;  // <n_2> - <n_{N-1}>
  double ratio = 0.0;         // positive for forward bias
  bool converged = false;
};

struct DiffusionResult {
  std::vector<DiffusionRow> rows;
  FitResult fit;  // ratio = kappa (N - 3)^{-alpha}
};

inline DiffusionRow diffusion_row(const SolvedPoint& s) {
  const auto& o = s.observables;
  const int n = s.params.n_sites;
  DiffusionRow row;
  row.n_sites = n;
  row.current = o.current;
  row.density_drop = o.density_profile[1] - o.density_profile[static_cast<std::size_t>(n - 2)];
  row.ratio = -o.current / row.density_drop;
  row.converged = s.report.converged;
  return row;
}

inline DiffusionResult diffusion_check(const std::vector<int>& sizes, const ChainParameters& base,
                                       const SolverOptions& opts) {
  DiffusionResult out;
  std::vector<double> xs, ys;
  for (int n : sizes) {
    if (n < 5) throw ValidationError("diffusion check needs N >= 5");
    ChainParameters p = base;
    p.n_sites = n;
    const auto s = solve_point(p, opts);
    if (!s.ok()) throw SolverError("diffusion check failed at N=" + std::to_string(n) + ": " + s.error);
    out.rows.push_back(diffusion_row(s));
    xs.push_back(n - 3.0);
    ys.push_back(out.rows.back().ratio);
  }
  out.fit = fit_power_law(xs, ys);
  return out;
}

// ---------------------------------------------------------------------------
// Correlation profiles.

struct CorrelationPoint {
  int i = 0, j = 0;  // 1-based sites, j = N + 1 - i
  double r = 0.0;    // |i - j| / N
  double c = 0.0;
  bool boundary = false;
};

// Pairs placed symmetrically about the chain centre, by increasing r.
inline std::vector<CorrelationPoint> correlation_profile(const Eigen::MatrixXd& corr) {
  const auto n = static_cast<int>(corr.rows());
  std::vector<CorrelationPoint> out;
  for (int i = n / 2; i >= 1; --i) {
    const int j = n + 1 - i;
    if (j == i) continue;
    out.push_back({i, j, static_cast<double>(j - i) / n, corr(i - 1, j - 1), i == 1});
  }
  return out;
}

inline std::vector<CorrelationPoint> correlation_profile(const ObservableRecord& rec) {
  return correlation_profile(rec.correlations);
}

// First r at which C(r) changes sign (linear interpolation). Boundary pairs
// and points with |C| <= zero_tol are skipped.
inline std::optional<double> sign_change_position(const std::vector<CorrelationPoint>& prof,
                                                  double zero_tol = 1e-12) {
  const CorrelationPoint* prev = nullptr;
  for (const auto& pt : prof) {
    if (pt.boundary || std::abs(pt.c) <= zero_tol) continue;
    if (prev && (prev->c < 0.0) != (pt.c < 0.0)) return prev->r + (pt.r - prev->r) * prev->c / (prev->c - pt.c);
    prev = &pt;
  }
  return std::nullopt;
}

}  // namespace ness
