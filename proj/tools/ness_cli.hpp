#pragma once

// Subcommand dispatch for the ness command-line tool. Exit codes: 0 success,
// 2 invalid input, 3 solver failure (partial results are still written).

#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ness/analysis.hpp"
#include "ness/config.hpp"
#include "ness/exact_solver.hpp"
#include "ness/io.hpp"
#include "ness/mpo.hpp"
#include "ness/predictions.hpp"
#include "ness/toy_model.hpp"

namespace ness::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitSolver = 3;

struct Outputs {
  std::vector<std::string> files;
  void write(const std::string& path, const std::string& text) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path().empty()
                                            ? std::filesystem::path(".")
                                            : std::filesystem::path(path).parent_path());
    write_text(path, text);
    files.push_back(path);
  }
  void write_json(const std::string& path, const Json& j) { write(path, j.dump(2) + "\n"); }
};

inline std::string num(double x, int digits = 12) {
  std::ostringstream os;
  os << std::setprecision(digits) << x;
  return os.str();
}

inline Json nullable(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

// ---------------------------------------------------------------------------

inline int cmd_ness_exact(const RunConfig& rc, std::ostream& out, Outputs& files) {
  const ChainParameters p = chain_parameters(rc);
  SolvedPoint r;
  if (rc.get<bool>("evolve")) {
    const auto init = rc.get<std::string>("init");
    if (init != "mixed" && init != "random") throw ValidationError("init must be mixed or random");
    const auto gen = chain_generator(p, rc.get<int>("exact_max_sites"));
    const DensityMatrix rho0 = init == "random"
                                   ? DensityMatrix::random(p.n_sites, static_cast<std::uint64_t>(rc.get<long>("seed")))
                                   : DensityMatrix::maximally_mixed(p.n_sites);
    EvolveOptions eo;
    eo.tol = rc.get<double>("tol");
    r.params = p;
    r.solver = "exact-evolve";
    try {
      auto [rho, rep] = evolve_to_ness(gen, rho0, p, eo);
      r.observables = measure(rho, p);
      r.report = rep;
      if (!rep.converged) r.error = rep.message.empty() ? "not converged" : rep.message;
    } catch (const SolverError& e) {
      r.error = e.what();
    }
  } else {
    SolverOptions so;
    so.kind = SolverKind::kExact;
    so.exact_max_sites = rc.get<int>("exact_max_sites");
    so.nullspace = nullspace_options(rc);
    r = solve_point(p, so);
  }
  Json doc = rc.metadata();
  doc["result"] = to_json(r);
  files.write_json(rc.output_path(".json"), doc);
  files.write(rc.output_path(".csv"), rc.csv_preamble() + kSweepCsvHeader + "\n" + csv_row(r) + "\n");
  if (r.measured()) out << "J = " << num(r.observables.current) << " (N=" << p.n_sites << ", " << r.solver;
  else out << "J unavailable (N=" << p.n_sites << ", " << r.solver;
  out << ", " << (r.report.converged ? "converged" : "not converged") << ", residual " << num(r.report.residual, 3)
      << ")\n";
  if (!r.ok()) {
    out << "error: " << r.error << "\n";
    return kExitSolver;
  }
  return kExitOk;
}

inline int cmd_ness_mpo(const RunConfig& rc, std::ostream& out, Outputs& files) {
  const ChainParameters p = chain_parameters(rc);
  const TruncationPolicy pol = truncation_policy(rc);
  const NessSchedule sch = ness_schedule(rc);
  MpoState start;
  if (const auto resume = rc.get<std::string>("resume"); !resume.empty()) {
    auto [s, saved] = load_checkpoint(resume);
    if (saved.n_sites != p.n_sites) throw ValidationError("checkpoint has N=" + std::to_string(saved.n_sites));
    start = std::move(s);
  } else {
    std::vector<double> dens;
    for (int j = 0; j < p.n_sites; ++j)
      dens.push_back(0.5 * (1.0 + p.bias) - p.bias * (j + 0.5) / p.n_sites);
    start = mpo_from_densities(dens);
  }
  auto [state, rep] = evolve_mpo(std::move(start), p, pol, sch);
  if (const auto ck = rc.get<std::string>("checkpoint"); !ck.empty()) {
    save_checkpoint(ck, state, p);
    files.files.push_back(ck);
  }
  SolvedPoint r;
  r.params = p;
  r.solver = "mpo";
  r.observables = measure_mpo(state, p);
  r.report = rep.convergence;
  r.truncation_weight = rep.truncation_weight;
  if (!rep.convergence.converged) r.error = rep.convergence.message;

  Json doc = rc.metadata();
  doc["result"] = to_json(r);
  doc["mpo"] = Json{{"max_bond", rep.max_bond},
                    {"bond_dims", state.bond_dims()},
                    {"drift", nullable(rep.drift)},
                    {"max_step_discard", rep.max_step_discard},
                    {"truncation_budget_exceeded", rep.truncation_budget_exceeded},
                    {"trace", rep.trace}};
  files.write_json(rc.output_path(".json"), doc);
  files.write(rc.output_path(".csv"), rc.csv_preamble() + kSweepCsvHeader + "\n" + csv_row(r) + "\n");
  out << "J = " << num(r.observables.current) << " (N=" << p.n_sites << ", mpo, t=" << num(state.time, 6)
      << ", chi=" << rep.max_bond << ", drift " << num(rep.drift, 3) << ", "
      << (r.report.converged ? "converged" : "not converged") << ")\n";
  if (rep.truncation_budget_exceeded) out << "warning: " << rep.convergence.message << "\n";
  return r.report.converged ? kExitOk : kExitSolver;
}

inline int cmd_toy(const RunConfig& rc, std::ostream& out, Outputs& files) {
  const ToyParameters base = toy_parameters(rc);
  Json doc = rc.metadata();
  std::ostringstream csv;
  csv << rc.csv_preamble() << "K,Delta,Gamma,f,gamma,J,J_closed\n";
  auto row = [&](const ToyParameters& t) {
    const double j = toy_ness_current(t), c = toy_closed_form(t);
    csv << t.n_levels << ',' << csv_number(t.interaction) << ',' << csv_number(t.coupling) << ','
        << csv_number(t.bias) << ',' << csv_number(t.dephasing) << ',' << csv_number(j) << ',' << csv_number(c)
        << '\n';
    return Json{{"f", t.bias}, {"gamma", t.dephasing}, {"current", j}, {"closed_form", c}};
  };
  if (rc.get<bool>("grid")) {
    const int nf = rc.get<int>("f_points"), ng = rc.get<int>("gamma_points");
    const double gmax = rc.get<double>("gamma_max");
    if (nf < 2 || ng < 2 || !(gmax > 0.0)) throw ValidationError("grid needs >= 2 points per axis and gamma_max > 0");
    Json rows = Json::array();
    double jmax = 0.0;
    for (int a = 0; a < nf; ++a)
      for (int b = 0; b < ng; ++b) {
        ToyParameters t = base;
        t.bias = static_cast<double>(a) / (nf - 1);
        t.dephasing = gmax * b / (ng - 1);
        rows.push_back(row(t));
        jmax = std::max(jmax, std::abs(rows.back()["current"].get<double>()));
      }
    doc["rows"] = rows;
    out << "toy grid: " << nf * ng << " points, max |J| = " << num(jmax, 6) << "\n";
  } else {
    const Json r = row(base);
    doc["rows"] = Json::array({r});
    const double j = r["current"].get<double>(), c = r["closed_form"].get<double>();
    out << "J = " << num(j) << ", closed form " << num(c) << " (relative difference "
        << num(c != 0.0 ? (j - c) / c : 0.0, 4) << ")\n";
  }
  files.write_json(rc.output_path(".json"), doc);
  files.write(rc.output_path(".csv"), csv.str());
  return kExitOk;
}

inline int cmd_sweep(const RunConfig& rc, std::ostream& out, Outputs& files) {
  SweepConfig cfg = sweep_config(rc);
  cfg.csv_path = rc.output_path(".csv");
  cfg.json_path = rc.output_path(".json");
  std::filesystem::create_directories(rc.output_dir());
  const auto rows = run_sweep(cfg, rc.metadata());
  files.files.push_back(cfg.csv_path);
  files.files.push_back(cfg.json_path);
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const SolvedPoint& r) { return !r.ok(); });
  out << "sweep: " << rows.size() << " points, " << rows.size() - static_cast<std::size_t>(failed) << " converged\n";
  for (const auto& r : rows)
    if (!r.ok()) out << "  failed " << analysis_detail::point_key(r.params) << ": " << r.error << "\n";
  return failed ? kExitSolver : kExitOk;
}

inline int cmd_gamma_opt(const RunConfig& rc, std::ostream& out, Outputs& files) {
  ChainParameters p = chain_parameters(rc);
  const SolverOptions so = solver_options(rc);
  GammaOptOptions go;
  go.tol = rc.get<double>("gamma_tol");
  go.scan_lo = rc.get<double>("scan_lo");
  go.scan_hi = rc.get<double>("scan_hi");
  go.scan_points = rc.get<int>("scan_points");
  Json doc = rc.metadata();
  auto scan_csv = [&](const std::vector<std::pair<double, double>>& scan) {
    std::ostringstream os;
    os << rc.csv_preamble() << "gamma,abs_J\n";
    for (auto [g, j] : scan) os << csv_number(g) << ',' << csv_number(j) << '\n';
    return os.str();
  };
  auto scan_json = [](const std::vector<std::pair<double, double>>& scan) {
    Json a = Json::array();
    for (auto [g, j] : scan) a.push_back(Json{{"gamma", g}, {"abs_current", j}});
    return a;
  };
  try {
    const auto res = find_gamma_opt(p, so, go);
    doc["gamma_opt"] = res.gamma_opt;
    doc["current_max"] = res.current_max;
    doc["evaluations"] = res.evaluations;
    doc["scan"] = scan_json(res.scan);
    files.write_json(rc.output_path(".json"), doc);
    files.write(rc.output_path(".csv"), scan_csv(res.scan));
    out << "gamma_opt = " << num(res.gamma_opt, 6) << ", |J|max = " << num(res.current_max) << " ("
        << res.evaluations << " solves)\n";
    return kExitOk;
  } catch (const BracketError& e) {
    doc["error"] = e.what();
    doc["scan"] = scan_json(e.scan());
    files.write_json(rc.output_path(".json"), doc);
    files.write(rc.output_path(".csv"), scan_csv(e.scan()));
    out << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}

inline int cmd_diffusion(const RunConfig& rc, std::ostream& out, Outputs& files) {
  const SolverOptions so = solver_options(rc);
  ChainParameters base;
  base.hopping = rc.get<double>("tau");
  base.interaction = rc.get<double>("delta");
  base.coupling = rc.get<double>("coupling");
  base.bias = rc.get<double>("f");
  base.dephasing = rc.get<double>("gamma");
  const auto sizes = rc.get<std::vector<int>>("sizes");
  if (sizes.size() < 3) throw ValidationError("diffusion needs at least 3 sizes");
  for (int n : sizes)
    if (n < 5) throw ValidationError("diffusion check needs N >= 5");

  std::ostringstream csv;
  csv << rc.csv_preamble() << "N,J,delta_n,ratio,converged\n";
  Json rows = Json::array();
  std::vector<double> xs, ys;
  std::string failure;
  for (int n : sizes) {
    ChainParameters p = base;
    p.n_sites = n;
    const auto s = solve_point(p, so);
    if (!s.measured()) {
      failure = "N=" + std::to_string(n) + ": " + s.error;
      break;
    }
    const auto d = diffusion_row(s);
    csv << n << ',' << csv_number(d.current) << ',' << csv_number(d.density_drop) << ',' << csv_number(d.ratio) << ','
        << (d.converged ? "true" : "false") << '\n';
    rows.push_back(Json{{"n_sites", n},
                        {"current", d.current},
                        {"density_drop", d.density_drop},
                        {"ratio", d.ratio},
                        {"converged", d.converged},
                        {"solver", s.solver},
                        {"truncation_weight", s.truncation_weight}});
    out << "N=" << n << " J=" << num(d.current, 8) << " ratio=" << num(d.ratio, 8) << (d.converged ? "" : " (not converged)")
        << "\n";
    if (!s.ok()) {
      failure = "N=" + std::to_string(n) + ": " + s.error;
      break;
    }
    xs.push_back(n - 3.0);
    ys.push_back(d.ratio);
  }
  Json doc = rc.metadata();
  doc["rows"] = rows;
  if (failure.empty()) {
    const auto fit = fit_power_law(xs, ys);
    doc["fit"] = Json{{"kappa", fit.prefactor}, {"alpha", fit.exponent}, {"residual", fit.residual}};
    out << "fit ratio = kappa (N-3)^-alpha: alpha = " << num(fit.exponent, 6) << ", kappa = " << num(fit.prefactor, 6)
        << "\n";
  } else {
    doc["error"] = failure;
    out << "error: " << failure << "\n";
  }
  files.write_json(rc.output_path(".json"), doc);
  files.write(rc.output_path(".csv"), csv.str());
  return failure.empty() ? kExitOk : kExitSolver;
}

inline int cmd_spectrum(const RunConfig& rc, std::ostream& out, Outputs& files) {
  ChainParameters p;
  p.n_sites = rc.get<int>("n");
  p.hopping = rc.get<double>("tau");
  p.interaction = rc.get<double>("delta");
  p.staggered = rc.get<double>("B");
  p.validate();
  int n = rc.get<int>("sector");
  if (n < 0) n = p.n_sites / 2;
  const auto spec = sector_spectrum(build_hamiltonian(p), p.n_sites, n, rc.get<int>("max_dim"));
  const auto bound = bound_domain_state(spec);
  const double shift = spectrum_shift(p);
  const bool strong = std::abs(p.interaction) > 0.5;

  std::ostringstream csv;
  csv << rc.csv_preamble() << "index,energy,shifted_energy\n";
  for (Eigen::Index k = 0; k < spec.energies.size(); ++k)
    csv << k << ',' << csv_number(spec.energies[k]) << ',' << csv_number(spec.energies[k] - shift) << '\n';
  std::ostringstream dev;
  dev << rc.csv_preamble() << "site,deviation,predicted\n";
  Json devs = Json::array();
  for (int j = 1; j <= p.n_sites; ++j) {
    const double pred = strong ? predict::domain_deviation(n, p.n_sites, p.interaction, j) : NAN;
    dev << j << ',' << csv_number(bound.deviation[static_cast<std::size_t>(j - 1)]) << ',' << csv_number(pred) << '\n';
    devs.push_back(Json{{"site", j}, {"deviation", bound.deviation[static_cast<std::size_t>(j - 1)]},
                        {"predicted", nullable(pred)}});
  }
  Json doc = rc.metadata();
  doc["sector"] = n;
  doc["dimension"] = spec.states.size();
  doc["energies"] = std::vector<double>(spec.energies.data(), spec.energies.data() + spec.energies.size());
  doc["shift"] = shift;
  doc["bound_state"] = Json{{"index", bound.index},   {"energy", bound.energy}, {"overlap", bound.overlap},
                            {"extremal", bound.extremal}, {"gap", bound.gap},       {"deviations", devs}};
  files.write_json(rc.output_path(".json"), doc);
  files.write(rc.output_path(".csv"), csv.str());
  files.write(rc.output_path("_deviation.csv"), dev.str());
  out << "sector n=" << n << " (dim " << spec.states.size() << "): bound domain state E=" << num(bound.energy, 8)
      << ", |<B_n|Psi>|^2=" << num(bound.overlap, 6) << (bound.extremal ? ", extremal" : ", interior") << "\n";
  return kExitOk;
}

inline int cmd_predict(const RunConfig& rc, std::ostream& out, Outputs& files) {
  const ChainParameters p = chain_parameters(rc);
  const double d = std::abs(p.interaction);
  Json doc = rc.metadata();
  const double j0 = predict::delta0_current(p.n_sites, p.bias, p.coupling, p.dephasing);
  doc["delta0_current"] = j0;
  doc["purity_defect"] = d > 1.0 ? Json(1.0 - predict::purity_prediction(p.interaction)) : Json(nullptr);
  doc["localization_length"] = d > 1.0 ? Json(predict::localization_length(p.interaction)) : Json(nullptr);
  int n = rc.get<int>("sector");
  if (n < 0) n = p.n_sites / 2;
  if (d > 0.5) {
    std::vector<double> dev;
    for (int j = 1; j <= p.n_sites; ++j) dev.push_back(predict::domain_deviation(n, p.n_sites, p.interaction, j));
    doc["domain_deviation"] = Json{{"sector", n}, {"values", dev}};
  }
  out << "Delta=0 current " << num(j0);
  if (d > 1.0) out << ", 1 - purity " << num(1.0 - predict::purity_prediction(p.interaction), 6);
  out << "\n";
  if (rc.get<bool>("pn")) {
    const auto closed = predict::sector_probs_closed_form(p.n_sites, p.interaction);
    const auto balance = predict::sector_probs_detailed_balance(p.n_sites, p.interaction);
    doc["sector_probs"] = Json{{"closed_form", closed}, {"detailed_balance", balance}};
    std::ostringstream csv;
    csv << rc.csv_preamble() << "n,closed_form,detailed_balance\n";
    for (std::size_t k = 0; k < closed.size(); ++k)
      csv << k << ',' << csv_number(closed[k]) << ',' << csv_number(balance[k]) << '\n';
    files.write(rc.output_path(".csv"), csv.str());
    out << "p_n closed form:";
    for (double x : closed) out << ' ' << num(x, 4);
    out << "\np_n detailed balance:";
    for (double x : balance) out << ' ' << num(x, 4);
    out << "\n";
  }
  files.write_json(rc.output_path(".json"), doc);
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Boundary-driven XXZ chain: stationary states, toy model and closed forms", "ness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  struct Bound {
    std::string config;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> options;
  };
  std::map<std::string, std::unique_ptr<Bound>> bound;
  const std::map<std::string, std::string> about{
      {"ness-exact", "stationary state of one chain, exact"},
      {"ness-mpo", "stationary state of one chain, MPO evolution"},
      {"toy", "toy model point or f-gamma grid"},
      {"sweep", "parameter grid over N, Delta, f, gamma, B"},
      {"gamma-opt", "dephasing rate that maximizes |J|"},
      {"diffusion", "J / density drop against chain length"},
      {"spectrum", "sector spectrum and bound domain state"},
      {"predict", "closed-form reference values"}};
  for (const auto& name : commands()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    auto b = std::make_unique<Bound>();
    sub->add_option("--config", b->config, "JSON config file; flags override its values");
    for (const auto& f : schema_for(name)) {
      std::string& slot = b->raw[f.key];
      std::string fallback;
      if (f.fallback.is_string()) {
        fallback = f.fallback.get<std::string>();
      } else if (f.fallback.is_array()) {
        for (const auto& v : f.fallback) fallback += (fallback.empty() ? "" : ",") + v.dump();
      } else {
        fallback = f.fallback.dump();
      }
      auto* opt = sub->add_option("--" + f.key, slot, f.help + (fallback.empty() ? "" : " [" + fallback + "]"));
      if (f.type == FieldType::kBool) opt->expected(0, 1);
      if (f.type == FieldType::kIntList || f.type == FieldType::kRealList)
        opt->description(opt->get_description() + " (comma separated)");
      b->options[f.key] = opt;
    }
    bound[name] = std::move(b);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const auto& b = *bound[name];
  try {
    std::map<std::string, std::string> flags;
    for (const auto& [key, opt] : b.options)
      if (opt->count() > 0) flags[key] = b.raw.at(key);
    const RunConfig rc = load_config(name, b.config, flags);
    Outputs files;
    int code = kExitOk;
    if (name == "ness-exact") code = cmd_ness_exact(rc, out, files);
    else if (name == "ness-mpo") code = cmd_ness_mpo(rc, out, files);
    else if (name == "toy") code = cmd_toy(rc, out, files);
    else if (name == "sweep") code = cmd_sweep(rc, out, files);
    else if (name == "gamma-opt") code = cmd_gamma_opt(rc, out, files);
    else if (name == "diffusion") code = cmd_diffusion(rc, out, files);
    else if (name == "spectrum") code = cmd_spectrum(rc, out, files);
    else if (name == "predict") code = cmd_predict(rc, out, files);
    for (const auto& f : files.files) out << "wrote " << f << "\n";
    return code;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const Json::exception& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ness::cli
