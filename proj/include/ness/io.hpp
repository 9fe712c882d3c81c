#pragma once

// JSON and CSV serialization: parameters, observable records, MPO
// checkpoints. Every document carries schema_version.

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ness/core.hpp"
#include "ness/exact_solver.hpp"
#include "ness/model.hpp"
#include "ness/mpo.hpp"

namespace ness {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::ordered_json;

inline Json to_json(const ChainParameters& p) {
  return Json{{"n_sites", p.n_sites},   {"hopping", p.hopping}, {"interaction", p.interaction},
              {"coupling", p.coupling}, {"bias", p.bias},       {"dephasing", p.dephasing},
              {"staggered", p.staggered}};
}

inline ChainParameters chain_parameters_from_json(const Json& j) {
  ChainParameters p;
  for (const auto& [key, value] : j.items()) {
    if (key == "n_sites") p.n_sites = value.get<int>();
    else if (key == "hopping") p.hopping = value.get<double>();
    else if (key == "interaction") p.interaction = value.get<double>();
    else if (key == "coupling") p.coupling = value.get<double>();
    else if (key == "bias") p.bias = value.get<double>();
    else if (key == "dephasing") p.dephasing = value.get<double>();
    else if (key == "staggered") p.staggered = value.get<double>();
    else throw ValidationError("unknown parameter key '" + key + "'");
  }
  p.validate();
  return p;
}

inline Json to_json(const ObservableRecord& r) {
  Json c = Json::array();
  for (Eigen::Index i = 0; i < r.correlations.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < r.correlations.cols(); ++j) row.push_back(r.correlations(i, j));
    c.push_back(std::move(row));
  }
  return Json{{"current", r.current},
              {"current_profile", r.current_profile},
              {"density_profile", r.density_profile},
              {"correlations", std::move(c)},
              {"entropy", r.entropy},
              {"purity", r.purity},
              {"sector_probs", r.sector_probs},
              {"dissipation", r.dissipation}};
}

inline Json to_json(const ConvergenceReport& r) {
  auto finite = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
  return Json{{"converged", r.converged},   {"time", r.time},
              {"steps", r.steps},           {"iterations", r.iterations},
              {"residual", finite(r.residual)}, {"homogeneity", finite(r.homogeneity)},
              {"message", r.message}};
}

// ---------------------------------------------------------------------------
// MPO checkpoints.

inline Json checkpoint_json(const MpoState& s, const ChainParameters& p) {
  Json tensors = Json::array();
  for (const auto& a : s.sites) {
    std::vector<double> re, im;
    re.reserve(static_cast<std::size_t>(a.size()));
    im.reserve(static_cast<std::size_t>(a.size()));
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      re.push_back(a.data()[k].real());
      im.push_back(a.data()[k].imag());
    }
    tensors.push_back(Json{{"left", a.rows() / 4}, {"phys", 4}, {"right", a.cols()}, {"re", re}, {"im", im}});
  }
  return Json{{"schema_version", kSchemaVersion},
              {"format", "ness-mpo-checkpoint"},
              {"code_version", kVersion},
              {"layout", "row = left + Dl * (ket + 2 * bra), column = right, column-major"},
              {"parameters", to_json(p)},
              {"time", s.time},
              {"center", s.center},
              {"truncation_weight", s.truncation_weight},
              {"tensors", std::move(tensors)}};
}

inline std::pair<MpoState, ChainParameters> checkpoint_from_json(const Json& j) {
  if (j.value("format", std::string{}) != "ness-mpo-checkpoint")
    throw ValidationError("not an MPO checkpoint document");
  if (j.value("schema_version", 0) != kSchemaVersion) throw ValidationError("unsupported checkpoint schema_version");
  MpoState s;
  ChainParameters p = chain_parameters_from_json(j.at("parameters"));
  s.time = j.at("time").get<double>();
  s.center = j.at("center").get<int>();
  s.truncation_weight = j.at("truncation_weight").get<double>();
  Eigen::Index prev_right = 1;
  for (const auto& t : j.at("tensors")) {
    const auto left = t.at("left").get<Eigen::Index>(), right = t.at("right").get<Eigen::Index>();
    if (t.at("phys").get<int>() != 4 || left != prev_right) throw ValidationError("inconsistent checkpoint tensor shapes");
    const auto re = t.at("re").get<std::vector<double>>(), im = t.at("im").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(re.size()) != left * 4 * right || re.size() != im.size())
      throw ValidationError("checkpoint tensor data size mismatch");
    DenseMatrix a(left * 4, right);
    for (std::size_t k = 0; k < re.size(); ++k) a.data()[k] = Complex(re[k], im[k]);
    s.sites.push_back(std::move(a));
    prev_right = right;
  }
  if (s.n_sites() != p.n_sites || prev_right != 1) throw ValidationError("checkpoint chain length mismatch");
  return {std::move(s), p};
}

inline void save_checkpoint(const std::string& path, const MpoState& s, const ChainParameters& p) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << checkpoint_json(s, p).dump();
}

inline std::pair<MpoState, ChainParameters> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV helpers.

inline std::string csv_number(double x) {
  if (!std::isfinite(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << text;
}

}  // namespace ness
