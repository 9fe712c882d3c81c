#pragma once

// Run configurations: a flat JSON object per subcommand, checked against a
// field table. Command-line values override file values; the merged object
// (defaults filled in) is the effective configuration echoed into outputs.

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ness/analysis.hpp"
#include "ness/io.hpp"
#include "ness/toy_model.hpp"

namespace ness {

inline constexpr const char* kOutputDirEnv = "NESS_OUTPUT_DIR";

enum class FieldType { kInt, kReal, kBool, kString, kIntList, kRealList };

struct Field {
  std::string key;
  FieldType type;
  Json fallback;
  std::string help;
};

using Schema = std::vector<Field>;

namespace config_detail {

inline std::vector<Field> chain_fields(double f = 0.5) {
  return {{"n", FieldType::kInt, 4, "number of sites N"},
          {"tau", FieldType::kReal, 1.0, "hopping amplitude"},
          {"delta", FieldType::kReal, 0.0, "interaction Delta"},
          {"coupling", FieldType::kReal, 1.0, "boundary coupling Gamma"},
          {"f", FieldType::kReal, f, "driving bias f in [-1, 1]"},
          {"gamma", FieldType::kReal, 0.0, "bulk dephasing rate"},
          {"B", FieldType::kReal, 0.0, "staggered potential amplitude"}};
}

inline std::vector<Field> exact_fields() {
  return {{"exact_max_sites", FieldType::kInt, kDefaultNullspaceCap, "largest N for the exact solver"},
          {"method", FieldType::kString, "auto", "null-space method: auto, direct, krylov"},
          {"residual_tol", FieldType::kReal, 1e-10, "generator residual tolerance"},
          {"direct_max_size", FieldType::kInt, 1000, "largest operator space for the direct solve"}};
}

inline std::vector<Field> mpo_fields(double drift_tol = 1e-6) {
  return {{"chi", FieldType::kInt, 128, "maximum bond dimension"},
          {"svd_cutoff", FieldType::kReal, 1e-10, "relative singular-value cutoff"},
          {"dt", FieldType::kReal, 0.1, "Trotter step"},
          {"order", FieldType::kInt, 2, "Trotter order (2 or 4)"},
          {"max_time", FieldType::kReal, 1000.0, "evolution time limit"},
          {"drift_tol", FieldType::kReal, drift_tol, "current drift tolerance"},
          {"truncation_budget", FieldType::kReal, 1e-4, "accumulated truncation weight budget"}};
}

inline std::vector<Field> output_fields(const std::string& prefix) {
  return {{"out_dir", FieldType::kString, "", "output directory (default $NESS_OUTPUT_DIR or .)"},
          {"prefix", FieldType::kString, prefix, "output file stem"}};
}

inline Schema join(std::initializer_list<std::vector<Field>> parts) {
  Schema s;
  for (const auto& p : parts) s.insert(s.end(), p.begin(), p.end());
  return s;
}

inline std::string type_name(FieldType t) {
  switch (t) {
    case FieldType::kInt: return "integer";
    case FieldType::kReal: return "number";
    case FieldType::kBool: return "boolean";
    case FieldType::kString: return "string";
    case FieldType::kIntList: return "list of integers";
    case FieldType::kRealList: return "list of numbers";
  }
  return "value";
}

inline bool matches(FieldType t, const Json& v) {
  switch (t) {
    case FieldType::kInt: return v.is_number_integer();
    case FieldType::kReal: return v.is_number();
    case FieldType::kBool: return v.is_boolean();
    case FieldType::kString: return v.is_string();
    case FieldType::kIntList:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_number_integer(); });
    case FieldType::kRealList:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_number(); });
  }
  return false;
}

inline double parse_real(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError("--" + key + ": '" + s + "' is not a number");
  return v;
}

inline long long parse_int(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError("--" + key + ": '" + s + "' is not an integer");
  return v;
}

inline std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace config_detail

inline Schema schema_for(const std::string& command) {
  using namespace config_detail;
  if (command == "ness-exact")
    return join({chain_fields(),
                 exact_fields(),
                 {{"evolve", FieldType::kBool, false, "time-evolve instead of the null-space solve"},
                  {"init", FieldType::kString, "mixed", "initial state for --evolve: mixed or random"},
                  {"seed", FieldType::kInt, 1, "seed for the random initial state"},
                  {"tol", FieldType::kReal, 1e-10, "evolution convergence tolerance"}},
                 output_fields("ness_exact")});
  if (command == "ness-mpo")
    return join({chain_fields(),
                 mpo_fields(),
                 {{"checkpoint", FieldType::kString, "", "write the final MPO here"},
                  {"resume", FieldType::kString, "", "start from this checkpoint"}},
                 output_fields("ness_mpo")});
  if (command == "toy")
    return join({{{"k", FieldType::kInt, 20, "number of configurations K"},
                  {"delta", FieldType::kReal, 2.0, "interaction Delta"},
                  {"coupling", FieldType::kReal, 1.0, "boundary coupling Gamma"},
                  {"f", FieldType::kReal, 1.0, "driving bias f in [0, 1]"},
                  {"gamma", FieldType::kReal, 0.0, "dephasing rate"},
                  {"grid", FieldType::kBool, false, "scan the f-gamma plane"},
                  {"f_points", FieldType::kInt, 21, "grid points in f over [0, 1]"},
                  {"gamma_max", FieldType::kReal, 0.5, "largest gamma of the grid"},
                  {"gamma_points", FieldType::kInt, 21, "grid points in gamma"}},
                 output_fields("toy")});
  if (command == "sweep")
    return join({{{"n", FieldType::kIntList, Json::array({4}), "site counts"},
                  {"delta", FieldType::kRealList, Json::array({0.0}), "interactions"},
                  {"f", FieldType::kRealList, Json::array({0.5}), "biases"},
                  {"gamma", FieldType::kRealList, Json::array({0.0}), "dephasing rates"},
                  {"B", FieldType::kRealList, Json::array({0.0}), "staggered potentials"},
                  {"tau", FieldType::kReal, 1.0, "hopping amplitude"},
                  {"coupling", FieldType::kReal, 1.0, "boundary coupling Gamma"},
                  {"solver", FieldType::kString, "auto", "exact, mpo or auto"},
                  {"threads", FieldType::kInt, 0, "worker threads (0: all cores)"}},
                 exact_fields(),
                 mpo_fields(),
                 output_fields("sweep")});
  if (command == "gamma-opt")
    return join({chain_fields(0.1),
                 {{"solver", FieldType::kString, "auto", "exact, mpo or auto"},
                  {"gamma_tol", FieldType::kReal, 1e-3, "golden-section tolerance in gamma"},
                  {"scan_lo", FieldType::kReal, 1e-3, "smallest positive scan gamma"},
                  {"scan_hi", FieldType::kReal, 10.0, "largest scan gamma"},
                  {"scan_points", FieldType::kInt, 8, "log-spaced scan points"}},
                 exact_fields(),
                 mpo_fields(),
                 output_fields("gamma_opt")});
  if (command == "diffusion")
    return join({{{"sizes", FieldType::kIntList, Json::array({8, 12, 16, 20}), "chain lengths"},
                  {"tau", FieldType::kReal, 1.0, "hopping amplitude"},
                  {"delta", FieldType::kReal, 2.0, "interaction Delta"},
                  {"coupling", FieldType::kReal, 1.0, "boundary coupling Gamma"},
                  {"f", FieldType::kReal, 1.0, "driving bias"},
                  {"gamma", FieldType::kReal, 1.0, "dephasing rate"},
                  {"solver", FieldType::kString, "mpo", "exact, mpo or auto"}},
                 exact_fields(),
                 mpo_fields(1e-7),
                 output_fields("diffusion")});
  if (command == "spectrum")
    return join({{{"n", FieldType::kInt, 12, "number of sites N"},
                  {"tau", FieldType::kReal, 1.0, "hopping amplitude"},
                  {"delta", FieldType::kReal, 10.0, "interaction Delta"},
                  {"B", FieldType::kReal, 0.0, "staggered potential amplitude"},
                  {"sector", FieldType::kInt, -1, "particle number (-1: N/2)"},
                  {"max_dim", FieldType::kInt, static_cast<int>(kDefaultSectorCap), "dense eigensolver cap"}},
                 output_fields("spectrum")});
  if (command == "predict")
    return join({chain_fields(1.0),
                 {{"pn", FieldType::kBool, false, "emit the sector probabilities"},
                  {"sector", FieldType::kInt, -1, "domain size for deviations (-1: N/2)"}},
                 output_fields("predict")});
  throw ValidationError("unknown subcommand '" + command + "'");
}

inline std::vector<std::string> commands() {
  return {"ness-exact", "ness-mpo", "toy", "sweep", "gamma-opt", "diffusion", "spectrum", "predict"};
}

// Parses a JSON document, reporting errors by line and column.
inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << origin << ":" << line << ":" << col << ": JSON parse error: " << e.what();
    throw ValidationError(os.str());
  }
}

inline Json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Json j = parse_json_text(ss.str(), path);
  if (!j.is_object()) throw ValidationError(path + ": config must be a JSON object");
  return j;
}

struct RunConfig {
  std::string command;
  Json values;  // effective configuration, every schema key present

  template <class T>
  T get(const std::string& key) const {
    return values.at(key).get<T>();
  }

  std::string output_dir() const {
    std::string d = get<std::string>("out_dir");
    if (d.empty()) {
      const char* env = std::getenv(kOutputDirEnv);
      d = env && *env ? env : ".";
    }
    return d;
  }
  std::string output_path(const std::string& suffix) const {
    return (std::filesystem::path(output_dir()) / (get<std::string>("prefix") + suffix)).string();
  }

  // Metadata block written into every output.
  Json metadata() const {
    return Json{{"schema_version", kSchemaVersion}, {"code_version", kVersion}, {"command", command}, {"config", values}};
  }
  std::string csv_preamble() const {
    return "# ness " + std::string(kVersion) + " schema_version=" + std::to_string(kSchemaVersion) +
           " command=" + command + " config=" + values.dump() + "\n";
  }
};

// Merges the config document (may be null) with raw command-line strings
// (key -> text, lists comma separated). Unknown keys and wrong types are
// rejected; the result is range-checked by the typed builders below.
inline RunConfig load_config(const std::string& command, const Json& file,
                             const std::map<std::string, std::string>& flags = {}) {
  const Schema schema = schema_for(command);
  RunConfig rc;
  rc.command = command;
  rc.values = Json::object();
  for (const auto& f : schema) rc.values[f.key] = f.fallback;

  if (!file.is_null()) {
    if (!file.is_object()) throw ValidationError("config must be a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (key == "schema_version") {
        if (!value.is_number_integer() || value.get<int>() != kSchemaVersion)
          throw ValidationError("unsupported config schema_version");
        continue;
      }
      if (key == "command") {
        if (!value.is_string() || value.get<std::string>() != command)
          throw ValidationError("config is for command '" + value.dump() + "', not '" + command + "'");
        continue;
      }
      const auto it = std::find_if(schema.begin(), schema.end(), [&](const Field& f) { return f.key == key; });
      if (it == schema.end()) throw ValidationError("unknown config key '" + key + "' for " + command);
      if (!config_detail::matches(it->type, value))
        throw ValidationError("config key '" + key + "' must be a " + config_detail::type_name(it->type));
      rc.values[key] = value;
    }
  }

  for (const auto& [key, text] : flags) {
    const auto it = std::find_if(schema.begin(), schema.end(), [&](const Field& f) { return f.key == key; });
    if (it == schema.end()) throw ValidationError("unknown option --" + key + " for " + command);
    switch (it->type) {
      case FieldType::kInt: rc.values[key] = config_detail::parse_int(key, text); break;
      case FieldType::kReal: rc.values[key] = config_detail::parse_real(key, text); break;
      case FieldType::kBool:
        if (text == "true" || text == "1" || text.empty()) rc.values[key] = true;
        else if (text == "false" || text == "0") rc.values[key] = false;
        else throw ValidationError("--" + key + " expects true or false");
        break;
      case FieldType::kString: rc.values[key] = text; break;
      case FieldType::kIntList: {
        Json arr = Json::array();
        for (const auto& s : config_detail::split(text)) arr.push_back(config_detail::parse_int(key, s));
        rc.values[key] = arr;
        break;
      }
      case FieldType::kRealList: {
        Json arr = Json::array();
        for (const auto& s : config_detail::split(text)) arr.push_back(config_detail::parse_real(key, s));
        rc.values[key] = arr;
        break;
      }
    }
  }
  return rc;
}

inline RunConfig load_config(const std::string& command, const std::string& path,
                             const std::map<std::string, std::string>& flags = {}) {
  return load_config(command, path.empty() ? Json() : load_config_file(path), flags);
}

// ---------------------------------------------------------------------------
// Typed views.

inline ChainParameters chain_parameters(const RunConfig& rc) {
  ChainParameters p;
  p.n_sites = rc.get<int>("n");
  p.hopping = rc.get<double>("tau");
  p.interaction = rc.get<double>("delta");
  p.coupling = rc.get<double>("coupling");
  p.bias = rc.get<double>("f");
  p.dephasing = rc.get<double>("gamma");
  p.staggered = rc.get<double>("B");
  p.validate();
  return p;
}

inline NullspaceOptions nullspace_options(const RunConfig& rc) {
  NullspaceOptions o;
  const auto m = rc.get<std::string>("method");
  if (m == "auto") o.method = NullspaceMethod::kAuto;
  else if (m == "direct") o.method = NullspaceMethod::kDirect;
  else if (m == "krylov") o.method = NullspaceMethod::kKrylov;
  else throw ValidationError("method must be auto, direct or krylov (got '" + m + "')");
  o.residual_tol = rc.get<double>("residual_tol");
  o.direct_max_size = rc.get<std::int64_t>("direct_max_size");
  if (!(o.residual_tol > 0.0)) throw ValidationError("residual_tol must be > 0");
  return o;
}

inline TruncationPolicy truncation_policy(const RunConfig& rc) {
  TruncationPolicy t;
  t.chi_max = rc.get<int>("chi");
  t.svd_cutoff = rc.get<double>("svd_cutoff");
  t.validate();
  return t;
}

inline NessSchedule ness_schedule(const RunConfig& rc) {
  NessSchedule s;
  s.stages = {{rc.get<double>("dt"), rc.get<int>("order"), rc.get<double>("max_time")}};
  s.drift_tol = rc.get<double>("drift_tol");
  s.truncation_budget = rc.get<double>("truncation_budget");
  s.validate();
  return s;
}

inline SolverOptions solver_options(const RunConfig& rc) {
  SolverOptions o;
  o.kind = solver_kind_from_string(rc.get<std::string>("solver"));
  o.exact_max_sites = rc.get<int>("exact_max_sites");
  if (o.exact_max_sites < 2 || o.exact_max_sites > kDefaultVectorizedCap)
    throw ValidationError("exact_max_sites must lie in 2.." + std::to_string(kDefaultVectorizedCap));
  o.nullspace = nullspace_options(rc);
  o.policy = truncation_policy(rc);
  o.schedule = ness_schedule(rc);
  return o;
}

inline SweepConfig sweep_config(const RunConfig& rc) {
  SweepConfig c;
  c.n_sites = rc.get<std::vector<int>>("n");
  c.interactions = rc.get<std::vector<double>>("delta");
  c.biases = rc.get<std::vector<double>>("f");
  c.dephasings = rc.get<std::vector<double>>("gamma");
  c.staggered = rc.get<std::vector<double>>("B");
  c.hopping = rc.get<double>("tau");
  c.coupling = rc.get<double>("coupling");
  c.solver = solver_options(rc);
  c.threads = rc.get<int>("threads");
  c.validate();
  return c;
}

inline ToyParameters toy_parameters(const RunConfig& rc) {
  ToyParameters t;
  t.n_levels = rc.get<int>("k");
  t.interaction = rc.get<double>("delta");
  t.coupling = rc.get<double>("coupling");
  t.bias = rc.get<double>("f");
  t.dephasing = rc.get<double>("gamma");
  t.validate();
  return t;
}

}  // namespace ness
