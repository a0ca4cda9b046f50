#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "dispersive/equation.hpp"
#include "dispersive/errors.hpp"
#include "dispersive/initial_data.hpp"
#include "dispersive/property_lab.hpp"
#include "dispersive/timestepping.hpp"

namespace dispersive::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Public exit-code table.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  ///< I/O errors, verification mismatches
  kExitValidation = 2,
  kExitBlowup = 3,
  kExitResolution = 4,
  kExitExperiment = 5,
};

// ---------------------------------------------------------------------------
// Hashing and formatting

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Configuration

struct NamedSpec {
  std::string name;
  Params params;
  std::vector<double> coeffs;  ///< custom polynomial nonlinearity only
};

struct ProblemConfig {
  NamedSpec symbol{"whitham", {}, {}};
  NamedSpec nonlinearity{"power", {{"p", 2.0}}, {}};
  InitialSpec u0;
  std::size_t n = 256;
  int period_multiple = 1;
  double s_index = 2.0;
};

struct ExperimentConfig {
  std::string name;
  json params;  ///< validated, defaults filled
};

struct OutputConfig {
  std::string directory;
  std::string diagnostics_format = "tsv";
  bool snapshots = true;
};

struct SweepConfig {
  unsigned threads = 0;  ///< 0: hardware concurrency
  std::vector<json> jobs;
};

struct RunConfig {
  ProblemConfig problem;
  SolverConfig solver;
  std::optional<ExperimentConfig> experiment;
  OutputConfig output;
  std::uint64_t seed = 0;
  std::optional<SweepConfig> sweep;
  json source;  ///< the document as given, for sweep patching
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"convergence",    "conservation", "time_derivative",
                                              "continuous_dependence", "wave_breaking", "composition",
                                              "localizing",     "norm_equivalence"};
  return names;
}

namespace detail {

using ::dispersive::detail::join;

inline std::string child(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

/// Reads keys from a JSON object and rejects the ones never asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    known_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return as_number(j_.at(key), child(path_, key));
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(child(path_, key), "expected an integer");
    return v.get<std::int64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(child(path_, key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(child(path_, key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    const auto p = child(path_, key);
    if (!v.is_array()) throw ConfigError(p, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], p + "[" + std::to_string(i) + "]"));
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!known_.count(key)) {
        std::vector<std::string> expected(known_.begin(), known_.end());
        throw ConfigError(child(path_, key), "unknown key; expected one of: " + join(expected));
      }
  }

  const std::string& path() const noexcept { return path_; }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
    return d;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string canonical_param_name(const std::string& key) {
  if (key == "κ") return "kappa";
  if (key == "α") return "alpha";
  return key;
}

/// Parses `name` or `name(key=value, ...)`.
inline NamedSpec parse_call(const std::string& text, const std::string& path) {
  NamedSpec out;
  const auto open = text.find('(');
  out.name = trim(text.substr(0, open));
  if (out.name.empty()) throw ConfigError(path, "missing name in '" + text + "'");
  if (open == std::string::npos) return out;
  const auto close = text.rfind(')');
  if (close == std::string::npos || close < open || !trim(text.substr(close + 1)).empty())
    throw ConfigError(path, "unbalanced parentheses in '" + text + "'");
  const std::string body = text.substr(open + 1, close - open - 1);
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError(path, "expected key=value, got '" + trim(item) + "'");
    const std::string key = canonical_param_name(trim(item.substr(0, eq)));
    const std::string value = trim(item.substr(eq + 1));
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v))
      throw ConfigError(child(path, key), "expected a number, got '" + value + "'");
    if (out.params.count(key)) throw ConfigError(child(path, key), "given twice");
    out.params[key] = v;
  }
  return out;
}

inline Params parse_params(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object of numbers");
  Params out;
  for (const auto& [key, value] : j.items())
    out[canonical_param_name(key)] = ObjectReader::as_number(value, child(path, key));
  return out;
}

/// Symbol or nonlinearity: "name(k=v)" or {"name": ..., "params": {...}[, "coeffs": [...]]}.
inline NamedSpec parse_named(const json& j, const std::string& path, bool allow_coeffs) {
  if (j.is_string()) return parse_call(j.get<std::string>(), path);
  ObjectReader r(j, path);
  NamedSpec out;
  out.name = r.string("name", "");
  if (out.name.empty()) throw ConfigError(child(path, "name"), "required");
  if (r.has("params")) out.params = parse_params(r.raw("params"), child(path, "params"));
  if (allow_coeffs) out.coeffs = r.numbers("coeffs", {});
  r.finish();
  return out;
}

inline InitialSpec parse_initial(const json& j, const std::string& path) {
  InitialSpec out;
  if (j.is_string()) {
    const auto call = parse_call(j.get<std::string>(), path);
    out.preset = call.name;
    out.params = call.params;
    return out;
  }
  ObjectReader r(j, path);
  out.preset = r.string("preset", "");
  if (out.preset.empty()) throw ConfigError(child(path, "preset"), "required");
  out.params = r.has("params") ? parse_params(r.raw("params"), child(path, "params")) : Params{};
  out.cos_coeffs = r.numbers("cos", {});
  out.sin_coeffs = r.numbers("sin", {});
  r.finish();
  return out;
}

template <class F>
auto rethrow_as_config(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

inline ProblemConfig parse_problem(const json& j) {
  ObjectReader r(j, "problem");
  ProblemConfig p;
  if (r.has("symbol")) p.symbol = parse_named(r.raw("symbol"), "problem.symbol", false);
  if (r.has("nonlinearity")) p.nonlinearity = parse_named(r.raw("nonlinearity"), "problem.nonlinearity", true);
  if (r.has("u0")) p.u0 = parse_initial(r.raw("u0"), "problem.u0");
  const auto n = r.integer("N", 256);
  const auto P = r.integer("P", 1);
  p.s_index = r.number("s_index", 2.0);
  r.finish();
  if (n < 8 || n % 2 != 0 || n > (1 << 24)) throw ConfigError("problem.N", "must be an even integer in [8, 2^24]");
  if (P < 1 || P > 4096) throw ConfigError("problem.P", "must be an integer in [1, 4096]");
  p.n = static_cast<std::size_t>(n);
  p.period_multiple = static_cast<int>(P);
  if (!(p.s_index > 1.5))
    throw ConfigError("problem.s_index", "must exceed 3/2; well-posedness in H^s is only established for s > 3/2");
  rethrow_as_config("problem.symbol", [&] { return builtin_symbol(p.symbol.name, p.symbol.params); });
  rethrow_as_config("problem.nonlinearity", [&] {
    return builtin_nonlinearity(p.nonlinearity.name, p.nonlinearity.params, p.nonlinearity.coeffs);
  });
  if (p.nonlinearity.name != "custom" && !p.nonlinearity.coeffs.empty())
    throw ConfigError("problem.nonlinearity.coeffs", "only the custom nonlinearity takes coefficients");
  if (p.u0.preset != "coeffs" && (!p.u0.cos_coeffs.empty() || !p.u0.sin_coeffs.empty()))
    throw ConfigError("problem.u0", "cos/sin coefficient lists belong to the coeffs preset");
  rethrow_as_config("problem.u0", [&] { return make_initial(p.u0, make_grid(8, p.period_multiple), 0); });
  return p;
}

inline Method parse_method(const std::string& s, const std::string& path) {
  if (s == "rk4_direct") return Method::rk4_direct;
  if (s == "ifrk4_transformed") return Method::ifrk4_transformed;
  throw ConfigError(path, "unknown method '" + s + "'; expected one of: rk4_direct, ifrk4_transformed");
}

inline SolverConfig parse_solver(const json& j) {
  ObjectReader r(j, "solver");
  SolverConfig c;
  c.method = parse_method(r.string("method", to_string(c.method)), "solver.method");
  c.dt = r.number("dt", c.dt);
  c.t_end = r.number("t_end", c.t_end);
  c.dealias = r.boolean("dealias", c.dealias);
  c.blowup_gradient_factor = r.number("blowup_gradient_factor", c.blowup_gradient_factor);
  const auto stride = r.integer("snapshot_stride", static_cast<std::int64_t>(c.snapshot_stride));
  r.finish();
  if (!(c.dt > 0.0)) throw ConfigError("solver.dt", "must be positive");
  if (!(c.t_end > 0.0)) throw ConfigError("solver.t_end", "must be positive");
  if (c.t_end / c.dt > 1e8) throw ConfigError("solver.dt", "more than 1e8 steps requested");
  if (!(c.blowup_gradient_factor > 1.0)) throw ConfigError("solver.blowup_gradient_factor", "must exceed 1");
  if (stride < 1) throw ConfigError("solver.snapshot_stride", "must be a positive integer");
  c.snapshot_stride = static_cast<std::size_t>(stride);
  return c;
}

inline json index_json(const json& j, const std::string& path, json fallback) {
  const json& v = j.is_null() ? fallback : j;
  if (!v.is_array() || v.size() != 3) throw ConfigError(path, "expected [s, p, q] with q a number or \"inf\"");
  const double s = ObjectReader::as_number(v[0], path + "[0]");
  const double p = ObjectReader::as_number(v[1], path + "[1]");
  double q = 0.0;
  if (v[2].is_string() && v[2].get<std::string>() == "inf")
    q = kInf;
  else
    q = ObjectReader::as_number(v[2], path + "[2]");
  rethrow_as_config(path, [&] { return BesovIndex(s, p, q); });
  return v;
}

inline ExperimentConfig parse_experiment(const json& j, const SolverConfig& solver) {
  ObjectReader r(j, "experiment");
  ExperimentConfig e;
  e.name = r.string("name", "");
  if (e.name.empty()) throw ConfigError("experiment.name", "required; one of: " + join(experiment_names()));
  json& p = e.params;
  p = json::object();
  auto positive = [](double v, const std::string& path) {
    if (!(v > 0.0)) throw ConfigError(path, "must be positive");
    return v;
  };
  auto count = [&](const std::string& key, std::int64_t fallback, std::int64_t hi) {
    const auto v = r.integer(key, fallback);
    if (v < 1 || v > hi) throw ConfigError("experiment." + key, "must be in [1, " + std::to_string(hi) + "]");
    return v;
  };
  if (e.name == "convergence") {
    const auto m = parse_method(r.string("method", to_string(solver.method)), "experiment.method");
    p["method"] = to_string(m);
    p["dts"] = r.numbers("dts", {4e-3, 2e-3, 1e-3, 5e-4});
    for (double dt : p["dts"].get<std::vector<double>>()) positive(dt, "experiment.dts");
    p["order"] = positive(r.number("order", 4.0), "experiment.order");
  } else if (e.name == "continuous_dependence") {
    p["eps"] = r.numbers("eps", {1e-2, 1e-3, 1e-4});
    if (p["eps"].empty()) throw ConfigError("experiment.eps", "must not be empty");
    p["direction_kmax"] = count("direction_kmax", 8, 1 << 20);
    p["direction_amplitude"] = positive(r.number("direction_amplitude", 1.0), "experiment.direction_amplitude");
  } else if (e.name == "composition") {
    const auto f = r.string("function", "x^2");
    rethrow_as_config("experiment.function", [&] { return lab::builtin_function(f); });
    p["function"] = f;
    p["index"] = index_json(r.has("index") ? r.raw("index") : json(), "experiment.index", json::array({2, 2, 2}));
    const double s = p["index"][0].get<double>(), sp = p["index"][1].get<double>();
    if (!(s > 1.0 + 1.0 / sp)) throw ConfigError("experiment.index", "the composition bound needs s > 1 + 1/p");
    p["count"] = count("count", 8, 1000);
    p["kmax"] = count("kmax", 32, 1 << 20);
    p["sups"] = r.numbers("sups", {0.5, 1.0, 1.5, 2.0});
    if (p["sups"].empty()) throw ConfigError("experiment.sups", "must not be empty");
    for (double s : p["sups"].get<std::vector<double>>()) positive(s, "experiment.sups");
    p["decay"] = r.number("decay", 2.0);
  } else if (e.name == "localizing") {
    p["dilation"] = positive(r.number("dilation", 2.0), "experiment.dilation");
    p["index"] = index_json(r.has("index") ? r.raw("index") : json(), "experiment.index", json::array({2, 2, 2}));
    p["sine_modes"] = count("sine_modes", 8, 1 << 20);
    p["random_count"] = r.integer("random_count", 4);
    if (p["random_count"].get<std::int64_t>() < 0) throw ConfigError("experiment.random_count", "must be >= 0");
    p["kmax"] = count("kmax", 32, 1 << 20);
  } else if (e.name == "norm_equivalence") {
    p["s"] = r.numbers("s", {1.75, 2.0, 2.5});
    if (p["s"].empty()) throw ConfigError("experiment.s", "must not be empty");
    for (double s : p["s"].get<std::vector<double>>()) positive(s, "experiment.s");
    p["count"] = count("count", 20, 1000);
    p["kmax"] = count("kmax", 32, 1 << 20);
    p["restricted_delta"] = positive(r.number("restricted_delta", kLineShiftBound), "experiment.restricted_delta");
  } else if (e.name != "conservation" && e.name != "time_derivative" && e.name != "wave_breaking") {
    throw ConfigError("experiment.name", "unknown experiment '" + e.name + "'; expected one of: " + join(experiment_names()));
  }
  r.finish();
  return e;
}

inline OutputConfig parse_output(const json& j) {
  ObjectReader r(j, "output");
  OutputConfig o;
  o.directory = r.string("directory", "");
  o.diagnostics_format = r.string("diagnostics_format", "tsv");
  o.snapshots = r.boolean("snapshots", true);
  r.finish();
  if (o.diagnostics_format != "tsv" && o.diagnostics_format != "csv")
    throw ConfigError("output.diagnostics_format", "expected tsv or csv");
  return o;
}

}  // namespace detail

RunConfig parse_config(const json& doc);

namespace detail {
inline SweepConfig parse_sweep(const json& j, const json& base) {
  ObjectReader r(j, "sweep");
  SweepConfig s;
  const auto threads = r.integer("threads", 0);
  if (threads < 0 || threads > 1024) throw ConfigError("sweep.threads", "must be in [0, 1024]");
  s.threads = static_cast<unsigned>(threads);
  if (!r.has("jobs")) throw ConfigError("sweep.jobs", "required: a list of config patches");
  const auto& jobs = r.raw("jobs");
  r.finish();
  if (!jobs.is_array() || jobs.empty()) throw ConfigError("sweep.jobs", "expected a non-empty list of objects");
  json stripped = base;
  stripped.erase("sweep");
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const std::string path = "sweep.jobs[" + std::to_string(i) + "]";
    if (!jobs[i].is_object()) throw ConfigError(path, "expected an object");
    if (jobs[i].contains("sweep")) throw ConfigError(path + ".sweep", "sweeps do not nest");
    json merged = stripped;
    merged.merge_patch(jobs[i]);
    try {
      parse_config(merged);
    } catch (const ConfigError& e) {
      throw ConfigError(path, e.what());
    }
    s.jobs.push_back(std::move(merged));
  }
  return s;
}
}  // namespace detail

/// Validates a whole document; unknown keys anywhere are errors.
inline RunConfig parse_config(const json& doc) {
  detail::ObjectReader r(doc, "");
  RunConfig cfg;
  cfg.source = doc;
  if (r.has("problem")) cfg.problem = detail::parse_problem(r.raw("problem"));
  if (r.has("solver")) cfg.solver = detail::parse_solver(r.raw("solver"));
  if (r.has("experiment")) cfg.experiment = detail::parse_experiment(r.raw("experiment"), cfg.solver);
  if (r.has("output")) cfg.output = detail::parse_output(r.raw("output"));
  const auto seed = r.has("seed") ? r.raw("seed") : json(0);
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
    throw ConfigError("seed", "expected a non-negative integer");
  cfg.seed = seed.get<std::uint64_t>();
  if (r.has("sweep")) cfg.sweep = detail::parse_sweep(r.raw("sweep"), doc);
  r.finish();
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

/// Canonical form of everything that affects results, defaults filled.
inline json canonical_json(const RunConfig& cfg) {
  const auto& p = cfg.problem;
  json out;
  out["problem"] = {
      {"symbol", {{"name", p.symbol.name}, {"params", p.symbol.params}}},
      {"nonlinearity", {{"name", p.nonlinearity.name}, {"params", p.nonlinearity.params}}},
      {"u0", {{"preset", p.u0.preset}, {"params", p.u0.params}}},
      {"N", p.n},
      {"P", p.period_multiple},
      {"s_index", p.s_index},
  };
  if (p.nonlinearity.name == "custom") out["problem"]["nonlinearity"]["coeffs"] = p.nonlinearity.coeffs;
  if (p.u0.preset == "coeffs") {
    out["problem"]["u0"]["cos"] = p.u0.cos_coeffs;
    out["problem"]["u0"]["sin"] = p.u0.sin_coeffs;
  }
  const auto& s = cfg.solver;
  out["solver"] = {{"method", to_string(s.method)},
                   {"dt", s.dt},
                   {"t_end", s.t_end},
                   {"dealias", s.dealias},
                   {"blowup_gradient_factor", s.blowup_gradient_factor},
                   {"snapshot_stride", s.snapshot_stride}};
  if (cfg.experiment) {
    json e = cfg.experiment->params;
    e["name"] = cfg.experiment->name;
    out["experiment"] = e;
  }
  out["seed"] = cfg.seed;
  return out;
}

/// Full echo of the configuration: canonical part plus output settings.
inline json echo_json(const RunConfig& cfg) {
  json out = canonical_json(cfg);
  out["output"] = {{"directory", cfg.output.directory},
                   {"diagnostics_format", cfg.output.diagnostics_format},
                   {"snapshots", cfg.output.snapshots}};
  return out;
}

/// Hash of the canonical configuration. Output settings are excluded, so the
/// same physics written to two places hashes identically.
inline std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a(canonical_json(cfg).dump()); }

inline EvolutionProblem make_problem(const RunConfig& cfg) {
  const auto& p = cfg.problem;
  const auto grid = make_grid(p.n, p.period_multiple);
  return EvolutionProblem(grid, builtin_symbol(p.symbol.name, p.symbol.params),
                          builtin_nonlinearity(p.nonlinearity.name, p.nonlinearity.params, p.nonlinearity.coeffs),
                          make_initial(p.u0, grid, cfg.seed), p.s_index);
}

// ---------------------------------------------------------------------------
// Files

inline const std::vector<std::string>& diagnostics_columns() {
  static const std::vector<std::string> cols{"time", "Hs_norm", "Hs_minus_norm", "sup_ux", "mass", "l2", "hamiltonian"};
  return cols;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Diagnostics as delimited text: one comment line with the config hash, one
/// header line, then one row per record with %.17g values.
inline std::string format_diagnostics(const DiagnosticsSeries& series, std::uint64_t hash, char sep = '\t') {
  std::string out = "# config_hash=" + hex64(hash) + " s_index=" + format_double(series.s_index) +
                    " time_derivative_index=" + format_double(series.s_time_derivative) + "\n";
  const auto& cols = diagnostics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? std::string(1, sep) : "") + cols[i];
  out += "\n";
  for (const auto& r : series.rows) {
    const double vals[] = {r.time, r.hs_norm, r.hs_minus_norm, r.sup_ux, r.mass, r.l2, r.hamiltonian};
    for (std::size_t i = 0; i < std::size(vals); ++i) out += (i ? std::string(1, sep) : "") + format_double(vals[i]);
    out += "\n";
  }
  return out;
}

inline void write_diagnostics(const fs::path& path, const DiagnosticsSeries& series, std::uint64_t hash,
                              char sep = '\t') {
  write_text(path, format_diagnostics(series, hash, sep));
}

/// Binary snapshot, little-endian:
///   0  char[4]  "DWSN"
///   4  uint32   version (1)
///   8  uint64   N
///  16  uint64   P
///  24  float64  time
///  32  uint64   config hash
///  40  float64  samples[N]
struct Snapshot {
  std::uint64_t n = 0;
  std::uint64_t period_multiple = 1;
  double time = 0.0;
  std::uint64_t config_hash = 0;
  std::vector<double> samples;
};

inline constexpr char kSnapshotMagic[4] = {'D', 'W', 'S', 'N'};
inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::size_t kSnapshotHeaderBytes = 40;

namespace detail {
inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint64_t get_le(const std::string& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}
}  // namespace detail

inline std::string encode_snapshot(const Snapshot& s) {
  std::string out(kSnapshotMagic, 4);
  detail::put_le(out, kSnapshotVersion, 4);
  detail::put_le(out, s.n, 8);
  detail::put_le(out, s.period_multiple, 8);
  detail::put_le(out, std::bit_cast<std::uint64_t>(s.time), 8);
  detail::put_le(out, s.config_hash, 8);
  for (double v : s.samples) detail::put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

inline Snapshot decode_snapshot(const std::string& bytes) {
  if (bytes.size() < kSnapshotHeaderBytes || bytes.compare(0, 4, kSnapshotMagic, 4) != 0)
    throw std::runtime_error("not a snapshot file (bad magic)");
  if (detail::get_le(bytes, 4, 4) != kSnapshotVersion) throw std::runtime_error("unsupported snapshot version");
  Snapshot s;
  s.n = detail::get_le(bytes, 8, 8);
  s.period_multiple = detail::get_le(bytes, 16, 8);
  s.time = std::bit_cast<double>(detail::get_le(bytes, 24, 8));
  s.config_hash = detail::get_le(bytes, 32, 8);
  if (bytes.size() != kSnapshotHeaderBytes + 8 * s.n) throw std::runtime_error("snapshot length does not match N");
  s.samples.resize(s.n);
  for (std::size_t i = 0; i < s.n; ++i)
    s.samples[i] = std::bit_cast<double>(detail::get_le(bytes, kSnapshotHeaderBytes + 8 * i, 8));
  return s;
}

inline void write_snapshot(const fs::path& path, const RealField& u, double time, std::uint64_t hash) {
  Snapshot s;
  s.n = u.size();
  s.period_multiple = static_cast<std::uint64_t>(u.grid().period_multiple());
  s.time = time;
  s.config_hash = hash;
  s.samples.assign(u.samples().begin(), u.samples().end());
  write_text(path, encode_snapshot(s));
}

inline Snapshot read_snapshot(const fs::path& path) { return decode_snapshot(read_text(path)); }

inline json report_json(const lab::ExperimentReport& r) {
  json metrics = json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = std::isfinite(v) ? json(v) : json(format_double(v));
  return {{"name", r.name},
          {"parameters", r.parameters},
          {"outcome", lab::to_string(r.outcome)},
          {"metrics", metrics},
          {"note", r.note},
          {"config_hash", hex64(r.config_hash)}};
}

// ---------------------------------------------------------------------------
// Orchestration

namespace detail {
inline std::vector<lab::FamilyMember> family_from_seed(const json& p, std::uint64_t seed, std::size_t count,
                                                       std::vector<double> sups = {1.0}, double decay = 1.0) {
  return lab::random_family(count, p.at("kmax").get<int>(), seed, std::move(sups), decay);
}

inline BesovIndex index_from_json(const json& v) {
  const double q = v[2].is_string() ? kInf : v[2].get<double>();
  return BesovIndex(v[0].get<double>(), v[1].get<double>(), q);
}
}  // namespace detail

inline lab::ExperimentReport run_experiment(const RunConfig& cfg, const EvolutionProblem& prob) {
  const auto& e = *cfg.experiment;
  const auto& p = e.params;
  lab::ExperimentReport report;
  if (e.name == "convergence") {
    report = lab::convergence_study(prob, detail::parse_method(p["method"], "experiment.method"),
                                    p["dts"].get<std::vector<double>>(), cfg.solver.t_end, p["order"].get<double>());
  } else if (e.name == "conservation") {
    report = lab::run_conservation_audit(prob, cfg.solver);
  } else if (e.name == "time_derivative") {
    report = lab::run_time_derivative_audit(prob, cfg.solver);
  } else if (e.name == "wave_breaking") {
    report = lab::run_wave_breaking(prob, cfg.solver);
  } else if (e.name == "continuous_dependence") {
    const auto direction = random_trig_polynomial(p["direction_kmax"].get<int>(), cfg.seed + 1,
                                                  p["direction_amplitude"].get<double>(), 1.0,
                                                  prob.grid().period_multiple())
                               .sample(prob.grid());
    report = lab::run_continuous_dependence(prob, p["eps"].get<std::vector<double>>(), direction, cfg.solver);
  } else if (e.name == "composition") {
    const auto fam = detail::family_from_seed(p, cfg.seed, p["count"].get<std::size_t>(),
                                              p["sups"].get<std::vector<double>>(), p["decay"].get<double>());
    const auto r = lab::check_composition_bound(lab::builtin_function(p["function"]), fam,
                                                detail::index_from_json(p["index"]), cfg.problem.n);
    report = lab::ratio_experiment("composition", {r});
  } else if (e.name == "localizing") {
    auto fam = lab::sine_family(p["sine_modes"].get<int>());
    fam.push_back(lab::constant_member(1.0));
    for (auto& m : detail::family_from_seed(p, cfg.seed, p["random_count"].get<std::size_t>())) fam.push_back(m);
    const auto r = lab::check_localizing(CutoffFunction(p["dilation"].get<double>()), fam,
                                         detail::index_from_json(p["index"]), cfg.problem.n);
    report = lab::ratio_experiment("localizing", {r});
  } else if (e.name == "norm_equivalence") {
    const auto fam = detail::family_from_seed(p, cfg.seed, p["count"].get<std::size_t>());
    std::vector<lab::RatioReport> plain, restricted;
    for (double s : p["s"].get<std::vector<double>>()) {
      plain.push_back(lab::check_norm_equivalence(fam, s, cfg.problem.n));
      restricted.push_back(
          lab::check_norm_equivalence(fam, s, cfg.problem.n, p["restricted_delta"].get<double>()));
    }
    report = lab::ratio_experiment("norm_equivalence", plain, true);
    const auto extra = lab::ratio_experiment("norm_equivalence", restricted);
    for (const auto& [k, v] : extra.metrics) report.metrics[k] = v;
    for (const auto& r : restricted)
      if (r.max_ratio > 1.0 + 1e-12 || !r.bounded_and_stable()) report.outcome = lab::Outcome::fail;
  }
  report.config_hash = config_hash(cfg);
  for (const auto& [k, v] : p.items()) report.parameters.emplace(k, v.dump());
  return report;
}

enum class Mode { run, experiment };

struct JobResult {
  int exit_code = kExitOk;
  std::string summary;
  std::uint64_t config_hash = 0;
};

inline int exit_code_for(Termination t) {
  switch (t) {
    case Termination::completed: return kExitOk;
    case Termination::blowup_detected: return kExitBlowup;
    case Termination::resolution_lost: return kExitResolution;
  }
  return kExitFailure;
}

/// Hash every written file (except the manifest itself) into manifest.json.
inline void write_manifest(const fs::path& dir, std::uint64_t hash) {
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) {
      const auto rel = fs::relative(entry.path(), dir).generic_string();
      if (rel != "manifest.json") files.push_back(rel);
    }
  std::sort(files.begin(), files.end());
  json listing = json::object();
  for (const auto& f : files) listing[f] = hex64(fnv1a(read_text(dir / f)));
  write_text(dir / "manifest.json", json{{"config_hash", hex64(hash)}, {"files", listing}}.dump(2) + "\n");
}

/// Runs one job into `dir`. Validation has already happened.
inline JobResult run_job(const RunConfig& cfg, const fs::path& dir, Mode mode) {
  if (mode == Mode::experiment && !cfg.experiment)
    throw ConfigError("experiment", "the experiment subcommand needs an experiment section");
  JobResult result;
  result.config_hash = config_hash(cfg);
  const auto hash_hex = hex64(result.config_hash);
  fs::create_directories(dir);
  json echo = echo_json(cfg);
  echo["config_hash"] = hash_hex;
  write_text(dir / "config.json", echo.dump(2) + "\n");

  const auto prob = make_problem(cfg);
  json report{{"config_hash", hash_hex}};
  std::string summary;
  if (mode == Mode::run) {
    const auto traj = evolve(prob, cfg.solver);
    const char sep = cfg.output.diagnostics_format == "csv" ? ',' : '\t';
    write_diagnostics(dir / ("diagnostics." + cfg.output.diagnostics_format), traj.diagnostics, result.config_hash,
                      sep);
    if (cfg.output.snapshots) {
      fs::create_directories(dir / "snapshots");
      for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "snap_%05zu.bin", i);
        write_snapshot(dir / "snapshots" / name, traj.snapshots[i], traj.times[i], result.config_hash);
      }
    }
    const auto& last = traj.diagnostics.rows.back();
    report["kind"] = "run";
    report["termination"] = to_string(traj.termination);
    report["final_time"] = traj.final_time;
    report["records"] = traj.diagnostics.rows.size();
    report["final"] = {{"time", last.time},       {"Hs_norm", last.hs_norm}, {"Hs_minus_norm", last.hs_minus_norm},
                       {"sup_ux", last.sup_ux},   {"mass", last.mass},       {"l2", last.l2},
                       {"hamiltonian", last.hamiltonian}};
    report["monitor"] = {{"initial_sup_ux", traj.monitor.initial_sup_ux},
                         {"max_gradient_ratio", traj.monitor.max_gradient_ratio},
                         {"max_amplitude_ratio", traj.monitor.max_amplitude_ratio}};
    if (traj.monitor.trigger_time) report["monitor"]["trigger_time"] = *traj.monitor.trigger_time;
    result.exit_code = exit_code_for(traj.termination);
    char line[256];
    std::snprintf(line, sizeof line, "%s t=%.6g Hs=%.6g sup|u_x|=%.6g", to_string(traj.termination).c_str(),
                  traj.final_time, last.hs_norm, last.sup_ux);
    summary = line;
  }
  if (cfg.experiment) {
    const auto ex = run_experiment(cfg, prob);
    report["experiment"] = report_json(ex);
    if (mode == Mode::experiment) report["kind"] = "experiment";
    if (result.exit_code == kExitOk && ex.outcome != lab::Outcome::pass) result.exit_code = kExitExperiment;
    summary += (summary.empty() ? "" : "; ") + std::string("experiment ") + ex.name + ": " + lab::to_string(ex.outcome);
    if (!ex.note.empty()) summary += " (" + ex.note + ")";
  }
  write_text(dir / "report.json", report.dump(2) + "\n");
  write_manifest(dir, result.config_hash);
  result.summary = summary + " [" + hash_hex + "]";
  return result;
}

/// Output directory: --out, else output.directory (relative paths resolve
/// against DISPERSIVE_OUTPUT_ROOT when set), else <root>/run-<hash>.
inline fs::path resolve_output_dir(const std::string& cli_out, const RunConfig& cfg) {
  if (!cli_out.empty()) return cli_out;
  const char* env = std::getenv("DISPERSIVE_OUTPUT_ROOT");
  const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
  if (!cfg.output.directory.empty()) {
    const fs::path d(cfg.output.directory);
    return d.is_absolute() || !(env && *env) ? d : root / d;
  }
  return root / ("run-" + hex64(config_hash(cfg)));
}

struct SweepResult {
  int exit_code = kExitOk;
  std::vector<JobResult> jobs;
};

/// Independent jobs on worker threads, one directory each (job_000, ...).
/// The exit code is that of the first failing job in list order.
inline SweepResult run_sweep(const RunConfig& cfg, const fs::path& dir) {
  if (!cfg.sweep) throw ConfigError("sweep", "the sweep subcommand needs a sweep section");
  const auto& jobs = cfg.sweep->jobs;
  std::vector<RunConfig> parsed;
  for (const auto& j : jobs) parsed.push_back(parse_config(j));
  SweepResult out;
  out.jobs.resize(parsed.size());
  std::vector<std::string> errors(parsed.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < parsed.size(); i = next++) {
      char name[32];
      std::snprintf(name, sizeof name, "job_%03zu", i);
      try {
        out.jobs[i] = run_job(parsed[i], dir / name, Mode::run);
      } catch (const std::exception& e) {
        out.jobs[i].exit_code = kExitFailure;
        out.jobs[i].summary = std::string("error: ") + e.what();
      }
    }
  };
  unsigned threads = cfg.sweep->threads ? cfg.sweep->threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(parsed.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  json summary = json::array();
  for (std::size_t i = 0; i < out.jobs.size(); ++i) {
    summary.push_back({{"job", i},
                       {"exit_code", out.jobs[i].exit_code},
                       {"summary", out.jobs[i].summary},
                       {"config_hash", hex64(out.jobs[i].config_hash)}});
    if (out.exit_code == kExitOk) out.exit_code = out.jobs[i].exit_code;
  }
  fs::create_directories(dir);
  write_text(dir / "sweep.json", summary.dump(2) + "\n");
  return out;
}

/// Re-derives the config hash from config.json and checks every file in the
/// manifest: content hash, and the embedded config hash where a format has one.
inline std::vector<std::string> verify_directory(const fs::path& dir) {
  std::vector<std::string> problems;
  auto fail = [&](const std::string& what) { problems.push_back(what); };
  json echo;
  json manifest;
  try {
    echo = json::parse(read_text(dir / "config.json"));
    manifest = json::parse(read_text(dir / "manifest.json"));
  } catch (const std::exception& e) {
    fail(e.what());
    return problems;
  }
  std::string expected;
  try {
    json doc = echo;
    doc.erase("config_hash");
    expected = hex64(config_hash(parse_config(doc)));
  } catch (const std::exception& e) {
    fail(std::string("config.json does not validate: ") + e.what());
    return problems;
  }
  if (echo.value("config_hash", "") != expected) fail("config.json: embedded hash differs from recomputed " + expected);
  if (manifest.value("config_hash", "") != expected) fail("manifest.json: config hash differs from " + expected);
  if (!manifest.contains("files") || !manifest["files"].is_object()) {
    fail("manifest.json: no file listing");
    return problems;
  }
  for (const auto& [name, digest] : manifest["files"].items()) {
    const auto path = dir / name;
    std::string bytes;
    try {
      bytes = read_text(path);
    } catch (const std::exception&) {
      fail(name + ": missing");
      continue;
    }
    if (!digest.is_string() || hex64(fnv1a(bytes)) != digest.get<std::string>()) fail(name + ": content hash mismatch");
    if (name.rfind("snapshots/", 0) == 0) {
      try {
        if (hex64(decode_snapshot(bytes).config_hash) != expected) fail(name + ": embedded config hash differs");
      } catch (const std::exception& e) {
        fail(name + ": " + e.what());
      }
    } else if (name.rfind("diagnostics.", 0) == 0) {
      if (bytes.rfind("# config_hash=" + expected, 0) != 0) fail(name + ": embedded config hash differs");
    } else if (name == "report.json") {
      try {
        if (json::parse(bytes).value("config_hash", "") != expected) fail(name + ": embedded config hash differs");
      } catch (const std::exception& e) {
        fail(name + ": " + e.what());
      }
    }
  }
  return problems;
}

}  // namespace dispersive::io
