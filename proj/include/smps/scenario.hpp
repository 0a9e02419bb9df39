#pragma once

// Scenario configuration, presets, ensemble runner and summary statistics.
//
// A scenario is a JSON object; see README.md for the schema. `run` builds the
// initial state, runs every trajectory (stream id = trajectory index) and
// writes per-trajectory CSV files plus summary.json and run_manifest.json.
// Wall-clock timings go to timing.json so the other files are reproducible
// byte for byte.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "smps/dmrg.hpp"
#include "smps/errors.hpp"
#include "smps/measurement.hpp"
#include "smps/observables.hpp"
#include "smps/snapshot.hpp"
#include "smps/sse.hpp"
#include "smps/trajectory.hpp"

#ifndef SMPS_VERSION
#define SMPS_VERSION "unknown"
#endif

namespace smps {

using json = nlohmann::json;

inline constexpr const char* kCodeVersion = SMPS_VERSION;

enum class RunMode { discrete, continuous };

struct TermConfig {
  std::size_t site = 0;
  std::string op = "sz";
  double coupling = 1.0;
};

struct MeasurementConfig {
  std::vector<TermConfig> terms;
  double phi = 0.0;
  double kappa = 100.0;
  /// 0 samples the outcome; +1 or -1 forces it.
  int postselect = 0;
};

struct ScenarioConfig {
  std::string name = "custom";
  std::size_t length = 20;
  double coupling = 1.0;

  // Initial state: DMRG ground state unless a snapshot path is given.
  std::size_t gs_max_bond = 64;
  std::size_t gs_sweeps = 20;
  double gs_tol = 1e-10;
  std::uint64_t gs_seed = 20240601;
  std::optional<std::string> initial_state;

  RunMode mode = RunMode::discrete;
  std::vector<MeasurementConfig> measurements;
  // Continuous mode.
  std::vector<TermConfig> monitored;
  double gamma = 1.0;
  double sse_dt = 1e-3;
  HamiltonianScheme scheme = HamiltonianScheme::trotter;

  double duration = 10.0;
  bool hamiltonian = true;
  std::size_t max_bond = 64;
  double tol = 1e-10;
  std::size_t fit_sweeps = 0;
  double budget = 1e-4;
  double idle_dt = 1e-3;

  std::vector<std::string> observables{"sz:0"};
  std::size_t trajectories = 1;
  std::uint64_t seed = 1;

  std::string out_dir = "smps-out";
  std::vector<std::string> formats{"csv", "json"};
  bool snapshots = false;
};

// ---------------------------------------------------------------- JSON mapping

namespace detail {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where.empty() ? "config" : where, "expected an object");
  for (const auto& [key, _] : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!ok) throw ConfigError(where.empty() ? key : where + "." + key, "unknown field");
  }
}

template <class T>
T get_field(const json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  const std::string path = where.empty() ? key : where + "." + key;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!j.at(key).is_number_unsigned() && !(j.at(key).is_number_integer() && j.at(key).get<long long>() >= 0))
        throw ConfigError(path, "expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.at(key).is_number()) throw ConfigError(path, "expected a number");
    } else if constexpr (std::is_same_v<T, int>) {
      if (!j.at(key).is_number_integer()) throw ConfigError(path, "expected an integer");
    }
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

inline std::vector<TermConfig> parse_terms(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ConfigError(where, "expected an array of terms");
  std::vector<TermConfig> out;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const std::string w = where + "[" + std::to_string(k) + "]";
    check_keys(arr[k], w, {"site", "op", "coupling"});
    if (!arr[k].contains("site")) throw ConfigError(w + ".site", "missing");
    TermConfig t;
    t.site = get_field<std::size_t>(arr[k], "site", w, 0);
    t.op = get_field<std::string>(arr[k], "op", w, "sz");
    t.coupling = get_field<double>(arr[k], "coupling", w, 1.0);
    out.push_back(t);
  }
  return out;
}

inline json terms_json(const std::vector<TermConfig>& terms) {
  json arr = json::array();
  for (const auto& t : terms) arr.push_back({{"site", t.site}, {"op", t.op}, {"coupling", t.coupling}});
  return arr;
}

}  // namespace detail

inline json to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["lattice"] = {{"L", c.length}, {"d", 2}, {"J", c.coupling}};
  j["ground_state"] = {{"max_bond", c.gs_max_bond}, {"sweeps", c.gs_sweeps}, {"tol", c.gs_tol}, {"seed", c.gs_seed}};
  j["initial_state"] = c.initial_state ? json(*c.initial_state) : json(nullptr);
  j["mode"] = c.mode == RunMode::discrete ? "discrete" : "continuous";
  json ms = json::array();
  for (const auto& m : c.measurements)
    ms.push_back({{"terms", detail::terms_json(m.terms)}, {"phi", m.phi}, {"kappa", m.kappa}, {"postselect", m.postselect}});
  j["measurements"] = ms;
  j["continuous"] = {{"terms", detail::terms_json(c.monitored)},
                     {"gamma", c.gamma},
                     {"dt", c.sse_dt},
                     {"scheme", c.scheme == HamiltonianScheme::trotter ? "trotter" : "euler"}};
  j["duration"] = c.duration;
  j["evolution"] = {{"hamiltonian", c.hamiltonian}, {"max_bond", c.max_bond}, {"tol", c.tol},
                    {"fit_sweeps", c.fit_sweeps},   {"budget", c.budget},     {"idle_dt", c.idle_dt}};
  j["observables"] = c.observables;
  j["ensemble"] = {{"trajectories", c.trajectories}, {"seed", c.seed}};
  j["output"] = {{"directory", c.out_dir}, {"formats", c.formats}, {"snapshots", c.snapshots}};
  return j;
}

/// Parses and validates a scenario. A run manifest is accepted too (its
/// embedded "config" is used), which is how single trajectories are replayed.
inline ScenarioConfig scenario_from_json(const json& input) {
  const json& j = input.contains("config") && input.contains("config_hash") ? input.at("config") : input;
  detail::check_keys(j, "", {"name", "lattice", "ground_state", "initial_state", "mode", "measurements", "continuous",
                             "duration", "evolution", "observables", "ensemble", "output"});
  ScenarioConfig c;
  using detail::get_field;
  c.name = get_field<std::string>(j, "name", "", c.name);
  if (j.contains("lattice")) {
    const json& l = j["lattice"];
    detail::check_keys(l, "lattice", {"L", "d", "J"});
    c.length = get_field<std::size_t>(l, "L", "lattice", c.length);
    if (get_field<std::size_t>(l, "d", "lattice", 2) != 2) throw ConfigError("lattice.d", "only d = 2 is supported");
    c.coupling = get_field<double>(l, "J", "lattice", c.coupling);
  }
  if (c.length < 1) throw ConfigError("lattice.L", "must be at least 1");
  if (j.contains("ground_state")) {
    const json& g = j["ground_state"];
    detail::check_keys(g, "ground_state", {"max_bond", "sweeps", "tol", "seed"});
    c.gs_max_bond = get_field<std::size_t>(g, "max_bond", "ground_state", c.gs_max_bond);
    c.gs_sweeps = get_field<std::size_t>(g, "sweeps", "ground_state", c.gs_sweeps);
    c.gs_tol = get_field<double>(g, "tol", "ground_state", c.gs_tol);
    c.gs_seed = get_field<std::uint64_t>(g, "seed", "ground_state", c.gs_seed);
    if (c.gs_max_bond == 0) throw ConfigError("ground_state.max_bond", "must be positive");
    if (c.gs_sweeps == 0) throw ConfigError("ground_state.sweeps", "must be positive");
  }
  if (j.contains("initial_state") && !j["initial_state"].is_null()) {
    if (!j["initial_state"].is_string()) throw ConfigError("initial_state", "expected a file path or null");
    c.initial_state = j["initial_state"].get<std::string>();
  }
  const std::string mode = get_field<std::string>(j, "mode", "", "discrete");
  if (mode == "discrete")
    c.mode = RunMode::discrete;
  else if (mode == "continuous")
    c.mode = RunMode::continuous;
  else
    throw ConfigError("mode", "expected \"discrete\" or \"continuous\"");

  if (j.contains("measurements")) {
    const json& ms = j["measurements"];
    if (!ms.is_array()) throw ConfigError("measurements", "expected an array");
    for (std::size_t k = 0; k < ms.size(); ++k) {
      const std::string w = "measurements[" + std::to_string(k) + "]";
      detail::check_keys(ms[k], w, {"terms", "phi", "kappa", "postselect"});
      MeasurementConfig m;
      if (!ms[k].contains("terms")) throw ConfigError(w + ".terms", "missing");
      m.terms = detail::parse_terms(ms[k]["terms"], w + ".terms");
      m.phi = get_field<double>(ms[k], "phi", w, m.phi);
      m.kappa = get_field<double>(ms[k], "kappa", w, m.kappa);
      m.postselect = get_field<int>(ms[k], "postselect", w, 0);
      if (!(m.kappa > 0.0)) throw ConfigError(w + ".kappa", "must be positive");
      if (m.postselect != 0 && m.postselect != 1 && m.postselect != -1)
        throw ConfigError(w + ".postselect", "must be 0, 1 or -1");
      c.measurements.push_back(std::move(m));
    }
  }
  if (j.contains("continuous")) {
    const json& s = j["continuous"];
    detail::check_keys(s, "continuous", {"terms", "gamma", "dt", "scheme"});
    if (s.contains("terms")) c.monitored = detail::parse_terms(s["terms"], "continuous.terms");
    c.gamma = get_field<double>(s, "gamma", "continuous", c.gamma);
    c.sse_dt = get_field<double>(s, "dt", "continuous", c.sse_dt);
    const std::string scheme = get_field<std::string>(s, "scheme", "continuous", "trotter");
    if (scheme == "trotter")
      c.scheme = HamiltonianScheme::trotter;
    else if (scheme == "euler")
      c.scheme = HamiltonianScheme::euler;
    else
      throw ConfigError("continuous.scheme", "expected \"trotter\" or \"euler\"");
    if (!(c.gamma >= 0.0)) throw ConfigError("continuous.gamma", "must be non-negative");
    if (!(c.sse_dt > 0.0)) throw ConfigError("continuous.dt", "must be positive");
  }
  if (c.mode == RunMode::continuous && c.monitored.empty())
    throw ConfigError("continuous.terms", "continuous mode needs a monitored observable");
  if (c.mode == RunMode::continuous && !c.measurements.empty())
    throw ConfigError("measurements", "discrete measurements are not used in continuous mode");

  c.duration = get_field<double>(j, "duration", "", c.duration);
  if (!(c.duration >= 0.0) || !std::isfinite(c.duration)) throw ConfigError("duration", "must be non-negative");
  if (j.contains("evolution")) {
    const json& e = j["evolution"];
    detail::check_keys(e, "evolution", {"hamiltonian", "max_bond", "tol", "fit_sweeps", "budget", "idle_dt"});
    c.hamiltonian = get_field<bool>(e, "hamiltonian", "evolution", c.hamiltonian);
    c.max_bond = get_field<std::size_t>(e, "max_bond", "evolution", c.max_bond);
    c.tol = get_field<double>(e, "tol", "evolution", c.tol);
    c.fit_sweeps = get_field<std::size_t>(e, "fit_sweeps", "evolution", c.fit_sweeps);
    c.budget = get_field<double>(e, "budget", "evolution", c.budget);
    c.idle_dt = get_field<double>(e, "idle_dt", "evolution", c.idle_dt);
    if (c.max_bond == 0) throw ConfigError("evolution.max_bond", "must be positive");
    if (!(c.tol >= 0.0)) throw ConfigError("evolution.tol", "must be non-negative");
    if (!(c.idle_dt > 0.0)) throw ConfigError("evolution.idle_dt", "must be positive");
  }
  if (j.contains("observables")) {
    const json& o = j["observables"];
    if (!o.is_array()) throw ConfigError("observables", "expected an array of strings");
    c.observables.clear();
    for (const auto& x : o) {
      if (!x.is_string()) throw ConfigError("observables", "expected an array of strings");
      c.observables.push_back(x.get<std::string>());
    }
  }
  if (j.contains("ensemble")) {
    const json& e = j["ensemble"];
    detail::check_keys(e, "ensemble", {"trajectories", "seed"});
    c.trajectories = get_field<std::size_t>(e, "trajectories", "ensemble", c.trajectories);
    c.seed = get_field<std::uint64_t>(e, "seed", "ensemble", c.seed);
  }
  if (j.contains("output")) {
    const json& o = j["output"];
    detail::check_keys(o, "output", {"directory", "formats", "snapshots"});
    c.out_dir = get_field<std::string>(o, "directory", "output", c.out_dir);
    if (o.contains("formats")) c.formats = get_field<std::vector<std::string>>(o, "formats", "output", c.formats);
    c.snapshots = get_field<bool>(o, "snapshots", "output", c.snapshots);
  }
  return c;
}

/// Cross-field checks that need the chain length.
inline void validate(const ScenarioConfig& c) {
  if (c.length < 1) throw ConfigError("lattice.L", "must be at least 1");
  if (c.hamiltonian && c.length < 2) throw ConfigError("lattice.L", "the Heisenberg chain needs at least two sites");
  if (c.trajectories < 1) throw ConfigError("ensemble.trajectories", "must be at least 1");
  auto check_terms = [&](const std::vector<TermConfig>& terms, const std::string& where) {
    std::vector<bool> seen(c.length, false);
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const std::string w = where + "[" + std::to_string(k) + "]";
      if (terms[k].site >= c.length) throw ConfigError(w + ".site", "site must be below L");
      if (seen[terms[k].site]) throw ConfigError(w + ".site", "sites within one measurement must differ");
      seen[terms[k].site] = true;
      if (terms[k].op != "sx" && terms[k].op != "sy" && terms[k].op != "sz")
        throw ConfigError(w + ".op", "expected a Hermitian Pauli name: sx, sy or sz");
      if (!std::isfinite(terms[k].coupling)) throw ConfigError(w + ".coupling", "must be finite");
    }
  };
  for (std::size_t k = 0; k < c.measurements.size(); ++k) {
    if (c.measurements[k].terms.empty())
      throw ConfigError("measurements[" + std::to_string(k) + "].terms", "needs at least one term");
    check_terms(c.measurements[k].terms, "measurements[" + std::to_string(k) + "].terms");
  }
  check_terms(c.monitored, "continuous.terms");
  for (const auto& f : c.formats)
    if (f != "csv" && f != "json") throw ConfigError("output.formats", "supported formats are csv and json");
  (void)parse_observables(c.observables, c.length);
}

inline MeasurementSpec to_spec(const std::vector<TermConfig>& terms, double phi, double kappa) {
  MeasurementSpec s;
  for (const auto& t : terms) s.terms.push_back({t.site, ops::require(t.op), t.coupling});
  s.phi = phi;
  s.kappa = kappa;
  return s;
}

// ---------------------------------------------------------------- presets

inline std::vector<std::string> preset_names() {
  return {"fig2a", "fig2b", "fig3", "fig4", "fig5-timeseries", "fig6"};
}

/// Built-in desk-scale scenarios. Sites are 0-based, so the last spin is
/// site L - 1.
inline ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.length = 20;
  c.duration = 10.0;
  c.out_dir = "smps-out/" + name;
  const double kappa = 100.0;
  if (name == "fig2a" || name == "fig2b") {
    // One forced Omega_+ applied to the ground state; no time evolution.
    c.hamiltonian = false;
    c.measurements.push_back({{{0, "sz", 1.0}}, 0.3 * std::numbers::pi / 4, 1.0, 1});
    if (name == "fig2b") c.measurements.push_back({{{c.length - 1, "sy", 1.0}}, 0.3 * std::numbers::pi / 4, 1.0, 1});
    c.duration = 1.0;
    c.observables = {"sz:*", "sy:*", "szsz:0,*"};
    if (name == "fig2b") c.observables.push_back("sysy:19,*");
  } else if (name == "fig3") {
    c.measurements.push_back({{{0, "sz", 1.0}}, 0.3, kappa, 0});
    c.observables = {"sz:0"};
    c.trajectories = 4;
  } else if (name == "fig4") {
    c.measurements.push_back({{{0, "sz", 1.0}}, 0.05, kappa, 0});
    c.observables = {"sz:0", "sz:1", "sz:2"};
  } else if (name == "fig5-timeseries") {
    c.measurements.push_back({{{0, "sz", 1.0}}, 0.05, kappa, 0});
    c.measurements.push_back({{{c.length - 1, "sy", 1.0}}, 0.05, kappa, 0});
    c.observables = {"sz:0", "sz:1", "sy:19", "sy:18"};
  } else if (name == "fig6") {
    c.length = 16;
    c.measurements.push_back({{{5, "sz", 1.0}, {10, "sz", 1.0}}, 0.1, kappa, 0});
    c.observables = {"sz:5", "sz:10", "purity:5,10", "szsz:5,10", "entropy:7"};
    c.trajectories = 10;
  } else {
    throw ConfigError("preset", "unknown preset '" + name + "'");
  }
  return c;
}

// ---------------------------------------------------------------- summaries

struct EnsembleSummary {
  std::size_t trajectories = 0;
  std::vector<std::string> columns;
  std::vector<double> times;
  /// [time][column]
  std::vector<std::vector<double>> mean, variance, stderr_;
};

/// Per-time mean, unbiased variance (n - 1) and standard error. Records are
/// folded in the order given.
inline EnsembleSummary summarize(const std::vector<TrajectoryRecord>& records) {
  if (records.empty()) throw ArgumentError("summarize: no records");
  EnsembleSummary s;
  s.trajectories = records.size();
  s.columns = records.front().columns;
  s.times = records.front().times;
  for (const auto& r : records) {
    if (r.columns != s.columns) throw ArgumentError("summarize: records have different columns");
    if (r.times.size() != s.times.size()) throw ArgumentError("summarize: records have different time grids");
    for (std::size_t k = 0; k < s.times.size(); ++k)
      if (std::abs(r.times[k] - s.times[k]) > 1e-12 * std::max(1.0, std::abs(s.times[k])))
        throw ArgumentError("summarize: records have different time grids");
  }
  const std::size_t nt = s.times.size(), nc = s.columns.size();
  const double n = static_cast<double>(records.size());
  s.mean.assign(nt, std::vector<double>(nc, 0.0));
  s.variance = s.stderr_ = s.mean;
  for (std::size_t k = 0; k < nt; ++k)
    for (std::size_t c = 0; c < nc; ++c) {
      double sum = 0.0;
      for (const auto& r : records) sum += r.values[k][c];
      const double mean = sum / n;
      double ss = 0.0;
      for (const auto& r : records) ss += (r.values[k][c] - mean) * (r.values[k][c] - mean);
      s.mean[k][c] = mean;
      s.variance[k][c] = records.size() > 1 ? ss / (n - 1.0) : 0.0;
      s.stderr_[k][c] = std::sqrt(s.variance[k][c] / n);
    }
  return s;
}

inline json to_json(const EnsembleSummary& s) {
  json j;
  j["trajectories"] = s.trajectories;
  j["times"] = s.times;
  json cols = json::object();
  for (std::size_t c = 0; c < s.columns.size(); ++c) {
    std::vector<double> m, v, e;
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      m.push_back(s.mean[k][c]);
      v.push_back(s.variance[k][c]);
      e.push_back(s.stderr_[k][c]);
    }
    cols[s.columns[c]] = {{"mean", m}, {"variance", v}, {"stderr", e}};
  }
  j["columns"] = s.columns;
  j["statistics"] = cols;
  return j;
}

// ---------------------------------------------------------------- output

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string indexed(const char* stem, std::size_t k, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.%s", stem, k, ext);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot open " + p.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed: " + p.string());
}

inline std::string series_csv(const TrajectoryRecord& r) {
  std::string out = "time";
  for (const auto& c : r.columns) out += "," + c;
  out += "\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out += fmt_double(r.times[k]);
    for (double v : r.values[k]) out += "," + fmt_double(v);
    out += "\n";
  }
  return out;
}

inline std::string outcomes_csv(const TrajectoryRecord& r, RunMode mode) {
  std::string out;
  if (mode == RunMode::discrete) {
    out = "time,spec,mu,p\n";
    for (const auto& e : r.outcomes)
      out += fmt_double(e.time) + "," + std::to_string(e.spec) + "," + std::to_string(e.mu) + "," + fmt_double(e.p) + "\n";
  } else {
    out = "time,dw\n";
    for (const auto& e : r.increments) out += fmt_double(e.time) + "," + fmt_double(e.dw) + "\n";
  }
  return out;
}

/// FNV-1a over the canonical (key-sorted) JSON dump, ignoring where output goes.
inline std::string config_hash(json j) {
  j.erase("output");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::size_t thread_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SMPS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("SMPS_THREADS", "expected a positive integer");
    n = static_cast<std::size_t>(v);
  }
  return std::min(n, jobs);
}

}  // namespace detail

/// Runs the trajectory with stream id `index` from `psi0`.
inline TrajectoryRecord run_trajectory(const ScenarioConfig& c, const MatrixProductState& psi0, std::size_t index) {
  const auto obs = parse_observables(c.observables, c.length);
  const std::vector<BondTerm> h = c.hamiltonian ? heisenberg_bonds(c.length, c.coupling) : std::vector<BondTerm>{};
  RngStream rng(c.seed, index);
  if (c.mode == RunMode::continuous) {
    SseOptions opt;
    opt.max_bond = c.max_bond;
    opt.tol = c.tol;
    opt.budget = c.budget;
    opt.scheme = c.scheme;
    opt.keep_final_state = c.snapshots;
    return sse_trajectory(psi0, h, to_spec(c.monitored, 0.0, 1.0), c.gamma, c.duration, c.sse_dt, obs, rng, opt);
  }
  std::vector<MeasurementSpec> specs;
  WeakOptions opt;
  for (const auto& m : c.measurements) {
    specs.push_back(to_spec(m.terms, m.phi, m.kappa));
    opt.postselect.push_back(m.postselect);
  }
  opt.max_bond = c.max_bond;
  opt.tol = c.tol;
  opt.fit_sweeps = c.fit_sweeps;
  opt.budget = c.budget;
  opt.idle_dt = c.idle_dt;
  opt.keep_final_state = c.snapshots;
  return weak_trajectory(psi0, h, specs, c.duration, obs, rng, opt);
}

struct InitialState {
  MatrixProductState state;
  json info;
};

inline InitialState initial_state(const ScenarioConfig& c) {
  if (c.initial_state) {
    MatrixProductState psi = load_snapshot(*c.initial_state);
    if (psi.length() != c.length) throw ConfigError("initial_state", "snapshot length differs from lattice.L");
    psi = normalize(psi);
    return {psi, {{"source", "snapshot"}, {"path", *c.initial_state}}};
  }
  if (c.length < 2) throw ConfigError("lattice.L", "the ground state needs at least two sites");
  DmrgOptions opt;
  opt.max_bond = c.gs_max_bond;
  opt.max_sweeps = c.gs_sweeps;
  opt.tol = c.gs_tol;
  opt.seed = c.gs_seed;
  GroundStateResult g = dmrg(heisenberg_mpo(c.length, c.coupling), opt);
  return {g.state,
          {{"source", "dmrg"},
           {"energy", g.energy},
           {"variance", g.variance},
           {"sweeps", g.sweeps_used},
           {"converged", g.converged},
           {"max_bond", g.state.max_bond_dim()}}};
}

struct RunOptions {
  /// Run only these trajectory indices (all when empty).
  std::vector<std::size_t> only;
};

struct RunResult {
  json manifest;
  std::vector<TrajectoryRecord> records;  // ordered by trajectory index
  std::optional<EnsembleSummary> summary;
};

/// Executes a scenario and writes its output files.
inline RunResult run(const ScenarioConfig& c, const RunOptions& ropt = {}) {
  validate(c);
  const auto t_start = std::chrono::steady_clock::now();
  std::vector<std::size_t> indices = ropt.only;
  if (indices.empty())
    for (std::size_t k = 0; k < c.trajectories; ++k) indices.push_back(k);
  for (auto k : indices)
    if (k >= c.trajectories) throw ArgumentError("run: trajectory index " + std::to_string(k) + " out of range");

  const InitialState init = initial_state(c);
  const auto t_init = std::chrono::steady_clock::now();
  namespace fs = std::filesystem;
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const bool csv = std::find(c.formats.begin(), c.formats.end(), "csv") != c.formats.end();
  const bool js = std::find(c.formats.begin(), c.formats.end(), "json") != c.formats.end();

  std::vector<std::optional<TrajectoryRecord>> slots(indices.size());
  std::vector<double> seconds(indices.size(), 0.0);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= indices.size()) return;
      try {
        const auto a = std::chrono::steady_clock::now();
        TrajectoryRecord r = run_trajectory(c, init.state, indices[j]);
        if (csv) {
          detail::write_text(dir / detail::indexed("traj", indices[j], "csv"), detail::series_csv(r));
          detail::write_text(dir / detail::indexed("outcomes", indices[j], "csv"), detail::outcomes_csv(r, c.mode));
        }
        if (c.snapshots && r.final_state) save_snapshot((dir / detail::indexed("final", indices[j], "smps")).string(), *r.final_state);
        seconds[j] = std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count();
        slots[j] = std::move(r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = indices.size();
        return;
      }
    }
  };
  const std::size_t nthreads = detail::thread_count(indices.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);

  RunResult result;
  for (auto& s : slots) result.records.push_back(std::move(*s));

  const json cfg = to_json(c);
  json traj = json::array();
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto& r = result.records[j];
    traj.push_back({{"index", indices[j]},
                    {"seed", r.seed},
                    {"stream", r.stream},
                    {"series", csv ? json(detail::indexed("traj", indices[j], "csv")) : json(nullptr)},
                    {"outcomes", csv ? json(detail::indexed("outcomes", indices[j], "csv")) : json(nullptr)},
                    {"steps", r.times.empty() ? 0 : r.times.size() - 1},
                    {"dt", r.dt},
                    {"total_discarded", r.total_discarded},
                    {"max_bond", r.max_bond_used},
                    {"warnings", r.warnings}});
  }
  result.manifest = {{"config", cfg},
                     {"config_hash", detail::config_hash(cfg)},
                     {"code_version", kCodeVersion},
                     {"initial_state", init.info},
                     {"rng", "counter-based splitmix64; trajectory k uses (ensemble.seed, stream k)"},
                     {"trajectories", traj}};
  if (js) {
    detail::write_text(dir / "run_manifest.json", result.manifest.dump(2) + "\n");
    result.summary = summarize(result.records);
    json sj = to_json(*result.summary);
    sj["config_hash"] = result.manifest["config_hash"];
    detail::write_text(dir / "summary.json", sj.dump(2) + "\n");
  } else {
    result.summary = summarize(result.records);
  }
  const auto t_end = std::chrono::steady_clock::now();
  json timing = {{"initial_state_seconds", std::chrono::duration<double>(t_init - t_start).count()},
                 {"total_seconds", std::chrono::duration<double>(t_end - t_start).count()},
                 {"threads", nthreads},
                 {"trajectory_seconds", seconds}};
  detail::write_text(dir / "timing.json", timing.dump(2) + "\n");
  return result;
}

}  // namespace smps
