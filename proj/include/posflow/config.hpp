#ifndef POSFLOW_CONFIG_HPP_
#define POSFLOW_CONFIG_HPP_

// Run configuration (JSON), snapshot CSV files and the diagnostics document.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "posflow/dg_solver.hpp"
#include "posflow/presets.hpp"

namespace posflow {

using json = nlohmann::ordered_json;

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string problem = "advection";
  double a = 1.0;
  double g = 9.81;
  double gamma = 1.4;

  std::string preset;  // empty for a piecewise table
  PresetParams params;
  std::vector<double> breaks;
  std::vector<std::vector<std::vector<double>>> pieces;

  double x_lo = 0.0;
  double x_hi = 1.0;
  int cells = 0;
  Boundary bc = Boundary::Periodic;

  int degree = 2;
  SpaceKind space_kind = SpaceKind::TotalDegree;
  int rk_order = 3;
  FluxKind flux = FluxKind::HLL;

  LimiterMode limiter = LimiterMode::Both;
  PointSetKind points = PointSetKind::Full;
  std::optional<double> M_bar;
  double pad_rho = 1e-12;
  double pad_p = 1e-12;
  std::optional<double> u_cap;
  DesingMap desing = DesingMap::Clip;
  PressureMethod pressure = PressureMethod::Secant;
  bool quick_check = true;

  double t_final = 0.0;
  double alpha_z = 0.8;
  double cfl_fraction = 0.4;
  std::optional<double> dt_max;
  bool outflow_cap = true;
  double snapshot_interval = 0.0;  // 0: initial and final states only
  int max_steps = 0;               // 0: unlimited

  std::string output_dir = ".";
  std::string prefix;  // defaults to the problem name

  FluxModel model() const {
    if (problem == "advection") return FluxModel::advection(a);
    if (problem == "burgers") return FluxModel::burgers();
    if (problem == "shallow_water") return FluxModel::shallow_water(g);
    return FluxModel::euler(gamma);
  }
  Mesh1D mesh() const { return Mesh1D::make(x_lo, x_hi, cells, bc); }
  SolverOptions solver_options(int threads = 1) const {
    SolverOptions o;
    o.model = model();
    o.flux = flux;
    o.degree = degree;
    o.rk_order = rk_order;
    o.limiter = limiter;
    o.points = points;
    o.M_bar = M_bar;
    o.pad = pad_rho;
    o.pad_p = pad_p;
    o.u_cap = u_cap;
    o.desing = desing;
    o.pressure = pressure;
    o.quick_check = quick_check;
    o.alpha_z = alpha_z;
    o.cfl_fraction = cfl_fraction;
    o.dt_max = dt_max ? *dt_max : kInf;
    o.outflow_cap = outflow_cap;
    o.threads = threads;
    return o;
  }
  InitialCondition initial_condition() const {
    if (!preset.empty()) return make_preset(model(), mesh(), preset, params);
    return make_piecewise(model(), breaks, pieces);
  }
};

namespace detail {

// Reads one JSON object, tracking which keys were consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, std::optional<double> fallback) {
    const json* v = find(key);
    if (!v) return required(key, fallback);
    if (!v->is_number()) throw ConfigError(at(key) + ": expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) throw ConfigError(at(key) + ": must be finite");
    return x;
  }

  std::optional<double> optional_number(const std::string& key) {
    const json* v = find(key);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_number()) throw ConfigError(at(key) + ": expected a number or null");
    return v->get<double>();
  }

  int integer(const std::string& key, std::optional<int> fallback) {
    const json* v = find(key);
    if (!v) return static_cast<int>(required(key, fallback ? std::optional<double>(*fallback) : std::nullopt));
    if (!v->is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
    return v->get<int>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(at(key) + ": expected true or false");
    return v->get<bool>();
  }

  std::string choice(const std::string& key, std::optional<std::string> fallback,
                     const std::vector<std::string>& allowed) {
    const json* v = find(key);
    if (!v) {
      if (!fallback) throw ConfigError(at(key) + ": required");
      return *fallback;
    }
    if (!v->is_string()) throw ConfigError(at(key) + ": expected a string");
    const auto s = v->get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(at(key) + ": '" + s + "' is not one of " + list);
    }
    return s;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(at(k) + ": unknown key");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  double required(const std::string& key, std::optional<double> fallback) const {
    if (!fallback) throw ConfigError(at(key) + ": required");
    return *fallback;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::vector<double> number_list(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw ConfigError(path + ": expected a number or a list of numbers");
  std::vector<double> v;
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw ConfigError(path + "[" + std::to_string(k) + "]: expected a number");
    v.push_back(j[k].get<double>());
  }
  return v;
}

inline json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

inline LimiterMode parse_limiter_mode(const std::string& s) {
  if (s == "off") return LimiterMode::Off;
  if (s == "pointwise") return LimiterMode::Pointwise;
  if (s == "retentional") return LimiterMode::Retentional;
  return LimiterMode::Both;
}

/// Parses and validates a configuration document.
inline RunConfig parse_config(const json& doc) {
  RunConfig c;
  detail::ObjectReader root(doc, "");
  c.problem = root.choice("problem", std::nullopt, {"advection", "burgers", "shallow_water", "euler"});

  if (const json* m = root.find("model")) {
    detail::ObjectReader r(*m, "model");
    if (c.problem == "advection") c.a = r.number("a", 1.0);
    if (c.problem == "shallow_water") {
      c.g = r.number("g", 9.81);
      if (!(c.g > 0.0)) throw ConfigError("model.g: must be > 0");
    }
    if (c.problem == "euler") {
      c.gamma = r.number("gamma", 1.4);
      if (!(c.gamma > 1.0)) throw ConfigError("model.gamma: must be > 1");
    }
    r.finish();
  }

  {
    const json* m = root.find("mesh");
    if (!m) throw ConfigError("mesh: required");
    detail::ObjectReader r(*m, "mesh");
    if (const json* d = r.find("domain")) {
      const auto v = detail::number_list(*d, "mesh.domain");
      if (v.size() != 2) throw ConfigError("mesh.domain: expected [x_lo, x_hi]");
      if (!(v[1] > v[0])) throw ConfigError("mesh.domain: need x_lo < x_hi");
      c.x_lo = v[0];
      c.x_hi = v[1];
    }
    c.cells = r.integer("cells", std::nullopt);
    if (c.cells < 1) throw ConfigError("mesh.cells: must be >= 1");
    c.bc = r.choice("bc", "periodic", {"periodic", "outflow"}) == "periodic" ? Boundary::Periodic : Boundary::Outflow;
    r.finish();
  }

  {
    const json* ic = root.find("initial_condition");
    if (!ic) throw ConfigError("initial_condition: required");
    detail::ObjectReader r(*ic, "initial_condition");
    const json* pw = r.find("piecewise");
    if (pw) {
      if (r.find("preset") && ic->contains("preset"))
        throw ConfigError("initial_condition: give either preset or piecewise, not both");
      detail::ObjectReader p(*pw, "initial_condition.piecewise");
      const json* b = p.find("breaks");
      const json* pc = p.find("pieces");
      if (!b) throw ConfigError("initial_condition.piecewise.breaks: required");
      if (!pc) throw ConfigError("initial_condition.piecewise.pieces: required");
      c.breaks = detail::number_list(*b, "initial_condition.piecewise.breaks");
      if (!pc->is_array()) throw ConfigError("initial_condition.piecewise.pieces: expected a list");
      for (std::size_t q = 0; q < pc->size(); ++q) {
        const std::string path = "initial_condition.piecewise.pieces[" + std::to_string(q) + "]";
        if (!(*pc)[q].is_array()) throw ConfigError(path + ": expected one coefficient list per variable");
        std::vector<std::vector<double>> piece;
        for (std::size_t v = 0; v < (*pc)[q].size(); ++v)
          piece.push_back(detail::number_list((*pc)[q][v], path + "[" + std::to_string(v) + "]"));
        c.pieces.push_back(piece);
      }
      p.finish();
      r.find("params");
      if (ic->contains("params")) throw ConfigError("initial_condition.params: only valid with a preset");
    } else {
      c.preset = r.choice("preset", std::nullopt, preset_names());
      if (const json* prm = r.find("params")) {
        if (!prm->is_object()) throw ConfigError("initial_condition.params: expected an object");
        for (const auto& [k, v] : prm->items())
          c.params[k] = detail::number_list(v, "initial_condition.params." + k);
      }
    }
    r.finish();
  }

  if (const json* s = root.find("space")) {
    detail::ObjectReader r(*s, "space");
    c.degree = r.integer("degree", 2);
    if (c.degree < 0) throw ConfigError("space.degree: must be >= 0");
    if (c.degree > 10) throw ConfigError("space.degree: must be <= 10");
    c.space_kind = r.choice("kind", "total_degree", {"total_degree", "tensor_product"}) == "total_degree"
                       ? SpaceKind::TotalDegree
                       : SpaceKind::TensorProduct;
    r.finish();
  }
  c.rk_order = root.integer("rk_order", 3);
  if (c.rk_order < 1 || c.rk_order > 3) throw ConfigError("rk_order: must be 1, 2 or 3");
  c.flux = root.choice("flux", "hll", {"hll", "llf"}) == "hll" ? FluxKind::HLL : FluxKind::LLF;

  if (const json* l = root.find("limiter")) {
    detail::ObjectReader r(*l, "limiter");
    c.limiter = parse_limiter_mode(r.choice("mode", "both", {"off", "pointwise", "retentional", "both"}));
    c.points = r.choice("points", "full", {"full", "minimal"}) == "full" ? PointSetKind::Full : PointSetKind::Minimal;
    c.M_bar = r.optional_number("M_bar");
    if (c.M_bar && !(*c.M_bar >= 1.0)) throw ConfigError("limiter.M_bar: must be >= 1");
    c.pad_rho = r.number("pad_rho", 1e-12);
    c.pad_p = r.number("pad_p", 1e-12);
    if (!(c.pad_rho >= 0.0)) throw ConfigError("limiter.pad_rho: must be >= 0");
    if (!(c.pad_p >= 0.0)) throw ConfigError("limiter.pad_p: must be >= 0");
    c.u_cap = r.optional_number("u_cap");
    if (c.u_cap && !(*c.u_cap > 0.0)) throw ConfigError("limiter.u_cap: must be > 0");
    c.desing = r.choice("desing_map", "clip", {"clip", "spline"}) == "clip" ? DesingMap::Clip : DesingMap::Spline;
    c.pressure = r.choice("pressure_method", "secant", {"secant", "quadratic_root"}) == "secant"
                     ? PressureMethod::Secant
                     : PressureMethod::QuadraticRoot;
    c.quick_check = r.boolean("quick_check", true);
    r.finish();
  }

  {
    const json* t = root.find("time");
    if (!t) throw ConfigError("time: required");
    detail::ObjectReader r(*t, "time");
    c.t_final = r.number("t_final", std::nullopt);
    if (!(c.t_final > 0.0)) throw ConfigError("time.t_final: must be > 0");
    c.alpha_z = r.number("alpha_z", 0.8);
    if (!(c.alpha_z > 0.0 && c.alpha_z < 1.0)) throw ConfigError("time.alpha_z: must lie in (0,1)");
    c.cfl_fraction = r.number("cfl_fraction", 0.4);
    if (!(c.cfl_fraction > 0.0 && c.cfl_fraction <= 1.0)) throw ConfigError("time.cfl_fraction: must lie in (0,1]");
    c.dt_max = r.optional_number("dt_max");
    if (c.dt_max && !(*c.dt_max > 0.0)) throw ConfigError("time.dt_max: must be > 0");
    c.outflow_cap = r.boolean("outflow_cap", true);
    c.snapshot_interval = r.number("snapshot_interval", 0.0);
    if (!(c.snapshot_interval >= 0.0)) throw ConfigError("time.snapshot_interval: must be >= 0");
    c.max_steps = r.integer("max_steps", 0);
    if (c.max_steps < 0) throw ConfigError("time.max_steps: must be >= 0");
    r.finish();
  }

  if (const json* o = root.find("output")) {
    detail::ObjectReader r(*o, "output");
    c.output_dir = r.choice("dir", ".", {});
    c.prefix = r.choice("prefix", "", {});
    r.finish();
  }
  if (c.prefix.empty()) c.prefix = c.problem;
  root.finish();

  // Presets and tables are checked against the model and mesh here so that
  // errors carry their paths before any work starts.
  try {
    c.initial_condition();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.rfind("initial_condition", 0) == 0 ? msg : "initial_condition: " + msg);
  }
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Fully resolved configuration; parses back to an identical RunConfig.
inline json to_json(const RunConfig& c) {
  json j;
  j["problem"] = c.problem;
  json model = json::object();
  if (c.problem == "advection") model["a"] = c.a;
  if (c.problem == "shallow_water") model["g"] = c.g;
  if (c.problem == "euler") model["gamma"] = c.gamma;
  j["model"] = model;
  json ic;
  if (!c.preset.empty()) {
    ic["preset"] = c.preset;
    json p = json::object();
    for (const auto& [k, v] : c.params) p[k] = v.size() == 1 ? json(v[0]) : json(v);
    ic["params"] = p;
  } else {
    ic["piecewise"] = {{"breaks", c.breaks}, {"pieces", c.pieces}};
  }
  j["initial_condition"] = ic;
  j["mesh"] = {{"domain", {c.x_lo, c.x_hi}}, {"cells", c.cells}, {"bc", to_string(c.bc)}};
  j["space"] = {{"degree", c.degree},
                {"kind", c.space_kind == SpaceKind::TotalDegree ? "total_degree" : "tensor_product"}};
  j["rk_order"] = c.rk_order;
  j["flux"] = to_string(c.flux);
  const double M = c.M_bar ? *c.M_bar : to_double(interval_weight(c.degree));
  j["limiter"] = {{"mode", to_string(c.limiter)},
                  {"points", to_string(c.points)},
                  {"M_bar", M},
                  {"pad_rho", c.pad_rho},
                  {"pad_p", c.pad_p},
                  {"u_cap", detail::optional_to_json(c.u_cap)},
                  {"desing_map", to_string(c.desing)},
                  {"pressure_method", to_string(c.pressure)},
                  {"quick_check", c.quick_check}};
  j["time"] = {{"t_final", c.t_final},
               {"alpha_z", c.alpha_z},
               {"cfl_fraction", c.cfl_fraction},
               {"dt_max", detail::optional_to_json(c.dt_max)},
               {"outflow_cap", c.outflow_cap},
               {"snapshot_interval", c.snapshot_interval},
               {"max_steps", c.max_steps}};
  j["output"] = {{"dir", c.output_dir}, {"prefix", c.prefix}};
  return j;
}

// ---------------------------------------------------------------------------
// Output files

/// Root for relative output directories: POSFLOW_OUTPUT_DIR when set,
/// otherwise the working directory.
inline std::filesystem::path output_directory(const RunConfig& c) {
  std::filesystem::path dir(c.output_dir);
  if (dir.is_absolute()) return dir;
  if (const char* env = std::getenv("POSFLOW_OUTPUT_DIR"); env && *env) return std::filesystem::path(env) / dir;
  return dir;
}

/// Digits after the point in snapshot file names.
inline int snapshot_time_digits(double interval) {
  int d = 3;
  if (interval > 0.0)
    while (d < 12 && std::abs(std::round(interval * std::pow(10.0, d)) - interval * std::pow(10.0, d)) > 1e-6) ++d;
  return d;
}

inline std::string snapshot_file_name(const std::string& prefix, double t, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "_t%.*f.csv", digits, t);
  return prefix + buf;
}

inline std::vector<std::string> snapshot_columns(const FluxModel& m) {
  std::vector<std::string> cols{"x_center"};
  for (const auto& v : m.variable_names()) cols.push_back(v);
  for (const auto& v : m.variable_names()) cols.push_back(v + "_min");
  cols.push_back("theta");
  return cols;
}

inline void write_snapshot_csv(std::ostream& out, const FluxModel& m, const Snapshot& s) {
  const auto cols = snapshot_columns(m);
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  out << "\n";
  const int nv = m.n_vars();
  char buf[32];
  auto put = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out << buf;
  };
  for (std::size_t i = 0; i < s.x_center.size(); ++i) {
    put(s.x_center[i]);
    for (int v = 0; v < nv; ++v) out << ",", put(s.averages[i * nv + v]);
    for (int v = 0; v < nv; ++v) out << ",", put(s.minima[i * nv + v]);
    out << ",";
    put(s.theta[i]);
    out << "\n";
  }
}

struct RunResult {
  std::filesystem::path directory;
  std::vector<std::string> snapshot_files;
  std::filesystem::path diagnostics_file;
  Diagnostics diagnostics;
  std::optional<std::string> error;  // runtime invariant failure
};

inline json diagnostics_json(const RunConfig& c, const DGSolver& s, const std::vector<Snapshot>& snaps,
                             const std::vector<std::string>& files, const std::optional<std::string>& error) {
  const Diagnostics& d = s.diagnostics();
  const FluxModel m = c.model();
  json j;
  j["config"] = to_json(c);
  j["variables"] = m.variable_names();
  j["functional_names"] = d.functional_names;
  j["M_bar"] = s.M_bar();
  j["initial_mass"] = d.initial_mass;

  json steps;
  std::vector<double> t, dt, dts, dtz, dtp, th, qr;
  std::vector<long> trig;
  std::vector<int> retries;
  std::vector<bool> ok;
  std::vector<std::vector<double>> mass(m.n_vars()), mins(d.functional_names.size());
  double drift = 0.0;
  for (const auto& r : d.steps) {
    t.push_back(r.t);
    dt.push_back(r.dt);
    dts.push_back(r.dt_stable);
    dtz.push_back(r.dt_zero);
    dtp.push_back(r.dt_pos);
    th.push_back(r.theta_min);
    trig.push_back(r.triggers);
    qr.push_back(r.quick_hit_rate);
    retries.push_back(r.retries);
    ok.push_back(r.dt_ok);
    for (int v = 0; v < m.n_vars(); ++v) {
      mass[v].push_back(r.mass[v]);
      drift = std::max(drift, std::abs(r.mass[v] - d.initial_mass[v]) / std::max(1e-300, std::abs(d.initial_mass[v])));
    }
    for (std::size_t q = 0; q < mins.size(); ++q) mins[q].push_back(r.minima[q]);
  }
  steps["t"] = t;
  steps["dt"] = dt;
  steps["dt_stable"] = dts;
  steps["dt_zero"] = dtz;
  steps["dt_pos"] = dtp;
  steps["theta_min"] = th;
  steps["triggers"] = trig;
  steps["quick_hit_rate"] = qr;
  steps["retries"] = retries;
  steps["dt_ok"] = ok;
  json mj = json::object(), nj = json::object();
  for (int v = 0; v < m.n_vars(); ++v) mj[m.variable_names()[v]] = mass[v];
  for (std::size_t q = 0; q < mins.size(); ++q) nj[d.functional_names[q]] = mins[q];
  steps["mass"] = mj;
  steps["min"] = nj;
  j["n_steps"] = d.steps.size();
  j["steps"] = steps;

  json mf = json::object();
  for (std::size_t q = 0; q < d.min_functionals.size(); ++q) mf[d.functional_names[q]] = d.min_functionals[q];
  j["min_functionals"] = mf;
  j["min_pressure"] = m.kind == ModelKind::Euler ? json(d.min_pressure) : json(nullptr);
  j["max_relative_mass_drift"] = drift;
  j["dt_checks_pass"] = d.dt_checks_pass;
  j["limiter_average_changes"] = d.limiter_average_changes;
  if (d.first_violation) {
    const auto& v = *d.first_violation;
    j["first_violation"] = {{"step", v.step}, {"t", v.t}, {"cell", v.cell}, {"quantity", v.quantity}, {"value", v.value}};
  } else {
    j["first_violation"] = nullptr;
  }
  j["completed"] = d.completed && !error;
  j["stop_reason"] = error ? "error" : d.stop_reason;
  j["error"] = error ? json(*error) : json(nullptr);
  json sl = json::array();
  for (std::size_t k = 0; k < files.size(); ++k) sl.push_back({{"t", snaps[k].t}, {"file", files[k]}});
  j["snapshots"] = sl;
  return j;
}

/// Runs a configuration and writes its snapshot files and diagnostics.json.
/// A runtime invariant failure is reported in the result (and in the
/// diagnostics document) rather than thrown.
inline RunResult run_simulation(const RunConfig& c, int threads = 1) {
  RunResult res;
  res.directory = output_directory(c);
  std::filesystem::create_directories(res.directory);
  DGSolver solver(c.mesh(), c.solver_options(threads));
  solver.set_initial(c.initial_condition());
  std::vector<Snapshot> snaps;
  try {
    snaps = solver.run(c.t_final, c.max_steps, c.snapshot_interval);
  } catch (const SolverError& e) {
    res.error = e.what();
    snaps.push_back(solver.snapshot());
  }
  const int digits = snapshot_time_digits(c.snapshot_interval);
  const FluxModel m = c.model();
  for (const auto& s : snaps) {
    const std::string name = snapshot_file_name(c.prefix, s.t, digits);
    std::ofstream out(res.directory / name);
    if (!out) throw std::runtime_error("cannot write " + (res.directory / name).string());
    write_snapshot_csv(out, m, s);
    res.snapshot_files.push_back(name);
  }
  res.diagnostics_file = res.directory / "diagnostics.json";
  std::ofstream out(res.diagnostics_file);
  if (!out) throw std::runtime_error("cannot write " + res.diagnostics_file.string());
  out << diagnostics_json(c, solver, snaps, res.snapshot_files, res.error).dump(2) << "\n";
  res.diagnostics = solver.diagnostics();
  return res;
}

}  // namespace posflow

#endif  // POSFLOW_CONFIG_HPP_
