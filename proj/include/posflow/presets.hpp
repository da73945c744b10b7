#ifndef POSFLOW_PRESETS_HPP_
#define POSFLOW_PRESETS_HPP_

// Named initial conditions.  Values are given in primitive variables
// (scalar: u; shallow water: h, velocity; Euler: rho, velocity, p).

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "posflow/dg_solver.hpp"

namespace posflow {

using PresetParams = std::map<std::string, std::vector<double>>;

namespace detail {

inline double param(const PresetParams& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  if (it == p.end()) return fallback;
  if (it->second.size() != 1) throw std::invalid_argument("initial_condition.params." + key + " must be a number");
  return it->second[0];
}

inline std::vector<double> param_vec(const PresetParams& p, const std::string& key, std::vector<double> fallback,
                                     std::size_t n) {
  auto it = p.find(key);
  std::vector<double> v = it == p.end() ? fallback : it->second;
  if (v.size() != n)
    throw std::invalid_argument("initial_condition.params." + key + " must have " + std::to_string(n) + " entries");
  return v;
}

inline State primitive(const FluxModel& m, const std::vector<double>& q) {
  return m.from_primitive(q[0], q.size() > 1 ? q[1] : 0.0, q.size() > 2 ? q[2] : 0.0);
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  return {"sine", "clipped_sine", "square", "riemann", "dam_break", "sod", "double_rarefaction", "shu_osher"};
}

/// Presets whose exact solution is smooth (accepted by the convergence study).
inline bool preset_is_smooth(const std::string& name) { return name == "sine"; }

/// Builds a named initial condition on `mesh`.  Keys not used by the preset
/// are rejected.
inline InitialCondition make_preset(const FluxModel& m, const Mesh1D& mesh, const std::string& name,
                                    const PresetParams& params = {}) {
  const auto allowed = [&](std::vector<std::string> keys) {
    for (const auto& [k, v] : params)
      if (std::find(keys.begin(), keys.end(), k) == keys.end())
        throw std::invalid_argument("initial_condition.params." + k + ": unknown key for preset '" + name + "'");
  };
  const int nv = m.n_vars();
  const double L = mesh.x_hi - mesh.x_lo, x_lo = mesh.x_lo;
  const double two_pi = 2.0 * std::numbers::pi;
  InitialCondition ic;

  if (name == "sine" || name == "clipped_sine") {
    allowed({"mean", "amplitude", "waves", "velocity", "pressure"});
    const bool clipped = name == "clipped_sine";
    const double mean = detail::param(params, "mean", clipped ? 0.0 : 1.0);
    const double amp = detail::param(params, "amplitude", clipped ? 1.0 : 0.99);
    const double waves = detail::param(params, "waves", 1.0);
    const double vel = detail::param(params, "velocity", 0.5);
    const double pres = detail::param(params, "pressure", 1.0);
    ic.state = [=](double x) {
      double a = mean + amp * std::sin(two_pi * waves * (x - x_lo) / L);
      if (clipped) a = std::max(0.0, a);
      return m.from_primitive(a, vel, pres);
    };
    if (clipped)
      for (int j = 0; j <= static_cast<int>(2 * waves) + 1; ++j) ic.breakpoints.push_back(x_lo + j * L / (2 * waves));
    return ic;
  }
  if (name == "square") {
    allowed({"low", "high", "left", "right", "velocity", "pressure"});
    const double lo = detail::param(params, "low", 0.0), hi = detail::param(params, "high", 1.0);
    const double a = detail::param(params, "left", x_lo + 0.25 * L), b = detail::param(params, "right", x_lo + 0.75 * L);
    const double vel = detail::param(params, "velocity", 0.0), pres = detail::param(params, "pressure", 1.0);
    ic.state = [=](double x) { return m.from_primitive(x >= a && x < b ? hi : lo, vel, pres); };
    ic.breakpoints = {a, b};
    return ic;
  }
  if (name == "riemann" || name == "dam_break" || name == "sod" || name == "double_rarefaction") {
    allowed({"x0", "left", "right"});
    std::vector<double> l, r;
    double x0 = x_lo + 0.5 * L;
    if (name == "dam_break") {
      if (m.kind != ModelKind::ShallowWater) throw std::invalid_argument("preset 'dam_break' needs shallow_water");
      l = {1.0, 0.0};
      r = {1e-12, 0.0};
      x0 = 0.0;
    } else if (name == "sod") {
      if (m.kind != ModelKind::Euler) throw std::invalid_argument("preset 'sod' needs euler");
      l = {1.0, 0.0, 1.0};
      r = {0.125, 0.0, 0.1};
    } else if (name == "double_rarefaction") {
      if (m.kind != ModelKind::Euler) throw std::invalid_argument("preset 'double_rarefaction' needs euler");
      l = {1.0, -2.0, 0.4};
      r = {1.0, 2.0, 0.4};
    } else {
      l = std::vector<double>(nv, 1.0);
      r = std::vector<double>(nv, 0.5);
    }
    x0 = detail::param(params, "x0", x0);
    l = detail::param_vec(params, "left", l, nv);
    r = detail::param_vec(params, "right", r, nv);
    const State sl = detail::primitive(m, l), sr = detail::primitive(m, r);
    ic.state = [=](double x) { return x < x0 ? sl : sr; };
    ic.breakpoints = {x0};
    return ic;
  }
  if (name == "shu_osher") {
    if (m.kind != ModelKind::Euler) throw std::invalid_argument("preset 'shu_osher' needs euler");
    allowed({"x0", "amplitude", "frequency"});
    const double x0 = detail::param(params, "x0", -4.0);
    const double amp = detail::param(params, "amplitude", 0.2), freq = detail::param(params, "frequency", 5.0);
    const State left = m.from_primitive(3.857143, 2.629369, 10.33333);
    ic.state = [=](double x) { return x < x0 ? left : m.from_primitive(1.0 + amp * std::sin(freq * x), 0.0, 1.0); };
    ic.breakpoints = {x0};
    return ic;
  }
  throw std::invalid_argument("initial_condition.preset: unknown preset '" + name + "'");
}

/// Piecewise-polynomial table: on [breaks[p], breaks[p+1]) variable v equals
/// sum_n coeffs[p][v][n] (x - breaks[p])^n, in primitive variables.
inline InitialCondition make_piecewise(const FluxModel& m, std::vector<double> breaks,
                                       std::vector<std::vector<std::vector<double>>> coeffs) {
  if (breaks.size() < 2 || coeffs.size() != breaks.size() - 1)
    throw std::invalid_argument("initial_condition.piecewise: need len(pieces) == len(breaks) - 1 >= 1");
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p)
    if (!(breaks[p + 1] > breaks[p])) throw std::invalid_argument("initial_condition.piecewise.breaks must increase");
  for (const auto& piece : coeffs)
    if (static_cast<int>(piece.size()) != m.n_vars())
      throw std::invalid_argument("initial_condition.piecewise.pieces: one coefficient list per variable");
  InitialCondition ic;
  ic.breakpoints = breaks;
  ic.state = [=](double x) {
    std::size_t p = 0;
    while (p + 2 < breaks.size() && x >= breaks[p + 1]) ++p;
    std::vector<double> q;
    for (const auto& c : coeffs[p]) {
      double v = 0.0;
      for (std::size_t n = c.size(); n-- > 0;) v = v * (x - breaks[p]) + c[n];
      q.push_back(v);
    }
    return detail::primitive(m, q);
  };
  return ic;
}

}  // namespace posflow

#endif  // POSFLOW_PRESETS_HPP_
