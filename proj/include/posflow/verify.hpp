#ifndef POSFLOW_VERIFY_HPP_
#define POSFLOW_VERIFY_HPP_

// Property suites behind `posflow verify`.  Every property reports a margin:
// the distance to its tolerance, positive when the property holds.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "posflow/dg_solver.hpp"
#include "posflow/positivity.hpp"
#include "posflow/riemann.hpp"
#include "posflow/weights.hpp"

namespace posflow {

struct PropertyResult {
  std::string suite;
  std::string name;
  bool passed = true;
  double margin = 0.0;
  std::string detail;
  bool informational = false;  // reported, never fails the run
};

struct VerifyOptions {
  long samples = 10000;
  std::uint64_t seed = 1;
};

namespace detail {

inline PropertyResult property(std::string suite, std::string name, double margin, std::string detail = {}) {
  PropertyResult r;
  r.suite = std::move(suite);
  r.name = std::move(name);
  r.margin = margin;
  r.passed = margin >= 0.0;
  r.detail = std::move(detail);
  return r;
}

inline std::string fmt_g(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Random positive conserved state.
inline State random_positive_state(const FluxModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.01, 10.0), vel(-5.0, 5.0);
  switch (m.kind) {
    case ModelKind::Advection:
    case ModelKind::Burgers: return {pos(rng), 0, 0};
    case ModelKind::ShallowWater: return m.from_primitive(pos(rng), vel(rng));
    case ModelKind::Euler: return m.from_primitive(pos(rng), vel(rng), pos(rng));
  }
  return {};
}

/// Random linear functional nonnegative on the positive cone of the model:
/// the first component for scalar models and shallow water; for Euler
/// a rho + b m + c E with c >= 0 and b^2 <= 2ac.
inline State random_positivity_functional(const FluxModel& m, std::mt19937_64& rng) {
  if (m.kind != ModelKind::Euler) return {1.0, 0.0, 0.0};
  std::uniform_real_distribution<double> u(0.0, 1.0), b(-3.0, 3.0);
  const double pick = u(rng);
  if (pick < 0.2) return {1.0, 0.0, 0.0};
  if (pick < 0.3) return {0.0, 0.0, 1.0};
  const double c = u(rng) + 1e-3, bb = b(rng);
  const double a = bb * bb / (2.0 * c) + (pick < 0.6 ? 0.0 : u(rng) * u(rng));
  return {a, bb, c};
}

inline double apply(const State& L, const State& u) { return L[0] * u[0] + L[1] * u[1] + L[2] * u[2]; }

}  // namespace detail

/// Outflow through a node is bounded by the speed cap times the interior
/// value of every linear positivity functional.  Returns the smallest
/// relative slack over `pairs` random state pairs per model and flux.
inline double speed_cap_slack(const FluxModel& m, FluxKind kind, int pairs, std::mt19937_64& rng) {
  double worst = kInf;
  for (int i = 0; i < pairs; ++i) {
    const State u = detail::random_positive_state(m, rng), other = detail::random_positive_state(m, rng);
    const State L = detail::random_positivity_functional(m, rng);
    const double bound = detail::apply(L, u);
    const double right = detail::apply(L, numerical_flux(m, kind, u, other));
    const double left = -detail::apply(L, numerical_flux(m, kind, other, u));
    const double lr = speed_cap_at_node(m, u, other, +1, kind), ll = speed_cap_at_node(m, u, other, -1, kind);
    worst = std::min(worst, (lr * bound - right) / (1.0 + std::abs(right)));
    worst = std::min(worst, (ll * bound - left) / (1.0 + std::abs(left)));
  }
  return worst;
}

inline std::vector<PropertyResult> verify_weights(const VerifyOptions& opt) {
  std::vector<PropertyResult> out;
  for (int n = 1; n <= 5; ++n) {
    const double got = boundary_crowding(interval_optimizer(2 * n));
    const double want = (n + 1.0) * (n + 2.0) / 2.0;
    out.push_back(detail::property("weights", "interval optimizer crowding k=" + std::to_string(2 * n),
                                   1e-10 - std::abs(got - want), detail::fmt_g(got)));
  }
  for (const auto& c : {CanonicalCell::box(2), CanonicalCell::box(3), CanonicalCell::simplex(2),
                        CanonicalCell::simplex(3), CanonicalCell::sphere(2), CanonicalCell::sphere(3)}) {
    const double got = boundary_crowding(quadratic_optimizer(c));
    const double want = to_double(quadratic_star_weight(c.dim()));
    out.push_back(detail::property("weights", c.name() + " quadratic optimizer crowding", 1e-10 - std::abs(got - want),
                                   detail::fmt_g(got)));
  }
  for (int D : {2, 3}) {
    const double got = boundary_crowding(cubic_simplex_optimizer(D));
    const double want = to_double(cubic_simplex_weight(D));
    out.push_back(detail::property("weights", CanonicalCell::simplex(D).name() + " cubic optimizer crowding",
                                   1e-10 - std::abs(got - want), detail::fmt_g(got)));
  }

  struct Case {
    CanonicalCell cell;
    int k;
  };
  const std::vector<Case> cases = {
      {CanonicalCell::interval(), 2}, {CanonicalCell::interval(), 3}, {CanonicalCell::interval(), 4},
      {CanonicalCell::interval(), 6}, {CanonicalCell::simplex(2), 2}, {CanonicalCell::simplex(2), 3},
      {CanonicalCell::simplex(2), 4}, {CanonicalCell::box(2), 2},     {CanonicalCell::box(2), 4},
      {CanonicalCell::sphere(2), 3},  {CanonicalCell::simplex(3), 3}, {CanonicalCell::box(3), 2}};
  for (const auto& c : cases) {
    const long n = c.cell.dim() == 3 ? std::max(1L, opt.samples / 10) : opt.samples;
    const double got = sample_lower_bound(c.cell, c.k, n, opt.seed + static_cast<std::uint64_t>(c.k));
    const WeightBracket w = tabulated_weight(c.cell, c.k);
    const double upper = to_double(w.upper);
    out.push_back(detail::property("weights", "sampled " + c.cell.name() + " k=" + std::to_string(c.k) + " <= upper",
                                   upper + 1e-10 - got,
                                   "sampled " + detail::fmt_g(got) + " upper " + detail::fmt_g(upper)));
    if (w.exact()) {
      const double ratio = got / upper;
      auto r = detail::property("weights",
                                "sampled " + c.cell.name() + " k=" + std::to_string(c.k) + " reaches 97% of exact",
                                ratio - 0.97, "ratio " + detail::fmt_g(ratio));
      // The reach is only asserted at the full sampling budget.
      if (opt.samples < 100000 || c.cell.dim() == 3) {
        r.informational = true;
        r.passed = true;
      }
      out.push_back(r);
    }
  }
  return out;
}

inline std::vector<PropertyResult> verify_fluxes(const VerifyOptions& opt) {
  std::vector<PropertyResult> out;
  std::mt19937_64 rng(opt.seed);
  for (const auto& m : {FluxModel::advection(1.0), FluxModel::advection(-0.7), FluxModel::burgers(),
                        FluxModel::shallow_water(9.81), FluxModel::euler(1.4)})
    for (FluxKind kind : {FluxKind::HLL, FluxKind::LLF}) {
      const double slack = speed_cap_slack(m, kind, 1000, rng);
      const std::string label = m.kind == ModelKind::Advection ? "advection a=" + detail::fmt_g(m.a) : m.name();
      out.push_back(detail::property("flux", "speed cap bounds outflow (" + label + ", " + to_string(kind) + ")",
                                     slack + 1e-12, "min relative slack " + detail::fmt_g(slack)));
    }
  return out;
}

inline std::vector<PropertyResult> verify_limiter(const VerifyOptions& opt) {
  std::vector<PropertyResult> out;
  std::mt19937_64 rng(opt.seed + 100);
  std::normal_distribution<double> normal(0.0, 1.0);
  const FluxModel eu = FluxModel::euler(1.4);
  for (int k = 1; k <= 4; ++k) {
    auto space = PolySpace::make(CanonicalCell::interval(), k);
    const int nm = k + 1;
    std::vector<Point> pts;
    for (int i = 0; i <= 40; ++i) pts.push_back({i / 40.0, 0, 0});
    const auto table = tabulate(*space, pts);
    const auto bavg = space->boundary_average_of_basis();
    const double M = to_double(interval_weight(k));
    double pos_margin = kInf, avg_change = 0.0, ret_margin = kInf, quick_margin = kInf;
    for (int trial = 0; trial < 300; ++trial) {
      const bool euler = trial % 2 == 1;
      const int nv = euler ? 3 : 1;
      const PositivitySet set = euler ? PositivitySet::euler(1.4, 1e-10, 1e-10) : PositivitySet::scalar(1e-10);
      std::vector<double> c(static_cast<std::size_t>(nv) * nm);
      const State bar = euler ? eu.from_primitive(0.5 + std::abs(normal(rng)), normal(rng), 0.2 + std::abs(normal(rng)))
                              : State{0.2 + std::abs(normal(rng)), 0, 0};
      for (int v = 0; v < nv; ++v) {
        c[static_cast<std::size_t>(v) * nm] = bar[v];
        for (int j = 1; j < nm; ++j) c[static_cast<std::size_t>(v) * nm + j] = 0.7 * bar[v] * normal(rng) / j;
      }
      const bool quick = quick_positivity_check(c, nv, *space, set);
      double before_min = kInf;
      for (int p = 0; p < table.n_points; ++p) before_min = std::min(before_min, set.margin(state_at(table, p, c, nv)));
      if (quick) quick_margin = std::min(quick_margin, before_min);

      const std::vector<double> orig = c;
      limit_pointwise(c, nv, table, set);
      if (M > 1.0) limit_retentional(c, nv, nm, bavg, M, set);
      for (int v = 0; v < nv; ++v)
        avg_change = std::max(avg_change, std::abs(c[static_cast<std::size_t>(v) * nm] - orig[static_cast<std::size_t>(v) * nm]));
      for (int p = 0; p < table.n_points; ++p)
        pos_margin = std::min(pos_margin, set.margin(state_at(table, p, c, nv)) + 1e-12);
      if (M > 1.0) {
        const State r = retentional_direction(c, nv, nm, bavg, M);
        ret_margin = std::min(ret_margin, set.margin(cell_mean(c, nv, nm) + r) + 1e-12);
      }
    }
    const std::string ks = " k=" + std::to_string(k);
    out.push_back(detail::property("limiter", "limited values in padded set" + ks, pos_margin));
    out.push_back(detail::property("limiter", "averages unchanged" + ks, avg_change == 0.0 ? 0.0 : -avg_change, "max change " + detail::fmt_g(avg_change)));
    if (M > 1.0) out.push_back(detail::property("limiter", "retentional in padded set" + ks, ret_margin));
    if (std::isfinite(quick_margin))
      out.push_back(detail::property("limiter", "quick check is sound" + ks, quick_margin));
  }
  return out;
}

inline std::vector<PropertyResult> verify_time_step(const VerifyOptions& opt) {
  std::mt19937_64 rng(opt.seed + 200);
  std::uniform_real_distribution<double> U(0.0, 1.0), S(-1.0, 1.0);
  const double gamma = 1.4, pr = 1e-12, pp = 1e-12;
  const FluxModel m = FluxModel::euler(gamma);
  auto ok = [&](const State& bar, const State& q, double t) {
    const State u = bar - t * q;
    return u[0] >= pr && (gamma - 1.0) * (u[0] * u[2] - 0.5 * u[1] * u[1]) >= pp * u[0];
  };
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const State bar = m.from_primitive(0.1 + U(rng), 2.0 * S(rng), 0.05 + U(rng));
    const State q{S(rng), 3.0 * S(rng), 4.0 * S(rng)};
    const double t = dt_zero_euler(gamma, bar, q, pr, pp);
    if (!std::isfinite(t)) {
      if (!ok(bar, q, 1e6)) worst = kInf;
      continue;
    }
    double lo = 0.0, hi = 2.0 * t + 1.0;
    while (ok(bar, q, hi)) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(bar, q, mid) ? lo : hi) = mid;
    }
    worst = std::max(worst, std::abs(t - lo) / std::max(1.0, lo));
  }
  return {detail::property("time step", "euler outflow cap matches bisection", 1e-10 - worst,
                           "max relative difference " + detail::fmt_g(worst))};
}

inline std::vector<PropertyResult> verify_all(const VerifyOptions& opt) {
  if (opt.samples < 1) throw std::invalid_argument("--samples must be >= 1");
  std::vector<PropertyResult> all;
  for (auto&& part : {verify_weights(opt), verify_fluxes(opt), verify_limiter(opt), verify_time_step(opt)})
    all.insert(all.end(), part.begin(), part.end());
  return all;
}

/// One line per property; returns true when every asserted property holds.
inline bool write_verify_report(std::ostream& out, const std::vector<PropertyResult>& results) {
  bool all = true;
  for (const auto& r : results) {
    const char* status = r.informational ? "INFO" : r.passed ? "PASS" : "FAIL";
    out << status << "  [" << r.suite << "] " << r.name << "  margin=" << detail::fmt_g(r.margin);
    if (!r.detail.empty()) out << "  (" << r.detail << ")";
    out << "\n";
    all = all && r.passed;
  }
  const PropertyResult* first = nullptr;
  for (const auto& r : results)
    if (!r.passed) {
      first = &r;
      break;
    }
  if (first) out << "FAILED: first failing property: [" << first->suite << "] " << first->name << "\n";
  else out << "ALL PASS (" << results.size() << " properties)\n";
  return all;
}

}  // namespace posflow

#endif  // POSFLOW_VERIFY_HPP_
