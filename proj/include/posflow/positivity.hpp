#ifndef POSFLOW_POSITIVITY_HPP_
#define POSFLOW_POSITIVITY_HPP_

// Damping coefficients, point-wise and retentional limiters, a cheap
// interval-arithmetic certificate, and wave-speed desingularization.
//
// Coefficients of one cell are stored variable-major: coeffs[v * n_modes + j].
// Limiters only rescale modes j >= 1, so the cell average is never written.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "posflow/models.hpp"
#include "posflow/poly_space.hpp"

namespace posflow {

enum class SetKind { Scalar, ScalarBounds, ShallowWater, Euler };

struct PositivitySet {
  SetKind kind = SetKind::Scalar;
  double pad = 0.0;     // u, h, or rho
  double pad_p = 0.0;   // Euler pressure
  double lower = 0.0;   // ScalarBounds
  double upper = 1.0;
  double gamma = 1.4;

  static PositivitySet scalar(double pad = 0.0) {
    PositivitySet s;
    s.kind = SetKind::Scalar;
    s.pad = pad;
    return s;
  }
  static PositivitySet scalar_bounds(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("scalar_bounds: need lower < upper");
    PositivitySet s;
    s.kind = SetKind::ScalarBounds;
    s.lower = lo;
    s.upper = hi;
    return s;
  }
  static PositivitySet shallow_water(double pad = 1e-12) {
    PositivitySet s;
    s.kind = SetKind::ShallowWater;
    s.pad = pad;
    return s;
  }
  static PositivitySet euler(double gamma, double pad_rho = 1e-12, double pad_p = 1e-12) {
    PositivitySet s;
    s.kind = SetKind::Euler;
    s.gamma = gamma;
    s.pad = pad_rho;
    s.pad_p = pad_p;
    return s;
  }

  int n_vars() const { return kind == SetKind::ShallowWater ? 2 : kind == SetKind::Euler ? 3 : 1; }

  double pressure(const State& u) const { return (gamma - 1.0) * (u[2] - 0.5 * u[1] * u[1] / u[0]); }

  /// Margin of the binding constraint; >= 0 iff the state is accepted.
  double margin(const State& u) const {
    switch (kind) {
      case SetKind::Scalar:
      case SetKind::ShallowWater: return u[0] - pad;
      case SetKind::ScalarBounds: return std::min(u[0] - lower, upper - u[0]);
      case SetKind::Euler:
        if (!(u[0] - pad >= 0.0) || !(u[0] > 0.0)) return u[0] - pad;
        return std::min(u[0] - pad, pressure(u) - pad_p);
    }
    return 0.0;
  }

  bool accepts(const State& u) const { return margin(u) >= 0.0; }
};

struct DampingResult {
  double theta = 1.0;
  bool triggered = false;
  std::string binding;  // empty when not triggered
};

/// Largest theta in [0,1] with (1 - theta) a_bar + theta a_val >= pad.
inline double damping_affine(double a_bar, double a_val, double pad) {
  if (a_bar < pad) throw std::domain_error("cell average violates positivity");
  if (a_val >= pad) return 1.0;
  return std::clamp((a_bar - pad) / (a_bar - a_val), 0.0, 1.0);
}

enum class PressureMethod { Secant, QuadraticRoot };

inline const char* to_string(PressureMethod m) {
  return m == PressureMethod::Secant ? "secant" : "quadratic_root";
}

namespace detail {

// Smallest root in [0, 1] of a t^2 + b t + c with c >= 0, or 1 if none.
inline double first_root_in_unit(double a, double b, double c) {
  auto q = [&](double t) { return (a * t + b) * t + c; };
  double root = std::numeric_limits<double>::infinity();
  auto take = [&](double r) {
    if (r >= 0.0 && r <= 1.0) root = std::min(root, r);
  };
  if (a == 0.0) {
    if (b != 0.0) take(-c / b);
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double qq = -0.5 * (b + std::copysign(std::sqrt(disc), b));
      take(qq / a);
      if (qq != 0.0) take(c / qq);
    }
  }
  if (!(root <= 1.0)) return q(1.0) >= 0.0 ? 1.0 : 0.0;
  double t = root;
  for (int i = 0; i < 64 && t > 0.0 && q(t) < 0.0; ++i) t = std::nextafter(t, 0.0);
  if (q(t) < 0.0) t *= 1.0 - 1e-12;
  return std::max(t, 0.0);
}

}  // namespace detail

/// Damping toward state_bar that keeps the pressure of
/// (1 - theta) state_bar + theta state_val above pad.
inline double damping_pressure(double gamma, const State& bar, const State& val, double pad,
                               PressureMethod method = PressureMethod::Secant) {
  const auto p = [&](const State& u) { return (gamma - 1.0) * (u[2] - 0.5 * u[1] * u[1] / u[0]); };
  if (!(bar[0] > 0.0) || !(p(bar) >= pad)) throw std::domain_error("average outside positive set");
  const double pv = val[0] > 0.0 ? p(val) : -std::numeric_limits<double>::infinity();
  if (pv >= pad) return 1.0;
  if (method == PressureMethod::Secant && val[0] > 0.0) {
    const double pb = p(bar);
    return std::clamp((pb - pad) / (pb - pv), 0.0, 1.0);
  }
  // rho p - pad rho along the segment is quadratic in theta.
  const State d = val - bar;
  const double g1 = gamma - 1.0;
  const double a = g1 * (d[0] * d[2] - 0.5 * d[1] * d[1]);
  const double b = g1 * (bar[0] * d[2] + d[0] * bar[2] - bar[1] * d[1]) - pad * d[0];
  const double c = g1 * (bar[0] * bar[2] - 0.5 * bar[1] * bar[1]) - pad * bar[0];
  return detail::first_root_in_unit(a, b, std::max(c, 0.0));
}

// ---------------------------------------------------------------------------
// Cell helpers

inline State cell_mean(std::span<const double> coeffs, int n_vars, int n_modes) {
  State s{0, 0, 0};
  for (int v = 0; v < n_vars; ++v) s[v] = coeffs[static_cast<std::size_t>(v) * n_modes];
  return s;
}

inline State state_at(const PointTable& table, int p, std::span<const double> coeffs, int n_vars) {
  State s{0, 0, 0};
  for (int v = 0; v < n_vars; ++v)
    s[v] = table.eval(p, coeffs.subspan(static_cast<std::size_t>(v) * table.n_modes, table.n_modes));
  return s;
}

inline void damp(std::span<double> coeffs, int n_vars, int n_modes, double theta) {
  if (theta >= 1.0) return;
  for (int v = 0; v < n_vars; ++v)
    for (int j = 1; j < n_modes; ++j) coeffs[static_cast<std::size_t>(v) * n_modes + j] *= theta;
}

namespace detail {

// Damping of the segment bar -> val against every affine constraint of the
// set, and for Euler the density constraint only.
inline double affine_theta(const PositivitySet& set, const State& bar, const State& val) {
  switch (set.kind) {
    case SetKind::Scalar:
    case SetKind::ShallowWater:
    case SetKind::Euler: return damping_affine(bar[0], val[0], set.pad);
    case SetKind::ScalarBounds:
      return std::min(damping_affine(bar[0] - set.lower, val[0] - set.lower, 0.0),
                      damping_affine(set.upper - bar[0], set.upper - val[0], 0.0));
  }
  return 1.0;
}

inline const char* affine_label(const PositivitySet& set) {
  switch (set.kind) {
    case SetKind::Scalar: return "u";
    case SetKind::ScalarBounds: return "bounds";
    case SetKind::ShallowWater: return "depth";
    case SetKind::Euler: return "density";
  }
  return "?";
}

}  // namespace detail

/// Point-wise limiter over the rows of `table`.  For Euler the density is
/// damped over all points first, then the pressure; theta is the product.
inline DampingResult limit_pointwise(std::span<double> coeffs, int n_vars, const PointTable& table,
                                     const PositivitySet& set,
                                     PressureMethod method = PressureMethod::Secant) {
  const int nm = table.n_modes;
  const State bar = cell_mean(coeffs, n_vars, nm);
  if (set.kind == SetKind::Euler && !(set.pressure(bar) >= set.pad_p) && bar[0] >= set.pad)
    throw std::domain_error("average outside positive set");
  DampingResult r;
  double t1 = 1.0;
  for (int p = 0; p < table.n_points; ++p)
    t1 = std::min(t1, detail::affine_theta(set, bar, state_at(table, p, coeffs, n_vars)));
  damp(coeffs, n_vars, nm, t1);
  if (t1 < 1.0) {
    r.triggered = true;
    r.binding = detail::affine_label(set);
  }
  double t2 = 1.0;
  if (set.kind == SetKind::Euler) {
    for (int p = 0; p < table.n_points; ++p)
      t2 = std::min(t2, damping_pressure(set.gamma, bar, state_at(table, p, coeffs, n_vars),
                                         set.pad_p, method));
    damp(coeffs, n_vars, nm, t2);
    if (t2 < 1.0) {
      r.triggered = true;
      r.binding = "pressure";
    }
  }
  r.theta = t1 * t2;
  return r;
}

/// Unital retentional direction r = -B(dU)/(M - 1) for every variable.
inline State retentional_direction(std::span<const double> coeffs, int n_vars, int n_modes,
                                   std::span<const double> boundary_avg, double M_bar) {
  State r{0, 0, 0};
  for (int v = 0; v < n_vars; ++v) {
    double b = 0.0;
    for (int j = 1; j < n_modes; ++j) b += boundary_avg[j] * coeffs[static_cast<std::size_t>(v) * n_modes + j];
    r[v] = -b / (M_bar - 1.0);
  }
  return r;
}

/// Damping that keeps the unital retentional state (M C(U) - B(U))/(M - 1)
/// inside the set.  Along theta it moves on the segment bar -> bar + r.
inline double retentional_theta(const PositivitySet& set, const State& bar, const State& r,
                                PressureMethod method = PressureMethod::Secant) {
  double t = detail::affine_theta(set, bar, bar + r);
  if (set.kind == SetKind::Euler) t *= damping_pressure(set.gamma, bar, bar + t * r, set.pad_p, method);
  return t;
}

inline DampingResult limit_retentional(std::span<double> coeffs, int n_vars, int n_modes,
                                       std::span<const double> boundary_avg, double M_bar,
                                       const PositivitySet& set,
                                       PressureMethod method = PressureMethod::Secant) {
  if (!(M_bar > 1.0)) throw std::invalid_argument("limit_retentional: M_bar must exceed 1");
  const State bar = cell_mean(coeffs, n_vars, n_modes);
  const State r = retentional_direction(coeffs, n_vars, n_modes, boundary_avg, M_bar);
  DampingResult res;
  res.theta = retentional_theta(set, bar, r, method);
  damp(coeffs, n_vars, n_modes, res.theta);
  if (res.theta < 1.0) {
    res.triggered = true;
    res.binding = "retentional";
  }
  return res;
}

// ---------------------------------------------------------------------------
// Polynomial-level entry points

namespace detail {

inline std::vector<double> pack(const std::vector<Polynomial>& U) {
  std::vector<double> c;
  for (const auto& p : U) c.insert(c.end(), p.coeffs.begin(), p.coeffs.end());
  return c;
}

inline void unpack(std::vector<Polynomial>& U, const std::vector<double>& c) {
  std::size_t k = 0;
  for (auto& p : U)
    for (auto& x : p.coeffs) x = c[k++];
}

}  // namespace detail

inline DampingResult limit_pointwise(std::vector<Polynomial>& U, std::span<const Point> points,
                                     const PositivitySet& set,
                                     PressureMethod method = PressureMethod::Secant) {
  auto c = detail::pack(U);
  const auto table = tabulate(*U.front().space, points);
  const auto r = limit_pointwise(c, static_cast<int>(U.size()), table, set, method);
  detail::unpack(U, c);
  return r;
}

inline DampingResult limit_retentional(std::vector<Polynomial>& U, double M_bar,
                                       const PositivitySet& set,
                                       PressureMethod method = PressureMethod::Secant) {
  auto c = detail::pack(U);
  const auto& space = *U.front().space;
  const auto r = limit_retentional(c, static_cast<int>(U.size()), space.size(),
                                   space.boundary_average_of_basis(), M_bar, set, method);
  detail::unpack(U, c);
  return r;
}

/// Interval-arithmetic certificate that every point of the cell lies in the
/// set.  Never returns true for a cell that has a violating point.
inline bool quick_positivity_check(std::span<const double> coeffs, int n_vars, const PolySpace& space,
                                   const PositivitySet& set) {
  const int nm = space.size();
  std::array<double, 3> lo{0, 0, 0}, hi{0, 0, 0};
  for (int v = 0; v < n_vars; ++v) {
    double spread = 0.0;
    for (int j = 1; j < nm; ++j)
      spread += std::abs(coeffs[static_cast<std::size_t>(v) * nm + j]) * space.basis_bound(j);
    // Outward rounding margin.
    const double c0 = coeffs[static_cast<std::size_t>(v) * nm];
    spread = spread * (1.0 + 1e-12) + 1e-14 * std::abs(c0);
    lo[v] = c0 - spread;
    hi[v] = c0 + spread;
  }
  switch (set.kind) {
    case SetKind::Scalar:
    case SetKind::ShallowWater: return lo[0] >= set.pad;
    case SetKind::ScalarBounds: return lo[0] >= set.lower && hi[0] <= set.upper;
    case SetKind::Euler: {
      if (!(lo[0] >= set.pad) || !(lo[0] > 0.0) || !(lo[2] >= 0.0)) return false;
      const double m_max = std::max(std::abs(lo[1]), std::abs(hi[1]));
      const double rhoe = lo[0] * lo[2] - 0.5 * m_max * m_max;
      return rhoe * (1.0 - 1e-12) > set.pad_p * hi[0] / (set.gamma - 1.0);
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Desingularization

enum class DesingMap { Clip, Spline };

inline const char* to_string(DesingMap m) { return m == DesingMap::Clip ? "clip" : "spline"; }

inline double desing_factor(double x, DesingMap map) {
  if (x >= 1.0) return 1.0;
  return map == DesingMap::Clip ? x : x * (2.0 - x);
}

/// Rescales the velocity by R1(u_cap / |u|); Euler keeps the internal energy.
inline State desingularize_velocity(const FluxModel& model, const State& u, double u_cap,
                                    DesingMap map = DesingMap::Clip) {
  if (!model.is_system()) return u;
  const double rho = u[0];
  if (!(rho > 0.0)) return u;
  const double vel = u[1] / rho;
  const double speed = std::abs(vel);
  if (!(speed > u_cap)) return u;
  const double f = desing_factor(u_cap / speed, map);
  State out = u;
  out[1] = rho * vel * f;
  if (model.kind == ModelKind::Euler) {
    const double internal = u[2] - 0.5 * u[1] * u[1] / rho;
    out[2] = internal + 0.5 * out[1] * out[1] / rho;
  }
  return out;
}

}  // namespace posflow

#endif  // POSFLOW_POSITIVITY_HPP_
