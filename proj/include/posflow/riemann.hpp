#ifndef POSFLOW_RIEMANN_HPP_
#define POSFLOW_RIEMANN_HPP_

// Signal-speed bounds and two-wave numerical fluxes.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "posflow/models.hpp"

namespace posflow {

struct SignalBounds {
  double s_minus = 0.0;
  double s_plus = 0.0;
};

/// Davis bounds: extreme characteristic speeds over both states.
inline SignalBounds signal_bounds(const FluxModel& model, const State& uL, const State& uR) {
  const auto [l0, l1] = model.eigen_range(uL);
  const auto [r0, r1] = model.eigen_range(uR);
  return {std::min(l0, r0), std::max(l1, r1)};
}

namespace detail {

inline State hll_star_form(const State& fL, const State& fR, const State& uL, const State& uR,
                           double sm, double sp) {
  const State ustar = (1.0 / (sp - sm)) * (fL - fR + sp * uR - sm * uL);
  return 0.5 * (fR + fL + (sp + sm) * ustar - sp * uR - sm * uL);
}

inline State hll_branches(const State& fL, const State& fR, const State& uL, const State& uR,
                          SignalBounds b) {
  if (b.s_minus == b.s_plus) return b.s_minus >= 0.0 ? fL : fR;
  if (b.s_minus >= 0.0) return fL;
  if (b.s_plus <= 0.0) return fR;
  return hll_star_form(fL, fR, uL, uR, b.s_minus, b.s_plus);
}

}  // namespace detail

/// HLL flux in middle-state form:
///   h = (f(U+) + f(U-) + (S+ + S-) U* - S+ U+ - S- U-) / 2,
///   U* = (f(U-) - f(U+) + S+ U+ - S- U-) / (S+ - S-).
inline State hll_flux(const FluxModel& model, const State& uL, const State& uR, SignalBounds b) {
  if (b.s_minus > b.s_plus) throw std::invalid_argument("hll_flux: s_minus > s_plus");
  return detail::hll_branches(model.flux(uL), model.flux(uR), uL, uR, b);
}

inline State hll_flux(const FluxModel& model, const State& uL, const State& uR) {
  return hll_flux(model, uL, uR, signal_bounds(model, uL, uR));
}

/// (S+ f(U-) - S- f(U+) + S- S+ (U+ - U-)) / (S+ - S-), valid for S- < 0 < S+.
inline State hll_flux_two_form(const FluxModel& model, const State& uL, const State& uR,
                               SignalBounds b) {
  const double sm = b.s_minus, sp = b.s_plus;
  return (1.0 / (sp - sm)) * (sp * model.flux(uL) - sm * model.flux(uR) + (sm * sp) * (uR - uL));
}

/// Local Lax-Friedrichs: (f(uL) + f(uR))/2 - (s_max/2)(uR - uL).
inline State llf_flux(const FluxModel& model, const State& uL, const State& uR, double s_max) {
  return 0.5 * (model.flux(uL) + model.flux(uR)) - (0.5 * s_max) * (uR - uL);
}

inline double llf_speed(const FluxModel& model, const State& uL, const State& uR) {
  return std::max(model.max_abs_speed(uL), model.max_abs_speed(uR));
}

inline State llf_flux(const FluxModel& model, const State& uL, const State& uR) {
  return llf_flux(model, uL, uR, llf_speed(model, uL, uR));
}

enum class FluxKind { HLL, LLF };

inline const char* to_string(FluxKind k) { return k == FluxKind::HLL ? "hll" : "llf"; }

/// Numerical flux without admissibility checks on the states.
inline State numerical_flux_unchecked(const FluxModel& model, FluxKind kind, const State& uL,
                                      const State& uR) {
  const State fL = model.flux_unchecked(uL), fR = model.flux_unchecked(uR);
  if (kind == FluxKind::LLF) {
    const double s = llf_speed(model, uL, uR);
    return 0.5 * (fL + fR) - (0.5 * s) * (uR - uL);
  }
  return detail::hll_branches(fL, fR, uL, uR, signal_bounds(model, uL, uR));
}

inline State numerical_flux(const FluxModel& model, FluxKind kind, const State& uL, const State& uR) {
  return kind == FluxKind::LLF ? llf_flux(model, uL, uR) : hll_flux(model, uL, uR);
}

/// Speed cap at a boundary node: |lambda|_max(interior) plus the incoming
/// signal speed of the neighbouring fan.  `side` is +1 when the interior
/// state sits left of the node and -1 when it sits right of it.
inline double speed_cap_at_node(const FluxModel& model, const State& interior, const State& exterior,
                                int side = +1, FluxKind kind = FluxKind::HLL) {
  const double own = model.max_abs_speed(interior);
  if (kind == FluxKind::LLF) return own + llf_speed(model, interior, exterior);
  if (side > 0) return own + std::max(0.0, -signal_bounds(model, interior, exterior).s_minus);
  return own + std::max(0.0, signal_bounds(model, exterior, interior).s_plus);
}

/// Godunov flux from the exact Riemann solution; scalar models only.
inline State exact_riemann_flux(const FluxModel& model, const State& uL, const State& uR) {
  switch (model.kind) {
    case ModelKind::Advection: return model.a >= 0.0 ? model.flux(uL) : model.flux(uR);
    case ModelKind::Burgers: {
      const double l = uL[0], r = uR[0];
      double v;
      if (l <= r) v = std::clamp(0.0, l, r);  // rarefaction: sonic point if straddled
      else v = (l + r) > 0.0 ? l : r;         // shock with speed (l + r)/2
      return {0.5 * v * v, 0, 0};
    }
    default: throw std::invalid_argument("exact_riemann_flux: scalar models only");
  }
}

}  // namespace posflow

#endif  // POSFLOW_RIEMANN_HPP_
