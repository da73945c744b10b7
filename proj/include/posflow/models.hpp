#ifndef POSFLOW_MODELS_HPP_
#define POSFLOW_MODELS_HPP_

// Hyperbolic flux models in one space dimension.  States carry up to three
// conserved variables; unused slots stay zero.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "posflow/cell_geometry.hpp"

namespace posflow {

// Same representation as Point, so the vector operators are shared.
using State = Point;

enum class ModelKind { Advection, Burgers, ShallowWater, Euler };

struct FluxModel {
  ModelKind kind = ModelKind::Advection;
  double a = 1.0;       // advection speed
  double g = 9.81;      // gravity
  double gamma = 1.4;   // adiabatic index

  static FluxModel advection(double speed) {
    FluxModel m;
    m.kind = ModelKind::Advection;
    m.a = speed;
    return m;
  }
  static FluxModel burgers() {
    FluxModel m;
    m.kind = ModelKind::Burgers;
    return m;
  }
  static FluxModel shallow_water(double gravity) {
    if (!(gravity > 0.0)) throw std::invalid_argument("shallow_water: gravity must be > 0");
    FluxModel m;
    m.kind = ModelKind::ShallowWater;
    m.g = gravity;
    return m;
  }
  static FluxModel euler(double adiabatic_index) {
    if (!(adiabatic_index > 1.0)) throw std::invalid_argument("euler: gamma must be > 1");
    FluxModel m;
    m.kind = ModelKind::Euler;
    m.gamma = adiabatic_index;
    return m;
  }

  int n_vars() const {
    switch (kind) {
      case ModelKind::Advection:
      case ModelKind::Burgers: return 1;
      case ModelKind::ShallowWater: return 2;
      case ModelKind::Euler: return 3;
    }
    return 1;
  }

  bool is_system() const { return n_vars() > 1; }

  std::string name() const {
    switch (kind) {
      case ModelKind::Advection: return "advection";
      case ModelKind::Burgers: return "burgers";
      case ModelKind::ShallowWater: return "shallow_water";
      case ModelKind::Euler: return "euler";
    }
    return "?";
  }

  std::vector<std::string> variable_names() const {
    switch (kind) {
      case ModelKind::Advection:
      case ModelKind::Burgers: return {"u"};
      case ModelKind::ShallowWater: return {"h", "hu"};
      case ModelKind::Euler: return {"rho", "m", "E"};
    }
    return {};
  }

  /// Ideal-gas pressure (gamma - 1)(E - m^2 / (2 rho)).
  double pressure(const State& u) const {
    return (gamma - 1.0) * (u[2] - 0.5 * u[1] * u[1] / u[0]);
  }

  double velocity(const State& u) const {
    switch (kind) {
      case ModelKind::Advection: return a;
      case ModelKind::Burgers: return u[0];
      case ModelKind::ShallowWater:
      case ModelKind::Euler: return u[1] / u[0];
    }
    return 0.0;
  }

  double sound_speed(const State& u) const {
    switch (kind) {
      case ModelKind::ShallowWater: return std::sqrt(std::max(0.0, g * u[0]));
      case ModelKind::Euler: return std::sqrt(std::max(0.0, gamma * pressure(u) / u[0]));
      default: return 0.0;
    }
  }

  /// Smallest and largest characteristic speed at a state.
  std::pair<double, double> eigen_range(const State& u) const {
    switch (kind) {
      case ModelKind::Advection: return {a, a};
      case ModelKind::Burgers: return {u[0], u[0]};
      default: {
        const double v = velocity(u), c = sound_speed(u);
        return {v - c, v + c};
      }
    }
  }

  double max_abs_speed(const State& u) const {
    const auto [lo, hi] = eigen_range(u);
    return std::max(std::abs(lo), std::abs(hi));
  }

  /// Physical flux without admissibility checks.
  State flux_unchecked(const State& u) const {
    switch (kind) {
      case ModelKind::Advection: return {a * u[0], 0, 0};
      case ModelKind::Burgers: return {0.5 * u[0] * u[0], 0, 0};
      case ModelKind::ShallowWater:
        return {u[1], u[1] * u[1] / u[0] + 0.5 * g * u[0] * u[0], 0};
      case ModelKind::Euler: {
        const double p = pressure(u), v = u[1] / u[0];
        return {u[1], u[1] * v + p, (u[2] + p) * v};
      }
    }
    return {0, 0, 0};
  }

  State flux(const State& u) const {
    if (kind == ModelKind::ShallowWater && !(u[0] > 0.0))
      throw std::domain_error("physical_flux: nonpositive depth");
    if (kind == ModelKind::Euler && !(u[0] > 0.0))
      throw std::domain_error("physical_flux: nonpositive density");
    return flux_unchecked(u);
  }

  /// Conserved state from primitive variables (scalar: u; shallow water: h, v;
  /// Euler: rho, v, p).
  State from_primitive(double q0, double q1 = 0.0, double q2 = 0.0) const {
    switch (kind) {
      case ModelKind::Advection:
      case ModelKind::Burgers: return {q0, 0, 0};
      case ModelKind::ShallowWater: return {q0, q0 * q1, 0};
      case ModelKind::Euler: return {q0, q0 * q1, q2 / (gamma - 1.0) + 0.5 * q0 * q1 * q1};
    }
    return {0, 0, 0};
  }
};

}  // namespace posflow

#endif  // POSFLOW_MODELS_HPP_
