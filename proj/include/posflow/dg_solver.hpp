#ifndef POSFLOW_DG_SOLVER_HPP_
#define POSFLOW_DG_SOLVER_HPP_

// One-dimensional modal DG solver with outflow-capped, positivity-limited
// SSP Runge-Kutta stepping.
//
// Basis on each cell is the orthonormal Legendre family on [0,1]; the mass
// matrix is the identity and the cell average is the first coefficient.
// Coefficients are stored as U[(i * n_vars + v) * n_modes + j].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "posflow/cell_geometry.hpp"
#include "posflow/models.hpp"
#include "posflow/poly_space.hpp"
#include "posflow/positivity.hpp"
#include "posflow/riemann.hpp"
#include "posflow/weights.hpp"

namespace posflow {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Boundary { Periodic, Outflow };

inline const char* to_string(Boundary b) { return b == Boundary::Periodic ? "periodic" : "outflow"; }

struct Mesh1D {
  double x_lo = 0.0;
  double x_hi = 1.0;
  int cells = 100;
  Boundary bc = Boundary::Periodic;

  static Mesh1D make(double lo, double hi, int n, Boundary bc) {
    if (n < 1) throw std::invalid_argument("mesh: cell count must be >= 1");
    if (!(hi > lo)) throw std::invalid_argument("mesh: domain must have x_hi > x_lo");
    return {lo, hi, n, bc};
  }
  double dx() const { return (x_hi - x_lo) / cells; }
  double left(int i) const { return x_lo + i * dx(); }
  double center(int i) const { return x_lo + (i + 0.5) * dx(); }
};

enum class LimiterMode { Off, Pointwise, Retentional, Both };
enum class PointSetKind { Full, Minimal };

inline const char* to_string(LimiterMode m) {
  switch (m) {
    case LimiterMode::Off: return "off";
    case LimiterMode::Pointwise: return "pointwise";
    case LimiterMode::Retentional: return "retentional";
    case LimiterMode::Both: return "both";
  }
  return "?";
}
inline const char* to_string(PointSetKind p) { return p == PointSetKind::Full ? "full" : "minimal"; }

struct SolverOptions {
  FluxModel model;
  FluxKind flux = FluxKind::HLL;
  int degree = 2;
  int rk_order = 3;

  LimiterMode limiter = LimiterMode::Both;
  PointSetKind points = PointSetKind::Full;
  std::optional<double> M_bar;  // defaults to interval_weight(degree)
  double pad = 1e-12;           // u, h or rho
  double pad_p = 1e-12;         // Euler pressure
  std::optional<double> u_cap;
  DesingMap desing = DesingMap::Clip;
  PressureMethod pressure = PressureMethod::Secant;
  bool quick_check = true;

  double alpha_z = 0.8;
  double cfl_fraction = 0.4;
  double dt_max = kInf;
  bool outflow_cap = true;
  int threads = 1;
};

// ---------------------------------------------------------------------------
// Time-step formulas

/// dx / ((k + 1/2) lambda); dt_max when lambda is zero.
inline double dt_stable_formula(double dx, int k, double lambda, double dt_max = kInf) {
  if (!(lambda > 0.0)) return dt_max;
  return dx / ((k + 0.5) * lambda);
}

/// W dx / (2 lambda).
inline double dt_pos_formula(double W_bar, double dx, double lambda) {
  if (!(lambda > 0.0)) return kInf;
  return W_bar * dx / (2.0 * lambda);
}

/// Time for a content to fall to `floor` at a constant outflow rate.
inline double dt_zero_affine(double content, double outflow_rate, double floor = 0.0) {
  if (!(outflow_rate > 0.0)) return kInf;
  return std::max(0.0, (content - floor) / outflow_rate);
}

/// Largest t with rho >= floor_rho and p >= floor_p along U(t) = bar - t q.
inline double dt_zero_euler(double gamma, const State& bar, const State& q, double floor_rho,
                            double floor_p) {
  double t = dt_zero_affine(bar[0], q[0], floor_rho);
  const double g1 = gamma - 1.0;
  const double a = g1 * (q[0] * q[2] - 0.5 * q[1] * q[1]);
  const double b = g1 * (-bar[0] * q[2] - bar[2] * q[0] + bar[1] * q[1]) + floor_p * q[0];
  const double c = std::max(0.0, g1 * (bar[0] * bar[2] - 0.5 * bar[1] * bar[1]) - floor_p * bar[0]);
  double root = kInf;
  if (a == 0.0) {
    if (b < 0.0) root = -c / b;
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double qq = -0.5 * (b + std::copysign(std::sqrt(disc), b));
      for (double r : {qq / a, qq != 0.0 ? c / qq : kInf})
        if (r > 0.0) root = std::min(root, r);
    }
  }
  return std::min(t, root);
}

// ---------------------------------------------------------------------------
// Diagnostics

struct Violation {
  int step = 0;
  double t = 0.0;
  int cell = -1;
  std::string quantity;
  double value = 0.0;
};

struct StepRecord {
  double t = 0.0;  // time at the end of the step
  double dt = 0.0;
  double dt_stable = 0.0;
  double dt_zero = 0.0;  // unscaled, minimum over stages
  double dt_pos = 0.0;
  double theta_min = 1.0;
  long triggers = 0;
  double quick_hit_rate = 0.0;
  int retries = 0;
  std::vector<double> mass;     // per variable
  std::vector<double> minima;   // positivity functionals of averages
  bool dt_ok = true;
};

struct Diagnostics {
  std::vector<StepRecord> steps;
  std::vector<std::string> functional_names;
  std::vector<double> initial_mass;
  std::vector<double> min_functionals;  // over all steps and stages
  double min_pressure = kInf;            // Euler only
  bool dt_checks_pass = true;
  long limiter_average_changes = 0;
  std::optional<Violation> first_violation;
  bool completed = false;
  std::string stop_reason;
};

struct Snapshot {
  double t = 0.0;
  std::vector<double> x_center;
  std::vector<double> averages;  // cells x vars
  std::vector<double> minima;    // cells x vars, over the positivity points
  std::vector<double> theta;     // per cell, last limiting pass
};

/// Thrown for invariant failures at run time (exit code 1 in the CLI).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InitialCondition {
  std::function<State(double)> state;  // conserved variables at x
  std::vector<double> breakpoints;     // discontinuity locations
};

// ---------------------------------------------------------------------------

class DGSolver {
 public:
  DGSolver(Mesh1D mesh, SolverOptions opt) : mesh_(mesh), opt_(std::move(opt)) {
    if (opt_.degree < 0) throw std::invalid_argument("space.degree must be >= 0");
    if (opt_.rk_order < 1 || opt_.rk_order > 3) throw std::invalid_argument("rk_order must be 1, 2 or 3");
    if (!(opt_.alpha_z > 0.0 && opt_.alpha_z < 1.0)) throw std::invalid_argument("time.alpha_z must lie in (0,1)");
    if (!(opt_.cfl_fraction > 0.0 && opt_.cfl_fraction <= 1.0))
      throw std::invalid_argument("time.cfl_fraction must lie in (0,1]");
    if (opt_.threads < 1) throw std::invalid_argument("threads must be >= 1");
    nv_ = opt_.model.n_vars();
    nm_ = opt_.degree + 1;
    nc_ = mesh_.cells;
    dx_ = mesh_.dx();
    M_bar_ = opt_.M_bar ? *opt_.M_bar : to_double(interval_weight(opt_.degree));
    if (!(M_bar_ >= 1.0)) throw std::invalid_argument("limiter.M_bar must be >= 1");
    space_ = PolySpace::make(CanonicalCell::interval(), opt_.degree);
    build_tables();
    U_.assign(static_cast<std::size_t>(nc_) * nv_ * nm_, 0.0);
    theta_.assign(nc_, 1.0);
  }

  const Mesh1D& mesh() const { return mesh_; }
  const SolverOptions& options() const { return opt_; }
  int n_vars() const { return nv_; }
  int n_modes() const { return nm_; }
  double M_bar() const { return M_bar_; }
  double time() const { return t_; }
  std::vector<double>& coefficients() { return U_; }
  const std::vector<double>& coefficients() const { return U_; }
  const Diagnostics& diagnostics() const { return diag_; }

  double coeff(int i, int v, int j) const { return U_[idx(i, v, j)]; }
  double average(int i, int v) const { return U_[idx(i, v, 0)]; }

  /// Orthonormal Legendre basis on [0,1] and its derivative.
  static void basis(int n_modes, double xi, double* phi, double* dphi) {
    const double s = 2.0 * xi - 1.0;
    double p0 = 1.0, p1 = s, d0 = 0.0, d1 = 1.0;
    for (int j = 0; j < n_modes; ++j) {
      double p, d;
      if (j == 0) p = p0, d = d0;
      else if (j == 1) p = p1, d = d1;
      else {
        p = ((2.0 * j - 1.0) * s * p1 - (j - 1.0) * p0) / j;
        d = d0 + (2.0 * j - 1.0) * p1;
        p0 = p1, p1 = p;
        d0 = d1, d1 = d;
      }
      const double nrm = std::sqrt(2.0 * j + 1.0);
      phi[j] = nrm * p;
      if (dphi) dphi[j] = 2.0 * nrm * d;
    }
  }

  /// Value of variable v in cell i at local coordinate xi in [0,1].
  double value(int i, int v, double xi) const {
    std::vector<double> phi(nm_);
    basis(nm_, xi, phi.data(), nullptr);
    double s = 0.0;
    for (int j = 0; j < nm_; ++j) s += phi[j] * U_[idx(i, v, j)];
    return s;
  }

  State state_at(int i, double xi) const {
    State s{0, 0, 0};
    for (int v = 0; v < nv_; ++v) s[v] = value(i, v, xi);
    return s;
  }

  /// Clamps point values into the padded set, projects, and clamps averages.
  void set_initial(const InitialCondition& ic) {
    const auto rule = gauss_legendre(std::max(nm_, 12));
    std::vector<double> phi(nm_);
    std::fill(U_.begin(), U_.end(), 0.0);
    for (int i = 0; i < nc_; ++i) {
      const double a = mesh_.left(i), b = a + dx_;
      std::vector<double> cuts{0.0};
      for (double x : ic.breakpoints)
        if (x > a && x < b) cuts.push_back((x - a) / dx_);
      cuts.push_back(1.0);
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double l = cuts[s], w = cuts[s + 1] - cuts[s];
        for (std::size_t q = 0; q < rule.size(); ++q) {
          const double xi = l + w * rule.points[q][0];
          const State u = clamp_state(ic.state(a + xi * dx_));
          basis(nm_, xi, phi.data(), nullptr);
          for (int v = 0; v < nv_; ++v)
            for (int j = 0; j < nm_; ++j) U_[idx(i, v, j)] += w * rule.weights[q] * u[v] * phi[j];
        }
      }
      State bar = cell_mean(cell(i), nv_, nm_);
      const State fixed = clamp_state(bar);
      for (int v = 0; v < nv_; ++v) U_[idx(i, v, 0)] = fixed[v];
    }
    t_ = 0.0;
    step_ = 0;
    diag_ = Diagnostics{};
    diag_.functional_names = functional_names();
    diag_.initial_mass = mass();
    diag_.min_functionals = functional_minima();
    if (opt_.model.kind == ModelKind::Euler) diag_.min_pressure = diag_.min_functionals[1];
    std::fill(theta_.begin(), theta_.end(), 1.0);
  }

  std::vector<std::string> functional_names() const {
    switch (opt_.model.kind) {
      case ModelKind::Advection:
      case ModelKind::Burgers: return {"u"};
      case ModelKind::ShallowWater: return {"h"};
      case ModelKind::Euler: return {"rho", "p"};
    }
    return {};
  }

  /// Minimum over cells of each positivity functional applied to averages.
  std::vector<double> functional_minima() const {
    std::vector<double> m(functional_names().size(), kInf);
    for (int i = 0; i < nc_; ++i) {
      const State bar = cell_mean(cell(i), nv_, nm_);
      m[0] = fmin_nan(m[0], bar[0]);
      if (opt_.model.kind == ModelKind::Euler) m[1] = fmin_nan(m[1], opt_.model.pressure(bar));
    }
    return m;
  }

  std::vector<double> mass() const {
    std::vector<double> m(nv_, 0.0);
    for (int i = 0; i < nc_; ++i)
      for (int v = 0; v < nv_; ++v) m[v] += dx_ * U_[idx(i, v, 0)];
    return m;
  }

  // -------------------------------------------------------------------------
  // One stage: limit in place, then the time derivative and step bounds.

  struct StageResult {
    std::vector<double> L;
    double dt_zero = kInf;  // unscaled
    double dt_stable = kInf;
    double dt_pos = kInf;
    double lambda = 0.0;
    double theta_min = 1.0;
    long triggers = 0;
    long quick_hits = 0;
  };

  /// Applies the limiter to U in place and evaluates the semi-discrete
  /// right-hand side.  Throws SolverError on a nonpositive average in a
  /// protected run; in an unprotected run the violation is recorded.
  StageResult stage(std::vector<double>& U) {
    StageResult r;
    r.L.assign(U.size(), 0.0);
    traces_L_.resize(nc_);
    traces_R_.resize(nc_);
    cell_theta_.assign(nc_, 1.0);
    cell_trig_.assign(nc_, 0);
    cell_quick_.assign(nc_, 0);
    averages_before_.resize(static_cast<std::size_t>(nc_) * nv_);
    for (int i = 0; i < nc_; ++i)
      for (int v = 0; v < nv_; ++v) averages_before_[i * nv_ + v] = U[idx(i, v, 0)];

    check_averages(U);
    parallel_for(nc_, [&](int i) { limit_cell(U, i); });

    for (int i = 0; i < nc_; ++i) {
      for (int v = 0; v < nv_; ++v)
        if (U[idx(i, v, 0)] != averages_before_[i * nv_ + v]) ++diag_.limiter_average_changes;
      r.theta_min = std::min(r.theta_min, cell_theta_[i]);
      r.triggers += cell_trig_[i];
      r.quick_hits += cell_quick_[i];
      theta_[i] = std::min(theta_[i], cell_theta_[i]);
    }

    // Interface fluxes and speed caps; interface f sits left of cell f.
    const int n_if = mesh_.bc == Boundary::Periodic ? nc_ : nc_ + 1;
    iface_flux_.resize(n_if + 1);
    iface_cap_.assign(n_if + 1, 0.0);
    parallel_for(n_if, [&](int f) {
      const auto [uL, uR] = interface_states(f);
      iface_flux_[f] = interface_flux(uL, uR);
      iface_cap_[f] = std::max(speed_cap_at_node(opt_.model, uL, uR, +1, opt_.flux),
                               speed_cap_at_node(opt_.model, uR, uL, -1, opt_.flux));
    });
    if (mesh_.bc == Boundary::Periodic) {
      iface_flux_[nc_] = iface_flux_[0];
      iface_cap_[nc_] = iface_cap_[0];
    }
    for (int f = 0; f < n_if; ++f) r.lambda = fmax_nan(r.lambda, iface_cap_[f]);

    cell_dtz_.assign(nc_, kInf);
    parallel_for(nc_, [&](int i) { cell_rhs(U, r.L, i); });
    for (int i = 0; i < nc_; ++i) r.dt_zero = std::min(r.dt_zero, cell_dtz_[i]);
    if (!opt_.outflow_cap) r.dt_zero = kInf;
    r.dt_stable = dt_stable_formula(dx_, opt_.degree, r.lambda, opt_.dt_max);
    r.dt_pos = dt_pos_formula(1.0 / M_bar_, dx_, r.lambda);
    if (std::isnan(r.lambda)) r.dt_stable = r.dt_pos = 0.0;
    return r;
  }

  // -------------------------------------------------------------------------

  /// Advances one SSP-RK step of at most `dt_cap`.  Returns false when the
  /// run must stop (recorded violation in an unprotected run).
  bool step(double dt_cap = kInf) {
    std::vector<double> Ul = U_;
    std::fill(theta_.begin(), theta_.end(), 1.0);
    StageResult s0 = stage(Ul);
    if (diag_.first_violation) return false;
    StepRecord rec;
    double dt = std::min({opt_.alpha_z * s0.dt_zero, opt_.cfl_fraction * s0.dt_stable, opt_.dt_max, dt_cap});
    if (!(dt > 0.0) || !std::isfinite(dt)) {
      if (!opt_.outflow_cap && opt_.limiter == LimiterMode::Off) {
        record_violation("dt", dt);
        return false;
      }
      throw SolverError("time step collapse at t=" + fmt(t_) + " (dt=" + fmt(dt) + ")");
    }
    rec.dt_stable = s0.dt_stable;
    rec.dt_zero = s0.dt_zero;
    rec.dt_pos = s0.dt_pos;
    rec.theta_min = s0.theta_min;
    rec.triggers = s0.triggers;
    long quick = s0.quick_hits, limited_cells = nc_;
    bool ok_dt = dt <= s0.dt_stable && dt <= opt_.alpha_z * s0.dt_zero;

    std::vector<double> U1, U2;
    int retries = 0;
    for (;;) {
      U1 = axpy(Ul, dt, s0.L);
      if (opt_.rk_order == 1) break;
      StageResult s1 = stage(U1);
      if (diag_.first_violation) return false;
      if (!stage_accepts(dt, s1, retries, dt)) continue;
      absorb(rec, s1, quick, limited_cells);
      if (opt_.rk_order == 2) {
        U1 = combine(0.5, Ul, 0.5, axpy(U1, dt, s1.L));
        break;
      }
      U2 = combine(0.75, Ul, 0.25, axpy(U1, dt, s1.L));
      StageResult s2 = stage(U2);
      if (diag_.first_violation) return false;
      if (!stage_accepts(dt, s2, retries, dt)) continue;
      absorb(rec, s2, quick, limited_cells);
      U1 = combine(1.0 / 3.0, Ul, 2.0 / 3.0, axpy(U2, dt, s2.L));
      break;
    }
    U_ = std::move(U1);
    t_ += dt;
    ++step_;
    rec.t = t_;
    rec.dt = dt;
    rec.retries = retries;
    rec.quick_hit_rate = static_cast<double>(quick) / static_cast<double>(limited_cells);
    rec.mass = mass();
    rec.minima = functional_minima();
    rec.dt_ok = ok_dt;
    diag_.dt_checks_pass = diag_.dt_checks_pass && ok_dt;
    for (std::size_t q = 0; q < rec.minima.size(); ++q)
      diag_.min_functionals[q] = fmin_nan(diag_.min_functionals[q], rec.minima[q]);
    if (opt_.model.kind == ModelKind::Euler) diag_.min_pressure = diag_.min_functionals[1];
    diag_.steps.push_back(rec);
    // End-of-step averages of an unprotected run.
    for (std::size_t q = 0; q < rec.minima.size(); ++q)
      if (!(rec.minima[q] >= 0.0) && !diag_.first_violation) {
        if (protected_run()) throw SolverError(violation_message(U_, q));
        record_violation_from(U_, q);
        return false;
      }
    return true;
  }

  /// Runs to t_final or max_steps.  `on_step` is called after every step and
  /// once at the start; snapshots are taken at multiples of
  /// snapshot_interval (clipping the step to land on them) and at the end.
  std::vector<Snapshot> run(double t_final, int max_steps, double snapshot_interval,
                            const std::function<void(const DGSolver&)>& on_step = {}) {
    if (!(t_final > 0.0)) throw std::invalid_argument("time.t_final must be > 0");
    std::vector<Snapshot> snaps;
    snaps.push_back(snapshot());
    if (on_step) on_step(*this);
    int next_snap = 1;
    const double eps = 1e-12 * t_final;
    while (t_final - t_ > eps) {
      if (max_steps > 0 && step_ >= max_steps) {
        diag_.stop_reason = "max_steps";
        break;
      }
      double target = t_final;
      if (snapshot_interval > 0.0) target = std::min(target, next_snap * snapshot_interval);
      if (!step(target - t_)) {
        diag_.stop_reason = "positivity violation (unprotected run)";
        snaps.push_back(snapshot());
        return snaps;
      }
      if (t_final - t_ <= eps) t_ = t_final;
      if (on_step) on_step(*this);
      if (snapshot_interval > 0.0 && t_ >= next_snap * snapshot_interval - eps && t_final - t_ > eps) {
        snaps.push_back(snapshot());
        ++next_snap;
      }
    }
    if (diag_.stop_reason.empty()) {
      diag_.completed = true;
      diag_.stop_reason = "t_final";
    }
    snaps.push_back(snapshot());
    return snaps;
  }

  Snapshot snapshot() const {
    Snapshot s;
    s.t = t_;
    s.averages.resize(static_cast<std::size_t>(nc_) * nv_);
    s.minima.resize(static_cast<std::size_t>(nc_) * nv_);
    s.theta = theta_;
    for (int i = 0; i < nc_; ++i) {
      s.x_center.push_back(mesh_.center(i));
      for (int v = 0; v < nv_; ++v) {
        s.averages[i * nv_ + v] = U_[idx(i, v, 0)];
        double m = kInf;
        for (int p = 0; p < full_table_.n_points; ++p)
          m = std::min(m, full_table_.eval(p, std::span<const double>(&U_[idx(i, v, 0)], nm_)));
        s.minima[i * nv_ + v] = m;
      }
    }
    return s;
  }

  /// Positivity point coordinates used by the point-wise limiter.
  const std::vector<double>& limiter_points() const { return limiter_xi_; }

  /// L1, L2 and max errors of variable v against `exact(x)`.
  std::array<double, 3> errors(const std::function<double(double)>& exact, int v = 0) const {
    const auto rule = gauss_legendre(nm_ + 5);
    double l1 = 0, l2 = 0, li = 0;
    for (int i = 0; i < nc_; ++i)
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const double xi = rule.points[q][0];
        const double e = std::abs(value(i, v, xi) - exact(mesh_.left(i) + xi * dx_));
        l1 += dx_ * rule.weights[q] * e;
        l2 += dx_ * rule.weights[q] * e * e;
        li = std::max(li, e);
      }
    return {l1, std::sqrt(l2), li};
  }

 private:
  std::size_t idx(int i, int v, int j) const {
    return (static_cast<std::size_t>(i) * nv_ + v) * nm_ + j;
  }
  std::span<double> cell(std::vector<double>& U, int i) const {
    return std::span<double>(&U[idx(i, 0, 0)], static_cast<std::size_t>(nv_) * nm_);
  }
  std::span<const double> cell(int i) const {
    return std::span<const double>(&U_[idx(i, 0, 0)], static_cast<std::size_t>(nv_) * nm_);
  }

  static double fmin_nan(double a, double b) { return (std::isnan(a) || std::isnan(b)) ? NAN : std::min(a, b); }
  static double fmax_nan(double a, double b) { return (std::isnan(a) || std::isnan(b)) ? NAN : std::max(a, b); }
  static std::string fmt(double x) {
    std::ostringstream o;
    o.precision(17);
    o << x;
    return o.str();
  }

  bool protected_run() const { return opt_.outflow_cap || opt_.limiter != LimiterMode::Off; }
  bool has_points() const { return opt_.limiter == LimiterMode::Pointwise || opt_.limiter == LimiterMode::Both; }
  bool has_retentional() const {
    return (opt_.limiter == LimiterMode::Retentional || opt_.limiter == LimiterMode::Both) && M_bar_ > 1.0;
  }

  void build_tables() {
    const auto vol = gauss_legendre(nm_);
    vol_xi_.clear();
    vol_w_ = vol.weights;
    for (const auto& p : vol.points) vol_xi_.push_back(p[0]);
    vol_phi_.assign(vol_xi_.size() * nm_, 0.0);
    vol_dphi_.assign(vol_xi_.size() * nm_, 0.0);
    for (std::size_t q = 0; q < vol_xi_.size(); ++q) basis(nm_, vol_xi_[q], &vol_phi_[q * nm_], &vol_dphi_[q * nm_]);
    phi0_.assign(nm_, 0.0);
    phi1_.assign(nm_, 0.0);
    basis(nm_, 0.0, phi0_.data(), nullptr);
    basis(nm_, 1.0, phi1_.data(), nullptr);
    bavg_.resize(nm_);
    for (int j = 0; j < nm_; ++j) bavg_[j] = 0.5 * (phi0_[j] + phi1_[j]);

    std::vector<double> interior;
    if (opt_.degree >= 2)
      for (const auto& p : retentional_points(CanonicalCell::interval(), opt_.degree).points) interior.push_back(p[0]);
    std::vector<double> full{0.0, 1.0};
    full.insert(full.end(), vol_xi_.begin(), vol_xi_.end());
    full.insert(full.end(), interior.begin(), interior.end());
    std::vector<double> minimal{0.0, 1.0};
    minimal.insert(minimal.end(), interior.begin(), interior.end());
    if (opt_.limiter == LimiterMode::Retentional) limiter_xi_ = {0.0, 1.0};
    else limiter_xi_ = opt_.points == PointSetKind::Full ? full : minimal;
    limiter_table_ = table_for(limiter_xi_);
    full_table_ = table_for(full);
  }

  PointTable table_for(const std::vector<double>& xs) const {
    PointTable t;
    t.n_points = static_cast<int>(xs.size());
    t.n_modes = nm_;
    t.values.resize(xs.size() * nm_);
    for (std::size_t p = 0; p < xs.size(); ++p) basis(nm_, xs[p], &t.values[p * nm_], nullptr);
    return t;
  }

  State clamp_state(State u) const {
    switch (opt_.model.kind) {
      case ModelKind::Advection:
      case ModelKind::Burgers:
      case ModelKind::ShallowWater: u[0] = std::max(u[0], opt_.pad); break;
      case ModelKind::Euler: {
        u[0] = std::max(u[0], opt_.pad);
        const double kinetic = 0.5 * u[1] * u[1] / u[0];
        u[2] = std::max(u[2], kinetic + opt_.pad_p / (opt_.model.gamma - 1.0));
        break;
      }
    }
    return u;
  }

  // Pads shrink to half the value for averages already below them.
  static double effective_pad(double pad, double value) { return value < pad ? std::min(pad, 0.5 * value) : pad; }

  PositivitySet cell_set(const State& bar) const {
    switch (opt_.model.kind) {
      case ModelKind::Advection:
      case ModelKind::Burgers: return PositivitySet::scalar(effective_pad(opt_.pad, bar[0]));
      case ModelKind::ShallowWater: return PositivitySet::shallow_water(effective_pad(opt_.pad, bar[0]));
      case ModelKind::Euler:
        return PositivitySet::euler(opt_.model.gamma, effective_pad(opt_.pad, bar[0]),
                                    effective_pad(opt_.pad_p, opt_.model.pressure(bar)));
    }
    return {};
  }

  std::string violation_message(const std::vector<double>& U, std::size_t q) const {
    for (int i = 0; i < nc_; ++i) {
      const State bar = cell_mean(std::span<const double>(&U[idx(i, 0, 0)], static_cast<std::size_t>(nv_) * nm_), nv_, nm_);
      const double val = q == 0 ? bar[0] : opt_.model.pressure(bar);
      if (!(val >= 0.0))
        return "cell average violates positivity: " + functional_names()[q] + "=" + fmt(val) + " in cell " +
               std::to_string(i) + " at t=" + fmt(t_);
    }
    return "cell average violates positivity at t=" + fmt(t_);
  }

  void record_violation(const std::string& what, double value) {
    diag_.first_violation = Violation{step_, t_, -1, what, value};
  }

  void record_violation_from(const std::vector<double>& U, std::size_t q) {
    for (int i = 0; i < nc_; ++i) {
      const State bar = cell_mean(std::span<const double>(&U[idx(i, 0, 0)], static_cast<std::size_t>(nv_) * nm_), nv_, nm_);
      const double val = q == 0 ? bar[0] : opt_.model.pressure(bar);
      if (!(val >= 0.0)) {
        diag_.first_violation = Violation{step_, t_, i, functional_names()[q], val};
        return;
      }
    }
  }

  void check_averages(const std::vector<double>& U) {
    for (int i = 0; i < nc_; ++i) {
      const State bar = cell_mean(std::span<const double>(&U[idx(i, 0, 0)], static_cast<std::size_t>(nv_) * nm_), nv_, nm_);
      bool ok = bar[0] >= 0.0;
      if (opt_.model.kind == ModelKind::Euler) ok = ok && bar[0] > 0.0 && opt_.model.pressure(bar) >= 0.0;
      if (ok) continue;
      const std::size_t q = bar[0] > 0.0 ? 1 : 0;
      if (protected_run()) throw SolverError(violation_message(U, q));
      // Track the stage minimum too.
      for (std::size_t k = 0; k < diag_.min_functionals.size(); ++k) {
        const double val = k == 0 ? bar[0] : opt_.model.pressure(bar);
        diag_.min_functionals[k] = fmin_nan(diag_.min_functionals[k], val);
      }
      if (opt_.model.kind == ModelKind::Euler) diag_.min_pressure = diag_.min_functionals[1];
      if (!diag_.first_violation) record_violation_from(U, q);
      return;
    }
  }

  void limit_cell(std::vector<double>& U, int i) {
    auto c = cell(U, i);
    const State bar = cell_mean(c, nv_, nm_);
    const bool euler = opt_.model.kind == ModelKind::Euler;
    double theta = 1.0;
    bool quick = false;
    if (opt_.limiter != LimiterMode::Off && !diag_.first_violation) {
      const PositivitySet set = cell_set(bar);
      quick = opt_.quick_check && quick_positivity_check(c, nv_, *space_, set);
      const State r = has_retentional() ? retentional_direction(c, nv_, nm_, bavg_, M_bar_) : State{0, 0, 0};
      double t1 = 1.0;
      if (!quick)
        for (int p = 0; p < limiter_table_.n_points; ++p)
          t1 = std::min(t1, detail::affine_theta(set, bar, posflow::state_at(limiter_table_, p, c, nv_)));
      if (has_retentional()) t1 = std::min(t1, detail::affine_theta(set, bar, bar + r));
      damp(c, nv_, nm_, t1);
      theta = t1;
      if (euler && !quick) {
        double t2 = 1.0;
        for (int p = 0; p < limiter_table_.n_points; ++p)
          t2 = std::min(t2, damping_pressure(set.gamma, bar, posflow::state_at(limiter_table_, p, c, nv_),
                                             set.pad_p, opt_.pressure));
        damp(c, nv_, nm_, t2);
        theta *= t2;
      }
    }
    State tl = trace(c, phi0_), tr = trace(c, phi1_);
    if (opt_.u_cap && opt_.model.is_system()) {
      tl = desingularize_velocity(opt_.model, tl, *opt_.u_cap, opt_.desing);
      tr = desingularize_velocity(opt_.model, tr, *opt_.u_cap, opt_.desing);
    }
    if (euler && opt_.limiter != LimiterMode::Off && has_retentional() && !diag_.first_violation) {
      const PositivitySet set = cell_set(bar);
      const State B = 0.5 * (tl + tr);
      const State r = (1.0 / (M_bar_ - 1.0)) * (bar - B);
      const double tq = damping_pressure(set.gamma, bar, bar + r, set.pad_p, opt_.pressure);
      if (tq < 1.0) {
        damp(c, nv_, nm_, tq);
        tl = bar + tq * (tl - bar);
        tr = bar + tq * (tr - bar);
        theta *= tq;
      }
    }
    traces_L_[i] = tl;
    traces_R_[i] = tr;
    cell_theta_[i] = theta;
    cell_trig_[i] = theta < 1.0 ? 1 : 0;
    cell_quick_[i] = quick ? 1 : 0;
  }

  State trace(std::span<const double> c, const std::vector<double>& phi) const {
    State s{0, 0, 0};
    for (int v = 0; v < nv_; ++v) {
      double a = 0.0;
      for (int j = 0; j < nm_; ++j) a += phi[j] * c[static_cast<std::size_t>(v) * nm_ + j];
      s[v] = a;
    }
    return s;
  }

  std::pair<State, State> interface_states(int f) const {
    if (mesh_.bc == Boundary::Periodic) return {traces_R_[(f - 1 + nc_) % nc_], traces_L_[f % nc_]};
    if (f == 0) return {traces_L_[0], traces_L_[0]};
    if (f == nc_) return {traces_R_[nc_ - 1], traces_R_[nc_ - 1]};
    return {traces_R_[f - 1], traces_L_[f]};
  }

  State interface_flux(const State& uL, const State& uR) const {
    return protected_run() ? numerical_flux(opt_.model, opt_.flux, uL, uR)
                           : numerical_flux_unchecked(opt_.model, opt_.flux, uL, uR);
  }

  void cell_rhs(const std::vector<double>& U, std::vector<double>& L, int i) {
    const State hl = iface_flux_[i], hr = iface_flux_[i + 1];
    std::array<std::vector<double>, 3> vol;
    for (int v = 0; v < nv_; ++v) vol[v].assign(nm_, 0.0);
    if (nm_ > 1) {
      for (std::size_t q = 0; q < vol_xi_.size(); ++q) {
        State u{0, 0, 0};
        for (int v = 0; v < nv_; ++v) {
          double a = 0.0;
          for (int j = 0; j < nm_; ++j) a += vol_phi_[q * nm_ + j] * U[idx(i, v, j)];
          u[v] = a;
        }
        if (opt_.u_cap && opt_.model.is_system()) u = desingularize_velocity(opt_.model, u, *opt_.u_cap, opt_.desing);
        const State f = opt_.model.flux_unchecked(u);
        for (int v = 0; v < nv_; ++v)
          for (int j = 1; j < nm_; ++j) vol[v][j] += vol_w_[q] * f[v] * vol_dphi_[q * nm_ + j];
      }
    }
    for (int v = 0; v < nv_; ++v)
      for (int j = 0; j < nm_; ++j)
        L[idx(i, v, j)] = (vol[v][j] - hr[v] * phi1_[j] + hl[v] * phi0_[j]) / dx_;

    // Outflow cap from the average update rate.
    const State bar{U[idx(i, 0, 0)], nv_ > 1 ? U[idx(i, 1, 0)] : 0.0, nv_ > 2 ? U[idx(i, 2, 0)] : 0.0};
    const State q = (1.0 / dx_) * (hr - hl);
    const double floor = std::min(opt_.pad, 0.5 * bar[0]);
    if (opt_.model.kind == ModelKind::Euler)
      cell_dtz_[i] = dt_zero_euler(opt_.model.gamma, bar, q, floor,
                                   std::min(opt_.pad_p, 0.5 * opt_.model.pressure(bar)));
    else
      cell_dtz_[i] = dt_zero_affine(bar[0], q[0], floor);
  }

  bool stage_accepts(double dt, const StageResult& s, int& retries, double& dt_ref) {
    if (dt <= opt_.alpha_z * s.dt_zero && dt <= s.dt_stable) return true;
    if (++retries > 10) throw SolverError("time step collapse at t=" + fmt(t_));
    dt_ref = 0.5 * dt;
    return false;
  }

  void absorb(StepRecord& rec, const StageResult& s, long& quick, long& cells) const {
    rec.dt_zero = std::min(rec.dt_zero, s.dt_zero);
    rec.dt_stable = std::min(rec.dt_stable, s.dt_stable);
    rec.dt_pos = std::min(rec.dt_pos, s.dt_pos);
    rec.theta_min = std::min(rec.theta_min, s.theta_min);
    rec.triggers += s.triggers;
    quick += s.quick_hits;
    cells += nc_;
  }

  static std::vector<double> axpy(const std::vector<double>& x, double a, const std::vector<double>& y) {
    std::vector<double> z(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) z[k] = x[k] + a * y[k];
    return z;
  }
  static std::vector<double> combine(double a, const std::vector<double>& x, double b, const std::vector<double>& y) {
    std::vector<double> z(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) z[k] = a * x[k] + b * y[k];
    return z;
  }

  template <class F>
  void parallel_for(int n, F&& f) const {
    const int nt = std::min(opt_.threads, n);
    if (nt <= 1) {
      for (int i = 0; i < n; ++i) f(i);
      return;
    }
    std::vector<std::jthread> pool;
    const int chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
      const int lo = t * chunk, hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&f, lo, hi] {
        for (int i = lo; i < hi; ++i) f(i);
      });
    }
  }

  Mesh1D mesh_;
  SolverOptions opt_;
  int nv_ = 1, nm_ = 1, nc_ = 1;
  double dx_ = 1.0;
  double M_bar_ = 1.0;
  PolySpacePtr space_;
  std::vector<double> U_;
  double t_ = 0.0;
  int step_ = 0;
  Diagnostics diag_;

  std::vector<double> vol_xi_, vol_w_, vol_phi_, vol_dphi_, phi0_, phi1_, bavg_;
  std::vector<double> limiter_xi_;
  PointTable limiter_table_, full_table_;

  std::vector<State> traces_L_, traces_R_, iface_flux_;
  std::vector<double> iface_cap_, cell_theta_, cell_dtz_, averages_before_, theta_;
  std::vector<int> cell_trig_, cell_quick_;
};

}  // namespace posflow

#endif  // POSFLOW_DG_SOLVER_HPP_
