#ifndef POSFLOW_CONVERGENCE_HPP_
#define POSFLOW_CONVERGENCE_HPP_

// Grid-refinement studies on smooth periodic problems with exact solutions.

#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "posflow/dg_solver.hpp"
#include "posflow/presets.hpp"

namespace posflow {

struct ConvergenceSetup {
  std::string problem = "advection";  // advection | euler (entropy wave)
  std::vector<int> degrees{1, 2, 3};
  std::vector<int> grids{20, 40, 80, 160};
  double amplitude = 0.99;
  double t_final = 1.0;
  int threads = 1;
};

struct ConvergenceRow {
  int degree = 0;
  int cells = 0;
  bool limited = true;
  double l1 = 0, l2 = 0, linf = 0;
  std::optional<double> order_l1, order_l2, order_linf;  // against the previous grid
  long triggers = 0;
  std::size_t steps = 0;
};

/// Problem names accepted by the study; anything else is rejected.
inline bool convergence_problem_known(const std::string& p) {
  return p == "advection" || p == "advection_smooth" || p == "euler" || p == "euler_smooth";
}

inline std::string canonical_convergence_problem(const std::string& p) {
  if (p == "advection" || p == "advection_smooth") return "advection";
  if (p == "euler" || p == "euler_smooth") return "euler";
  throw std::invalid_argument("problem '" + p +
                              "' is not a smooth problem with an exact solution (use advection or euler)");
}

/// Runge-Kutta order for degree k: k + 1 capped at 3.
inline int convergence_rk_order(int k) { return std::min(3, k + 1); }

/// Step cap that keeps the temporal error at spatial order when k + 1
/// exceeds the Runge-Kutta order: dt scales as dx^((k+1)/r).
inline double convergence_dt_max(int k, double dx, double dx_coarsest, double lambda_ref, double cfl_fraction) {
  const int r = convergence_rk_order(k);
  if (k + 1 <= r) return kInf;
  const double base = 0.25 * cfl_fraction * dx / ((k + 0.5) * lambda_ref);
  return base * std::pow(dx / dx_coarsest, static_cast<double>(k + 1) / r - 1.0);
}

inline std::vector<ConvergenceRow> convergence_study(const ConvergenceSetup& setup) {
  const std::string problem = canonical_convergence_problem(setup.problem);
  if (setup.degrees.empty() || setup.grids.empty()) throw std::invalid_argument("degrees and grids must be non-empty");
  for (int k : setup.degrees)
    if (k < 0 || k > 10) throw std::invalid_argument("degrees must lie in 0..10");
  for (std::size_t g = 0; g < setup.grids.size(); ++g) {
    if (setup.grids[g] < 2) throw std::invalid_argument("grids must be >= 2 cells");
    if (g > 0 && setup.grids[g] <= setup.grids[g - 1]) throw std::invalid_argument("grids must increase");
  }
  if (!(setup.amplitude > 0.0 && setup.amplitude < 1.0)) throw std::invalid_argument("amplitude must lie in (0,1)");

  const FluxModel model = problem == "advection" ? FluxModel::advection(1.0) : FluxModel::euler(1.4);
  const double A = setup.amplitude, T = setup.t_final;
  // Advected profile 1 + A sin(2 pi (x - t)); the Euler entropy wave carries
  // it in the density at unit velocity and pressure.
  const auto exact = [A, T](double x) { return 1.0 + A * std::sin(2.0 * std::numbers::pi * (x - T)); };
  const double lambda_ref = problem == "advection" ? 1.0 : 1.0 + std::sqrt(1.4 / (1.0 - A));

  std::vector<ConvergenceRow> rows;
  for (int k : setup.degrees)
    for (bool limited : {true, false}) {
      std::optional<ConvergenceRow> prev;
      for (int n : setup.grids) {
        const Mesh1D mesh = Mesh1D::make(0.0, 1.0, n, Boundary::Periodic);
        SolverOptions o;
        o.model = model;
        o.degree = k;
        o.rk_order = convergence_rk_order(k);
        o.limiter = limited ? LimiterMode::Both : LimiterMode::Off;
        o.threads = setup.threads;
        o.dt_max = convergence_dt_max(k, mesh.dx(), 1.0 / setup.grids.front(), lambda_ref, o.cfl_fraction);
        DGSolver s(mesh, o);
        s.set_initial(make_preset(model, mesh, "sine", {{"amplitude", {A}}, {"velocity", {1.0}}}));
        s.run(T, 0, 0.0);
        ConvergenceRow r;
        r.degree = k;
        r.cells = n;
        r.limited = limited;
        const auto e = s.errors(exact, 0);
        r.l1 = e[0];
        r.l2 = e[1];
        r.linf = e[2];
        for (const auto& st : s.diagnostics().steps) r.triggers += st.triggers;
        r.steps = s.diagnostics().steps.size();
        if (prev) {
          const double lr = std::log(static_cast<double>(n) / prev->cells);
          r.order_l1 = std::log(prev->l1 / r.l1) / lr;
          r.order_l2 = std::log(prev->l2 / r.l2) / lr;
          r.order_linf = std::log(prev->linf / r.linf) / lr;
        }
        rows.push_back(r);
        prev = r;
      }
    }
  return rows;
}

inline void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows) {
  out << "degree,cells,limiter,l1,l2,linf,order_l1,order_l2,order_linf,triggers,steps\n";
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<double>& x) { return x ? num(*x) : std::string(); };
  for (const auto& r : rows)
    out << r.degree << "," << r.cells << "," << (r.limited ? "on" : "off") << "," << num(r.l1) << "," << num(r.l2)
        << "," << num(r.linf) << "," << opt(r.order_l1) << "," << opt(r.order_l2) << "," << opt(r.order_linf) << ","
        << r.triggers << "," << r.steps << "\n";
}

}  // namespace posflow

#endif  // POSFLOW_CONVERGENCE_HPP_
