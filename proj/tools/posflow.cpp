// posflow command-line interface.
//
// Exit codes: 0 success, 1 runtime invariant failure, 2 usage or config error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "posflow/config.hpp"
#include "posflow/convergence.hpp"
#include "posflow/verify.hpp"
#include "posflow/weights.hpp"

using namespace posflow;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

int cmd_run(const std::string& path, int threads) {
  RunConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  }
  if (threads < 1) {
    std::cerr << "usage error: --threads must be >= 1\n";
    return kUsageError;
  }
  const RunResult res = run_simulation(cfg, threads);
  const Diagnostics& d = res.diagnostics;
  std::cout << "wrote " << res.snapshot_files.size() << " snapshots and " << res.diagnostics_file.string() << "\n";
  std::cout << "steps " << d.steps.size() << ", stop reason "
            << (res.error ? std::string("error") : d.stop_reason) << "\n";
  for (std::size_t q = 0; q < d.functional_names.size(); ++q)
    std::cout << "min " << d.functional_names[q] << " " << d.min_functionals[q] << "\n";
  if (d.first_violation)
    std::cout << "unprotected run stopped at first violation: " << d.first_violation->quantity << "="
              << d.first_violation->value << " in cell " << d.first_violation->cell << " at t=" << d.first_violation->t
              << "\n";
  if (res.error) {
    std::cerr << "runtime error: " << *res.error << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}

std::optional<CanonicalCell> cell_by_name(const std::string& name, int& star_dim) {
  star_dim = 0;
  if (name == "interval") return CanonicalCell::interval();
  if (name == "square") return CanonicalCell::box(2);
  if (name == "cube") return CanonicalCell::box(3);
  if (name == "triangle") return CanonicalCell::simplex(2);
  if (name == "tetrahedron") return CanonicalCell::simplex(3);
  if (name == "disk") return CanonicalCell::sphere(2);
  if (name == "ball") return CanonicalCell::sphere(3);
  if (name == "star2" || name == "star3") star_dim = name.back() - '0';
  return std::nullopt;
}

std::string decimal(const Rational& r) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", to_double(r));
  return buf;
}

int cmd_weights(const std::string& cell_name, int degree_max, const std::string& format, const std::string& space) {
  int star_dim = 0;
  const auto cell = cell_by_name(cell_name, star_dim);
  if (!cell && star_dim == 0) {
    std::cerr << "usage error: unknown cell kind '" << cell_name
              << "' (interval, square, cube, triangle, tetrahedron, disk, ball, star2, star3)\n";
    return kUsageError;
  }
  if (degree_max < 0) {
    std::cerr << "usage error: --degree-max must be >= 0\n";
    return kUsageError;
  }
  const SpaceKind kind = space == "tensor_product" ? SpaceKind::TensorProduct : SpaceKind::TotalDegree;
  std::vector<WeightBracket> rows;
  try {
    for (int k = 0; k <= degree_max; ++k) rows.push_back(cell ? tabulated_weight(*cell, k, kind) : star_bracket(star_dim, k));
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  }
  if (format == "csv") {
    std::cout << "cell,dim,k,lower,upper,lower_decimal,upper_decimal,provenance\n";
    for (const auto& w : rows)
      std::cout << w.cell << "," << w.dim << "," << w.degree << "," << to_string(w.lower) << "," << to_string(w.upper)
                << "," << decimal(w.lower) << "," << decimal(w.upper) << "," << to_string(w.provenance) << "\n";
    return kOk;
  }
  std::cout << "boundary weight M* for " << rows.front().cell << " (" << space << ")\n";
  for (const auto& w : rows) {
    std::string value = w.exact() ? to_string(w.upper) : "[" + to_string(w.lower) + ", " + to_string(w.upper) + "]";
    std::string approx = w.exact() ? decimal(w.upper) : "[" + decimal(w.lower) + ", " + decimal(w.upper) + "]";
    char line[256];
    std::snprintf(line, sizeof line, "  k=%-3d %-24s %-28s %s\n", w.degree, value.c_str(), approx.c_str(),
                  to_string(w.provenance));
    std::cout << line;
  }
  return kOk;
}

int cmd_convergence(const ConvergenceSetup& setup) {
  if (!convergence_problem_known(setup.problem)) {
    std::cerr << "usage error: problem '" << setup.problem
              << "' is not a smooth problem with an exact solution (use advection or euler)\n";
    return kUsageError;
  }
  std::vector<ConvergenceRow> rows;
  try {
    rows = convergence_study(setup);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const SolverError& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  write_convergence_csv(std::cout, rows);
  return kOk;
}

int cmd_verify(long samples, std::uint64_t seed) {
  if (samples < 1) {
    std::cerr << "usage error: --samples must be >= 1\n";
    return kUsageError;
  }
  const auto results = verify_all({samples, seed});
  return write_verify_report(std::cout, results) ? kOk : kRuntimeFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"posflow: positivity-preserving DG solver and boundary-weight tools"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = 1;
  auto* run = app.add_subcommand("run", "run a simulation from a JSON config");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--threads", threads, "worker threads (output is identical for any count)");

  std::string cell, format = "text", space = "total_degree";
  int degree_max = 0;
  auto* weights = app.add_subcommand("weights", "print the boundary weight table");
  weights->add_option("--cell", cell, "interval|square|cube|triangle|tetrahedron|disk|ball|star2|star3")->required();
  weights->add_option("--degree-max", degree_max, "largest degree")->required();
  weights->add_option("--format", format, "csv|text")->check(CLI::IsMember({"csv", "text"}));
  weights->add_option("--space", space, "total_degree|tensor_product")
      ->check(CLI::IsMember({"total_degree", "tensor_product"}));

  ConvergenceSetup setup;
  auto* conv = app.add_subcommand("convergence", "grid-refinement study, CSV on stdout");
  conv->add_option("--problem", setup.problem, "advection|euler")->required();
  conv->add_option("--degrees", setup.degrees, "polynomial degrees")->delimiter(',');
  conv->add_option("--grids", setup.grids, "cell counts")->delimiter(',');
  conv->add_option("--amplitude", setup.amplitude, "profile amplitude in (0,1)");
  conv->add_option("--t-final", setup.t_final, "final time");
  conv->add_option("--threads", setup.threads, "worker threads");

  long samples = 10000;
  std::uint64_t seed = 1;
  auto* verify = app.add_subcommand("verify", "run the property suites");
  verify->add_option("--samples", samples, "sampling budget per cell");
  verify->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*run) return cmd_run(config_path, threads);
    if (*weights) return cmd_weights(cell, degree_max, format, space);
    if (*conv) return cmd_convergence(setup);
    if (*verify) return cmd_verify(samples, seed);
  } catch (const SolverError& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsageError;
}
