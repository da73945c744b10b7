#ifndef POSFLOW_WEIGHTS_HPP_
#define POSFLOW_WEIGHTS_HPP_

// Interior weights M = 1/W for boundary-crowding caps: closed forms,
// lower-bound recurrences, optimal retentional points, optimizers that
// confirm the exact values, and a sampling search that brackets the optimum
// from below.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/rational.hpp>

#include "posflow/cell_geometry.hpp"
#include "posflow/poly_space.hpp"

namespace posflow {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

// ---------------------------------------------------------------------------
// Closed forms

/// Optimal interior weight for the interval: (n+1)(n+2)/2 with n = floor(k/2).
inline Rational interval_weight(int k) {
  if (k < 0) throw std::invalid_argument("interval_weight: degree must be >= 0");
  const std::int64_t n = k / 2;
  return Rational((n + 1) * (n + 2), 2);
}

/// Optimal interior weight for the D-dimensional ball.
inline Rational sphere_weight(int D, int k) {
  if (D < 1 || k < 0) throw std::invalid_argument("sphere_weight: need D >= 1, k >= 0");
  const std::int64_t n = k / 2;
  return Rational((n / 2 + 1) * (2 * ((n + 1) / 2) + D), D);
}

/// Admissible interior weight for any star-regular cell.
inline Rational star_weight(int D, int k) {
  if (D < 1 || k < 0) throw std::invalid_argument("star_weight: need D >= 1, k >= 0");
  return Rational((k / 2 + 1) * ((k + 1) / 2 + D), static_cast<std::int64_t>(D));
}

/// Exact optimum for quadratic spaces on star-regular cells (and cubic on
/// boxes): (D+2)/D.
inline Rational quadratic_star_weight(int D) {
  if (D < 1) throw std::invalid_argument("quadratic_star_weight: D >= 1");
  return Rational(D + 2, D);
}

inline Rational cubic_simplex_weight(int D) {
  if (D == 2) return Rational(20, 9);
  if (D == 3) return Rational(11, 6);
  throw std::invalid_argument("cubic_simplex_weight: D must be 2 or 3");
}

/// Lower bound for boxes: M_D = (1 + (D-1) M_{D-1}) / D, M_1 = interval weight.
inline Rational box_lower_bound(int D, int k) {
  if (D < 1) throw std::invalid_argument("box_lower_bound: D >= 1");
  Rational m = interval_weight(k);
  for (int d = 2; d <= D; ++d) m = (Rational(1) + Rational(d - 1) * m) / Rational(d);
  return m;
}

/// Lower bound for simplices:
///   M_D = ((D+k)/D) (1 + D (D-1)/(D+k-1) M_{D-1}) / (1+D).
inline Rational simplex_lower_bound(int D, int k) {
  if (D < 1) throw std::invalid_argument("simplex_lower_bound: D >= 1");
  Rational m = interval_weight(k);
  for (int d = 2; d <= D; ++d) {
    const Rational inner = Rational(1) + Rational(d) * Rational(d - 1, d + k - 1) * m;
    m = Rational(d + k, d) * inner / Rational(1 + d);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Tabulation

enum class Provenance { ClosedFormExact, Recurrence, StarFormula, SphereFormula, Sampled };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::ClosedFormExact: return "closed_form_exact";
    case Provenance::Recurrence: return "recurrence";
    case Provenance::StarFormula: return "star_formula";
    case Provenance::SphereFormula: return "sphere_formula";
    case Provenance::Sampled: return "sampled";
  }
  return "?";
}

struct WeightBracket {
  std::string cell;
  int dim = 1;
  int degree = 0;
  SpaceKind space = SpaceKind::TotalDegree;
  Rational lower{1};
  Rational upper{1};
  Provenance provenance = Provenance::ClosedFormExact;

  bool exact() const { return lower == upper; }
};

inline WeightBracket tabulated_weight(const CanonicalCell& cell, int k,
                                      SpaceKind space = SpaceKind::TotalDegree) {
  if (k < 0) throw std::invalid_argument("tabulated_weight: degree must be >= 0");
  WeightBracket w;
  w.cell = cell.name();
  w.dim = cell.dim();
  w.degree = k;
  w.space = space;
  auto exact = [&](Rational v, Provenance p) {
    w.lower = w.upper = v;
    w.provenance = p;
    return w;
  };
  const int D = cell.dim();
  switch (cell.kind()) {
    case CellKind::Interval: return exact(interval_weight(k), Provenance::ClosedFormExact);
    case CellKind::Sphere:
      if (space == SpaceKind::TensorProduct && D > 1)
        throw std::invalid_argument("tabulated_weight: tensor-product space needs a box");
      return exact(sphere_weight(D, k), Provenance::SphereFormula);
    case CellKind::Box:
      if (space == SpaceKind::TensorProduct)
        return exact(interval_weight(k), Provenance::ClosedFormExact);
      if (k <= 1) return exact(Rational(1), Provenance::ClosedFormExact);
      if (k <= 3) return exact(quadratic_star_weight(D), Provenance::ClosedFormExact);
      w.lower = box_lower_bound(D, k);
      w.upper = sphere_weight(D, k);
      w.provenance = Provenance::Recurrence;
      return w;
    case CellKind::Simplex:
      if (space == SpaceKind::TensorProduct)
        throw std::invalid_argument("tabulated_weight: tensor-product space needs a box");
      if (k <= 1) return exact(Rational(1), Provenance::ClosedFormExact);
      if (k == 2) return exact(quadratic_star_weight(D), Provenance::ClosedFormExact);
      if (k == 3) return exact(cubic_simplex_weight(D), Provenance::ClosedFormExact);
      w.lower = simplex_lower_bound(D, k);
      w.upper = star_weight(D, k);
      if (D == 2) w.upper = std::min(w.upper, interval_weight(k));
      w.provenance = Provenance::Recurrence;
      return w;
  }
  throw std::logic_error("tabulated_weight: unknown cell kind");
}

/// Admissible star-regular weight reported as a degenerate bracket.
inline WeightBracket star_bracket(int D, int k) {
  WeightBracket w;
  w.cell = "star" + std::to_string(D);
  w.dim = D;
  w.degree = k;
  w.lower = w.upper = star_weight(D, k);
  w.provenance = Provenance::StarFormula;
  return w;
}

// ---------------------------------------------------------------------------
// Optimizers

/// prod_i (x - x_i)^2 over the interior Gauss-Lobatto nodes with
/// n = floor(k/2); boundary crowding (n+1)(n+2)/2.
inline Polynomial interval_optimizer(int k) {
  auto space = PolySpace::make(CanonicalCell::interval(), k);
  const auto gl = gauss_lobatto(k / 2);
  std::vector<double> nodes;
  for (std::size_t i = 1; i + 1 < gl.size(); ++i) nodes.push_back(gl.points[i][0]);
  return project(
      [&](const Point& x) {
        double v = 1.0;
        for (double z : nodes) v *= (x[0] - z) * (x[0] - z);
        return v;
      },
      space);
}

/// |x|^2 on a star-regular cell; boundary crowding (D+2)/D.
inline Polynomial quadratic_optimizer(const CanonicalCell& cell) {
  if (!cell.star_regular()) throw std::invalid_argument("quadratic_optimizer: star-regular cell");
  auto space = PolySpace::make(cell, 2);
  return project([](const Point& x) { return dot(x, x); }, space);
}

namespace detail {

// Orthogonal maps generating the symmetry group of the regular simplex in
// the canonical orientation.
inline std::vector<Eigen::Matrix3d> simplex_symmetry_generators(int D) {
  std::vector<Eigen::Matrix3d> g;
  if (D == 2) {
    const double c = std::cos(2.0 * std::numbers::pi / 3.0), s = std::sin(2.0 * std::numbers::pi / 3.0);
    Eigen::Matrix3d rot;
    rot << c, -s, 0, s, c, 0, 0, 0, 1;
    Eigen::Matrix3d refl = Eigen::Matrix3d::Identity();
    refl(1, 1) = -1.0;
    g = {rot, refl};
  } else {
    Eigen::Matrix3d cyc;
    cyc << 0, 0, 1, 1, 0, 0, 0, 1, 0;
    Eigen::Matrix3d swap;
    swap << 0, 1, 0, 1, 0, 0, 0, 0, 1;
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(0, 0) = -1.0;
    flip(1, 1) = -1.0;
    g = {cyc, swap, flip};
  }
  return g;
}

}  // namespace detail

/// The isometry-invariant cubic vanishing at the centroid and at the face
/// centers, normalized to cell average 1.  Built as the null space of the
/// invariance and vanishing conditions.
inline Polynomial cubic_simplex_optimizer(int D) {
  const auto cell = CanonicalCell::simplex(D);
  auto space = PolySpace::make(cell, 3);
  const int n = space->size();
  // Sample points for the invariance conditions p(g x) - p(x) = 0.
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<std::vector<double>> rows;
  const auto gens = detail::simplex_symmetry_generators(D);
  for (int s = 0; s < 3 * n; ++s) {
    Point x{u(rng), u(rng), D == 3 ? u(rng) : 0.0};
    const Eigen::Vector3d xv(x[0], x[1], x[2]);
    const auto px = space->eval_basis(x);
    for (const auto& g : gens) {
      const Eigen::Vector3d gx = g * xv;
      const auto pg = space->eval_basis({gx[0], gx[1], gx[2]});
      std::vector<double> r(n);
      for (int j = 0; j < n; ++j) r[j] = pg[j] - px[j];
      rows.push_back(std::move(r));
    }
  }
  rows.push_back(space->eval_basis(cell.center()));
  for (const auto& f : face_set(cell, 0).faces) rows.push_back(space->eval_basis(f.center));
  Eigen::MatrixXd A(rows.size(), n);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < n; ++j) A(static_cast<Eigen::Index>(i), j) = rows[i][j];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd c = svd.matrixV().col(n - 1);
  Polynomial p(space);
  for (int j = 0; j < n; ++j) p.coeffs[j] = c[j];
  const double avg = p.coeffs[0];
  for (auto& x : p.coeffs) x /= avg;
  return p;
}

// ---------------------------------------------------------------------------
// Retentional points

struct RetentionalPoints {
  std::vector<Point> points;
  std::vector<double> weights;
  double boundary_weight = 1.0;
};

/// Points X, positive weights w_x and boundary weight W with
///   avg_K p = sum w_x p(x) + W * boundary_average(p)   for all p in P^k.
inline RetentionalPoints retentional_points(const CanonicalCell& cell, int k) {
  if (k < 0) throw std::invalid_argument("retentional_points: degree must be >= 0");
  RetentionalPoints rp;
  if (cell.kind() == CellKind::Interval) {
    const auto gl = gauss_lobatto(k / 2);
    rp.boundary_weight = 2.0 * gl.weights.front();
    for (std::size_t i = 1; i + 1 < gl.size(); ++i) {
      rp.points.push_back(gl.points[i]);
      rp.weights.push_back(gl.weights[i]);
    }
    return rp;
  }
  const int D = cell.dim();
  if (k <= 1) return rp;
  const bool center_only =
      k == 2 || (k == 3 && (cell.kind() == CellKind::Box || cell.kind() == CellKind::Sphere));
  if (center_only) {
    rp.boundary_weight = static_cast<double>(D) / (D + 2.0);
    rp.points.push_back(cell.center());
    rp.weights.push_back(1.0 - rp.boundary_weight);
    return rp;
  }
  if (k == 3 && cell.kind() == CellKind::Simplex) {
    // Unknowns: center weight, common face-center weight, boundary weight.
    auto space = PolySpace::make(cell, 3);
    const int n = space->size();
    const auto faces = face_set(cell, 0).faces;
    const auto pc = space->eval_basis(cell.center());
    std::vector<double> pf(n, 0.0);
    for (const auto& f : faces) {
      const auto v = space->eval_basis(f.center);
      for (int j = 0; j < n; ++j) pf[j] += v[j];
    }
    const auto b = space->boundary_average_of_basis();
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
      A(j, 0) = pc[j];
      A(j, 1) = pf[j];
      A(j, 2) = b[j];
    }
    rhs[0] = 1.0;  // cell average of phi_j is delta_{j0}
    const Eigen::Vector3d w = A.colPivHouseholderQr().solve(rhs);
    if ((A * w - rhs).norm() > 1e-10)
      throw std::runtime_error("retentional_points: no boundary-weighted rule found");
    rp.points.push_back(cell.center());
    rp.weights.push_back(w[0]);
    for (const auto& f : faces) {
      rp.points.push_back(f.center);
      rp.weights.push_back(w[1]);
    }
    rp.boundary_weight = w[2];
    return rp;
  }
  throw std::invalid_argument(
      "retentional_points: no known optimal points for " + cell.name() + " at degree " +
      std::to_string(k) + "; use tabulated_weight with retentional limiting instead");
}

// ---------------------------------------------------------------------------
// Sampling oracle

namespace detail {

inline std::vector<Point> dense_grid(const CanonicalCell& cell, double& spacing) {
  std::vector<Point> g;
  const int D = cell.dim();
  switch (cell.kind()) {
    case CellKind::Interval: {
      const int N = 400;
      spacing = 1.0 / N;
      for (int i = 0; i <= N; ++i) g.push_back({static_cast<double>(i) / N, 0, 0});
      break;
    }
    case CellKind::Box: {
      const int N = D == 2 ? 40 : 16;
      spacing = 2.0 / N;
      for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j)
          for (int l = 0; l <= (D == 3 ? N : 0); ++l)
            g.push_back({-1.0 + spacing * i, -1.0 + spacing * j, D == 3 ? -1.0 + spacing * l : 0.0});
      break;
    }
    case CellKind::Simplex: {
      const auto v = cell.vertices();
      const int N = D == 2 ? 48 : 16;
      spacing = norm(v[1] - v[0]) / N;
      for (int i = 0; i <= N; ++i)
        for (int j = 0; i + j <= N; ++j)
          for (int l = 0; i + j + l <= (D == 3 ? N : i + j); ++l) {
            const double a = static_cast<double>(i) / N, b = static_cast<double>(j) / N,
                         c = static_cast<double>(l) / N;
            Point p = v[0] + a * (v[1] - v[0]) + b * (v[2] - v[0]);
            if (D == 3) p = p + c * (v[3] - v[0]);
            g.push_back(p);
          }
      break;
    }
    case CellKind::Sphere: {
      if (D == 1) {
        const int N = 400;
        spacing = 2.0 / N;
        for (int i = 0; i <= N; ++i) g.push_back({-1.0 + spacing * i, 0, 0});
        break;
      }
      const int nr = D == 2 ? 30 : 12;
      spacing = 1.0 / nr;
      g.push_back({0, 0, 0});
      for (int i = 1; i <= nr; ++i) {
        const double r = static_cast<double>(i) / nr;
        if (D == 2) {
          const int m = std::max(6, static_cast<int>(2.0 * std::numbers::pi * r / spacing));
          for (int j = 0; j < m; ++j) {
            const double a = 2.0 * std::numbers::pi * j / m;
            g.push_back({r * std::cos(a), r * std::sin(a), 0.0});
          }
        } else {
          const int mt = std::max(3, static_cast<int>(std::numbers::pi * r / spacing));
          for (int t = 0; t <= mt; ++t) {
            const double th = std::numbers::pi * t / mt;
            const int mp = std::max(1, static_cast<int>(2.0 * std::numbers::pi * r * std::sin(th) / spacing));
            for (int j = 0; j < mp; ++j) {
              const double a = 2.0 * std::numbers::pi * j / mp;
              g.push_back({r * std::sin(th) * std::cos(a), r * std::sin(th) * std::sin(a), r * std::cos(th)});
            }
          }
        }
      }
      break;
    }
  }
  return g;
}

// Minimum of p near `start`, by repeated local grid zooming clamped to the
// cell.  Returns early once a value below `give_up` is found.
inline double zoom_minimum(const PolySpace& space, std::span<const double> coeffs, Point start,
                           double h, double start_value,
                           double give_up = -std::numeric_limits<double>::infinity()) {
  const CanonicalCell& cell = space.cell();
  const int D = cell.dim();
  const int m = 3;  // offsets -m..m per axis
  const PointEvaluator value(space, coeffs);
  double best = start_value;
  Point bp = start;
  const double stop = 1e-13 * h;
  while (h > stop && best >= give_up) {
    const double step = h / m;
    const Point center = bp;
    const int e2 = D >= 2 ? m : 0, e3 = D >= 3 ? m : 0;
    for (int i = -m; i <= m; ++i)
      for (int j = -e2; j <= e2; ++j)
        for (int l = -e3; l <= e3; ++l) {
          if (i == 0 && j == 0 && l == 0) continue;
          const Point x{center[0] + i * step, center[1] + j * step, center[2] + l * step};
          if (!cell.contains(x, 1e-14)) continue;
          const double v = value(x);
          if (v < best) {
            best = v;
            bp = x;
          }
        }
    h = step;
  }
  return best;
}

}  // namespace detail

struct SampleResult {
  double value = 1.0;
  Polynomial best;
};

/// Maximum boundary crowding found over sampled nonnegative members of the
/// representation space.  Candidates come from squares of random
/// polynomials, products of squared affine forms (times a nonnegative affine
/// form for odd degree) and a perturbative search around the incumbent;
/// every candidate is shifted by its minimum over the cell so that it is
/// nonnegative.  Deterministic in `seed`; nondecreasing in `samples`.
inline SampleResult sample_search(const CanonicalCell& cell, int k, long samples, std::uint64_t seed,
                                  SpaceKind kind = SpaceKind::TotalDegree) {
  if (samples < 1) throw std::invalid_argument("sample_lower_bound: samples must be >= 1");
  auto space = PolySpace::make(cell, k, kind);
  SampleResult res;
  res.best = Polynomial::constant(space, 1.0);
  if (k == 0) return res;
  const int n = space->size();
  const int D = cell.dim();

  double spacing = 0.0;
  const auto grid = detail::dense_grid(cell, spacing);
  const auto table = tabulate(*space, grid);
  const auto bavg = space->boundary_average_of_basis();
  const auto& prod = space->product_rule();
  const double vol = prod.measure();
  std::vector<std::vector<double>> prod_phi(prod.size());
  for (std::size_t q = 0; q < prod.size(); ++q) prod_phi[q] = space->eval_basis(prod.points[q]);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto verts = cell.vertices();
  auto random_point = [&]() -> Point {
    for (;;) {
      Point x{0, 0, 0};
      if (cell.kind() == CellKind::Interval) {
        x[0] = unit(rng);
        return x;
      }
      for (int d = 0; d < D; ++d) x[d] = 2.0 * D * unit(rng) - D;
      if (cell.contains(x)) return x;
    }
  };
  auto random_direction = [&]() -> Point {
    Point d{0, 0, 0};
    for (int i = 0; i < D; ++i) d[i] = normal(rng);
    const double r = norm(d);
    return r > 0 ? (1.0 / r) * d : Point{1, 0, 0};
  };
  // Support function of the cell: max over the cell of dir.x.
  auto support = [&](const Point& dir) {
    if (cell.kind() == CellKind::Sphere) return norm(dir);
    double s = -std::numeric_limits<double>::infinity();
    for (const auto& v : verts) s = std::max(s, dot(dir, v));
    return s;
  };
  auto project_fn = [&](auto&& f) {
    std::vector<double> c(n, 0.0);
    for (std::size_t q = 0; q < prod.size(); ++q) {
      const double fv = f(prod.points[q]);
      for (int j = 0; j < n; ++j) c[j] += prod.weights[q] * fv * prod_phi[q][j] / vol;
    }
    return c;
  };

  auto fresh = [&]() -> std::vector<double> {
    const int half = k / 2;
    const bool odd = k % 2 == 1;
    const int family = static_cast<int>(unit(rng) * 3.0);
    // Nonnegative affine factor for odd degrees.
    Point ldir = random_direction();
    const double lshift = support(ldir) + 0.3 * unit(rng) * unit(rng);
    std::vector<Point> zeros, dirs;
    for (int i = 0; i < half; ++i) {
      zeros.push_back(random_point());
      dirs.push_back(random_direction());
    }
    if (family == 0 && half > 0 && kind == SpaceKind::TotalDegree) {
      // Square of a random polynomial of degree floor(k/2) built from products
      // of affine forms plus a constant perturbation.
      std::vector<double> a(half + 1);
      for (auto& x : a) x = normal(rng);
      return project_fn([&](const Point& x) {
        double q = a[0];
        double prodv = 1.0;
        for (int i = 0; i < half; ++i) {
          prodv *= dot(dirs[i], x - zeros[i]);
          q += a[i + 1] * prodv;
        }
        double v = q * q;
        if (odd) v *= lshift - dot(ldir, x);
        return v;
      });
    }
    return project_fn([&](const Point& x) {
      double v = 1.0;
      for (int i = 0; i < half; ++i) {
        const double l = kind == SpaceKind::TensorProduct ? (x[i % D] - zeros[i][i % D])
                                                          : dot(dirs[i], x - zeros[i]);
        v *= l * l;
      }
      if (odd) v *= kind == SpaceKind::TensorProduct ? (1.0 + 1e-3 - x[0]) : lshift - dot(ldir, x);
      return v;
    });
  };

  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> grid_matrix(
      table.values.data(), table.n_points, n);
  Eigen::VectorXd values_vec(table.n_points);
  const double* values = values_vec.data();
  constexpr int kBlock = 128;
  std::vector<int> killers(std::min<int>(8, table.n_points), 0);
  std::size_t next_killer = 0;
  std::vector<double> incumbent;
  double best = 1.0;
  double sigma = 0.3;
  std::vector<int> order(grid.size());

  for (long s = 0; s < samples; ++s) {
    std::vector<double> c;
    const bool perturb = !incumbent.empty() && unit(rng) < 0.7;
    if (perturb) {
      c = incumbent;
      const double scale = sigma * std::exp(normal(rng));
      for (int j = 1; j < n; ++j) c[j] += scale * normal(rng);
    } else {
      c = fresh();
    }
    // A collapsed step size restarts the local search at full scale.
    if (sigma < 1e-2) sigma = 0.3;
    // Grid minimum gives an optimistic estimate; refine only if promising.
    double bc = 0.0;
    for (int j = 0; j < n; ++j) bc += bavg[j] * c[j];
    const double c0 = c[0];
    const Eigen::Map<const Eigen::VectorXd> cv(c.data(), n);
    // A grid value below `cut` rules the candidate out; the pass stops there.
    bool cut_off = false;
    {
      const double tgt = best * (1.0 + 1e-10);
      // For bc <= c0 any value below the mean suffices.
      const double cut = bc > c0 ? (tgt * c0 - bc) / (tgt - 1.0) : c0;
      const double cut_safe = cut - 1e-9 * (std::abs(cut) + std::abs(c0));
      for (int p : killers)
        if (grid_matrix.row(p).dot(cv) < cut_safe) cut_off = true;
      for (int start = 0; start < table.n_points && !cut_off; start += kBlock) {
        const int len = std::min(kBlock, table.n_points - start);
        auto seg = values_vec.segment(start, len);
        seg.noalias() = grid_matrix.middleRows(start, len) * cv;
        Eigen::Index at;
        if (seg.minCoeff(&at) < cut_safe) {
          cut_off = true;
          killers[next_killer] = start + static_cast<int>(at);
          next_killer = (next_killer + 1) % killers.size();
        }
      }
    }
    if (cut_off) {
      if (perturb) sigma = std::max(sigma * 0.97, 1e-5);
      continue;
    }
    const double mg = values_vec.minCoeff();
    const double vmax = values_vec.maxCoeff();
    if (!(vmax > mg)) {
      if (perturb) sigma = std::max(sigma * 0.97, 1e-5);
      continue;
    }
    // Improvements must beat the incumbent by a relative margin so that exact
    // ties do not force full refinement.
    const double target = best * (1.0 + 1e-10);
    const double optimistic = (bc - mg) / (c0 - mg);
    if (!(optimistic > target)) {
      if (perturb) sigma = std::max(sigma * 0.97, 1e-5);
      continue;
    }
    // Refine around the lowest grid points; a lower minimum only lowers the
    // crowding, so stop as soon as the candidate cannot win.
    std::iota(order.begin(), order.end(), 0);
    const int n_starts = std::min<int>(8, static_cast<int>(grid.size()));
    std::partial_sort(order.begin(), order.begin() + n_starts, order.end(),
                      [&](int a, int b) { return values[a] < values[b]; });
    // Any minimum below this threshold makes the crowding <= best.
    const double give_up = (target * c0 - bc) / (target - 1.0);
    double m = mg;
    bool beaten = false;
    for (int i = 0; i < n_starts && !beaten; ++i) {
      m = std::min(m, detail::zoom_minimum(*space, c, grid[order[i]], spacing, values[order[i]],
                                           best > 1.0 ? give_up : -std::numeric_limits<double>::infinity()));
      beaten = !((bc - m) / (c0 - m) > target);
    }
    m -= 1e-12 * (vmax - m);
    const double crowd = (bc - m) / (c0 - m);
    if (crowd > target) {
      best = crowd;
      c[0] -= m;
      const double scale = c[0];
      for (auto& x : c) x /= scale;
      incumbent = c;
      if (perturb) sigma = std::min(sigma * 1.5, 1.0);
    } else if (perturb) {
      sigma = std::max(sigma * 0.97, 1e-5);
    }
  }
  res.value = best;
  if (!incumbent.empty()) res.best = Polynomial(space, incumbent);
  return res;
}

inline double sample_lower_bound(const CanonicalCell& cell, int k, long samples, std::uint64_t seed,
                                 SpaceKind kind = SpaceKind::TotalDegree) {
  return sample_search(cell, k, samples, seed, kind).value;
}

}  // namespace posflow

#endif  // POSFLOW_WEIGHTS_HPP_
