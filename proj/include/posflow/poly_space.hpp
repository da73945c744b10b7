#ifndef POSFLOW_POLY_SPACE_HPP_
#define POSFLOW_POLY_SPACE_HPP_

// Polynomial representation spaces on canonical cells with an orthonormal
// modal basis under the cell-average inner product, so that the constant
// mode is identically 1 and its coefficient is the cell average.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "posflow/cell_geometry.hpp"

namespace posflow {

enum class SpaceKind { TotalDegree, TensorProduct };

class PolySpace {
 public:
  static std::shared_ptr<const PolySpace> make(const CanonicalCell& cell, int degree,
                                               SpaceKind kind = SpaceKind::TotalDegree) {
    return std::shared_ptr<const PolySpace>(new PolySpace(cell, degree, kind));
  }

  const CanonicalCell& cell() const { return cell_; }
  int degree() const { return degree_; }
  int dim() const { return cell_.dim(); }
  SpaceKind kind() const { return kind_; }
  int size() const { return static_cast<int>(exponents_.size()); }

  void eval_basis(const Point& x, std::span<double> out) const {
    if (one_dim_) {
      // Orthonormal Legendre on the reference segment.
      const double t = cell_.kind() == CellKind::Interval ? 2.0 * x[0] - 1.0 : x[0];
      double p0 = 1.0, p1 = t;
      out[0] = 1.0;
      if (degree_ >= 1) out[1] = std::sqrt(3.0) * t;
      for (int j = 2; j <= degree_; ++j) {
        const double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
        out[j] = std::sqrt(2.0 * j + 1.0) * p2;
      }
      return;
    }
    thread_local std::vector<double> mono;
    mono.resize(exponents_.size());
    monomials(x, mono);
    const int n = size();
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      const double* row = &basis_[static_cast<std::size_t>(j) * n];
      for (int m = 0; m <= j; ++m) s += row[m] * mono[m];
      out[j] = s;
    }
  }

  std::vector<double> eval_basis(const Point& x) const {
    std::vector<double> v(size());
    eval_basis(x, v);
    return v;
  }

  /// Rigorous bound on sup_K |phi_j|.
  double basis_bound(int j) const { return basis_bound_[j]; }

  /// Boundary average of each basis function: face-average for polytopes,
  /// surface average for spheres.
  std::span<const double> boundary_average_of_basis() const { return boundary_avg_; }

  /// Volume rule exact for products of two members of the space.
  const QuadratureRule& product_rule() const { return product_rule_; }

 private:
  friend class PointEvaluator;

  PolySpace(const CanonicalCell& cell, int degree, SpaceKind kind)
      : cell_(cell), degree_(degree), kind_(kind) {
    if (degree < 0) throw std::invalid_argument("PolySpace: degree must be >= 0");
    if (kind == SpaceKind::TensorProduct && cell.kind() != CellKind::Box &&
        cell.dim() != 1)
      throw std::invalid_argument("PolySpace: tensor-product spaces need a box cell");
    if (degree * (kind == SpaceKind::TensorProduct ? cell.dim() : 1) > 31)
      throw std::invalid_argument("PolySpace: degree too large");
    one_dim_ = cell.dim() == 1;
    const int D = cell.dim();
    const int tensor_factor = kind == SpaceKind::TensorProduct ? D : 1;
    const int top = degree * tensor_factor;
    for (int a = 0; a <= top; ++a)
      for (int b = 0; b <= (D >= 2 ? top : 0); ++b)
        for (int c = 0; c <= (D >= 3 ? top : 0); ++c) {
          const bool keep = kind == SpaceKind::TotalDegree
                                ? a + b + c <= degree
                                : a <= degree && b <= degree && c <= degree;
          if (keep) exponents_.push_back({a, b, c});
        }
    std::stable_sort(exponents_.begin(), exponents_.end(), [](const auto& l, const auto& r) {
      const int dl = l[0] + l[1] + l[2], dr = r[0] + r[1] + r[2];
      if (dl != dr) return dl < dr;
      return l > r;
    });
    product_rule_ = volume_rule(cell_, 2 * top);
    if (!one_dim_) orthonormalize();
    compute_bounds();
    compute_boundary_averages();
  }

  void monomials(const Point& x, std::span<double> out) const {
    const Point c = cell_.center();
    const double dx[3] = {x[0] - c[0], x[1] - c[1], x[2] - c[2]};
    for (std::size_t m = 0; m < exponents_.size(); ++m) {
      double v = 1.0;
      for (int d = 0; d < 3; ++d)
        for (int e = 0; e < exponents_[m][d]; ++e) v *= dx[d];
      out[m] = v;
    }
  }

  // Modified Gram-Schmidt (two passes) of the monomials under <f,g> = avg_K f g.
  void orthonormalize() {
    const int n = size();
    const auto& q = product_rule_;
    const double vol = q.measure();
    const std::size_t nq = q.size();
    // values[m][p]: monomial m at quadrature point p
    std::vector<std::vector<double>> vals(n, std::vector<double>(nq));
    std::vector<double> mono(n);
    for (std::size_t p = 0; p < nq; ++p) {
      monomials(q.points[p], mono);
      for (int m = 0; m < n; ++m) vals[m][p] = mono[m];
    }
    auto inner = [&](const std::vector<double>& f, const std::vector<double>& g) {
      double s = 0.0;
      for (std::size_t p = 0; p < nq; ++p) s += q.weights[p] * f[p] * g[p];
      return s / vol;
    };
    basis_.assign(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<std::vector<double>> phi_vals;
    for (int j = 0; j < n; ++j) {
      std::vector<double> coef(n, 0.0);
      coef[j] = 1.0;
      std::vector<double> v = vals[j];
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i < j; ++i) {
          const double r = inner(v, phi_vals[i]);
          for (std::size_t p = 0; p < nq; ++p) v[p] -= r * phi_vals[i][p];
          for (int m = 0; m <= i; ++m) coef[m] -= r * basis_[static_cast<std::size_t>(i) * n + m];
        }
      }
      const double nrm = std::sqrt(inner(v, v));
      for (auto& x : v) x /= nrm;
      for (int m = 0; m <= j; ++m) basis_[static_cast<std::size_t>(j) * n + m] = coef[m] / nrm;
      phi_vals.push_back(std::move(v));
    }
  }

  void compute_bounds() {
    const int n = size();
    basis_bound_.assign(n, 0.0);
    if (one_dim_) {
      for (int j = 0; j < n; ++j) basis_bound_[j] = std::sqrt(2.0 * j + 1.0);
      return;
    }
    // |x - c| <= R on the cell, so |monomial| <= R^{|alpha|}.
    double R = 1.0;
    switch (cell_.kind()) {
      case CellKind::Box: R = std::sqrt(static_cast<double>(dim())); break;
      case CellKind::Simplex: R = static_cast<double>(dim()); break;
      default: R = 1.0;
    }
    for (int j = 0; j < n; ++j) {
      double b = 0.0;
      for (int m = 0; m <= j; ++m) {
        const int deg = exponents_[m][0] + exponents_[m][1] + exponents_[m][2];
        b += std::abs(basis_[static_cast<std::size_t>(j) * n + m]) * std::pow(R, deg);
      }
      basis_bound_[j] = b;
    }
    basis_bound_[0] = 1.0;
  }

  void compute_boundary_averages() {
    const int n = size();
    boundary_avg_.assign(n, 0.0);
    std::vector<double> phi(n);
    const int surf_deg = degree_ * (kind_ == SpaceKind::TensorProduct ? dim() : 1);
    if (cell_.kind() == CellKind::Sphere) {
      const auto s = sphere_surface_rule(dim(), surf_deg);
      const double area = s.measure();
      for (std::size_t p = 0; p < s.size(); ++p) {
        eval_basis(s.points[p], phi);
        for (int j = 0; j < n; ++j) boundary_avg_[j] += s.weights[p] * phi[j] / area;
      }
      return;
    }
    const auto fs = face_set(cell_, surf_deg);
    const double nf = static_cast<double>(fs.faces.size());
    for (const auto& f : fs.faces) {
      for (std::size_t p = 0; p < f.rule.size(); ++p) {
        eval_basis(f.rule.points[p], phi);
        for (int j = 0; j < n; ++j) boundary_avg_[j] += f.rule.weights[p] * phi[j] / (f.area * nf);
      }
    }
  }

  CanonicalCell cell_;
  int degree_;
  SpaceKind kind_;
  bool one_dim_ = false;
  std::vector<std::array<int, 3>> exponents_;
  std::vector<double> basis_;  // row j: monomial coefficients of phi_j
  std::vector<double> basis_bound_;
  std::vector<double> boundary_avg_;
  QuadratureRule product_rule_;
};

using PolySpacePtr = std::shared_ptr<const PolySpace>;

/// Modal coefficients over a PolySpace basis.
struct Polynomial {
  PolySpacePtr space;
  std::vector<double> coeffs;

  Polynomial() = default;
  explicit Polynomial(PolySpacePtr s) : space(std::move(s)), coeffs(space->size(), 0.0) {}
  Polynomial(PolySpacePtr s, std::vector<double> c) : space(std::move(s)), coeffs(std::move(c)) {
    if (static_cast<int>(coeffs.size()) != space->size())
      throw std::invalid_argument("Polynomial: coefficient count does not match the space");
  }

  static Polynomial constant(PolySpacePtr s, double c) {
    Polynomial p(std::move(s));
    p.coeffs[0] = c;
    return p;
  }
};

inline double eval(const Polynomial& p, const Point& x) {
  const auto phi = p.space->eval_basis(x);
  double s = 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) s += p.coeffs[j] * phi[j];
  return s;
}

inline double cell_average(const Polynomial& p) { return p.coeffs[0]; }

/// Boundary average without the polytope restriction (spheres use their
/// surface average).
inline double boundary_average(const Polynomial& p) {
  const auto b = p.space->boundary_average_of_basis();
  double s = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) s += p.coeffs[j] * b[j];
  return s;
}

/// Arithmetic mean over faces of each face average.
inline double boundary_face_average(const Polynomial& p) {
  if (!p.space->cell().has_faces())
    throw std::invalid_argument("boundary_face_average: sphere has no polytope faces");
  return boundary_average(p);
}

inline double boundary_crowding(const Polynomial& p) {
  const double c = cell_average(p);
  if (!(c > 0.0)) throw std::domain_error("boundary crowding undefined: cell average <= 0");
  return boundary_average(p) / c;
}

/// Repeated evaluation of one polynomial: the modal coefficients are mapped
/// to monomial form once, after which each point costs O(size).
class PointEvaluator {
 public:
  PointEvaluator(const PolySpace& space, std::span<const double> coeffs)
      : space_(space), coeffs_(coeffs.begin(), coeffs.end()) {
    if (space.one_dim_) return;
    const int n = space.size();
    mono_.assign(n, 0.0);
    for (int j = 0; j < n; ++j)
      for (int m = 0; m <= j; ++m) mono_[m] += coeffs_[j] * space.basis_[static_cast<std::size_t>(j) * n + m];
  }

  double operator()(const Point& x) const {
    if (space_.one_dim_) {
      thread_local std::vector<double> phi;
      phi.resize(coeffs_.size());
      space_.eval_basis(x, phi);
      double s = 0.0;
      for (std::size_t j = 0; j < phi.size(); ++j) s += coeffs_[j] * phi[j];
      return s;
    }
    const Point c = space_.cell().center();
    const double dx[3] = {x[0] - c[0], x[1] - c[1], x[2] - c[2]};
    double pw[3][32];
    const int top = space_.degree() * (space_.kind() == SpaceKind::TensorProduct ? space_.dim() : 1);
    for (int d = 0; d < 3; ++d) {
      pw[d][0] = 1.0;
      for (int e = 1; e <= std::min(top, 31); ++e) pw[d][e] = pw[d][e - 1] * dx[d];
    }
    double s = 0.0;
    for (std::size_t m = 0; m < mono_.size(); ++m) {
      const auto& e = space_.exponents_[m];
      s += mono_[m] * pw[0][e[0]] * pw[1][e[1]] * pw[2][e[2]];
    }
    return s;
  }

 private:
  const PolySpace& space_;
  std::vector<double> coeffs_;
  std::vector<double> mono_;
};

/// L2 projection onto the space.
inline Polynomial project(const std::function<double(const Point&)>& f, PolySpacePtr space) {
  Polynomial p(space);
  const auto& q = space->product_rule();
  const double vol = q.measure();
  std::vector<double> phi(space->size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double fv = f(q.points[k]);
    space->eval_basis(q.points[k], phi);
    for (int j = 0; j < space->size(); ++j) p.coeffs[j] += q.weights[k] * fv * phi[j] / vol;
  }
  return p;
}

/// Basis values at a fixed point set, row-major [point][mode].
struct PointTable {
  int n_points = 0;
  int n_modes = 0;
  std::vector<Point> points;
  std::vector<double> values;

  double operator()(int p, int j) const {
    return values[static_cast<std::size_t>(p) * n_modes + j];
  }
  double eval(int p, std::span<const double> coeffs) const {
    double s = 0.0;
    const double* row = &values[static_cast<std::size_t>(p) * n_modes];
    for (int j = 0; j < n_modes; ++j) s += row[j] * coeffs[j];
    return s;
  }
};

inline PointTable tabulate(const PolySpace& space, std::span<const Point> points) {
  PointTable t;
  t.n_points = static_cast<int>(points.size());
  t.n_modes = space.size();
  t.points.assign(points.begin(), points.end());
  t.values.resize(static_cast<std::size_t>(t.n_points) * t.n_modes);
  for (int p = 0; p < t.n_points; ++p)
    space.eval_basis(points[p], std::span<double>(&t.values[static_cast<std::size_t>(p) * t.n_modes],
                                                  t.n_modes));
  return t;
}

}  // namespace posflow

#endif  // POSFLOW_POLY_SPACE_HPP_
