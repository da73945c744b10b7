#ifndef POSFLOW_CELL_GEOMETRY_HPP_
#define POSFLOW_CELL_GEOMETRY_HPP_

// Canonical mesh cells and the volume, face, and surface quadrature rules
// used by the representation spaces, the weights engine, and the solver.
//
// Conventions:
//   * Interval is [0,1].
//   * Box(D) is [-1,1]^D, Simplex(D) is the regular simplex with inradius 1,
//     Sphere(D) is the unit ball.  All three are centered on the origin with
//     n.x == 1 on the boundary (star-regular).

#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace posflow {

using Point = std::array<double, 3>;

inline double dot(const Point& a, const Point& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline Point operator+(const Point& a, const Point& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Point operator-(const Point& a, const Point& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Point operator*(double s, const Point& a) {
  return {s * a[0], s * a[1], s * a[2]};
}
inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }

enum class CellKind { Interval, Box, Simplex, Sphere };

class CanonicalCell {
 public:
  static CanonicalCell interval() { return {CellKind::Interval, 1}; }
  static CanonicalCell box(int dim) {
    if (dim < 2 || dim > 3) throw std::invalid_argument("box dimension must be 2 or 3");
    return {CellKind::Box, dim};
  }
  static CanonicalCell simplex(int dim) {
    if (dim < 2 || dim > 3) throw std::invalid_argument("simplex dimension must be 2 or 3");
    return {CellKind::Simplex, dim};
  }
  static CanonicalCell sphere(int dim) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("sphere dimension must be 1, 2 or 3");
    return {CellKind::Sphere, dim};
  }

  CellKind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool star_regular() const { return kind_ != CellKind::Interval; }
  bool has_faces() const { return kind_ != CellKind::Sphere; }

  std::string name() const {
    switch (kind_) {
      case CellKind::Interval: return "interval";
      case CellKind::Box: return dim_ == 2 ? "square" : "cube";
      case CellKind::Simplex: return dim_ == 2 ? "triangle" : "tetrahedron";
      case CellKind::Sphere:
        return dim_ == 1 ? "sphere1" : dim_ == 2 ? "disk" : "ball";
    }
    return "?";
  }

  // Polytope vertices; empty for spheres.
  std::vector<Point> vertices() const {
    switch (kind_) {
      case CellKind::Interval: return {{0, 0, 0}, {1, 0, 0}};
      case CellKind::Box: {
        std::vector<Point> v;
        const int n = 1 << dim_;
        for (int i = 0; i < n; ++i) {
          Point p{0, 0, 0};
          for (int d = 0; d < dim_; ++d) p[d] = (i >> d) & 1 ? 1.0 : -1.0;
          v.push_back(p);
        }
        return v;
      }
      case CellKind::Simplex: {
        if (dim_ == 2) {
          std::vector<Point> v;
          for (int i = 0; i < 3; ++i) {
            const double a = 2.0 * std::numbers::pi * i / 3.0;
            v.push_back({2.0 * std::cos(a), 2.0 * std::sin(a), 0.0});
          }
          return v;
        }
        const double s = std::sqrt(3.0);
        return {{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
      }
      case CellKind::Sphere: return {};
    }
    return {};
  }

  Point center() const {
    return kind_ == CellKind::Interval ? Point{0.5, 0, 0} : Point{0, 0, 0};
  }

  double volume() const {
    switch (kind_) {
      case CellKind::Interval: return 1.0;
      case CellKind::Box: return std::pow(2.0, dim_);
      case CellKind::Simplex: return dim_ == 2 ? 3.0 * std::sqrt(3.0) : 8.0 * std::sqrt(3.0);
      case CellKind::Sphere:
        return dim_ == 1 ? 2.0 : dim_ == 2 ? std::numbers::pi : 4.0 * std::numbers::pi / 3.0;
    }
    return 0.0;
  }

  double boundary_area() const {
    switch (kind_) {
      case CellKind::Interval: return 2.0;
      case CellKind::Box: return 2.0 * dim_ * std::pow(2.0, dim_ - 1);
      case CellKind::Simplex: return dim_ == 2 ? 6.0 * std::sqrt(3.0) : 24.0 * std::sqrt(3.0);
      case CellKind::Sphere:
        return dim_ == 1 ? 2.0 : dim_ == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
    }
    return 0.0;
  }

  bool contains(const Point& x, double tol = 1e-12) const {
    switch (kind_) {
      case CellKind::Interval: return x[0] >= -tol && x[0] <= 1.0 + tol;
      case CellKind::Box:
        for (int d = 0; d < dim_; ++d)
          if (std::abs(x[d]) > 1.0 + tol) return false;
        return true;
      case CellKind::Simplex: {
        // Face normals are -v_i/|v_i| for each vertex v_i.
        if (dim_ == 2) {
          const double h = std::sqrt(3.0) / 2.0;
          return -x[0] <= 1.0 + tol && 0.5 * x[0] - h * x[1] <= 1.0 + tol &&
                 0.5 * x[0] + h * x[1] <= 1.0 + tol;
        }
        const double s = 1.0 / std::sqrt(3.0);
        return -s * (x[0] + x[1] + x[2]) <= 1.0 + tol && -s * (x[0] - x[1] - x[2]) <= 1.0 + tol &&
               -s * (-x[0] + x[1] - x[2]) <= 1.0 + tol && -s * (-x[0] - x[1] + x[2]) <= 1.0 + tol;
      }
      case CellKind::Sphere: return norm(x) <= 1.0 + tol;
    }
    return false;
  }

  bool operator==(const CanonicalCell&) const = default;

 private:
  CanonicalCell(CellKind kind, int dim) : kind_(kind), dim_(dim) {}
  CellKind kind_;
  int dim_;
};

struct QuadratureRule {
  int dim = 1;
  int degree = 0;  // declared polynomial exactness
  std::vector<Point> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
  double measure() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

  template <typename F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t q = 0; q < points.size(); ++q) s += weights[q] * f(points[q]);
    return s;
  }
};

struct Face {
  double area = 0.0;
  Point normal{0, 0, 0};
  Point center{0, 0, 0};
  QuadratureRule rule;  // weights sum to area
};

struct FaceSet {
  std::vector<Face> faces;
  double total_area() const {
    double a = 0.0;
    for (const auto& f : faces) a += f.area;
    return a;
  }
};

namespace detail {

// Legendre P_n and its derivative on [-1,1].
inline std::pair<double, double> legendre_with_derivative(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  // (1-x^2) P_n' = n (P_{n-1} - x P_n)
  const double dp = n * (p0 - x * p1) / (1.0 - x * x);
  return {p1, dp};
}

inline double legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return 1.0;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

// Gauss-Legendre rule on [-1,1].
inline void gauss_legendre_ref(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre_with_derivative(n, z);
      const double dz = p / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const auto [p, dp] = legendre_with_derivative(n, z);
    (void)p;
    const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = wi;
    w[n - 1 - i] = wi;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
}

// Gauss-Legendre rule mapped onto the segment a->b of an arbitrary line.
inline QuadratureRule segment_rule(const Point& a, const Point& b, int degree) {
  const int n = std::max(1, (degree + 2) / 2);
  std::vector<double> x, w;
  gauss_legendre_ref(n, x, w);
  const double len = norm(b - a);
  QuadratureRule r;
  r.dim = 1;
  r.degree = 2 * n - 1;
  for (int i = 0; i < n; ++i) {
    const double t = 0.5 * (x[i] + 1.0);
    r.points.push_back(a + t * (b - a));
    r.weights.push_back(0.5 * w[i] * len);
  }
  return r;
}

// Collapsed-coordinate (Duffy) rule on the triangle with vertices a, b, c.
inline QuadratureRule triangle_rule(const Point& a, const Point& b, const Point& c, int degree) {
  const int n = std::max(1, (degree + 3) / 2);
  std::vector<double> x, w;
  gauss_legendre_ref(n, x, w);
  const Point e1 = b - a, e2 = c - a;
  const Point cr{e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2],
                 e1[0] * e2[1] - e1[1] * e2[0]};
  const double jac = norm(cr);  // twice the area
  QuadratureRule r;
  r.dim = 2;
  r.degree = 2 * n - 2;
  for (int i = 0; i < n; ++i) {
    const double s = 0.5 * (x[i] + 1.0);
    for (int j = 0; j < n; ++j) {
      const double t = 0.5 * (x[j] + 1.0) * (1.0 - s);
      r.points.push_back(a + s * e1 + t * e2);
      r.weights.push_back(0.25 * w[i] * w[j] * (1.0 - s) * jac);
    }
  }
  return r;
}

inline QuadratureRule tetrahedron_rule(const Point& a, const Point& b, const Point& c,
                                       const Point& d, int degree) {
  const int n = std::max(1, (degree + 4) / 2);
  std::vector<double> x, w;
  gauss_legendre_ref(n, x, w);
  const Point e1 = b - a, e2 = c - a, e3 = d - a;
  const double det = std::abs(e1[0] * (e2[1] * e3[2] - e2[2] * e3[1]) -
                              e1[1] * (e2[0] * e3[2] - e2[2] * e3[0]) +
                              e1[2] * (e2[0] * e3[1] - e2[1] * e3[0]));
  QuadratureRule r;
  r.dim = 3;
  r.degree = 2 * n - 3;
  for (int i = 0; i < n; ++i) {
    const double s = 0.5 * (x[i] + 1.0);
    for (int j = 0; j < n; ++j) {
      const double t = 0.5 * (x[j] + 1.0);
      for (int k = 0; k < n; ++k) {
        const double u = 0.5 * (x[k] + 1.0);
        const double ps = s, pt = t * (1.0 - s), pu = u * (1.0 - s) * (1.0 - t);
        r.points.push_back(a + ps * e1 + pt * e2 + pu * e3);
        r.weights.push_back(0.125 * w[i] * w[j] * w[k] * (1.0 - s) * (1.0 - s) * (1.0 - t) * det);
      }
    }
  }
  return r;
}

// Tensor Gauss rule on the parallelotope origin + sum_i t_i e_i, t in [0,1]^m.
inline QuadratureRule parallelotope_rule(const Point& origin, const std::vector<Point>& edges,
                                         int degree, double measure) {
  const int n = std::max(1, (degree + 2) / 2);
  std::vector<double> x, w;
  gauss_legendre_ref(n, x, w);
  const int m = static_cast<int>(edges.size());
  QuadratureRule r;
  r.dim = m;
  r.degree = 2 * n - 1;
  int total = 1;
  for (int i = 0; i < m; ++i) total *= n;
  for (int idx = 0; idx < total; ++idx) {
    Point p = origin;
    double wt = measure;
    int rem = idx;
    for (int i = 0; i < m; ++i) {
      const int q = rem % n;
      rem /= n;
      p = p + (0.5 * (x[q] + 1.0)) * edges[i];
      wt *= 0.5 * w[q];
    }
    r.points.push_back(p);
    r.weights.push_back(wt);
  }
  return r;
}

}  // namespace detail

/// Gauss-Legendre rule with n points on [0,1]; exact through degree 2n-1.
inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: point count must be >= 1");
  std::vector<double> x, w;
  detail::gauss_legendre_ref(n, x, w);
  QuadratureRule r;
  r.dim = 1;
  r.degree = 2 * n - 1;
  for (int i = 0; i < n; ++i) {
    r.points.push_back({0.5 * (x[i] + 1.0), 0.0, 0.0});
    r.weights.push_back(0.5 * w[i]);
  }
  return r;
}

/// Gauss-Lobatto rule on [0,1] with both endpoints and n_interior interior
/// nodes; exact through degree 2*n_interior+1.  The endpoint weight is
/// exactly 1/((n+1)(n+2)).
inline QuadratureRule gauss_lobatto(int n_interior) {
  if (n_interior < 0) throw std::invalid_argument("gauss_lobatto: n_interior must be >= 0");
  const int N = n_interior + 1;  // interior nodes are the roots of P_N'
  QuadratureRule r;
  r.dim = 1;
  r.degree = 2 * n_interior + 1;
  const double end_weight = 1.0 / ((n_interior + 1.0) * (n_interior + 2.0));
  r.points.push_back({0.0, 0.0, 0.0});
  r.weights.push_back(end_weight);
  std::vector<double> nodes(n_interior);
  for (int i = 0; i < n_interior; ++i) {
    // Chebyshev-Gauss-Lobatto initial guess, ascending order.
    double z = -std::cos(std::numbers::pi * (i + 1) / N);
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = detail::legendre_with_derivative(N, z);
      const double d2p = (2.0 * z * dp - N * (N + 1.0) * p) / (1.0 - z * z);
      const double dz = dp / d2p;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    nodes[i] = z;
  }
  for (double z : nodes) {
    const double p = detail::legendre(N, z);
    r.points.push_back({0.5 * (z + 1.0), 0.0, 0.0});
    r.weights.push_back(1.0 / (N * (N + 1.0) * p * p));
  }
  r.points.push_back({1.0, 0.0, 0.0});
  r.weights.push_back(end_weight);
  return r;
}

/// Quadrature over the whole cell, exact through `degree`; weights sum to
/// the cell volume.
inline QuadratureRule volume_rule(const CanonicalCell& cell, int degree) {
  degree = std::max(degree, 0);
  switch (cell.kind()) {
    case CellKind::Interval: {
      auto r = gauss_legendre(std::max(1, (degree + 2) / 2));
      return r;
    }
    case CellKind::Box: {
      std::vector<Point> edges;
      for (int d = 0; d < cell.dim(); ++d) {
        Point e{0, 0, 0};
        e[d] = 2.0;
        edges.push_back(e);
      }
      Point o{-1, -1, -1};
      if (cell.dim() == 2) o[2] = 0.0;
      return detail::parallelotope_rule(o, edges, degree, cell.volume());
    }
    case CellKind::Simplex: {
      const auto v = cell.vertices();
      auto r = cell.dim() == 2 ? detail::triangle_rule(v[0], v[1], v[2], degree)
                               : detail::tetrahedron_rule(v[0], v[1], v[2], v[3], degree);
      r.dim = cell.dim();
      return r;
    }
    case CellKind::Sphere: {
      const int D = cell.dim();
      QuadratureRule r;
      r.dim = D;
      r.degree = degree;
      if (D == 1) {
        auto g = gauss_legendre(std::max(1, (degree + 2) / 2));
        for (std::size_t i = 0; i < g.size(); ++i) {
          r.points.push_back({2.0 * g.points[i][0] - 1.0, 0, 0});
          r.weights.push_back(2.0 * g.weights[i]);
        }
        return r;
      }
      // Polar product: radial Gauss absorbing r^{D-1}, angular exact rules.
      std::vector<double> rx, rw;
      detail::gauss_legendre_ref(std::max(1, (degree + D + 1) / 2 + 1), rx, rw);
      const int m = degree + 2;  // trapezoid in azimuth, exact below m
      if (D == 2) {
        for (std::size_t i = 0; i < rx.size(); ++i) {
          const double rr = 0.5 * (rx[i] + 1.0);
          for (int j = 0; j < m; ++j) {
            const double a = 2.0 * std::numbers::pi * j / m;
            r.points.push_back({rr * std::cos(a), rr * std::sin(a), 0.0});
            r.weights.push_back(0.5 * rw[i] * rr * 2.0 * std::numbers::pi / m);
          }
        }
        return r;
      }
      std::vector<double> zx, zw;
      detail::gauss_legendre_ref(std::max(1, (degree + 2) / 2), zx, zw);
      for (std::size_t i = 0; i < rx.size(); ++i) {
        const double rr = 0.5 * (rx[i] + 1.0);
        for (std::size_t k = 0; k < zx.size(); ++k) {
          const double z = zx[k], s = std::sqrt(1.0 - z * z);
          for (int j = 0; j < m; ++j) {
            const double a = 2.0 * std::numbers::pi * j / m;
            r.points.push_back({rr * s * std::cos(a), rr * s * std::sin(a), rr * z});
            r.weights.push_back(0.5 * rw[i] * rr * rr * zw[k] * 2.0 * std::numbers::pi / m);
          }
        }
      }
      return r;
    }
  }
  throw std::logic_error("volume_rule: unknown cell kind");
}

/// Quadrature over the sphere surface (the unit ball's boundary); weights sum
/// to the boundary area.
inline QuadratureRule sphere_surface_rule(int dim, int degree) {
  QuadratureRule r;
  r.dim = dim - 1;
  r.degree = degree;
  if (dim == 1) {
    r.points = {{-1, 0, 0}, {1, 0, 0}};
    r.weights = {1.0, 1.0};
    return r;
  }
  const int m = std::max(degree, 0) + 2;
  if (dim == 2) {
    for (int j = 0; j < m; ++j) {
      const double a = 2.0 * std::numbers::pi * j / m;
      r.points.push_back({std::cos(a), std::sin(a), 0.0});
      r.weights.push_back(2.0 * std::numbers::pi / m);
    }
    return r;
  }
  std::vector<double> zx, zw;
  detail::gauss_legendre_ref(std::max(1, (degree + 2) / 2), zx, zw);
  for (std::size_t k = 0; k < zx.size(); ++k) {
    const double z = zx[k], s = std::sqrt(1.0 - z * z);
    for (int j = 0; j < m; ++j) {
      const double a = 2.0 * std::numbers::pi * j / m;
      r.points.push_back({s * std::cos(a), s * std::sin(a), z});
      r.weights.push_back(zw[k] * 2.0 * std::numbers::pi / m);
    }
  }
  return r;
}

/// Face decomposition of a polytope cell with per-face quadratures exact
/// through `surface_degree`.
inline FaceSet face_set(const CanonicalCell& cell, int surface_degree) {
  if (!cell.has_faces()) throw std::invalid_argument("face_set: sphere has no polytope faces");
  surface_degree = std::max(surface_degree, 0);
  FaceSet fs;
  switch (cell.kind()) {
    case CellKind::Interval: {
      for (int s = 0; s < 2; ++s) {
        Face f;
        f.area = 1.0;
        f.normal = {s == 0 ? -1.0 : 1.0, 0, 0};
        f.center = {static_cast<double>(s), 0, 0};
        f.rule.dim = 0;
        f.rule.degree = 1 << 20;
        f.rule.points = {f.center};
        f.rule.weights = {1.0};
        fs.faces.push_back(std::move(f));
      }
      break;
    }
    case CellKind::Box: {
      const int D = cell.dim();
      for (int d = 0; d < D; ++d) {
        for (int s = 0; s < 2; ++s) {
          Face f;
          const double sign = s == 0 ? -1.0 : 1.0;
          f.normal = {0, 0, 0};
          f.normal[d] = sign;
          f.center = f.normal;
          Point o = f.center;
          std::vector<Point> edges;
          for (int e = 0; e < D; ++e) {
            if (e == d) continue;
            o[e] = -1.0;
            Point v{0, 0, 0};
            v[e] = 2.0;
            edges.push_back(v);
          }
          f.area = std::pow(2.0, D - 1);
          f.rule = detail::parallelotope_rule(o, edges, surface_degree, f.area);
          fs.faces.push_back(std::move(f));
        }
      }
      break;
    }
    case CellKind::Simplex: {
      const auto v = cell.vertices();
      const int nv = static_cast<int>(v.size());
      for (int i = 0; i < nv; ++i) {
        // Face opposite vertex i.
        std::vector<Point> fv;
        for (int j = 0; j < nv; ++j)
          if (j != i) fv.push_back(v[j]);
        Face f;
        f.normal = (-1.0 / norm(v[i])) * v[i];
        Point c{0, 0, 0};
        for (const auto& p : fv) c = c + p;
        f.center = (1.0 / fv.size()) * c;
        f.rule = cell.dim() == 2 ? detail::segment_rule(fv[0], fv[1], surface_degree)
                                 : detail::triangle_rule(fv[0], fv[1], fv[2], surface_degree);
        f.area = f.rule.measure();
        fs.faces.push_back(std::move(f));
      }
      break;
    }
    case CellKind::Sphere: break;
  }
  return fs;
}

}  // namespace posflow

#endif  // POSFLOW_CELL_GEOMETRY_HPP_
