#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "posflow/cell_geometry.hpp"

using namespace posflow;

namespace {

std::vector<CanonicalCell> all_cells() {
  return {CanonicalCell::interval(),  CanonicalCell::box(2),     CanonicalCell::box(3),
          CanonicalCell::simplex(2),  CanonicalCell::simplex(3), CanonicalCell::sphere(1),
          CanonicalCell::sphere(2),   CanonicalCell::sphere(3)};
}

// Exact integral of x^a y^b z^c over [-1,1]^D.
double box_moment(int D, std::array<int, 3> e) {
  double v = 1.0;
  for (int d = 0; d < D; ++d) v *= e[d] % 2 ? 0.0 : 2.0 / (e[d] + 1);
  return v;
}

// Exact simplex monomial integrals via the Dirichlet formula in barycentric
// coordinates: int_T l0^a0 ... lD^aD = D! |T| prod a_i! / (D + sum a_i)!.
double simplex_barycentric_moment(int D, double vol, const std::vector<int>& a) {
  double num = std::tgamma(D + 1.0) * vol;
  int s = 0;
  for (int ai : a) {
    num *= std::tgamma(ai + 1.0);
    s += ai;
  }
  return num / std::tgamma(D + s + 1.0);
}

}  // namespace

TEST(GaussLegendre, MidpointRule) {
  const auto q = gauss_legendre(1);
  ASSERT_EQ(q.size(), 1u);
  EXPECT_DOUBLE_EQ(q.points[0][0], 0.5);
  EXPECT_DOUBLE_EQ(q.weights[0], 1.0);
}

TEST(GaussLegendre, TwoPoint) {
  const auto q = gauss_legendre(2);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_NEAR(q.points[0][0], (1.0 - 1.0 / std::sqrt(3.0)) / 2.0, 1e-15);
  EXPECT_NEAR(q.points[1][0], (1.0 + 1.0 / std::sqrt(3.0)) / 2.0, 1e-15);
  EXPECT_NEAR(q.weights[0], 0.5, 1e-15);
  EXPECT_NEAR(q.weights[1], 0.5, 1e-15);
}

TEST(GaussLegendre, ThreePointWeights) {
  const auto q = gauss_legendre(3);
  EXPECT_NEAR(q.weights[0], 5.0 / 18.0, 1e-15);
  EXPECT_NEAR(q.weights[1], 8.0 / 18.0, 1e-15);
  EXPECT_NEAR(q.weights[2], 5.0 / 18.0, 1e-15);
}

TEST(GaussLegendre, ExactThroughDegree2nMinus1) {
  for (int n = 1; n <= 12; ++n) {
    const auto q = gauss_legendre(n);
    for (int d = 0; d <= 2 * n - 1; ++d) {
      const double got = q.integrate([&](const Point& x) { return std::pow(x[0], d); });
      EXPECT_NEAR(got, 1.0 / (d + 1), 1e-13) << "n=" << n << " d=" << d;
    }
  }
}

TEST(GaussLegendre, RejectsZeroPoints) { EXPECT_THROW(gauss_legendre(0), std::invalid_argument); }

TEST(GaussLobatto, Trapezoid) {
  const auto q = gauss_lobatto(0);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_DOUBLE_EQ(q.points[0][0], 0.0);
  EXPECT_DOUBLE_EQ(q.points[1][0], 1.0);
  EXPECT_DOUBLE_EQ(q.weights[0], 0.5);
  EXPECT_DOUBLE_EQ(q.weights[1], 0.5);
}

TEST(GaussLobatto, Simpson) {
  const auto q = gauss_lobatto(1);
  ASSERT_EQ(q.size(), 3u);
  EXPECT_NEAR(q.points[1][0], 0.5, 1e-15);
  EXPECT_NEAR(q.weights[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(q.weights[1], 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(q.weights[2], 1.0 / 6.0, 1e-15);
}

TEST(GaussLobatto, TwoInteriorEndpointWeight) {
  EXPECT_NEAR(gauss_lobatto(2).weights.front(), 1.0 / 12.0, 1e-15);
}

TEST(GaussLobatto, EndpointWeightMatchesBoundaryWeight) {
  // On [0,1] the endpoint weight is half of W = 2/((n+1)(n+2)).
  for (int n = 0; n <= 6; ++n) {
    const auto q = gauss_lobatto(n);
    const double W = 2.0 / ((n + 1.0) * (n + 2.0));
    EXPECT_NEAR(q.weights.front(), W / 2.0, 1e-15) << n;
    EXPECT_NEAR(q.weights.back(), W / 2.0, 1e-15) << n;
    EXPECT_NEAR(2.0 * q.weights.front() * (n + 1) * (n + 2), 2.0, 1e-13) << n;
  }
}

TEST(GaussLobatto, ExactThroughDegree2nPlus1) {
  for (int n = 0; n <= 8; ++n) {
    const auto q = gauss_lobatto(n);
    for (int d = 0; d <= 2 * n + 1; ++d) {
      const double got = q.integrate([&](const Point& x) { return std::pow(x[0], d); });
      EXPECT_NEAR(got, 1.0 / (d + 1), 1e-13) << "n=" << n << " d=" << d;
    }
    for (double w : q.weights) EXPECT_GT(w, 0.0);
  }
}

TEST(CanonicalCell, PositiveMeasures) {
  for (const auto& c : all_cells()) {
    EXPECT_GT(c.volume(), 0.0) << c.name();
    EXPECT_GT(c.boundary_area(), 0.0) << c.name();
  }
}

TEST(CanonicalCell, StarRegularVolumeToAreaRatio) {
  // For n.x = 1 on the boundary, the divergence theorem gives D |K| = |dK|.
  for (const auto& c : all_cells()) {
    if (!c.star_regular()) continue;
    EXPECT_NEAR(c.dim() * c.volume(), c.boundary_area(), 1e-12 * c.boundary_area()) << c.name();
  }
}

TEST(CanonicalCell, TensorAndSimplexRejectBadDimensions) {
  EXPECT_THROW(CanonicalCell::box(1), std::invalid_argument);
  EXPECT_THROW(CanonicalCell::simplex(4), std::invalid_argument);
  EXPECT_THROW(CanonicalCell::sphere(0), std::invalid_argument);
}

TEST(VolumeRule, ConstantIntegratesToMeasure) {
  for (const auto& c : all_cells())
    for (int deg = 0; deg <= 8; ++deg) {
      const auto q = volume_rule(c, deg);
      EXPECT_NEAR(q.measure(), c.volume(), 1e-13 * c.volume()) << c.name() << " " << deg;
      for (double w : q.weights) EXPECT_GT(w, 0.0);
    }
}

TEST(VolumeRule, BoxMonomialExactness) {
  for (int D : {2, 3}) {
    const auto cell = CanonicalCell::box(D);
    for (int deg = 0; deg <= 7; ++deg) {
      const auto q = volume_rule(cell, deg);
      for (int a = 0; a <= deg; ++a)
        for (int b = 0; a + b <= deg; ++b)
          for (int c = 0; a + b + c <= (D == 3 ? deg : a + b); ++c) {
            const std::array<int, 3> e{a, b, c};
            const double got = q.integrate([&](const Point& x) {
              return std::pow(x[0], a) * std::pow(x[1], b) * std::pow(x[2], c);
            });
            EXPECT_NEAR(got, box_moment(D, e), 1e-12 * std::max(1.0, box_moment(D, e)));
          }
    }
  }
}

TEST(VolumeRule, SimplexBarycentricExactness) {
  for (int D : {2, 3}) {
    const auto cell = CanonicalCell::simplex(D);
    const auto v = cell.vertices();
    // Barycentric coordinates as affine functions via the inverse vertex matrix.
    auto bary = [&](const Point& x) {
      std::vector<double> l(D + 1);
      // Vertices are on a sphere about the origin and sum to zero, so
      // l_i = (1 + D v_i.x / |v_i|^2) / (D + 1).
      for (int i = 0; i <= D; ++i) l[i] = (1.0 + D * dot(v[i], x) / dot(v[i], v[i])) / (D + 1);
      return l;
    };
    for (int deg = 0; deg <= 7; ++deg) {
      const auto q = volume_rule(cell, deg);
      std::vector<int> a(D + 1, 0);
      for (int a0 = 0; a0 <= deg; ++a0)
        for (int a1 = 0; a0 + a1 <= deg; ++a1) {
          a[0] = a0;
          a[1] = a1;
          a[2] = deg - a0 - a1;
          if (D == 3) {
            a[2] = (deg - a0 - a1) / 2;
            a[3] = deg - a0 - a1 - a[2];
          }
          const double got = q.integrate([&](const Point& x) {
            const auto l = bary(x);
            double s = 1.0;
            for (int i = 0; i <= D; ++i) s *= std::pow(l[i], a[i]);
            return s;
          });
          const double exact = simplex_barycentric_moment(D, cell.volume(), a);
          EXPECT_NEAR(got, exact, 1e-12 * std::max(exact, 1e-3)) << D << " " << deg;
        }
    }
  }
}

TEST(VolumeRule, BallEvenMomentsExact) {
  // Average of |x|^{2m} over the unit D-ball is D / (D + 2m).
  for (int D : {1, 2, 3}) {
    const auto cell = CanonicalCell::sphere(D);
    for (int m = 0; m <= 4; ++m) {
      const auto q = volume_rule(cell, 2 * m);
      const double got =
          q.integrate([&](const Point& x) { return std::pow(dot(x, x), m); }) / cell.volume();
      EXPECT_NEAR(got, static_cast<double>(D) / (D + 2 * m), 1e-13) << D << " " << m;
    }
  }
}

TEST(FaceSet, IntervalHasTwoPointFaces) {
  const auto fs = face_set(CanonicalCell::interval(), 4);
  ASSERT_EQ(fs.faces.size(), 2u);
  EXPECT_DOUBLE_EQ(fs.faces[0].center[0], 0.0);
  EXPECT_DOUBLE_EQ(fs.faces[1].center[0], 1.0);
  for (const auto& f : fs.faces) {
    ASSERT_EQ(f.rule.size(), 1u);
    EXPECT_DOUBLE_EQ(f.rule.weights[0], 1.0);
    EXPECT_DOUBLE_EQ(f.area, 1.0);
  }
}

TEST(FaceSet, TriangleEdgesUseTwoPointRules) {
  const auto cell = CanonicalCell::simplex(2);
  const auto fs = face_set(cell, 3);
  ASSERT_EQ(fs.faces.size(), 3u);
  for (const auto& f : fs.faces) EXPECT_EQ(f.rule.size(), 2u);
  EXPECT_NEAR(fs.total_area(), cell.boundary_area(), 1e-13);
}

TEST(FaceSet, SquareHasFourEqualFaces) {
  const auto fs = face_set(CanonicalCell::box(2), 1);
  ASSERT_EQ(fs.faces.size(), 4u);
  for (const auto& f : fs.faces) EXPECT_NEAR(f.area, 2.0, 1e-14);
}

TEST(FaceSet, SphereRejected) {
  try {
    face_set(CanonicalCell::sphere(2), 2);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("no polytope faces"), std::string::npos);
  }
}

TEST(FaceSet, AreasSumToBoundary) {
  for (const auto& c : all_cells()) {
    if (!c.has_faces() || c.kind() == CellKind::Interval) continue;
    for (int deg = 0; deg <= 6; ++deg) {
      double s = 0.0;
      for (const auto& f : face_set(c, deg).faces) s += f.rule.measure();
      EXPECT_NEAR(s, c.boundary_area(), 1e-13 * c.boundary_area()) << c.name();
    }
  }
}

TEST(FaceSet, BoundaryPointsSatisfyUnitSupport) {
  for (const auto& c : all_cells()) {
    if (!c.star_regular() || !c.has_faces()) continue;
    for (const auto& f : face_set(c, 6).faces) {
      EXPECT_NEAR(norm(f.normal), 1.0, 1e-14);
      for (const auto& x : f.rule.points) {
        EXPECT_NEAR(dot(f.normal, x), 1.0, 1e-12) << c.name();
        EXPECT_TRUE(c.contains(x, 1e-12));
      }
    }
  }
}

TEST(SphereSurfaceRule, PointsOnUnitSphere) {
  for (int D : {1, 2, 3}) {
    const auto q = sphere_surface_rule(D, 6);
    EXPECT_NEAR(q.measure(), CanonicalCell::sphere(D).boundary_area(), 1e-12);
    for (const auto& x : q.points) EXPECT_NEAR(norm(x), 1.0, 1e-12);
  }
}

TEST(FaceSet, FaceRulesExactOnEdges) {
  // Each triangle edge integrates s^d of the arclength parameter exactly.
  const auto cell = CanonicalCell::simplex(2);
  const auto v = cell.vertices();
  for (int deg = 0; deg <= 7; ++deg) {
    const auto fs = face_set(cell, deg);
    for (const auto& f : fs.faces) {
      // Edge endpoints: the two vertices orthogonal-ish to the face normal.
      std::vector<Point> ends;
      for (const auto& p : v)
        if (std::abs(dot(f.normal, p) - 1.0) < 1e-12) ends.push_back(p);
      ASSERT_EQ(ends.size(), 2u);
      const double len = norm(ends[1] - ends[0]);
      const double got = f.rule.integrate(
          [&](const Point& x) { return std::pow(norm(x - ends[0]) / len, deg); });
      EXPECT_NEAR(got, len / (deg + 1), 1e-12);
    }
  }
}
