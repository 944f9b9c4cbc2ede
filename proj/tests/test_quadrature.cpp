#include <doctest.h>

#include <cmath>

#include "hpfrac/quadrature.hpp"

using hpfrac::Rule1D;

namespace {

double apply(const Rule1D& r, double (*f)(double)) {
  double acc = 0.0;
  for (std::size_t i = 0; i < r.points.size(); ++i) acc += r.weights[i] * f(r.points[i]);
  return acc;
}

double moment(const Rule1D& r, double p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < r.points.size(); ++i) acc += r.weights[i] * std::pow(r.points[i], p);
  return acc;
}

}  // namespace

TEST_CASE("gauss_legendre integrates monomials exactly up to degree 2n - 1") {
  for (int n : {1, 2, 3, 5, 8, 16}) {
    const Rule1D r = hpfrac::gauss_legendre(n);
    REQUIRE(r.points.size() == static_cast<std::size_t>(n));
    for (int k = 0; k <= 2 * n - 1; ++k) {
      CHECK(moment(r, k) == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
    }
    // Degree 2n must not be exact (otherwise the rule is mislabeled).
    CHECK(std::abs(moment(r, 2 * n) - 1.0 / (2 * n + 1)) > 1e-13);
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      CHECK(r.points[i] > 0.0);
      CHECK(r.points[i] < 1.0);
      CHECK(r.weights[i] > 0.0);
    }
  }
}

TEST_CASE("gauss_jacobi absorbs the weight x^alpha") {
  // sum w_k x_k^p == integral_0^1 x^(alpha + p) dx == 1 / (alpha + p + 1),
  // exactly for p up to 2n - 1.
  for (double alpha : {-0.5, 0.0, 0.3, 1.0, 2.5}) {
    for (int n : {1, 3, 6, 12}) {
      const Rule1D r = hpfrac::gauss_jacobi(n, alpha);
      REQUIRE(r.points.size() == static_cast<std::size_t>(n));
      for (int p = 0; p <= 2 * n - 1; ++p) {
        CHECK(moment(r, p) == doctest::Approx(1.0 / (alpha + p + 1)).epsilon(1e-12));
      }
    }
  }
  // alpha = 0 reduces to Gauss-Legendre.
  const Rule1D gj = hpfrac::gauss_jacobi(5, 0.0);
  const Rule1D gl = hpfrac::gauss_legendre(5);
  for (int i = 0; i < 5; ++i) {
    CHECK(gj.points[i] == doctest::Approx(gl.points[i]).epsilon(1e-12));
    CHECK(gj.weights[i] == doctest::Approx(gl.weights[i]).epsilon(1e-12));
  }
  CHECK_THROWS(hpfrac::gauss_jacobi(4, -1.0));
}

TEST_CASE("gauss_lobatto includes the endpoints and is exact to degree 2q - 1") {
  for (int q : {1, 2, 4, 7}) {
    const Rule1D r = hpfrac::gauss_lobatto(q);
    REQUIRE(r.points.size() == static_cast<std::size_t>(q + 1));
    CHECK(r.points.front() == doctest::Approx(0.0));
    CHECK(r.points.back() == doctest::Approx(1.0));
    for (int k = 0; k <= 2 * q - 1; ++k) {
      CHECK(moment(r, k) == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
    }
    for (std::size_t i = 1; i < r.points.size(); ++i) CHECK(r.points[i] > r.points[i - 1]);
  }
}

TEST_CASE("graded rules capture endpoint singularities plain Gauss cannot") {
  // f(x) = x^(-1/2), integral over [0,1] is 2. A 12-point Gauss rule is off in
  // the first digits; a graded composite with the same panel order is under
  // single precision error.
  const double exact = 2.0;
  const double plain = apply(hpfrac::gauss_legendre(12), [](double x) { return 1.0 / std::sqrt(x); });
  const Rule1D graded = hpfrac::graded_gauss(12, 30, 0.5);
  const double comp = apply(graded, [](double x) { return 1.0 / std::sqrt(x); });
  CHECK(std::abs(plain - exact) > 1e-2);
  CHECK(comp == doctest::Approx(exact).epsilon(1e-9));

  // The graded rule stays a valid rule for smooth integrands.
  CHECK(moment(graded, 3) == doctest::Approx(0.25).epsilon(1e-13));

  const Rule1D both = hpfrac::graded_gauss_both_ends(12, 30, 0.5);
  const double beta = apply(both, [](double x) { return 1.0 / std::sqrt(x * (1.0 - x)); });
  CHECK(beta == doctest::Approx(M_PI).epsilon(1e-8));
  CHECK(moment(both, 0) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("tensor and Duffy 2D rules reproduce areas and smooth integrals") {
  const Rule1D g6 = hpfrac::gauss_legendre(6);

  const auto sq = hpfrac::tensor_square(g6, g6);
  double area = 0.0, xy = 0.0;
  for (const auto& p : sq) {
    area += p.w;
    xy += p.w * p.x * p.y;
  }
  CHECK(area == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(xy == doctest::Approx(0.25).epsilon(1e-13));

  // Reference triangle {0 < y < x < 1}: area 1/2, moment of x*y is 1/8 * ... :
  //   int_0^1 int_0^x x y dy dx = int_0^1 x^3 / 2 dx = 1/8.
  const auto tri = hpfrac::duffy_triangle(g6, g6);
  double tarea = 0.0, txy = 0.0;
  for (const auto& p : tri) {
    CHECK(p.y <= p.x + 1e-14);
    tarea += p.w;
    txy += p.w * p.x * p.y;
  }
  CHECK(tarea == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(txy == doctest::Approx(0.125).epsilon(1e-13));
}
