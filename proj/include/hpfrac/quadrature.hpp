#pragma once

#include <vector>

namespace hpfrac {

// One-dimensional rule on [0, 1].
struct Rule1D {
  std::vector<double> points;
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [0, 1]; exact for polynomials of degree 2n - 1.
Rule1D gauss_legendre(int n);

// n-point Gauss-Jacobi rule for the weight x^alpha on [0, 1] (alpha > -1):
//   sum_k w_k f(x_k)  ~=  integral_0^1 x^alpha f(x) dx.
Rule1D gauss_jacobi(int n, double alpha);

// Gauss-Lobatto-Legendre rule with q + 1 points on [0, 1], endpoints included;
// exact for polynomials of degree 2q - 1. Weights sum to one.
Rule1D gauss_lobatto(int q);

// Composite rule on [0, 1] graded geometrically toward 0: cells
// [0, r^levels], [r^k, r^(k-1)] for k = levels..1, each carrying an n-point
// Gauss-Legendre rule. Captures integrable endpoint singularities.
Rule1D graded_gauss(int n, int levels, double ratio = 0.5);

// Rule on [0,1] graded toward both endpoints.
Rule1D graded_gauss_both_ends(int n, int levels, double ratio = 0.5);

struct QuadPoint2D {
  double x;
  double y;
  double w;
};

// Tensor rule on the unit square from two 1D rules.
std::vector<QuadPoint2D> tensor_square(const Rule1D& rx, const Rule1D& ry);

// Rule on the reference triangle {0 < y < x < 1} via the Duffy substitution
// (x, y) = (u, u v) with Jacobian u.
std::vector<QuadPoint2D> duffy_triangle(const Rule1D& ru, const Rule1D& rv);

}  // namespace hpfrac
