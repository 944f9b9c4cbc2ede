#include "hpfrac/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace hpfrac {

namespace {

// Legendre polynomial value and derivative at x via the three-term recurrence.
void legendre_pair(int n, double x, double* p, double* dp) {
  double p0 = 1.0, p1 = x;
  double d0 = 0.0, d1 = 1.0;
  if (n == 0) {
    *p = p0;
    *dp = d0;
    return;
  }
  for (int k = 1; k < n; ++k) {
    const double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
    const double d2 = ((2 * k + 1) * (p1 + x * d1) - k * d0) / (k + 1);
    p0 = p1;
    p1 = p2;
    d0 = d1;
    d1 = d2;
  }
  *p = p1;
  *dp = d1;
}

}  // namespace

Rule1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
  Rule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Nodes on [-1, 1], refined by Newton from the Chebyshev-based initial guess.
    double x = -std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double p, dp;
    for (int it = 0; it < 100; ++it) {
      legendre_pair(n, x, &p, &dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre_pair(n, x, &p, &dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.points[i] = 0.5 * (x + 1.0);
    rule.weights[i] = 0.5 * w;
  }
  return rule;
}

Rule1D gauss_jacobi(int n, double alpha) {
  if (n < 1) throw std::invalid_argument("gauss_jacobi: need at least one point");
  if (alpha <= -1.0) throw std::invalid_argument("gauss_jacobi: alpha must exceed -1");

  // Golub-Welsch on the Jacobi weight (1+t)^alpha over [-1, 1]; mapping t -> (1+t)/2
  // turns it into x^alpha on [0, 1] up to the factor 2^(alpha+1) absorbed in mu0.
  const double a = 0.0, b = alpha;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double s = 2.0 * k + a + b;
    double diag;
    if (k == 0) {
      diag = (b - a) / (a + b + 2.0);
    } else {
      diag = (b * b - a * a) / (s * (s + 2.0));
    }
    J(k, k) = diag;
    if (k + 1 < n) {
      const double kk = k + 1.0;
      const double t = 2.0 * kk + a + b;
      double off2;
      if (k == 0) {
        off2 = 4.0 * kk * (kk + a) * (kk + b) / (t * t * (t + 1.0));
      } else {
        off2 = 4.0 * kk * (kk + a) * (kk + b) * (kk + a + b) / (t * t * (t + 1.0) * (t - 1.0));
      }
      const double off = std::sqrt(off2);
      J(k, k + 1) = off;
      J(k + 1, k) = off;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success) throw std::runtime_error("gauss_jacobi: eigensolver failed");

  // mu0 = integral_0^1 x^alpha dx = 1/(alpha+1) after the affine map.
  const double mu0 = 1.0 / (alpha + 1.0);
  Rule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.points[i] = 0.5 * (es.eigenvalues()(i) + 1.0);
    const double v = es.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v * v;
  }
  return rule;
}

Rule1D gauss_lobatto(int q) {
  if (q < 1) throw std::invalid_argument("gauss_lobatto: need q >= 1");
  const int n = q + 1;
  Rule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);

  for (int i = 0; i < n; ++i) {
    double x;
    if (i == 0) {
      x = -1.0;
    } else if (i == q) {
      x = 1.0;
    } else {
      // Interior nodes are the roots of P_q'; Newton from the Chebyshev-Lobatto guess.
      x = -std::cos(std::numbers::pi * i / q);
      for (int it = 0; it < 100; ++it) {
        double p, dp;
        legendre_pair(q, x, &p, &dp);
        // P_q'' from the Legendre differential equation.
        const double ddp = (2.0 * x * dp - q * (q + 1.0) * p) / (1.0 - x * x);
        const double dx = dp / ddp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
    }
    double p, dp;
    legendre_pair(q, x, &p, &dp);
    const double w = 2.0 / (q * (q + 1.0) * p * p);
    rule.points[i] = 0.5 * (x + 1.0);
    rule.weights[i] = 0.5 * w;
  }
  rule.points[0] = 0.0;
  rule.points[q] = 1.0;
  return rule;
}

namespace {

// graded_gauss runs per integration point in some callers, so the underlying
// Gauss nodes are memoized instead of re-solved by Newton on every call.
const Rule1D& gauss_legendre_cached(int n) {
  static std::mutex mu;
  static std::map<int, Rule1D> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_legendre(n)).first;
  return it->second;
}

}  // namespace

Rule1D graded_gauss(int n, int levels, double ratio) {
  if (levels < 0) throw std::invalid_argument("graded_gauss: levels must be nonnegative");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("graded_gauss: ratio in (0,1)");
  const Rule1D& base = gauss_legendre_cached(n);
  Rule1D rule;
  double lo = 0.0;
  double hi = std::pow(ratio, levels);
  for (int cell = 0; cell <= levels; ++cell) {
    const double len = hi - lo;
    for (int i = 0; i < n; ++i) {
      rule.points.push_back(lo + len * base.points[i]);
      rule.weights.push_back(len * base.weights[i]);
    }
    lo = hi;
    hi = (cell == levels) ? 1.0 : hi / ratio;
  }
  return rule;
}

Rule1D graded_gauss_both_ends(int n, int levels, double ratio) {
  const Rule1D half = graded_gauss(n, levels, ratio);
  Rule1D rule;
  for (std::size_t i = 0; i < half.points.size(); ++i) {
    rule.points.push_back(0.5 * half.points[i]);
    rule.weights.push_back(0.5 * half.weights[i]);
  }
  for (std::size_t i = 0; i < half.points.size(); ++i) {
    rule.points.push_back(1.0 - 0.5 * half.points[i]);
    rule.weights.push_back(0.5 * half.weights[i]);
  }
  return rule;
}

std::vector<QuadPoint2D> tensor_square(const Rule1D& rx, const Rule1D& ry) {
  std::vector<QuadPoint2D> pts;
  pts.reserve(rx.points.size() * ry.points.size());
  for (std::size_t j = 0; j < ry.points.size(); ++j) {
    for (std::size_t i = 0; i < rx.points.size(); ++i) {
      pts.push_back({rx.points[i], ry.points[j], rx.weights[i] * ry.weights[j]});
    }
  }
  return pts;
}

std::vector<QuadPoint2D> duffy_triangle(const Rule1D& ru, const Rule1D& rv) {
  std::vector<QuadPoint2D> pts;
  pts.reserve(ru.points.size() * rv.points.size());
  for (std::size_t j = 0; j < rv.points.size(); ++j) {
    for (std::size_t i = 0; i < ru.points.size(); ++i) {
      const double u = ru.points[i];
      const double v = rv.points[j];
      pts.push_back({u, u * v, ru.weights[i] * rv.weights[j] * u});
    }
  }
  return pts;
}

}  // namespace hpfrac
