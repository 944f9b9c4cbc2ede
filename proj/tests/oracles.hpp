#pragma once

// Independent slow oracles the library results are tested against. Everything
// here deliberately avoids the code paths used by the library: boundary
// distances come from dense sampling, kappa from explicit ray casting in polar
// coordinates, and pair integrals from recursive splitting with plain tensor
// Gauss on separated boxes.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hpfrac/geometry.hpp"
#include "hpfrac/quadrature.hpp"

namespace oracles {

// Halton low-discrepancy sequence, a reproducible stand-in for random points.
inline double halton(int i, int base) {
  double f = 1.0, r = 0.0;
  for (int n = i + 1; n > 0; n /= base) {
    f /= base;
    r += f * (n % base);
  }
  return r;
}

inline hpfrac::Point2 halton2(int i) { return {halton(i, 2), halton(i, 3)}; }

// Boundary distance by dense sampling of every edge. Chord sampling of a
// straight segment gives the exact segment distance up to the sample spacing
// squared over the distance, so the default resolution is good to ~1e-9 for
// unit-scale polygons.
inline double sampled_boundary_distance(const hpfrac::Polygon& poly, hpfrac::Point2 p,
                                        int per_edge = 20000) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < poly.num_edges(); ++e) {
    const hpfrac::Point2 a = poly.edge_start(e), b = poly.edge_end(e);
    for (int k = 0; k <= per_edge; ++k) {
      const double t = static_cast<double>(k) / per_edge;
      best = std::min(best, hpfrac::dist(p, a + t * (b - a)));
    }
  }
  return best;
}

// First intersection of the ray p + r (cos th, sin th) with the polygon
// boundary, for p strictly inside. Returns the distance.
inline double ray_boundary_distance(const hpfrac::Polygon& poly, hpfrac::Point2 p, double th) {
  const hpfrac::Point2 d{std::cos(th), std::sin(th)};
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < poly.num_edges(); ++e) {
    const hpfrac::Point2 a = poly.edge_start(e), b = poly.edge_end(e);
    const hpfrac::Point2 ab = b - a;
    const double den = hpfrac::cross(d, ab);
    if (std::abs(den) < 1e-15) continue;
    const hpfrac::Point2 ap = a - p;
    const double r = hpfrac::cross(ap, ab) / den;
    const double t = hpfrac::cross(ap, d) / den;
    if (r > 1e-12 && t >= -1e-12 && t <= 1.0 + 1e-12) best = std::min(best, r);
  }
  if (!std::isfinite(best)) throw std::runtime_error("oracle: ray missed the boundary");
  return best;
}

// kappa(x) for a polygon star-shaped with respect to x, straight from the
// polar form of the complement integral:
//   kappa(x) = C(s) / (2s) * integral_0^{2pi} R(theta)^(-2s) dtheta,
// R the ray distance to the boundary. The angular axis is split at the vertex
// directions, where R has kinks; inside each arc R is smooth and plain Gauss
// converges fast. C(s) is passed in by the caller so this file stays
// independent of the library's constant.
inline double kappa_polar(const hpfrac::Polygon& poly, double s, double cs, hpfrac::Point2 x,
                          int n = 48) {
  std::vector<double> cuts;
  for (std::size_t v = 0; v < poly.num_vertices(); ++v) {
    const hpfrac::Point2 d = poly.vertex(v) - x;
    double th = std::atan2(d.y, d.x);
    if (th < 0.0) th += 2.0 * M_PI;
    cuts.push_back(th);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(cuts.front() + 2.0 * M_PI);

  const hpfrac::Rule1D g = hpfrac::gauss_legendre(n);
  double acc = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double lo = cuts[c], len = cuts[c + 1] - cuts[c];
    if (len < 1e-14) continue;
    for (int k = 0; k < n; ++k) {
      const double th = lo + len * g.points[k];
      acc += len * g.weights[k] * std::pow(ray_boundary_distance(poly, x, th), -2.0 * s);
    }
  }
  return cs / (2.0 * s) * acc;
}

// Bilinear hat on the unit square translated by off, zero outside.
inline double square_hat(hpfrac::Point2 off, int corner, hpfrac::Point2 p) {
  const double x = p.x - off.x, y = p.y - off.y;
  if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) return 0.0;
  switch (corner) {
    case 0: return (1.0 - x) * (1.0 - y);
    case 1: return x * (1.0 - y);
    case 2: return x * y;
    default: return (1.0 - x) * y;
  }
}

// Far-only brute force of the ordered pair integral
//   B(a, b) = int_{K1} int_{K2} (phi_a(x) - phi_a(z)) (phi_b(x) - phi_b(z))
//             |x - z|^(-2-2s) dz dx
// over two axis-aligned boxes and a caller-supplied list of basis functions.
// The larger box is split in four until the pair separates (gap above 0.7
// times the larger diameter, deliberately not the production admissibility);
// separated pairs get tensor Gauss, pairs still touching when the depth
// budget runs out are dropped. The dropped corona shrinks geometrically with
// the budget because the paired first-order differences tame the kernel.
struct BruteBox {
  hpfrac::Point2 lo, hi;
};

using BruteBasis = std::vector<std::function<double(hpfrac::Point2)>>;

inline double brute_box_gap(const BruteBox& a, const BruteBox& b) {
  const double dx = std::max({b.lo.x - a.hi.x, a.lo.x - b.hi.x, 0.0});
  const double dy = std::max({b.lo.y - a.hi.y, a.lo.y - b.hi.y, 0.0});
  return std::hypot(dx, dy);
}

struct BruteWorkspace {
  hpfrac::Rule1D g;
  Eigen::MatrixXd va, vb;
  std::vector<hpfrac::Point2> pa, pb;
  std::vector<double> wa, wb;

  explicit BruteWorkspace(int gauss_n, int m)
      : g(hpfrac::gauss_legendre(gauss_n)),
        va(m, gauss_n * gauss_n),
        vb(m, gauss_n * gauss_n),
        pa(gauss_n * gauss_n),
        pb(gauss_n * gauss_n),
        wa(gauss_n * gauss_n),
        wb(gauss_n * gauss_n) {}
};

inline void brute_far_pair(const BruteBox& ka, const BruteBox& kb, const BruteBasis& basis,
                           double s, int depth_left, BruteWorkspace& ws, Eigen::MatrixXd* B) {
  const double da = std::hypot(ka.hi.x - ka.lo.x, ka.hi.y - ka.lo.y);
  const double db = std::hypot(kb.hi.x - kb.lo.x, kb.hi.y - kb.lo.y);
  const double gap = brute_box_gap(ka, kb);
  if (gap < 0.7 * std::max(da, db)) {
    if (depth_left <= 0) {
      if (gap < 1e-14) return;  // dropped touching corona
    } else {
      const BruteBox& big = da >= db ? ka : kb;
      const hpfrac::Point2 mid{0.5 * (big.lo.x + big.hi.x), 0.5 * (big.lo.y + big.hi.y)};
      const BruteBox kids[4] = {{big.lo, mid},
                                {{mid.x, big.lo.y}, {big.hi.x, mid.y}},
                                {{big.lo.x, mid.y}, {mid.x, big.hi.y}},
                                {mid, big.hi}};
      for (const BruteBox& kid : kids) {
        if (da >= db) {
          brute_far_pair(kid, kb, basis, s, depth_left - 1, ws, B);
        } else {
          brute_far_pair(ka, kid, basis, s, depth_left - 1, ws, B);
        }
      }
      return;
    }
  }

  const int n = static_cast<int>(ws.g.points.size());
  const int np = n * n;
  const int m = static_cast<int>(basis.size());
  const double ja = (ka.hi.x - ka.lo.x) * (ka.hi.y - ka.lo.y);
  const double jb = (kb.hi.x - kb.lo.x) * (kb.hi.y - kb.lo.y);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int k = i * n + j;
      ws.pa[k] = {ka.lo.x + (ka.hi.x - ka.lo.x) * ws.g.points[i],
                  ka.lo.y + (ka.hi.y - ka.lo.y) * ws.g.points[j]};
      ws.pb[k] = {kb.lo.x + (kb.hi.x - kb.lo.x) * ws.g.points[i],
                  kb.lo.y + (kb.hi.y - kb.lo.y) * ws.g.points[j]};
      ws.wa[k] = ja * ws.g.weights[i] * ws.g.weights[j];
      ws.wb[k] = jb * ws.g.weights[i] * ws.g.weights[j];
    }
  }
  for (int f = 0; f < m; ++f) {
    for (int k = 0; k < np; ++k) {
      ws.va(f, k) = basis[f](ws.pa[k]);
      ws.vb(f, k) = basis[f](ws.pb[k]);
    }
  }
  for (int kx = 0; kx < np; ++kx) {
    for (int kz = 0; kz < np; ++kz) {
      const double dx = ws.pa[kx].x - ws.pb[kz].x, dy = ws.pa[kx].y - ws.pb[kz].y;
      const double w = ws.wa[kx] * ws.wb[kz] * std::pow(dx * dx + dy * dy, -(1.0 + s));
      for (int fa = 0; fa < m; ++fa) {
        const double d1 = ws.va(fa, kx) - ws.vb(fa, kz);
        if (d1 == 0.0) continue;
        const double wd1 = w * d1;
        for (int fb = 0; fb <= fa; ++fb) {
          (*B)(fa, fb) += wd1 * (ws.va(fb, kx) - ws.vb(fb, kz));
        }
      }
    }
  }
}

inline Eigen::MatrixXd brute_pair_block(const BruteBox& k1, const BruteBox& k2,
                                        const BruteBasis& basis, double s, int gauss_n,
                                        int depth) {
  const int m = static_cast<int>(basis.size());
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, m);
  BruteWorkspace ws(gauss_n, m);
  brute_far_pair(k1, k2, basis, s, depth, ws, &B);
  B.triangularView<Eigen::StrictlyUpper>() = B.transpose();
  return B;
}

}  // namespace oracles
