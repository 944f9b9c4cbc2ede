#include "hpfrac/assembly.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hpfrac/detail/singular_rules.hpp"
#include "hpfrac/kernels.hpp"
#include "hpfrac/quadrature.hpp"

namespace hpfrac {

double normalization_constant(double s) {
  if (!(s > 0.0 && s < 1.0)) {
    throw std::invalid_argument("normalization_constant: s must lie in (0, 1)");
  }
  const double pi = std::numbers::pi;
  const double g = std::tgamma(1.0 + s);
  return std::pow(2.0, 2.0 * s) * std::sin(pi * s) * g * g / (pi * pi);
}

double kappa_value(const Polygon& poly, double s, Point2 x, int order) {
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("kappa_value: s must lie in (0, 1)");
  if (order < 2) throw std::invalid_argument("kappa_value: order must be at least 2");
  const double expo = -(1.0 + s);  // kernel as a power of the squared distance
  const double scale = poly.diameter();

  double sum = 0.0;
  for (std::size_t e = 0; e < poly.num_edges(); ++e) {
    const Point2 a = poly.edge_start(e);
    const Point2 b = poly.edge_end(e);
    const Point2 d = b - a;
    const double len = norm(d);
    const double de = dot(a - x, poly.edge_normal(e));
    if (std::abs(de) < 1e-14 * scale) continue;  // x on the carrying line contributes nothing

    // Composite rule graded toward the point of the edge nearest to x, deep
    // enough to resolve structure at the distance scale.
    const double tstar = std::clamp(dot(x - a, d) / (len * len), 0.0, 1.0);
    const double dseg = point_segment_distance(x, a, b);
    const int levels = std::clamp(
        static_cast<int>(std::ceil(std::log2(len / std::max(dseg, 1e-300)))) + 3, 4, 48);

    const Rule1D graded = graded_gauss(order, levels);
    double integral = 0.0;
    auto piece = [&](double t0, double t1, bool toward_right) {
      const double length = t1 - t0;
      if (!(length > 0.0)) return;
      for (std::size_t i = 0; i < graded.points.size(); ++i) {
        const double u = graded.points[i];  // graded toward 0
        const double t = toward_right ? t1 - length * u : t0 + length * u;
        const Point2 z{a.x + t * d.x, a.y + t * d.y};
        const double r2 = dot(z - x, z - x);
        integral += length * graded.weights[i] * std::pow(r2, expo);
      }
    };
    piece(0.0, tstar, true);
    piece(tstar, 1.0, false);
    sum += de * integral * len;
  }
  return normalization_constant(s) / (2.0 * s) * sum;
}

void QuadConfig::validate() const {
  if (far_order < 2 || far_order > 20) {
    throw std::invalid_argument("quadrature: far_order must lie in [2, 20]");
  }
  if (sing_order != 0 && (sing_order < 2 || sing_order > 16)) {
    throw std::invalid_argument("quadrature: sing_order must be 0 (automatic) or in [2, 16]");
  }
  if (grading_levels < 0 || grading_levels > 30) {
    throw std::invalid_argument("quadrature: grading_levels must lie in [0, 30]");
  }
  if (!(aniso_split >= 1.0)) {
    throw std::invalid_argument("quadrature: aniso_split must be at least 1");
  }
  if (!(admissibility > 0.0 && admissibility <= 10.0)) {
    throw std::invalid_argument("quadrature: admissibility must lie in (0, 10]");
  }
  if (kappa_order < 0 || rhs_order < 0) {
    throw std::invalid_argument("quadrature: orders must be nonnegative");
  }
}

int QuadConfig::resolve_sing_order(int q) const {
  if (sing_order > 0) return sing_order;
  // The difference-coordinate rules reach machine accuracy around order 10
  // and the shuffle rules keep shrinking geometrically; q + 2 with a floor of
  // 6 keeps the touching-pair error below the far-field error at every level.
  return std::clamp(q + 2, 6, 12);
}

namespace {

// A convex integration panel inside one element, described in the element's
// reference coordinates. Rectangular panels stay axis aligned in reference
// space with corner 0 at the lower left; their physical edges are straight
// even under bilinear maps because the cuts are axis parallel.
struct Panel {
  bool tri = true;
  bool whole = false;  // the element's entire reference domain
  int nv = 3;
  std::array<Point2, 4> ref{};
  std::array<Point2, 4> phys{};
  double diam = 0.0;
};

double panel_diam(const Panel& p) {
  double d = 0.0;
  for (int i = 0; i < p.nv; ++i) {
    for (int j = i + 1; j < p.nv; ++j) d = std::max(d, dist(p.phys[i], p.phys[j]));
  }
  return d;
}

Panel sub_panel(const ElementMap& map, bool tri, const std::array<Point2, 4>& ref) {
  Panel p;
  p.tri = tri;
  p.nv = tri ? 3 : 4;
  p.ref = ref;
  for (int k = 0; k < p.nv; ++k) p.phys[k] = map.apply(ref[k]);
  p.diam = panel_diam(p);
  return p;
}

// Halve a rectangular panel along reference direction 0 (x) or 1 (y).
void split_rect(const Panel& p, const ElementMap& map, int dir, Panel* a, Panel* b) {
  const Point2 lo = p.ref[0], hi = p.ref[2];
  if (dir == 0) {
    const double m = 0.5 * (lo.x + hi.x);
    *a = sub_panel(map, false, {Point2{lo.x, lo.y}, {m, lo.y}, {m, hi.y}, {lo.x, hi.y}});
    *b = sub_panel(map, false, {Point2{m, lo.y}, {hi.x, lo.y}, {hi.x, hi.y}, {m, hi.y}});
  } else {
    const double m = 0.5 * (lo.y + hi.y);
    *a = sub_panel(map, false, {Point2{lo.x, lo.y}, {hi.x, lo.y}, {hi.x, m}, {lo.x, m}});
    *b = sub_panel(map, false, {Point2{lo.x, m}, {hi.x, m}, {hi.x, hi.y}, {lo.x, hi.y}});
  }
}

// Split a triangular panel across the midpoint of edge k toward the opposite corner.
void split_tri_edge(const Panel& p, const ElementMap& map, int k, Panel* a, Panel* b) {
  const int k1 = (k + 1) % 3, ko = (k + 2) % 3;
  const Point2 m = 0.5 * (p.ref[k] + p.ref[k1]);
  *a = sub_panel(map, true, {p.ref[k], m, p.ref[ko], Point2{}});
  *b = sub_panel(map, true, {m, p.ref[k1], p.ref[ko], Point2{}});
}

// Uniform four-way split of a triangular panel (halves the diameter).
void split_tri4(const Panel& p, const ElementMap& map, std::array<Panel, 4>* out) {
  const Point2 m01 = 0.5 * (p.ref[0] + p.ref[1]);
  const Point2 m12 = 0.5 * (p.ref[1] + p.ref[2]);
  const Point2 m20 = 0.5 * (p.ref[2] + p.ref[0]);
  (*out)[0] = sub_panel(map, true, {p.ref[0], m01, m20, Point2{}});
  (*out)[1] = sub_panel(map, true, {m01, p.ref[1], m12, Point2{}});
  (*out)[2] = sub_panel(map, true, {m20, m12, p.ref[2], Point2{}});
  (*out)[3] = sub_panel(map, true, {m01, m12, m20, Point2{}});
}

// Rectangle into two triangles along the corner 0 - corner 2 diagonal.
void rect_to_tris(const Panel& p, const ElementMap& map, Panel* a, Panel* b) {
  *a = sub_panel(map, true, {p.ref[0], p.ref[1], p.ref[2], Point2{}});
  *b = sub_panel(map, true, {p.ref[0], p.ref[2], p.ref[3], Point2{}});
}

double panel_distance(const Panel& a, const Panel& b) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < a.nv; ++i) {
    for (int j = 0; j < b.nv; ++j) {
      best = std::min(best, point_segment_distance(a.phys[i], b.phys[j], b.phys[(j + 1) % b.nv]));
      best = std::min(best, point_segment_distance(b.phys[j], a.phys[i], a.phys[(i + 1) % a.nv]));
    }
  }
  return best;
}

bool lex_less(Point2 p, Point2 q, double tol) {
  if (p.x < q.x - tol) return true;
  if (q.x < p.x - tol) return false;
  return p.y < q.y;
}

}  // namespace

// Touching-pair tables declared in detail/singular_rules.hpp; the weight
// convention is documented there.
namespace detail {

// Touching pairs are integrated on T x T after the contact set is moved into a
// corner (shared vertex) or the bottom edge (shared edge, coincident). The
// product domain splits into the six interleavings of the two coordinate
// chains y <= x; in the gap coordinates of each interleaving the contact set
// is a coordinate subspace {g_i = 0, i in sing}, and collapsing those gaps
// radially gives a one-dimensional integrable singularity handled by a
// Gauss-Jacobi rule with exponent k - 1 - 2s, k the number of collapsed gaps.
std::vector<SingNode> build_shuffle_table(int n, double s, bool coincident) {
  struct Shuffle {
    std::array<int, 4> pos;    // sorted slot of (x1, x2, y1, y2)
    std::array<bool, 4> sing;  // which of the four gaps vanish at contact
    double factor;
  };
  // Interleavings listed by the chain order they describe; for the coincident
  // case the last three are mirror images of the first three under swapping
  // the two points, which the symmetric integrand absorbs as a factor 2.
  std::vector<Shuffle> shuffles;
  if (coincident) {
    shuffles = {
        {{1, 0, 3, 2}, {false, true, true, true}, 2.0},   // x2 <= x1 <= y2 <= y1
        {{2, 0, 3, 1}, {false, true, false, true}, 2.0},  // x2 <= y2 <= x1 <= y1
        {{3, 0, 2, 1}, {false, true, false, true}, 2.0},  // x2 <= y2 <= y1 <= x1
    };
  } else {
    shuffles = {
        {{1, 0, 3, 2}, {true, true, true, true}, 1.0},   // x2 <= x1 <= y2 <= y1
        {{2, 0, 3, 1}, {true, true, false, true}, 1.0},  // x2 <= y2 <= x1 <= y1
        {{3, 0, 2, 1}, {true, true, false, true}, 1.0},  // x2 <= y2 <= y1 <= x1
        {{2, 1, 3, 0}, {true, true, false, true}, 1.0},  // y2 <= x2 <= x1 <= y1
        {{3, 1, 2, 0}, {true, true, false, true}, 1.0},  // y2 <= x2 <= y1 <= x1
        {{3, 2, 1, 0}, {true, true, true, true}, 1.0},   // y2 <= y1 <= x2 <= x1
    };
  }

  const Rule1D g = gauss_legendre(n);
  std::vector<SingNode> out;
  out.reserve(shuffles.size() * static_cast<std::size_t>(n) * n * n * n);

  for (const Shuffle& sh : shuffles) {
    int k = 0;
    for (bool b : sh.sing) k += b ? 1 : 0;
    const Rule1D lam = gauss_jacobi(n, static_cast<double>(k - 1) - 2.0 * s);
    const int kd = k - 1;  // direction simplex dimensions (delta sums to 1)

    for (int il = 0; il < n; ++il) {
      const double lambda = lam.points[il];
      const double wl = lam.weights[il] * std::pow(lambda, 2.0 * s) *
                        std::pow(1.0 - lambda, 4 - k) * sh.factor;
      for (int i1 = 0; i1 < n; ++i1) {
        for (int i2 = 0; i2 < n; ++i2) {
          for (int i3 = 0; i3 < n; ++i3) {
            const double ta = g.points[i1], tb = g.points[i2], tc = g.points[i3];
            double delta[4] = {0, 0, 0, 0};
            double phi[2] = {0, 0};
            double jac = 1.0;
            if (kd == 1) {
              delta[0] = ta;
              delta[1] = 1.0 - ta;
              phi[0] = tb * tc;  // free pair on {phi >= 0, phi1 + phi2 <= 1}
              phi[1] = tb * (1.0 - tc);
              jac = tb;
            } else if (kd == 2) {
              delta[0] = ta;
              delta[1] = (1.0 - ta) * tb;
              delta[2] = (1.0 - ta) * (1.0 - tb);
              jac = 1.0 - ta;
              phi[0] = tc;
            } else {  // kd == 3
              delta[0] = ta;
              delta[1] = (1.0 - ta) * tb;
              delta[2] = (1.0 - ta) * (1.0 - tb) * tc;
              delta[3] = (1.0 - ta) * (1.0 - tb) * (1.0 - tc);
              jac = (1.0 - ta) * (1.0 - ta) * (1.0 - tb);
            }

            double gap[4];
            int si = 0, fi = 0;
            for (int t = 0; t < 4; ++t) {
              gap[t] = sh.sing[t] ? lambda * delta[si++] : (1.0 - lambda) * phi[fi++];
            }
            const double w1 = gap[0];
            const double w2 = w1 + gap[1];
            const double w3 = w2 + gap[2];
            const double w4 = w3 + gap[3];
            const double sorted[4] = {w1, w2, w3, w4};

            SingNode node;
            node.xhat = {sorted[sh.pos[0]], sorted[sh.pos[1]]};
            node.yhat = {sorted[sh.pos[2]], sorted[sh.pos[3]]};
            node.w = wl * jac * g.weights[i1] * g.weights[i2] * g.weights[i3];
            out.push_back(node);
          }
        }
      }
    }
  }
  return out;
}

// Vertex-touching pairs use the direct radial parametrization
//   x = (c t, c t u), y = (c (1-t), c (1-t) v), c = Lambda(t) lambda,
// with volume element lambda^3 t (1-t) Lambda(t)^4 and Lambda = 1/max(t, 1-t);
// t is integrated on [0, 1/2] and [1/2, 1] separately since Lambda has a kink.
std::vector<SingNode> build_vertex_table(int n, double s) {
  const Rule1D lam = gauss_jacobi(n, 3.0 - 2.0 * s);
  const Rule1D g = gauss_legendre(n);
  std::vector<SingNode> out;
  out.reserve(2 * static_cast<std::size_t>(n) * n * n * n);

  for (int half = 0; half < 2; ++half) {
    for (int it = 0; it < n; ++it) {
      const double t = 0.5 * (g.points[it] + half);
      const double wt = 0.5 * g.weights[it];
      const double cap = 1.0 / std::max(t, 1.0 - t);
      const double cap4 = cap * cap * cap * cap;
      for (int il = 0; il < n; ++il) {
        const double lb = lam.points[il];
        const double wl = lam.weights[il] * std::pow(lb, 2.0 * s);
        const double x1 = cap * lb * t;
        const double y1 = cap * lb * (1.0 - t);
        for (int iu = 0; iu < n; ++iu) {
          for (int iv = 0; iv < n; ++iv) {
            SingNode node;
            node.xhat = {x1, x1 * g.points[iu]};
            node.yhat = {y1, y1 * g.points[iv]};
            node.w = wl * wt * g.weights[iu] * g.weights[iv] * t * (1.0 - t) * cap4;
            out.push_back(node);
          }
        }
      }
    }
  }
  return out;
}

// Quadrilateral panels interacting with themselves or across a full shared
// edge stay quadrilaterals: splitting them into triangles first hands the
// shuffle tables skewed side maps whose geometric convergence constant is
// poor, while difference coordinates on the square resolve the contact set
// directly and converge at the clean rate.

// Self-interaction of one quadrilateral in coordinates u = xhat - yhat. The
// contact set is u = 0; each quadrant of the u square splits into two Duffy
// pyramids whose radial direction carries the kernel homogeneity through a
// Gauss-Jacobi weight, and opposite quadrants fold into each other because
// swapping x and y leaves the integrand invariant (hence the factor 2, which
// restricts this table to symmetric use: the same element on both sides).
std::vector<SingNode> build_rect_coincident_table(int n, double s) {
  const Rule1D rad = gauss_jacobi(n, 1.0 - 2.0 * s);
  const Rule1D g = gauss_legendre(n);
  std::vector<SingNode> out;
  out.reserve(4 * static_cast<std::size_t>(n) * n * n * n);

  // Blocks 0/1 cover quadrant (+, +) with |u1| >= |u2| and |u2| >= |u1|;
  // blocks 2/3 the same for quadrant (+, -).
  for (int blk = 0; blk < 4; ++blk) {
    for (int ir = 0; ir < n; ++ir) {
      const double rho = rad.points[ir];
      const double wr = rad.weights[ir] * std::pow(rho, 2.0 * s) * 2.0;
      for (int im = 0; im < n; ++im) {
        const double mu = g.points[im];
        double u1 = 0.0, u2 = 0.0;
        switch (blk) {
          case 0: u1 = rho, u2 = rho * mu; break;
          case 1: u1 = rho * mu, u2 = rho; break;
          case 2: u1 = rho, u2 = -rho * mu; break;
          default: u1 = rho * mu, u2 = -rho; break;
        }
        // For fixed u the base point runs over the clipped square.
        const double l1 = 1.0 - std::abs(u1), l2 = 1.0 - std::abs(u2);
        const double lo1 = std::max(0.0, -u1), lo2 = std::max(0.0, -u2);
        const double wb = wr * g.weights[im] * l1 * l2;
        for (int i1 = 0; i1 < n; ++i1) {
          const double z1 = lo1 + l1 * g.points[i1];
          for (int i2 = 0; i2 < n; ++i2) {
            const double z2 = lo2 + l2 * g.points[i2];
            SingNode node;
            node.yhat = {z1, z2};
            node.xhat = {z1 + u1, z2 + u2};
            node.w = wb * g.weights[i1] * g.weights[i2];
            out.push_back(node);
          }
        }
      }
    }
  }
  return out;
}

// Two quadrilaterals sharing a full edge, in side coordinates: xhat = (t, a)
// and yhat = (tau, b) with t, tau the matched arclength-like parameters along
// the shared edge and a, b the inward coordinates. The contact set is
// {a = b = 0, t = tau}; with u = t - tau >= 0 split by sign, the triple
// (a, b, u) is radialized by its largest coordinate into three pyramids.
std::vector<SingNode> build_rect_edge_table(int n, double s) {
  const Rule1D rad = gauss_jacobi(n, 2.0 - 2.0 * s);
  const Rule1D g = gauss_legendre(n);
  std::vector<SingNode> out;
  out.reserve(6 * static_cast<std::size_t>(n) * n * n * n);

  for (int sign = 0; sign < 2; ++sign) {
    for (int pyr = 0; pyr < 3; ++pyr) {
      for (int ir = 0; ir < n; ++ir) {
        const double c = rad.points[ir];
        const double wr = rad.weights[ir] * std::pow(c, 2.0 * s);
        for (int ia = 0; ia < n; ++ia) {
          for (int ib = 0; ib < n; ++ib) {
            const double al = g.points[ia], be = g.points[ib];
            double a = 0.0, b = 0.0, u = 0.0;
            switch (pyr) {
              case 0: a = c, b = c * al, u = c * be; break;
              case 1: a = c * al, b = c, u = c * be; break;
              default: a = c * al, b = c * be, u = c; break;
            }
            const double wab = wr * g.weights[ia] * g.weights[ib] * (1.0 - u);
            for (int ip = 0; ip < n; ++ip) {
              const double phi = g.points[ip];
              double t, tau;
              if (sign == 0) {
                tau = (1.0 - u) * phi;
                t = tau + u;
              } else {
                t = (1.0 - u) * phi;
                tau = t + u;
              }
              SingNode node;
              node.xhat = {t, a};
              node.yhat = {tau, b};
              node.w = wab * g.weights[ip];
              out.push_back(node);
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace detail

namespace {

using detail::build_rect_coincident_table;
using detail::build_rect_edge_table;
using detail::build_shuffle_table;
using detail::build_vertex_table;
using detail::SingNode;

enum class SingCase { Coincident, Edge, Vertex, RectCoincident, RectEdge };

// Affine chart of one side of a touching pair: a singular table's abstract
// coordinates land at o + xhat.x * ax + xhat.y * ay in the element's
// reference square or triangle.
struct SideFrame {
  Point2 o, ax, ay;
};

SideFrame tri_frame(const std::array<Point2, 3>& rc) {
  return {rc[0], rc[1] - rc[0], rc[2] - rc[1]};
}

struct OverlapHit {
  bool found = false;
  bool full = false;
  int i = -1, j = -1;  // edge indices on each panel
  int longer = 0;      // which panel carries the longer overlapping edge
};

class Assembler {
 public:
  Assembler(const HpSpace& space, double s, const QuadConfig& cfg)
      : space_(space), mesh_(space.mesh()), s_(s), cfg_(cfg) {
    cfg_.validate();
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("assembly: s must lie in (0, 1)");
    expo_ = -(1.0 + s);
    fill_ = select_kernel_fill();
    kernel_name_ = active_kernel_name();
    domain_diam_ = mesh_.domain.diameter();
    nsing_ = cfg_.resolve_sing_order(space.degree());

    tab_coin_ = build_shuffle_table(nsing_, s_, true);
    tab_edge_ = build_shuffle_table(nsing_, s_, false);
    tab_vert_ = build_vertex_table(nsing_, s_);
    tab_rect_c_ = build_rect_coincident_table(nsing_, s_);
    tab_rect_e_ = build_rect_edge_table(nsing_, s_);

    const int E = static_cast<int>(mesh_.elements.size());
    whole_.resize(E);
    aniso_.resize(E);
    for (int e = 0; e < E; ++e) {
      whole_[e] = whole_panel(e);
      aniso_[e] = make_aniso(e);
    }

    // Far rules for whole elements at the orders the admissibility ladder uses.
    std::vector<int> slots = {cfg_.far_order, std::max(2, cfg_.far_order - 1),
                              std::max(2, cfg_.far_order - 2), cfg_.far_order + 2};
    std::sort(slots.begin(), slots.end());
    slots.erase(std::unique(slots.begin(), slots.end()), slots.end());
    base_rules_.resize(E);
    for (int e = 0; e < E; ++e) {
      for (int o : slots) base_rules_[e].emplace(o, build_far_rule(e, whole_[e], o));
    }
  }

  Eigen::MatrixXd assemble(int threads, AssemblyStats* stats) {
    const int N = space_.num_dofs();
    const int E = static_cast<int>(mesh_.elements.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    const double c_half = 0.5 * normalization_constant(s_);

    if (threads <= 1) {
      Scratch sc(N);
      for (int e1 = 0; e1 < E; ++e1) {
        for (int e2 = e1; e2 < E; ++e2) {
          PairAccum blk = compute_pair(e1, e2, sc);
          scatter(A, blk, c_half * (e1 == e2 ? 1.0 : 2.0));
        }
      }
    } else {
      // Deterministic parallel sweep: tasks run out of order but blocks commit
      // in pair order, so the accumulation order of A is fixed.
      std::vector<std::pair<int, int>> pairs;
      pairs.reserve(static_cast<std::size_t>(E) * (E + 1) / 2);
      for (int e1 = 0; e1 < E; ++e1) {
        for (int e2 = e1; e2 < E; ++e2) pairs.emplace_back(e1, e2);
      }
      const std::size_t window = static_cast<std::size_t>(threads) * 4;
      std::deque<std::future<PairAccum>> inflight;
      std::size_t next = 0, commit = 0;
      while (commit < pairs.size()) {
        while (inflight.size() < window && next < pairs.size()) {
          const auto [e1, e2] = pairs[next++];
          inflight.push_back(std::async(std::launch::async, [this, e1 = e1, e2 = e2] {
            Scratch sc(space_.num_dofs());
            return compute_pair(e1, e2, sc);
          }));
        }
        PairAccum blk = inflight.front().get();
        inflight.pop_front();
        const auto [e1, e2] = pairs[commit++];
        scatter(A, blk, c_half * (e1 == e2 ? 1.0 : 2.0));
      }
    }

    add_mass(A);

    // The small dense block products are symmetric up to rounding; make the
    // global matrix exactly symmetric.
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < i; ++j) {
        const double v = 0.5 * (A(i, j) + A(j, i));
        A(i, j) = v;
        A(j, i) = v;
      }
    }

    if (stats) {
      stats->element_pairs = static_cast<long long>(E) * (E + 1) / 2;
      stats->far_subpairs = stat_far_sub_.load();
      stats->sing_coincident = stat_sing_c_.load();
      stats->sing_edge = stat_sing_e_.load();
      stats->sing_vertex = stat_sing_v_.load();
      stats->far_points = stat_far_pts_.load();
      stats->sing_points = stat_sing_pts_.load();
      stats->sing_order = nsing_;
      stats->kernel = kernel_name_;
    }
    return A;
  }

  Eigen::MatrixXd pair_block(int e1, int e2, std::vector<int>* udofs) {
    Scratch sc(space_.num_dofs());
    PairAccum acc = compute_pair(e1, e2, sc);
    if (udofs) *udofs = acc.udofs;
    return std::move(acc.B);
  }

 private:
  struct FarRule {
    std::vector<double> px, py, w;  // physical points and weights with jacobians
    Eigen::MatrixXd phi;            // local basis values, size nb x npts
  };

  struct Scratch {
    std::vector<int> mark, stamp;
    int epoch = 0;
    std::vector<double> kbuf;
    std::vector<Point2> rpts1, rpts2;
    Eigen::VectorXd cvec;
    Eigen::MatrixXd V1, V2, D;
    explicit Scratch(int ndofs) : mark(ndofs, 0), stamp(ndofs, 0) {}
  };

  struct PairAccum {
    int e1 = -1, e2 = -1;
    std::vector<int> udofs;       // global dof per union row
    std::vector<int> u1, u2;      // local node -> union row (or -1)
    Eigen::MatrixXd B;            // union block; engine fills the lower triangle
    Eigen::MatrixXd L11, L12, L22;  // far-field accumulators in local indexing
    bool far_used = false;
  };

  Panel whole_panel(int e) const {
    const Element& el = mesh_.elements[e];
    Panel p;
    p.tri = el.shape == ElementShape::Triangle;
    p.whole = true;
    p.nv = p.tri ? 3 : 4;
    if (p.tri) {
      p.ref = {Point2{0, 0}, {1, 0}, {1, 1}, {}};
    } else {
      p.ref = {Point2{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    }
    for (int k = 0; k < p.nv; ++k) p.phys[k] = el.map.apply(p.ref[k]);
    p.diam = panel_diam(p);
    return p;
  }

  // Dyadic halving of stretched rectangular panels: the singular engine's
  // direction integrand varies with the panel aspect ratio, so touching pairs
  // are handled on panels of bounded anisotropy.
  std::vector<Panel> make_aniso(int e) const {
    const ElementMap& map = mesh_.elements[e].map;
    std::vector<Panel> out, work{whole_[e]};
    while (!work.empty()) {
      Panel p = work.back();
      work.pop_back();
      if (p.tri) {
        out.push_back(p);
        continue;
      }
      const double lx = 0.5 * (dist(p.phys[0], p.phys[1]) + dist(p.phys[3], p.phys[2]));
      const double ly = 0.5 * (dist(p.phys[1], p.phys[2]) + dist(p.phys[0], p.phys[3]));
      if (std::max(lx, ly) <= cfg_.aniso_split * std::min(lx, ly) + 1e-12 * (lx + ly)) {
        out.push_back(p);
      } else {
        Panel a, b;
        split_rect(p, map, lx >= ly ? 0 : 1, &a, &b);
        work.push_back(b);
        work.push_back(a);
      }
    }
    return out;
  }

  Eigen::MatrixXd local_values_matrix(const Element& el, const std::vector<Point2>& pts) const {
    if (el.shape == ElementShape::Triangle) {
      return space_.tri_basis().values_matrix(pts.data(), static_cast<int>(pts.size()));
    }
    return space_.quad_basis().values_matrix(pts.data(), static_cast<int>(pts.size()));
  }

  FarRule build_far_rule(int e, const Panel& p, int order) const {
    const Element& el = mesh_.elements[e];
    const Rule1D g = gauss_legendre(order);
    const std::vector<QuadPoint2D> base = p.tri ? duffy_triangle(g, g) : tensor_square(g, g);
    const int npts = static_cast<int>(base.size());

    FarRule r;
    r.px.resize(npts);
    r.py.resize(npts);
    r.w.resize(npts);
    std::vector<Point2> refs(npts);
    if (p.tri) {
      const Point2 o = p.ref[0], ax = p.ref[1] - p.ref[0], ay = p.ref[2] - p.ref[1];
      const double aj = std::abs(cross(ax, ay));
      for (int i = 0; i < npts; ++i) {
        refs[i] = {o.x + base[i].x * ax.x + base[i].y * ay.x,
                   o.y + base[i].x * ax.y + base[i].y * ay.y};
        r.w[i] = base[i].w * aj * std::abs(el.map.jacobian_det(refs[i]));
      }
    } else {
      const Point2 lo = p.ref[0], hi = p.ref[2];
      const double ex = hi.x - lo.x, ey = hi.y - lo.y;
      const double aj = std::abs(ex * ey);
      for (int i = 0; i < npts; ++i) {
        refs[i] = {lo.x + base[i].x * ex, lo.y + base[i].y * ey};
        r.w[i] = base[i].w * aj * std::abs(el.map.jacobian_det(refs[i]));
      }
    }
    for (int i = 0; i < npts; ++i) {
      const Point2 pp = el.map.apply(refs[i]);
      r.px[i] = pp.x;
      r.py[i] = pp.y;
    }
    r.phi = local_values_matrix(el, refs);
    return r;
  }

  void init_accum(int e1, int e2, Scratch& sc, PairAccum& acc) const {
    acc.e1 = e1;
    acc.e2 = e2;
    const auto& d1 = space_.element_dofs(e1);
    const auto& d2 = space_.element_dofs(e2);
    ++sc.epoch;
    acc.udofs.clear();
    acc.u1.assign(d1.size(), -1);
    acc.u2.assign(d2.size(), -1);
    auto claim = [&](int dof) {
      if (sc.stamp[dof] != sc.epoch) {
        sc.stamp[dof] = sc.epoch;
        sc.mark[dof] = static_cast<int>(acc.udofs.size());
        acc.udofs.push_back(dof);
      }
      return sc.mark[dof];
    };
    for (std::size_t i = 0; i < d1.size(); ++i) {
      if (d1[i] >= 0) acc.u1[i] = claim(d1[i]);
    }
    for (std::size_t i = 0; i < d2.size(); ++i) {
      if (d2[i] >= 0) acc.u2[i] = claim(d2[i]);
    }
    const int nu = static_cast<int>(acc.udofs.size());
    acc.B.setZero(nu, nu);
    acc.far_used = false;
  }

  double contact_tol(const Panel& a, const Panel& b) const {
    return std::max(1e-13 * domain_diam_, 1e-7 * std::min(a.diam, b.diam));
  }

  OverlapHit find_overlap(const Panel& a, const Panel& b, double tol) const {
    for (int i = 0; i < a.nv; ++i) {
      const Point2 a0 = a.phys[i], a1 = a.phys[(i + 1) % a.nv];
      const Point2 d = a1 - a0;
      const double len = norm(d);
      for (int j = 0; j < b.nv; ++j) {
        const Point2 b0 = b.phys[j], b1 = b.phys[(j + 1) % b.nv];
        if (std::abs(cross(d, b0 - a0)) > tol * len) continue;
        if (std::abs(cross(d, b1 - a0)) > tol * len) continue;
        const double v0 = dot(b0 - a0, d) / len;
        const double v1 = dot(b1 - a0, d) / len;
        const double lo = std::min(v0, v1), hi = std::max(v0, v1);
        const double ell = std::min(len, hi) - std::max(0.0, lo);
        if (ell <= tol) continue;
        OverlapHit hit;
        hit.found = true;
        hit.i = i;
        hit.j = j;
        const double lenb = hi - lo;
        hit.full = std::abs(ell - len) <= tol && std::abs(ell - lenb) <= tol;
        hit.longer = (len >= lenb) ? 1 : 2;
        return hit;
      }
    }
    return {};
  }

  // A corner of one panel resting strictly inside an edge of the other has no
  // admissible parametrization here; conforming meshes never produce it.
  void t_contact_check(const Panel& a, const Panel& b, double tol) const {
    auto check = [&](const Panel& p, const Panel& q) {
      for (int i = 0; i < p.nv; ++i) {
        for (int j = 0; j < q.nv; ++j) {
          const Point2 s0 = q.phys[j], s1 = q.phys[(j + 1) % q.nv];
          if (point_segment_distance(p.phys[i], s0, s1) <= tol && dist(p.phys[i], s0) > tol &&
              dist(p.phys[i], s1) > tol) {
            throw std::runtime_error("assembly: unsupported T-point contact between panels");
          }
        }
      }
    };
    check(a, b);
    check(b, a);
  }

  int far_order_for(double ratio) const {
    if (ratio >= 4.0) return std::max(2, cfg_.far_order - 2);
    if (ratio >= 1.5) return std::max(2, cfg_.far_order - 1);
    return cfg_.far_order;
  }

  void apply_far(const FarRule& r1, const FarRule& r2, double mult, Scratch& sc,
                 PairAccum& acc) const {
    const int n1 = static_cast<int>(r1.px.size());
    const int n2 = static_cast<int>(r2.px.size());
    sc.kbuf.resize(static_cast<std::size_t>(n1) * n2);
    fill_(r1.px.data(), r1.py.data(), r1.w.data(), n1, r2.px.data(), r2.py.data(), r2.w.data(),
          n2, expo_, sc.kbuf.data());
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> K(sc.kbuf.data(), n1, n2);

    if (!acc.far_used) {
      acc.L11.setZero(r1.phi.rows(), r1.phi.rows());
      acc.L22.setZero(r2.phi.rows(), r2.phi.rows());
      acc.L12.setZero(r1.phi.rows(), r2.phi.rows());
      acc.far_used = true;
    }
    const Eigen::VectorXd rowsum = mult * K.rowwise().sum();
    const Eigen::VectorXd colsum = mult * K.colwise().sum().transpose();
    acc.L11.noalias() += (r1.phi * rowsum.asDiagonal()) * r1.phi.transpose();
    acc.L22.noalias() += (r2.phi * colsum.asDiagonal()) * r2.phi.transpose();
    acc.L12.noalias() -= mult * (r1.phi * (K * r2.phi.transpose()));

    stat_far_sub_.fetch_add(1, std::memory_order_relaxed);
    stat_far_pts_.fetch_add(static_cast<long long>(n1) * n2, std::memory_order_relaxed);
  }

  void far_recurse(const Panel& p1, const Panel& p2, int e1, int e2, double mult, int depth,
                   Scratch& sc, PairAccum& acc) const {
    const double d = panel_distance(p1, p2);
    const double dm = std::max(p1.diam, p2.diam);
    const double ratio = d / dm;
    const bool admissible = ratio >= cfg_.admissibility;
    if (admissible || depth >= cfg_.grading_levels) {
      const int order = admissible ? far_order_for(ratio) : cfg_.far_order + 2;
      FarRule t1, t2;
      const FarRule* R1 = cached_or_build(e1, p1, order, &t1);
      const FarRule* R2 = cached_or_build(e2, p2, order, &t2);
      apply_far(*R1, *R2, mult, sc, acc);
      return;
    }
    // Split the larger panel and recurse; this is the geometric grading toward
    // the near-singularity between close but disjoint panels.
    const Panel& big = (p1.diam >= p2.diam) ? p1 : p2;
    const bool first = &big == &p1;
    const ElementMap& map = mesh_.elements[first ? e1 : e2].map;
    if (big.tri) {
      std::array<Panel, 4> kids;
      split_tri4(big, map, &kids);
      for (const Panel& k : kids) {
        if (first) {
          far_recurse(k, p2, e1, e2, mult, depth + 1, sc, acc);
        } else {
          far_recurse(p1, k, e1, e2, mult, depth + 1, sc, acc);
        }
      }
    } else {
      const double lxa = 0.5 * (dist(big.phys[0], big.phys[1]) + dist(big.phys[3], big.phys[2]));
      const double lya = 0.5 * (dist(big.phys[1], big.phys[2]) + dist(big.phys[0], big.phys[3]));
      Panel a, b;
      split_rect(big, map, lxa >= lya ? 0 : 1, &a, &b);
      if (first) {
        far_recurse(a, p2, e1, e2, mult, depth + 1, sc, acc);
        far_recurse(b, p2, e1, e2, mult, depth + 1, sc, acc);
      } else {
        far_recurse(p1, a, e1, e2, mult, depth + 1, sc, acc);
        far_recurse(p1, b, e1, e2, mult, depth + 1, sc, acc);
      }
    }
  }

  const FarRule* cached_or_build(int e, const Panel& p, int order, FarRule* storage) const {
    if (p.whole) {
      const auto it = base_rules_[e].find(order);
      if (it != base_rules_[e].end()) return &it->second;
    }
    *storage = build_far_rule(e, p, order);
    return storage;
  }

  const std::vector<SingNode>& sing_table(SingCase cs) const {
    switch (cs) {
      case SingCase::Coincident: return tab_coin_;
      case SingCase::Edge: return tab_edge_;
      case SingCase::Vertex: return tab_vert_;
      case SingCase::RectCoincident: return tab_rect_c_;
      default: return tab_rect_e_;
    }
  }

  void apply_sing(SingCase cs, int e1, const SideFrame& f1, int e2, const SideFrame& f2,
                  double mult, Scratch& sc, PairAccum& acc) const {
    const std::vector<SingNode>& tab = sing_table(cs);
    const Element& el1 = mesh_.elements[e1];
    const Element& el2 = mesh_.elements[e2];
    const int M = static_cast<int>(tab.size());
    sc.rpts1.resize(M);
    sc.rpts2.resize(M);
    sc.cvec.resize(M);

    const Point2 o1 = f1.o, ax1 = f1.ax, ay1 = f1.ay;
    const Point2 o2 = f2.o, ax2 = f2.ax, ay2 = f2.ay;
    const double adet1 = std::abs(cross(ax1, ay1));
    const double adet2 = std::abs(cross(ax2, ay2));
    const bool aff1 = el1.map.affine(), aff2 = el2.map.affine();
    const double cj1 = aff1 ? std::abs(el1.map.jacobian_det({0.0, 0.0})) : 0.0;
    const double cj2 = aff2 ? std::abs(el2.map.jacobian_det({0.0, 0.0})) : 0.0;

    for (int m = 0; m < M; ++m) {
      const Point2 xh = tab[m].xhat, yh = tab[m].yhat;
      const Point2 q1{o1.x + xh.x * ax1.x + xh.y * ay1.x, o1.y + xh.x * ax1.y + xh.y * ay1.y};
      const Point2 q2{o2.x + yh.x * ax2.x + yh.y * ay2.x, o2.y + yh.x * ax2.y + yh.y * ay2.y};
      sc.rpts1[m] = q1;
      sc.rpts2[m] = q2;
      const Point2 p1 = el1.map.apply(q1);
      const Point2 p2 = el2.map.apply(q2);
      const double j1 = aff1 ? cj1 : std::abs(el1.map.jacobian_det(q1));
      const double j2 = aff2 ? cj2 : std::abs(el2.map.jacobian_det(q2));
      const double dx = p1.x - p2.x, dy = p1.y - p2.y;
      sc.cvec(m) = tab[m].w * j1 * j2 * adet1 * adet2 * mult * std::pow(dx * dx + dy * dy, expo_);
    }

    sc.V1 = local_values_matrix(el1, sc.rpts1);
    sc.V2 = local_values_matrix(el2, sc.rpts2);

    // Basis differences over the union: a shared dof takes the element's own
    // trace on each side (those traces agree on the contact set), an unshared
    // dof extends by zero, and its trace vanishes on the contact set as well.
    // Every row of D therefore vanishes linearly at the contact, which is what
    // the radial Jacobi exponent accounts for.
    const int nu = static_cast<int>(acc.udofs.size());
    sc.D.setZero(nu, M);
    for (int i = 0; i < sc.V1.rows(); ++i) {
      if (acc.u1[i] >= 0) sc.D.row(acc.u1[i]) += sc.V1.row(i);
    }
    for (int i = 0; i < sc.V2.rows(); ++i) {
      if (acc.u2[i] >= 0) sc.D.row(acc.u2[i]) -= sc.V2.row(i);
    }
    sc.D.array().rowwise() *= sc.cvec.array().sqrt().transpose();
    acc.B.selfadjointView<Eigen::Lower>().rankUpdate(sc.D, 1.0);

    switch (cs) {
      case SingCase::Coincident:
      case SingCase::RectCoincident: stat_sing_c_.fetch_add(1, std::memory_order_relaxed); break;
      case SingCase::Edge:
      case SingCase::RectEdge: stat_sing_e_.fetch_add(1, std::memory_order_relaxed); break;
      case SingCase::Vertex: stat_sing_v_.fetch_add(1, std::memory_order_relaxed); break;
    }
    stat_sing_pts_.fetch_add(M, std::memory_order_relaxed);
  }

  std::array<Point2, 3> rotated_ref(const Panel& p, int first) const {
    return {p.ref[first], p.ref[(first + 1) % 3], p.ref[(first + 2) % 3]};
  }

  void apply_edge_from_hit(const Panel& p1, const Panel& p2, int e1, int e2,
                           const OverlapHit& hit, double mult, double tol, Scratch& sc,
                           PairAccum& acc) const {
    const int a1 = hit.i, b1 = (hit.i + 1) % 3;
    const int a2 = hit.j, b2 = (hit.j + 1) % 3;
    const bool aligned = dist(p1.phys[a1], p2.phys[a2]) <= tol;
    if (aligned ? dist(p1.phys[b1], p2.phys[b2]) > tol
                : (dist(p1.phys[a1], p2.phys[b2]) > tol || dist(p1.phys[b1], p2.phys[a2]) > tol)) {
      throw std::runtime_error("assembly: shared edge endpoints failed to match");
    }
    const int s2 = aligned ? a2 : b2;  // p2 corner matching p1's a1
    const int t2 = aligned ? b2 : a2;

    // Both panels traverse the shared edge from the same canonical endpoint, so
    // their contact parametrizations agree and the kernel's singular factor
    // cancels against the vanishing basis differences.
    const bool flip = lex_less(p1.phys[b1], p1.phys[a1], tol);
    const int f1 = flip ? b1 : a1, g1 = flip ? a1 : b1;
    const int f2 = flip ? t2 : s2, g2 = flip ? s2 : t2;
    const std::array<Point2, 3> rc1{p1.ref[f1], p1.ref[g1], p1.ref[3 - f1 - g1]};
    const std::array<Point2, 3> rc2{p2.ref[f2], p2.ref[g2], p2.ref[3 - f2 - g2]};
    apply_sing(SingCase::Edge, e1, tri_frame(rc1), e2, tri_frame(rc2), mult, sc, acc);
  }

  // Same endpoint matching for two quadrilaterals sharing a full edge. Each
  // side's frame runs the first axis along the shared edge from the canonical
  // endpoint and the second axis inward, so the pair is ready for the
  // difference-coordinate edge table.
  void apply_rect_edge_from_hit(const Panel& p1, const Panel& p2, int e1, int e2,
                                const OverlapHit& hit, double mult, double tol, Scratch& sc,
                                PairAccum& acc) const {
    const int a1 = hit.i, b1 = (hit.i + 1) % 4;
    const int a2 = hit.j, b2 = (hit.j + 1) % 4;
    const bool aligned = dist(p1.phys[a1], p2.phys[a2]) <= tol;
    if (aligned ? dist(p1.phys[b1], p2.phys[b2]) > tol
                : (dist(p1.phys[a1], p2.phys[b2]) > tol || dist(p1.phys[b1], p2.phys[a2]) > tol)) {
      throw std::runtime_error("assembly: shared edge endpoints failed to match");
    }
    const int s2 = aligned ? a2 : b2;
    const int t2 = aligned ? b2 : a2;

    const bool flip = lex_less(p1.phys[b1], p1.phys[a1], tol);
    const int f1 = flip ? b1 : a1, g1 = flip ? a1 : b1;
    const int f2 = flip ? t2 : s2, g2 = flip ? s2 : t2;
    // The inward axis points to the start corner's other neighbor.
    const int in1 = ((f1 + 1) % 4 == g1) ? (f1 + 3) % 4 : (f1 + 1) % 4;
    const int in2 = ((f2 + 1) % 4 == g2) ? (f2 + 3) % 4 : (f2 + 1) % 4;
    const SideFrame fr1{p1.ref[f1], p1.ref[g1] - p1.ref[f1], p1.ref[in1] - p1.ref[f1]};
    const SideFrame fr2{p2.ref[f2], p2.ref[g2] - p2.ref[f2], p2.ref[in2] - p2.ref[f2]};
    apply_sing(SingCase::RectEdge, e1, fr1, e2, fr2, mult, sc, acc);
  }

  void resolve(const Panel& p1, const Panel& p2, int e1, int e2, double mult, int depth,
               Scratch& sc, PairAccum& acc) const {
    if (depth > 60) {
      throw std::runtime_error("assembly: panel pair resolution exceeded depth limit");
    }
    const ElementMap& m1 = mesh_.elements[e1].map;
    const ElementMap& m2 = mesh_.elements[e2].map;
    const double tol = contact_tol(p1, p2);

    const OverlapHit hit = find_overlap(p1, p2, tol);
    if (hit.found && !hit.full) {
      // Collinear partial overlap: halve the longer edge until the pieces match.
      Panel a, b;
      if (hit.longer == 1) {
        if (p1.tri) {
          split_tri_edge(p1, m1, hit.i, &a, &b);
        } else {
          split_rect(p1, m1, hit.i % 2 == 0 ? 0 : 1, &a, &b);
        }
        resolve(a, p2, e1, e2, mult, depth + 1, sc, acc);
        resolve(b, p2, e1, e2, mult, depth + 1, sc, acc);
      } else {
        if (p2.tri) {
          split_tri_edge(p2, m2, hit.j, &a, &b);
        } else {
          split_rect(p2, m2, hit.j % 2 == 0 ? 0 : 1, &a, &b);
        }
        resolve(p1, a, e1, e2, mult, depth + 1, sc, acc);
        resolve(p1, b, e1, e2, mult, depth + 1, sc, acc);
      }
      return;
    }

    if (hit.found) {
      // Full shared edge. A quadrilateral pair goes to the dedicated edge
      // table; a mixed pair reduces the quadrilateral to triangles first.
      if (!p1.tri && !p2.tri) {
        apply_rect_edge_from_hit(p1, p2, e1, e2, hit, mult, tol, sc, acc);
        return;
      }
      Panel a, b;
      if (!p1.tri) {
        rect_to_tris(p1, m1, &a, &b);
        resolve(a, p2, e1, e2, mult, depth + 1, sc, acc);
        resolve(b, p2, e1, e2, mult, depth + 1, sc, acc);
        return;
      }
      if (!p2.tri) {
        rect_to_tris(p2, m2, &a, &b);
        resolve(p1, a, e1, e2, mult, depth + 1, sc, acc);
        resolve(p1, b, e1, e2, mult, depth + 1, sc, acc);
        return;
      }
      apply_edge_from_hit(p1, p2, e1, e2, hit, mult, tol, sc, acc);
      return;
    }

    int ci = -1, cj = -1, count = 0;
    for (int i = 0; i < p1.nv; ++i) {
      for (int j = 0; j < p2.nv; ++j) {
        if (dist(p1.phys[i], p2.phys[j]) <= tol) {
          ci = i;
          cj = j;
          ++count;
        }
      }
    }
    if (count == 0) {
      t_contact_check(p1, p2, tol);
      far_recurse(p1, p2, e1, e2, mult, depth, sc, acc);
      return;
    }
    if (count > 1) {
      throw std::runtime_error("assembly: panels share multiple isolated contact points");
    }
    Panel a, b;
    if (!p1.tri) {
      rect_to_tris(p1, m1, &a, &b);
      resolve(a, p2, e1, e2, mult, depth + 1, sc, acc);
      resolve(b, p2, e1, e2, mult, depth + 1, sc, acc);
      return;
    }
    if (!p2.tri) {
      rect_to_tris(p2, m2, &a, &b);
      resolve(p1, a, e1, e2, mult, depth + 1, sc, acc);
      resolve(p1, b, e1, e2, mult, depth + 1, sc, acc);
      return;
    }
    apply_sing(SingCase::Vertex, e1, tri_frame(rotated_ref(p1, ci)), e2,
               tri_frame(rotated_ref(p2, cj)), mult, sc, acc);
  }

  // Self-interaction of one panel. Triangles use the coincident shuffle
  // table, quadrilaterals the difference-coordinate table; both fold the
  // symmetric halves, so the caller's mult is passed through unchanged.
  void self_resolve(const Panel& p, int e, double mult, Scratch& sc, PairAccum& acc) const {
    if (p.tri) {
      const std::array<Point2, 3> rc{p.ref[0], p.ref[1], p.ref[2]};
      const SideFrame f = tri_frame(rc);
      apply_sing(SingCase::Coincident, e, f, e, f, mult, sc, acc);
      return;
    }
    const SideFrame f{p.ref[0], p.ref[1] - p.ref[0], p.ref[3] - p.ref[0]};
    apply_sing(SingCase::RectCoincident, e, f, e, f, mult, sc, acc);
  }

  PairAccum compute_pair(int e1, int e2, Scratch& sc) const {
    PairAccum acc;
    init_accum(e1, e2, sc, acc);
    if (acc.udofs.empty()) return acc;

    bool touching = (e1 == e2);
    if (!touching) {
      const Element& a = mesh_.elements[e1];
      const Element& b = mesh_.elements[e2];
      for (int i = 0; i < a.nv && !touching; ++i) {
        for (int j = 0; j < b.nv; ++j) {
          if (a.vids[i] == b.vids[j]) {
            touching = true;
            break;
          }
        }
      }
    }

    if (!touching) {
      far_recurse(whole_[e1], whole_[e2], e1, e2, 1.0, 0, sc, acc);
    } else if (e1 == e2) {
      const auto& ps = aniso_[e1];
      for (std::size_t a = 0; a < ps.size(); ++a) {
        self_resolve(ps[a], e1, 1.0, sc, acc);
        for (std::size_t b = a + 1; b < ps.size(); ++b) {
          resolve(ps[a], ps[b], e1, e1, 2.0, 0, sc, acc);
        }
      }
    } else {
      for (const Panel& pa : aniso_[e1]) {
        for (const Panel& pb : aniso_[e2]) resolve(pa, pb, e1, e2, 1.0, 0, sc, acc);
      }
    }

    finalize_block(acc);
    return acc;
  }

  void finalize_block(PairAccum& acc) const {
    acc.B.triangularView<Eigen::StrictlyUpper>() = acc.B.transpose();
    if (!acc.far_used) return;
    for (int i = 0; i < acc.L11.rows(); ++i) {
      const int a = acc.u1[i];
      if (a < 0) continue;
      for (int j = 0; j < acc.L11.cols(); ++j) {
        const int b = acc.u1[j];
        if (b >= 0) acc.B(a, b) += acc.L11(i, j);
      }
    }
    for (int i = 0; i < acc.L22.rows(); ++i) {
      const int a = acc.u2[i];
      if (a < 0) continue;
      for (int j = 0; j < acc.L22.cols(); ++j) {
        const int b = acc.u2[j];
        if (b >= 0) acc.B(a, b) += acc.L22(i, j);
      }
    }
    for (int i = 0; i < acc.L12.rows(); ++i) {
      const int a = acc.u1[i];
      if (a < 0) continue;
      for (int j = 0; j < acc.L12.cols(); ++j) {
        const int b = acc.u2[j];
        if (b < 0) continue;
        const double v = acc.L12(i, j);
        acc.B(a, b) += v;
        acc.B(b, a) += v;
      }
    }
  }

  void scatter(Eigen::MatrixXd& A, const PairAccum& acc, double factor) const {
    const int nu = static_cast<int>(acc.udofs.size());
    for (int i = 0; i < nu; ++i) {
      const int gi = acc.udofs[i];
      for (int j = 0; j < nu; ++j) {
        A(gi, acc.udofs[j]) += factor * acc.B(i, j);
      }
    }
  }

  // Complement mass term: integral of u v kappa over each element, graded
  // toward the domain boundary where kappa blows up like dist^(-2s). The
  // constrained basis traces vanish there, keeping the products integrable.
  void add_mass(Eigen::MatrixXd& A) const {
    const int n = cfg_.kappa_order > 0 ? cfg_.kappa_order : space_.degree() + 4;
    const int levels = std::max(8, mesh_.params.L + 2);
    std::vector<double> phi;
    for (std::size_t e = 0; e < mesh_.elements.size(); ++e) {
      const Element& el = mesh_.elements[e];
      const auto& dofs = space_.element_dofs(static_cast<int>(e));
      bool any = false;
      for (int d : dofs) any = any || d >= 0;
      if (!any) continue;

      const bool graded = el.sides_on_boundary != 0 || el.corners_on_boundary != 0;
      const auto rule = element_quadrature(el, n, levels, graded);
      const int nb = space_.local_size(el);
      phi.resize(nb);
      for (const QuadPoint2D& qp : rule) {
        const Point2 r{qp.x, qp.y};
        const Point2 p = el.map.apply(r);
        const double c =
            kappa_value(mesh_.domain, s_, p, 8) * std::abs(el.map.jacobian_det(r)) * qp.w;
        space_.local_values(el, r, phi.data());
        for (int i = 0; i < nb; ++i) {
          if (dofs[i] < 0) continue;
          for (int j = 0; j < nb; ++j) {
            if (dofs[j] >= 0) A(dofs[i], dofs[j]) += c * phi[i] * phi[j];
          }
        }
      }
    }
  }

  const HpSpace& space_;
  const GlobalMesh& mesh_;
  double s_;
  QuadConfig cfg_;
  double expo_ = 0.0;
  KernelFillFn fill_ = nullptr;
  std::string kernel_name_;
  double domain_diam_ = 0.0;
  int nsing_ = 0;
  std::vector<SingNode> tab_coin_, tab_edge_, tab_vert_, tab_rect_c_, tab_rect_e_;
  std::vector<Panel> whole_;
  std::vector<std::vector<Panel>> aniso_;
  std::vector<std::map<int, FarRule>> base_rules_;
  mutable std::atomic<long long> stat_far_sub_{0}, stat_sing_c_{0}, stat_sing_e_{0},
      stat_sing_v_{0}, stat_far_pts_{0}, stat_sing_pts_{0};
};

}  // namespace

Eigen::MatrixXd assemble_matrix(const HpSpace& space, double s, const QuadConfig& cfg,
                                int threads, AssemblyStats* stats) {
  if (!space.constrained()) {
    throw std::invalid_argument(
        "assemble_matrix: the complement mass term needs vanishing boundary traces; "
        "build the space with constrain_boundary = true");
  }
  Assembler assembler(space, s, cfg);
  return assembler.assemble(threads, stats);
}

Eigen::VectorXd assemble_rhs(const HpSpace& space, const std::function<double(Point2)>& f,
                             const QuadConfig& cfg) {
  cfg.validate();
  const GlobalMesh& mesh = space.mesh();
  const int n = cfg.rhs_order > 0 ? cfg.rhs_order : space.degree() + 4;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(space.num_dofs());
  std::vector<double> phi;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const Element& el = mesh.elements[e];
    const auto& dofs = space.element_dofs(static_cast<int>(e));
    const auto rule = element_quadrature(el, n, 0, false);
    const int nb = space.local_size(el);
    phi.resize(nb);
    for (const QuadPoint2D& qp : rule) {
      const Point2 r{qp.x, qp.y};
      const double c = f(el.map.apply(r)) * std::abs(el.map.jacobian_det(r)) * qp.w;
      space.local_values(el, r, phi.data());
      for (int i = 0; i < nb; ++i) {
        if (dofs[i] >= 0) b[dofs[i]] += c * phi[i];
      }
    }
  }
  return b;
}

Eigen::MatrixXd pair_interaction_block(const HpSpace& space, int e1, int e2, double s,
                                       const QuadConfig& cfg, std::vector<int>* union_dofs) {
  const int E = static_cast<int>(space.mesh().elements.size());
  if (e1 < 0 || e2 < 0 || e1 >= E || e2 >= E) {
    throw std::invalid_argument("pair_interaction_block: element index out of range");
  }
  Assembler assembler(space, s, cfg);
  return assembler.pair_block(e1, e2, union_dofs);
}

}  // namespace hpfrac
