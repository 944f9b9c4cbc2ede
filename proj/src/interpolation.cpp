#include "hpfrac/interpolation.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hpfrac/quadrature.hpp"

namespace hpfrac {

double ErrorNorms::total() const {
  return std::sqrt(l2_weighted * l2_weighted + h1_weighted * h1_weighted);
}

namespace {

bool in_region(const Element& el, NormRegion region) {
  switch (region) {
    case NormRegion::All: return true;
    case NormRegion::ExcludePatchBoundary: return !el.patch_boundary;
    case NormRegion::OnlyL0L1: return el.layer != Layer::Interior;
    case NormRegion::ExcludeL0: return el.layer != Layer::L0;
  }
  return true;
}

}  // namespace

ErrorNorms weighted_field_norm(const GlobalMesh& mesh, const ElementField& f, int default_order,
                               const NormConfig& cfg) {
  const int n = (cfg.order > 0) ? cfg.order : default_order;
  const bool weighted = cfg.weight != WeightKind::None;

  double l2 = 0.0, h1 = 0.0;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const Element& el = mesh.elements[e];
    if (!in_region(el, cfg.region)) continue;

    const bool touches_bd = el.sides_on_boundary != 0 || el.corners_on_boundary != 0;
    const auto rule = element_quadrature(el, n, cfg.grading_levels, weighted && touches_bd);

    for (const QuadPoint2D& qp : rule) {
      const Point2 r{qp.x, qp.y};
      const Point2 p = el.map.apply(r);
      Point2 grad;
      const double v = f(static_cast<int>(e), r, p, &grad);

      double w = 1.0;
      switch (cfg.weight) {
        case WeightKind::None: break;
        case WeightKind::VertexDist: w = dist(p, cfg.anchor); break;
        case WeightKind::EdgeDist:
          w = std::abs(point_line_signed_distance(p, cfg.line_a, cfg.line_b));
          break;
        case WeightKind::BoundaryDist: {
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < mesh.domain.num_edges(); ++k) {
            best = std::min(best, point_segment_distance(p, mesh.domain.edge_start(k),
                                                         mesh.domain.edge_end(k)));
          }
          w = best;
          break;
        }
      }

      Point2 jx, jy;
      el.map.jacobian(r, &jx, &jy);
      const double meas = std::abs(cross(jx, jy)) * qp.w;
      const double wl2 = weighted ? std::pow(w, 2.0 * (cfg.beta - 1.0)) : 1.0;
      const double wh1 = weighted ? std::pow(w, 2.0 * cfg.beta) : 1.0;
      l2 += wl2 * v * v * meas;
      h1 += wh1 * dot(grad, grad) * meas;
    }
  }
  return {std::sqrt(l2), std::sqrt(h1)};
}

ErrorNorms weighted_error(const HpSpace& space, const FeFunction& uh, const ScalarField& exact,
                          const NormConfig& cfg) {
  std::vector<double> phi, gx, gy;
  ElementField diff = [&](int e, Point2 r, Point2 p, Point2* grad_out) {
    const Element& el = space.mesh().elements[e];
    const int nb = space.local_size(el);
    phi.resize(nb);
    gx.resize(nb);
    gy.resize(nb);
    space.local_values_and_grads(el, r, phi.data(), gx.data(), gy.data());
    const auto& dofs = space.element_dofs(e);
    double v = 0.0, dx = 0.0, dy = 0.0;
    for (int i = 0; i < nb; ++i) {
      if (dofs[i] < 0) continue;
      const double c = uh.coeffs[dofs[i]];
      v += c * phi[i];
      dx += c * gx[i];
      dy += c * gy[i];
    }
    Point2 jx, jy;
    el.map.jacobian(r, &jx, &jy);
    const double det = cross(jx, jy);
    const Point2 gh{(jy.y * dx - jx.y * dy) / det, (-jy.x * dx + jx.x * dy) / det};

    Point2 ge;
    const double ve = exact(p, &ge);
    if (grad_out) *grad_out = ge - gh;
    return ve - v;
  };
  return weighted_field_norm(space.mesh(), diff, space.degree() + 6, cfg);
}

ErrorNorms weighted_norm(const HpSpace& space, const FeFunction& uh, const NormConfig& cfg) {
  return weighted_error(
      space, uh,
      [](Point2, Point2* g) {
        if (g) *g = {0.0, 0.0};
        return 0.0;
      },
      cfg);
}

ScalarField vertex_model(double s) {
  return [s](Point2 p, Point2* g) {
    const double r2 = p.x * p.x + p.y * p.y;
    const double r = std::sqrt(r2);
    const double v = std::pow(r, s);
    if (g) {
      if (r == 0.0) {
        *g = {0.0, 0.0};
      } else {
        const double f = s * v / r2;
        *g = {f * p.x, f * p.y};
      }
    }
    return v;
  };
}

ScalarField edge_model(double s) {
  return [s](Point2 p, Point2* g) {
    const double v = std::pow(p.y, s);
    if (g) *g = {0.0, (p.y == 0.0) ? 0.0 : s * v / p.y};
    return v;
  };
}

ScalarField boundary_model(const Polygon& poly, double s) {
  // Product over the polygon edges of the unsigned distance to each edge line,
  // raised to the power s; smooth in the interior, vanishing at the boundary at
  // the rate dist^s near each edge.
  std::vector<Point2> a, grad_sd;
  for (std::size_t e = 0; e < poly.num_edges(); ++e) {
    const Point2 pa = poly.edge_start(e), pb = poly.edge_end(e);
    const Point2 d = pb - pa;
    const double len = norm(d);
    a.push_back(pa);
    grad_sd.push_back({-d.y / len, d.x / len});
  }
  std::vector<Point2> b;
  for (std::size_t e = 0; e < poly.num_edges(); ++e) b.push_back(poly.edge_end(e));

  return [s, a, b, grad_sd](Point2 p, Point2* g) {
    double prod = 1.0;
    Point2 logderiv{0.0, 0.0};
    for (std::size_t e = 0; e < a.size(); ++e) {
      const double sd = point_line_signed_distance(p, a[e], b[e]);
      const double d = std::abs(sd);
      prod *= d;
      if (g && d > 0.0) {
        const double sign = (sd >= 0.0) ? 1.0 : -1.0;
        logderiv = logderiv + (sign / d) * grad_sd[e];
      }
    }
    const double v = std::pow(prod, s);
    if (g) *g = (s * v) * logderiv;
    return v;
  };
}

std::vector<PatchStudyRow> run_patch_study(PatchKind kind, double s, double sigma, double beta,
                                           int q_min, int q_max) {
  if (kind == PatchKind::Trivial) {
    throw std::invalid_argument("patch study: kind must be vertex, edge, or vertex_edge");
  }
  if (q_min < 1 || q_max < q_min) {
    throw std::invalid_argument("patch study: need 1 <= q_min <= q_max");
  }

  const MacroMesh macro = build_single_patch_macro(kind);
  std::vector<PatchStudyRow> rows;
  for (int q = q_min; q <= q_max; ++q) {
    const GlobalMesh mesh = refine(macro, {sigma, q});
    const HpSpace space(mesh, q, /*constrain_boundary=*/false);

    ScalarField model;
    NormConfig cfg;
    cfg.beta = beta;
    cfg.region = NormRegion::ExcludePatchBoundary;
    if (kind == PatchKind::Vertex) {
      model = vertex_model(s);
      cfg.weight = WeightKind::VertexDist;
      cfg.anchor = {0.0, 0.0};
    } else {
      model = edge_model(s);
      cfg.weight = WeightKind::EdgeDist;
      cfg.line_a = {0.0, 0.0};
      cfg.line_b = {1.0, 0.0};
    }

    const FeFunction uh = interpolate(space, [&model](Point2 p) { return model(p, nullptr); });
    const ErrorNorms err = weighted_error(space, uh, model, cfg);
    rows.push_back({kind, s, sigma, beta, q, q, err.l2_weighted, err.h1_weighted});
  }
  return rows;
}

std::string patch_study_csv(const std::vector<PatchStudyRow>& rows) {
  std::ostringstream out;
  out.precision(12);
  out << "patch_kind,s,sigma,beta,q,L,l2_weighted,h1_weighted\n";
  for (const PatchStudyRow& r : rows) {
    out << to_string(r.kind) << "," << r.s << "," << r.sigma << "," << r.beta << "," << r.q << ","
        << r.L << "," << r.l2_weighted << "," << r.h1_weighted << "\n";
  }
  return out.str();
}

}  // namespace hpfrac
