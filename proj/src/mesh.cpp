#include "hpfrac/mesh.hpp"

#include <json.hpp>

#include "hpfrac/basis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace hpfrac {

std::string to_string(PatchKind kind) {
  switch (kind) {
    case PatchKind::Trivial: return "trivial";
    case PatchKind::Vertex: return "vertex";
    case PatchKind::Edge: return "edge";
    case PatchKind::VertexEdge: return "vertex_edge";
  }
  return "unknown";
}

std::string to_string(Layer layer) {
  switch (layer) {
    case Layer::L0: return "L0";
    case Layer::L1: return "L1";
    case Layer::Interior: return "interior";
  }
  return "unknown";
}

void validate(const MeshParams& params) {
  if (!(params.sigma > 0.0 && params.sigma < 1.0)) {
    throw std::invalid_argument("mesh params: sigma must lie in (0, 1), got " +
                                std::to_string(params.sigma));
  }
  if (params.L < 0 || params.L > 40) {
    throw std::invalid_argument("mesh params: L must lie in [0, 40], got " +
                                std::to_string(params.L));
  }
}

namespace {

double tri_diam(Point2 a, Point2 b, Point2 c) {
  return std::max({dist(a, b), dist(b, c), dist(c, a)});
}

RefElement make_rect(double x0, double x1, double y0, double y1, int layer, int col,
                     bool boundary) {
  RefElement e;
  e.shape = ElementShape::Quad;
  e.corners = {Point2{x0, y0}, Point2{x1, y0}, Point2{x1, y1}, Point2{x0, y1}};
  e.layer_index = layer;
  e.col_index = col;
  e.patch_boundary = boundary;
  e.h_par = x1 - x0;
  e.h_perp = y1 - y0;
  return e;
}

RefElement make_tri(Point2 a, Point2 b, Point2 c, int layer, int col, bool boundary) {
  RefElement e;
  e.shape = ElementShape::Triangle;
  e.corners = {a, b, c, Point2{0.0, 0.0}};
  e.layer_index = layer;
  e.col_index = col;
  e.patch_boundary = boundary;
  e.h_par = e.h_perp = tri_diam(a, b, c);
  return e;
}

std::vector<double> sigma_powers(double sigma, int L) {
  std::vector<double> pw(L + 1);
  pw[0] = 1.0;
  for (int i = 1; i <= L; ++i) pw[i] = pw[i - 1] * sigma;
  return pw;
}

}  // namespace

RefPatch build_reference_patch(PatchKind kind, MeshParams params) {
  validate(params);
  RefPatch patch{kind, params, {}};
  const int L = params.L;
  const auto pw = sigma_powers(params.sigma, L);

  switch (kind) {
    case PatchKind::Trivial: {
      patch.elements.push_back(make_rect(0.0, 1.0, 0.0, 1.0, -1, -1, false));
      break;
    }
    case PatchKind::Edge: {
      for (int i = 0; i < L; ++i) {
        patch.elements.push_back(make_rect(0.0, 1.0, pw[i + 1], pw[i], i, -1, false));
      }
      patch.elements.push_back(make_rect(0.0, 1.0, 0.0, pw[L], L, -1, true));
      break;
    }
    case PatchKind::Vertex: {
      for (int i = 0; i < L; ++i) {
        const Point2 a{pw[i + 1], 0.0}, b{pw[i], 0.0}, c{pw[i], pw[i]}, d{pw[i + 1], pw[i + 1]};
        patch.elements.push_back(make_tri(a, b, d, i, -1, false));
        patch.elements.push_back(make_tri(b, c, d, i, -1, false));
      }
      patch.elements.push_back(
          make_tri({0.0, 0.0}, {pw[L], 0.0}, {pw[L], pw[L]}, L, -1, true));
      break;
    }
    case PatchKind::VertexEdge: {
      for (int i = 0; i < L; ++i) {
        patch.elements.push_back(make_tri({pw[i + 1], pw[i + 1]}, {pw[i], pw[i + 1]},
                                          {pw[i], pw[i]}, i, i, false));
        for (int j = i + 1; j < L; ++j) {
          patch.elements.push_back(make_rect(pw[i + 1], pw[i], pw[j + 1], pw[j], j, i, false));
        }
        patch.elements.push_back(make_rect(pw[i + 1], pw[i], 0.0, pw[L], L, i, true));
      }
      patch.elements.push_back(
          make_tri({0.0, 0.0}, {pw[L], 0.0}, {pw[L], pw[L]}, L, L, true));
      break;
    }
  }
  return patch;
}

namespace {

struct ContactInfo {
  std::vector<bool> corner_on_bd;
  std::vector<int> full_sides;  // local side indices fully on the boundary
};

ContactInfo analyze_contact(const Polygon& poly, const std::vector<Point2>& pts,
                            const MacroElement& el, double tol) {
  ContactInfo info;
  info.corner_on_bd.resize(el.nv);
  for (int k = 0; k < el.nv; ++k) {
    info.corner_on_bd[k] = poly.on_boundary(pts[el.v[k]], tol);
  }
  for (int k = 0; k < el.nv; ++k) {
    const Point2 a = pts[el.v[k]];
    const Point2 b = pts[el.v[(k + 1) % el.nv]];
    const Point2 mid = 0.5 * (a + b);
    if (info.corner_on_bd[k] && info.corner_on_bd[(k + 1) % el.nv] &&
        poly.on_boundary(mid, tol)) {
      // Must lie within a single polygon edge.
      bool hosted = false;
      for (std::size_t e = 0; e < poly.num_edges(); ++e) {
        if (poly.edge_distance(e, a) <= tol && poly.edge_distance(e, b) <= tol) {
          hosted = true;
          break;
        }
      }
      if (!hosted) {
        throw std::invalid_argument("macro element side spans more than one polygon edge");
      }
      info.full_sides.push_back(k);
    }
  }
  return info;
}

std::size_t matching_polygon_vertex(const Polygon& poly, Point2 p, double tol) {
  for (std::size_t v = 0; v < poly.num_vertices(); ++v) {
    if (dist(poly.vertex(v), p) <= tol) return v;
  }
  return no_index;
}

bool point_strictly_inside_convex(const std::vector<Point2>& corners, Point2 p, double tol) {
  // Works for either orientation: all cross products must share the sign strictly.
  int pos = 0, neg = 0;
  const int n = static_cast<int>(corners.size());
  for (int k = 0; k < n; ++k) {
    const double c = cross(corners[(k + 1) % n] - corners[k], p - corners[k]);
    if (c > tol) ++pos;
    if (c < -tol) ++neg;
  }
  return pos == n || neg == n;
}

}  // namespace

void classify_macro(MacroMesh& macro) {
  const Polygon& poly = macro.domain;
  const double tol = 1e-9 * poly.diameter();

  for (std::size_t i = 0; i < macro.points.size(); ++i) {
    const Point2 p = macro.points[i];
    if (!poly.contains(p) && !poly.on_boundary(p, tol)) {
      throw std::invalid_argument("macro point " + std::to_string(i) +
                                  " lies outside the domain closure");
    }
  }

  for (std::size_t v = 0; v < poly.num_vertices(); ++v) {
    bool found = false;
    for (const Point2& p : macro.points) {
      if (dist(p, poly.vertex(v)) <= tol) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::invalid_argument("polygon corner " + std::to_string(v) +
                                  " is not a macro mesh point");
    }
  }

  double covered = 0.0;
  for (std::size_t idx = 0; idx < macro.elements.size(); ++idx) {
    MacroElement& el = macro.elements[idx];
    if (el.nv != 3 && el.nv != 4) {
      throw std::invalid_argument("macro element " + std::to_string(idx) +
                                  " must have 3 or 4 vertices");
    }
    if ((el.shape == ElementShape::Triangle) != (el.nv == 3)) {
      throw std::invalid_argument("macro element " + std::to_string(idx) +
                                  " has inconsistent shape and vertex count");
    }
    std::vector<Point2> c;
    for (int k = 0; k < el.nv; ++k) c.push_back(macro.points[el.v[k]]);

    // Nondegenerate and convex (either orientation).
    int pos = 0, neg = 0;
    for (int k = 0; k < el.nv; ++k) {
      const double cr = cross(c[(k + 1) % el.nv] - c[k], c[(k + 2) % el.nv] - c[(k + 1) % el.nv]);
      if (cr > tol * tol) ++pos;
      if (cr < -tol * tol) ++neg;
    }
    if (pos != el.nv && neg != el.nv) {
      throw std::invalid_argument("macro element " + std::to_string(idx) +
                                  " is degenerate or non-convex");
    }

    double area2 = 0.0;
    for (int k = 0; k < el.nv; ++k) area2 += cross(c[k], c[(k + 1) % el.nv]);
    covered += 0.5 * std::abs(area2);

    // No polygon corner may poke into the element interior or the interior of a side.
    for (std::size_t v = 0; v < poly.num_vertices(); ++v) {
      const Point2 pv = poly.vertex(v);
      bool at_corner = false;
      for (int k = 0; k < el.nv; ++k) at_corner = at_corner || dist(pv, c[k]) <= tol;
      if (at_corner) continue;
      if (point_strictly_inside_convex(c, pv, tol)) {
        throw std::invalid_argument("polygon corner " + std::to_string(v) +
                                    " lies inside macro element " + std::to_string(idx));
      }
      for (int k = 0; k < el.nv; ++k) {
        if (point_segment_distance(pv, c[k], c[(k + 1) % el.nv]) <= tol) {
          throw std::invalid_argument("polygon corner " + std::to_string(v) +
                                      " lies inside a side of macro element " +
                                      std::to_string(idx));
        }
      }
    }

    const ContactInfo info = analyze_contact(poly, macro.points, el, tol);
    const int nbd = static_cast<int>(
        std::count(info.corner_on_bd.begin(), info.corner_on_bd.end(), true));

    if (info.full_sides.size() >= 2) {
      throw std::invalid_argument("macro element " + std::to_string(idx) +
                                  " touches the boundary along two sides; split it");
    }

    if (info.full_sides.empty()) {
      if (nbd == 0) {
        if (el.shape != ElementShape::Quad) {
          throw std::invalid_argument("interior macro element " + std::to_string(idx) +
                                      " must be a quadrilateral");
        }
        el.kind = PatchKind::Trivial;
        el.polygon_vertex = no_index;
        el.polygon_edge = no_index;
      } else if (nbd == 1) {
        if (el.shape != ElementShape::Triangle) {
          throw std::invalid_argument("point-contact macro element " + std::to_string(idx) +
                                      " must be a triangle");
        }
        int k0 = 0;
        while (!info.corner_on_bd[k0]) ++k0;
        const std::array<std::size_t, 4> old = el.v;
        for (int k = 0; k < 3; ++k) el.v[k] = old[(k0 + k) % 3];
        el.kind = PatchKind::Vertex;
        el.polygon_vertex = matching_polygon_vertex(poly, macro.points[el.v[0]], tol);
        el.polygon_edge = no_index;
      } else {
        throw std::invalid_argument("macro element " + std::to_string(idx) +
                                    " touches the boundary in several isolated points");
      }
      continue;
    }

    // Exactly one full boundary side.
    if (nbd != 2) {
      throw std::invalid_argument("macro element " + std::to_string(idx) +
                                  " touches the boundary along a side plus extra points");
    }
    const int side = info.full_sides.front();
    const Point2 a = macro.points[el.v[side]];
    const Point2 b = macro.points[el.v[(side + 1) % el.nv]];
    const std::size_t pva = matching_polygon_vertex(poly, a, tol);
    const std::size_t pvb = matching_polygon_vertex(poly, b, tol);
    std::size_t host_edge = no_index;
    for (std::size_t e = 0; e < poly.num_edges(); ++e) {
      if (poly.edge_distance(e, a) <= tol && poly.edge_distance(e, b) <= tol) {
        host_edge = e;
        break;
      }
    }

    if (pva != no_index && pvb != no_index) {
      throw std::invalid_argument(
          "macro element " + std::to_string(idx) +
          " spans a full polygon side; split it so each boundary side has at most one "
          "polygon corner endpoint");
    }

    if (pva == no_index && pvb == no_index) {
      if (el.shape != ElementShape::Quad) {
        throw std::invalid_argument("edge-contact macro element " + std::to_string(idx) +
                                    " away from polygon corners must be a quadrilateral");
      }
      const std::array<std::size_t, 4> old = el.v;
      for (int k = 0; k < 4; ++k) el.v[k] = old[(side + k) % 4];
      const Point2 w0 = macro.points[el.v[0]], w1 = macro.points[el.v[1]],
                   w2 = macro.points[el.v[2]], w3 = macro.points[el.v[3]];
      if (dist(w1 - w0, w2 - w3) > tol) {
        throw std::invalid_argument("edge-contact macro element " + std::to_string(idx) +
                                    " must be a parallelogram");
      }
      el.kind = PatchKind::Edge;
      el.polygon_vertex = no_index;
      el.polygon_edge = host_edge;
    } else {
      if (el.shape != ElementShape::Triangle) {
        throw std::invalid_argument("corner-contact macro element " + std::to_string(idx) +
                                    " must be a triangle");
      }
      // Order: polygon corner, other contact endpoint, apex.
      const int k_corner = (pva != no_index) ? side : (side + 1) % 3;
      const int k_other = (pva != no_index) ? (side + 1) % 3 : side;
      const int k_apex = 3 - k_corner - k_other;
      const std::array<std::size_t, 4> old = el.v;
      el.v[0] = old[k_corner];
      el.v[1] = old[k_other];
      el.v[2] = old[k_apex];
      el.kind = PatchKind::VertexEdge;
      el.polygon_vertex = (pva != no_index) ? pva : pvb;
      el.polygon_edge = host_edge;
    }
  }

  if (std::abs(covered - poly.area()) > 1e-10 * poly.area()) {
    throw std::invalid_argument("macro elements cover area " + std::to_string(covered) +
                                " but the domain has area " + std::to_string(poly.area()));
  }

  // Conformity of the macro mesh itself: interior sides shared exactly twice.
  std::map<std::pair<std::size_t, std::size_t>, int> side_count;
  for (const MacroElement& el : macro.elements) {
    for (int k = 0; k < el.nv; ++k) {
      std::size_t p = el.v[k], q = el.v[(k + 1) % el.nv];
      if (p > q) std::swap(p, q);
      ++side_count[{p, q}];
    }
  }
  for (const auto& [pq, count] : side_count) {
    if (count > 2) {
      throw std::invalid_argument("macro side shared by more than two elements");
    }
    if (count == 1) {
      const Point2 a = macro.points[pq.first];
      const Point2 b = macro.points[pq.second];
      if (!(poly.on_boundary(a, tol) && poly.on_boundary(b, tol) &&
            poly.on_boundary(0.5 * (a + b), tol))) {
        throw std::invalid_argument("macro mesh has a hole or hanging side");
      }
    }
  }
}

MacroMesh build_macro_preset(const std::string& name) {
  if (name == "square-fan") {
    MacroMesh m{Polygon::unit_square(), {}, {}};
    const auto& poly = m.domain;
    for (std::size_t v = 0; v < 4; ++v) m.points.push_back(poly.vertex(v));
    for (std::size_t e = 0; e < 4; ++e) {
      m.points.push_back(0.5 * (poly.edge_start(e) + poly.edge_end(e)));
    }
    m.points.push_back({0.5, 0.5});
    const std::size_t c = 8;
    for (std::size_t e = 0; e < 4; ++e) {
      const std::size_t v0 = e, v1 = (e + 1) % 4, mid = 4 + e;
      m.elements.push_back({ElementShape::Triangle, {v0, mid, c, 0}, 3});
      m.elements.push_back({ElementShape::Triangle, {v1, mid, c, 0}, 3});
    }
    classify_macro(m);
    return m;
  }
  if (name == "lshape-fan") {
    MacroMesh m{Polygon::l_shape(), {}, {}};
    const auto& poly = m.domain;
    const std::size_t n = poly.num_vertices();
    for (std::size_t v = 0; v < n; ++v) m.points.push_back(poly.vertex(v));
    for (std::size_t e = 0; e < n; ++e) {
      m.points.push_back(0.5 * (poly.edge_start(e) + poly.edge_end(e)));
    }
    m.points.push_back({-0.5, 0.5});
    const std::size_t c = 2 * n;
    for (std::size_t e = 0; e < n; ++e) {
      const std::size_t v0 = e, v1 = (e + 1) % n, mid = n + e;
      m.elements.push_back({ElementShape::Triangle, {v0, mid, c, 0}, 3});
      m.elements.push_back({ElementShape::Triangle, {v1, mid, c, 0}, 3});
    }
    classify_macro(m);
    return m;
  }
  throw std::invalid_argument("unknown macro preset '" + name +
                              "'; available: square-fan, lshape-fan");
}

MacroMesh read_macro_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open macro mesh file: " + path);
  nlohmann::json j;
  in >> j;
  if (!j.contains("polygon") || !j.contains("points") || !j.contains("elements")) {
    throw std::invalid_argument("macro mesh file needs keys polygon, points, elements");
  }
  std::vector<Point2> poly_pts;
  for (const auto& p : j["polygon"]) poly_pts.push_back({p.at(0), p.at(1)});
  MacroMesh m{Polygon(std::move(poly_pts)), {}, {}};
  for (const auto& p : j["points"]) m.points.push_back({p.at(0), p.at(1)});
  for (const auto& e : j["elements"]) {
    MacroElement el;
    el.nv = static_cast<int>(e.size());
    if (el.nv != 3 && el.nv != 4) {
      throw std::invalid_argument("macro elements must list 3 or 4 point indices");
    }
    el.shape = (el.nv == 3) ? ElementShape::Triangle : ElementShape::Quad;
    for (int k = 0; k < el.nv; ++k) {
      const std::size_t vid = e.at(k);
      if (vid >= m.points.size()) {
        throw std::invalid_argument("macro element references unknown point " +
                                    std::to_string(vid));
      }
      el.v[k] = vid;
    }
    m.elements.push_back(el);
  }
  classify_macro(m);
  return m;
}

MacroMesh build_single_patch_macro(PatchKind kind) {
  const bool tri = (kind == PatchKind::Vertex || kind == PatchKind::VertexEdge);
  MacroMesh m{tri ? Polygon({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}}) : Polygon::unit_square(),
              {},
              {}};
  for (std::size_t v = 0; v < m.domain.num_vertices(); ++v) m.points.push_back(m.domain.vertex(v));
  MacroElement el;
  el.shape = tri ? ElementShape::Triangle : ElementShape::Quad;
  el.nv = tri ? 3 : 4;
  for (int k = 0; k < el.nv; ++k) el.v[k] = k;
  el.kind = kind;
  el.polygon_vertex = (kind == PatchKind::Vertex || kind == PatchKind::VertexEdge) ? 0 : no_index;
  el.polygon_edge = (kind == PatchKind::Edge || kind == PatchKind::VertexEdge) ? 0 : no_index;
  m.elements.push_back(el);
  return m;
}

namespace {

class PointIndexer {
 public:
  PointIndexer(std::vector<Point2>& pts, double tol) : pts_(pts), tol_(tol) {}

  int insert(Point2 p) {
    const long long ix = static_cast<long long>(std::floor(p.x / (4.0 * tol_)));
    const long long iy = static_cast<long long>(std::floor(p.y / (4.0 * tol_)));
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        const auto it = cells_.find(key(ix + dx, iy + dy));
        if (it == cells_.end()) continue;
        for (const int id : it->second) {
          if (dist(pts_[id], p) <= tol_) return id;
        }
      }
    }
    const int id = static_cast<int>(pts_.size());
    pts_.push_back(p);
    cells_[key(ix, iy)].push_back(id);
    return id;
  }

 private:
  static std::uint64_t key(long long ix, long long iy) {
    return (static_cast<std::uint64_t>(ix) << 32) ^ (static_cast<std::uint64_t>(iy) & 0xffffffffull);
  }
  std::vector<Point2>& pts_;
  double tol_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

ElementMap macro_map(const MacroMesh& macro, const MacroElement& el) {
  ElementMap f;
  const Point2 w0 = macro.points[el.v[0]];
  const Point2 w1 = macro.points[el.v[1]];
  const Point2 w2 = macro.points[el.v[2]];
  if (el.nv == 3) {
    f.c0 = w0;
    f.cx = w1 - w0;
    f.cy = w2 - w1;
    f.cxy = {0.0, 0.0};
  } else {
    const Point2 w3 = macro.points[el.v[3]];
    f.c0 = w0;
    f.cx = w1 - w0;
    f.cy = w3 - w0;
    f.cxy = (w0 - w1) + (w2 - w3);
  }
  return f;
}

ElementMap map_from_corners(ElementShape shape, const std::array<Point2, 4>& w) {
  ElementMap f;
  if (shape == ElementShape::Triangle) {
    f.c0 = w[0];
    f.cx = w[1] - w[0];
    f.cy = w[2] - w[1];
    f.cxy = {0.0, 0.0};
  } else {
    f.c0 = w[0];
    f.cx = w[1] - w[0];
    f.cy = w[3] - w[0];
    f.cxy = (w[0] - w[1]) + (w[2] - w[3]);
  }
  return f;
}

}  // namespace

GlobalMesh refine(const MacroMesh& macro, MeshParams params) {
  validate(params);
  GlobalMesh mesh{macro.domain, macro, params, {}, {}, {}};
  const double tol = mesh.boundary_tol();
  PointIndexer indexer(mesh.vertices, tol);

  for (std::size_t mid = 0; mid < macro.elements.size(); ++mid) {
    const MacroElement& mel = macro.elements[mid];
    const ElementMap F = macro_map(macro, mel);
    const RefPatch patch = build_reference_patch(mel.kind, params);
    for (const RefElement& re : patch.elements) {
      Element el;
      el.shape = re.shape;
      el.nv = (re.shape == ElementShape::Triangle) ? 3 : 4;
      std::array<Point2, 4> w{};
      for (int k = 0; k < el.nv; ++k) {
        // Map the pattern cell corner through the macro map. For quads this needs
        // the cell corners in the cell's own unit-square order, which make_rect
        // already produces, so the composite map below reproduces these corners.
        w[k] = F.apply(re.corners[k]);
        el.vids[k] = indexer.insert(w[k]);
        // Rebuild the corner from the deduplicated vertex table. Elements meeting
        // along an edge then carry bitwise identical endpoints, so their maps agree
        // exactly along the shared edge (both restrict to the same affine segment).
        w[k] = mesh.vertices[el.vids[k]];
      }
      el.macro_id = static_cast<int>(mid);
      el.patch_kind = mel.kind;
      el.layer_index = re.layer_index;
      el.col_index = re.col_index;
      el.patch_boundary = re.patch_boundary;
      if (re.shape == ElementShape::Triangle) {
        el.map = map_from_corners(ElementShape::Triangle, w);
        el.diam = tri_diam(w[0], w[1], w[2]);
      } else {
        el.map = map_from_corners(ElementShape::Quad, w);
        el.diam = std::max({dist(w[0], w[1]), dist(w[1], w[2]), dist(w[2], w[3]),
                            dist(w[3], w[0]), dist(w[0], w[2]), dist(w[1], w[3])});
      }
      el.h_par_ref = re.h_par;
      el.h_perp_ref = re.h_perp;
      mesh.elements.push_back(el);
    }
  }

  mesh.vertex_on_boundary.resize(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    mesh.vertex_on_boundary[i] = macro.domain.on_boundary(mesh.vertices[i], tol);
  }

  for (Element& el : mesh.elements) {
    el.corners_on_boundary = 0;
    el.sides_on_boundary = 0;
    for (int k = 0; k < el.nv; ++k) {
      if (mesh.vertex_on_boundary[el.vids[k]]) el.corners_on_boundary |= (1u << k);
    }
    for (int k = 0; k < el.nv; ++k) {
      const int k1 = (k + 1) % el.nv;
      if ((el.corners_on_boundary & (1u << k)) && (el.corners_on_boundary & (1u << k1))) {
        const Point2 mid = 0.5 * (mesh.vertices[el.vids[k]] + mesh.vertices[el.vids[k1]]);
        if (macro.domain.on_boundary(mid, tol)) el.sides_on_boundary |= (1u << k);
      }
    }
    el.layer = (el.corners_on_boundary != 0) ? Layer::L0 : Layer::Interior;
  }

  std::vector<bool> vertex_touches_l0(mesh.vertices.size(), false);
  for (const Element& el : mesh.elements) {
    if (el.layer != Layer::L0) continue;
    for (int k = 0; k < el.nv; ++k) vertex_touches_l0[el.vids[k]] = true;
  }
  for (Element& el : mesh.elements) {
    if (el.layer == Layer::L0) continue;
    for (int k = 0; k < el.nv; ++k) {
      if (vertex_touches_l0[el.vids[k]]) {
        el.layer = Layer::L1;
        break;
      }
    }
  }

  return mesh;
}

double GlobalMesh::element_area(int i) const {
  const Element& el = elements[i];
  double area2 = 0.0;
  for (int k = 0; k < el.nv; ++k) {
    area2 += cross(vertices[el.vids[k]], vertices[el.vids[(k + 1) % el.nv]]);
  }
  return 0.5 * std::abs(area2);
}

std::string check_conformity(const GlobalMesh& mesh) {
  const double tol = mesh.boundary_tol();
  std::map<std::pair<int, int>, int> side_count;
  for (const Element& el : mesh.elements) {
    for (int k = 0; k < el.nv; ++k) {
      int p = el.vids[k], q = el.vids[(k + 1) % el.nv];
      if (p > q) std::swap(p, q);
      ++side_count[{p, q}];
    }
  }
  for (const auto& [pq, count] : side_count) {
    if (count > 2) {
      return "side between vertices " + std::to_string(pq.first) + " and " +
             std::to_string(pq.second) + " is shared by more than two elements";
    }
    if (count == 1) {
      const Point2 a = mesh.vertices[pq.first];
      const Point2 b = mesh.vertices[pq.second];
      const bool on_domain_bd = mesh.domain.on_boundary(a, tol) &&
                                mesh.domain.on_boundary(b, tol) &&
                                mesh.domain.on_boundary(0.5 * (a + b), tol);
      if (!on_domain_bd) {
        return "interior side between vertices " + std::to_string(pq.first) + " and " +
               std::to_string(pq.second) + " borders only one element";
      }
    }
  }
  for (const Element& el : mesh.elements) {
    for (int k = 0; k < el.nv; ++k) {
      const Point2 a = mesh.vertices[el.vids[k]];
      const Point2 b = mesh.vertices[el.vids[(k + 1) % el.nv]];
      for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (static_cast<int>(v) == el.vids[k] || static_cast<int>(v) == el.vids[(k + 1) % el.nv]) {
          continue;
        }
        const Point2 p = mesh.vertices[v];
        if (point_segment_distance(p, a, b) <= tol && dist(p, a) > tol && dist(p, b) > tol) {
          return "vertex " + std::to_string(v) + " hangs inside a side of another element";
        }
      }
    }
  }
  return "";
}

CutoffFunction build_cutoff(const GlobalMesh& mesh) {
  CutoffFunction g;
  g.mesh = &mesh;
  g.vertex_values.assign(mesh.vertices.size(), 1.0);
  for (const Element& el : mesh.elements) {
    if (el.layer != Layer::L0) continue;
    for (int k = 0; k < el.nv; ++k) g.vertex_values[el.vids[k]] = 0.0;
  }
  return g;
}

double CutoffFunction::value(int elem, Point2 r) const {
  const Element& el = mesh->elements[elem];
  const auto& gv = vertex_values;
  if (el.shape == ElementShape::Triangle) {
    const auto lam = tri_barycentric(r);
    return gv[el.vids[0]] * lam[0] + gv[el.vids[1]] * lam[1] + gv[el.vids[2]] * lam[2];
  }
  const double x = r.x, y = r.y;
  return gv[el.vids[0]] * (1.0 - x) * (1.0 - y) + gv[el.vids[1]] * x * (1.0 - y) +
         gv[el.vids[2]] * x * y + gv[el.vids[3]] * (1.0 - x) * y;
}

Point2 CutoffFunction::gradient(int elem, Point2 r) const {
  const Element& el = mesh->elements[elem];
  const auto& gv = vertex_values;
  double dx, dy;
  if (el.shape == ElementShape::Triangle) {
    // g = g0 (1 - x) + g1 (x - y) + g2 y.
    dx = gv[el.vids[1]] - gv[el.vids[0]];
    dy = gv[el.vids[2]] - gv[el.vids[1]];
  } else {
    const double x = r.x, y = r.y;
    dx = (gv[el.vids[1]] - gv[el.vids[0]]) * (1.0 - y) + (gv[el.vids[2]] - gv[el.vids[3]]) * y;
    dy = (gv[el.vids[3]] - gv[el.vids[0]]) * (1.0 - x) + (gv[el.vids[2]] - gv[el.vids[1]]) * x;
  }
  Point2 jx, jy;
  el.map.jacobian(r, &jx, &jy);
  const double det = cross(jx, jy);
  // grad_phys = J^{-T} grad_ref with J columns (jx, jy).
  return {(jy.y * dx - jx.y * dy) / det, (-jy.x * dx + jx.x * dy) / det};
}

double max_cutoff_gradient(const CutoffFunction& g, Layer layer) {
  double best = 0.0;
  const GlobalMesh& mesh = *g.mesh;
  for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
    const Element& el = mesh.elements[i];
    if (el.layer != layer) continue;
    for (int a = 0; a <= 4; ++a) {
      for (int b = 0; b <= 4; ++b) {
        const double u = a / 4.0, v = b / 4.0;
        const Point2 r = (el.shape == ElementShape::Triangle) ? Point2{u, u * v} : Point2{u, v};
        best = std::max(best, norm(g.gradient(static_cast<int>(i), r)));
      }
    }
  }
  return best;
}

std::string mesh_report_json(const GlobalMesh& mesh) {
  nlohmann::json j;
  j["params"] = {{"sigma", mesh.params.sigma}, {"L", mesh.params.L}};
  j["num_vertices"] = mesh.vertices.size();
  j["num_elements"] = mesh.elements.size();
  j["num_macro_elements"] = mesh.macro.elements.size();

  std::map<std::string, int> by_kind, by_layer, by_shape;
  double area = 0.0;
  for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
    const Element& el = mesh.elements[i];
    ++by_kind[to_string(el.patch_kind)];
    ++by_layer[to_string(el.layer)];
    ++by_shape[el.shape == ElementShape::Triangle ? "triangle" : "quad"];
    area += mesh.element_area(static_cast<int>(i));
  }
  j["elements_by_patch_kind"] = by_kind;
  j["elements_by_layer"] = by_layer;
  j["elements_by_shape"] = by_shape;
  j["covered_area"] = area;
  j["domain_area"] = mesh.domain.area();
  j["coverage_residual"] = std::abs(area - mesh.domain.area());

  const std::string defect = check_conformity(mesh);
  j["conforming"] = defect.empty();
  if (!defect.empty()) j["conformity_defect"] = defect;

  nlohmann::json poly = nlohmann::json::array();
  for (const Point2& p : mesh.domain.vertices()) poly.push_back({p.x, p.y});
  j["polygon"] = poly;
  return j.dump(2);
}

namespace {

Rule1D make_graded_1d(int n, bool low, bool high, int levels) {
  if (low && high) return graded_gauss_both_ends(n, levels);
  if (low) return graded_gauss(n, levels);
  if (high) {
    Rule1D r = graded_gauss(n, levels);
    for (double& t : r.points) t = 1.0 - t;
    return r;
  }
  return gauss_legendre(n);
}

}  // namespace

std::vector<QuadPoint2D> element_quadrature(const Element& el, int n, int levels, bool graded) {
  bool x_lo = false, x_hi = false, y_lo = false, y_hi = false;
  if (graded) {
    if (el.shape == ElementShape::Quad) {
      if (el.sides_on_boundary & 0b0001) y_lo = true;
      if (el.sides_on_boundary & 0b0010) x_hi = true;
      if (el.sides_on_boundary & 0b0100) y_hi = true;
      if (el.sides_on_boundary & 0b1000) x_lo = true;
      if (el.sides_on_boundary == 0) {
        // Point contacts only: grade toward the touching corners.
        if (el.corners_on_boundary & 0b0001) x_lo = y_lo = true;
        if (el.corners_on_boundary & 0b0010) x_hi = y_lo = true;
        if (el.corners_on_boundary & 0b0100) x_hi = y_hi = true;
        if (el.corners_on_boundary & 0b1000) x_lo = y_hi = true;
      }
    } else {
      // Duffy coordinates (u, uv): side 0 is {v = 0}, side 1 is {u = 1},
      // side 2 is {v = 1}; the collapsed corner (0, 0) is {u = 0}.
      if (el.sides_on_boundary & 0b0001) { x_lo = true; y_lo = true; }
      if (el.sides_on_boundary & 0b0010) x_hi = true;
      if (el.sides_on_boundary & 0b0100) { x_lo = true; y_hi = true; }
      if (el.sides_on_boundary == 0 && (el.corners_on_boundary & 0b0001)) x_lo = true;
      if (el.sides_on_boundary == 0 && (el.corners_on_boundary & 0b0110)) x_hi = true;
    }
  }
  const Rule1D rx = make_graded_1d(n, x_lo, x_hi, levels);
  const Rule1D ry = make_graded_1d(n, y_lo, y_hi, levels);
  if (el.shape == ElementShape::Quad) return tensor_square(rx, ry);
  return duffy_triangle(rx, ry);
}

}  // namespace hpfrac
