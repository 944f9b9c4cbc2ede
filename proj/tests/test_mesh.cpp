#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>

#include "hpfrac/basis.hpp"
#include "hpfrac/mesh.hpp"
#include "oracles.hpp"

using hpfrac::MeshParams;
using hpfrac::PatchKind;
using hpfrac::Point2;

namespace {

double ref_element_area(const hpfrac::RefElement& el) {
  if (el.shape == hpfrac::ElementShape::Triangle) {
    return 0.5 * std::abs(hpfrac::cross(el.corners[1] - el.corners[0], el.corners[2] - el.corners[0]));
  }
  return std::abs(hpfrac::cross(el.corners[1] - el.corners[0], el.corners[3] - el.corners[0]));
}

}  // namespace

TEST_CASE("reference patches have the advertised cell counts and cover the pattern") {
  for (double sigma : {0.25, 0.5}) {
    for (int L : {0, 1, 2, 4, 6}) {
      const MeshParams params{sigma, L};

      const auto vtx = hpfrac::build_reference_patch(PatchKind::Vertex, params);
      CHECK(vtx.elements.size() == static_cast<std::size_t>(2 * L + 1));
      double area = 0.0;
      for (const auto& el : vtx.elements) area += ref_element_area(el);
      CHECK(area == doctest::Approx(0.5).epsilon(1e-12));  // reference triangle

      const auto edge = hpfrac::build_reference_patch(PatchKind::Edge, params);
      CHECK(edge.elements.size() == static_cast<std::size_t>(L + 1));
      area = 0.0;
      for (const auto& el : edge.elements) area += ref_element_area(el);
      CHECK(area == doctest::Approx(1.0).epsilon(1e-12));  // unit square

      const auto ve = hpfrac::build_reference_patch(PatchKind::VertexEdge, params);
      CHECK(ve.elements.size() == static_cast<std::size_t>((L + 1) * (L + 2) / 2));
      area = 0.0;
      for (const auto& el : ve.elements) area += ref_element_area(el);
      CHECK(area == doctest::Approx(0.5).epsilon(1e-12));

      const auto triv = hpfrac::build_reference_patch(PatchKind::Trivial, params);
      CHECK(triv.elements.size() == 1);
    }
  }
  CHECK_THROWS(hpfrac::build_reference_patch(PatchKind::Vertex, MeshParams{0.5, -1}));
  CHECK_THROWS(hpfrac::build_reference_patch(PatchKind::Vertex, MeshParams{1.5, 2}));
}

TEST_CASE("edge pattern grades geometrically with exact ratio sigma") {
  for (double sigma : {0.25, 0.5}) {
    const int L = 5;
    const auto edge = hpfrac::build_reference_patch(PatchKind::Edge, MeshParams{sigma, L});

    // Sort by distance of the lower side from {y = 0}. The boundary cell has
    // height exactly sigma^L; above it the heights decay with exact ratio
    // sigma toward the edge.
    std::vector<const hpfrac::RefElement*> cells;
    for (const auto& el : edge.elements) cells.push_back(&el);
    std::sort(cells.begin(), cells.end(), [](const auto* a, const auto* b) {
      return a->corners[0].y < b->corners[0].y;
    });
    CHECK(cells.front()->corners[0].y == doctest::Approx(0.0).scale(1.0));
    CHECK(cells.front()->h_perp == doctest::Approx(std::pow(sigma, L)).epsilon(1e-12));
    for (std::size_t i = 1; i + 1 < cells.size(); ++i) {
      CHECK(cells[i]->h_perp / cells[i + 1]->h_perp == doctest::Approx(sigma).epsilon(1e-12));
    }
    // The recorded scale index counts layers from the boundary.
    CHECK(cells.front()->layer_index == L);
    CHECK(cells.back()->layer_index == 0);
    CHECK(cells.front()->patch_boundary);
    CHECK_FALSE(cells.back()->patch_boundary);
  }
}

TEST_CASE("vertex pattern clusters toward the corner with ratio sigma") {
  const double sigma = 0.5;
  const int L = 4;
  const auto vtx = hpfrac::build_reference_patch(PatchKind::Vertex, MeshParams{sigma, L});
  // Group the triangles by scale: the largest corner norm within a layer must
  // decay with exact ratio sigma from layer to layer.
  std::map<int, double> scale_by_layer;
  for (const auto& el : vtx.elements) {
    double r = 0.0;
    for (int k = 0; k < 3; ++k) r = std::max(r, hpfrac::norm(el.corners[k]));
    REQUIRE(el.layer_index >= 0);
    auto [it, fresh] = scale_by_layer.insert({el.layer_index, r});
    if (!fresh) it->second = std::max(it->second, r);
  }
  REQUIRE(scale_by_layer.size() == static_cast<std::size_t>(L + 1));
  for (int i = 0; i < L; ++i) {
    CHECK(scale_by_layer[i + 1] / scale_by_layer[i] == doctest::Approx(sigma).epsilon(1e-12));
  }
}

TEST_CASE("macro presets classify and refine into conforming meshes") {
  struct Preset {
    const char* name;
    std::size_t macro_elems;
  };
  for (const Preset ps : {Preset{"square-fan", 8}, Preset{"lshape-fan", 12}}) {
    hpfrac::MacroMesh macro = hpfrac::build_macro_preset(ps.name);
    CHECK(macro.elements.size() == ps.macro_elems);
    for (const auto& me : macro.elements) {
      CHECK(me.kind == PatchKind::VertexEdge);
      CHECK(me.polygon_vertex != hpfrac::no_index);
      CHECK(me.polygon_edge != hpfrac::no_index);
    }

    for (double sigma : {0.25, 0.5}) {
      for (int L : {1, 3, 6}) {
        const hpfrac::GlobalMesh mesh = hpfrac::refine(macro, MeshParams{sigma, L});
        CHECK(check_conformity(mesh).empty());

        double area = 0.0;
        for (std::size_t e = 0; e < mesh.elements.size(); ++e) area += mesh.element_area(static_cast<int>(e));
        CHECK(area == doctest::Approx(mesh.domain.area()).epsilon(1e-10));

        // Vertex flags match an independent boundary test.
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
          CHECK(mesh.vertex_on_boundary[v] ==
                mesh.domain.on_boundary(mesh.vertices[v], mesh.boundary_tol()));
        }

        // Perpendicular scales decay with ratio sigma toward the boundary:
        // group elements of one macro cell by layer_index and compare h_perp_ref.
        std::map<std::pair<int, int>, double> h_by_layer;
        for (const auto& el : mesh.elements) {
          if (el.macro_id != 0 || el.layer_index < 0) continue;
          auto [it, fresh] = h_by_layer.insert({{el.macro_id, el.layer_index}, el.h_perp_ref});
          if (!fresh) it->second = std::min(it->second, el.h_perp_ref);
        }
        for (int i = 1; i + 1 < L; ++i) {
          const auto a = h_by_layer.find({0, i}), b = h_by_layer.find({0, i + 1});
          if (a == h_by_layer.end() || b == h_by_layer.end()) continue;
          CHECK(b->second / a->second == doctest::Approx(sigma).epsilon(1e-12));
        }
      }
    }
  }
  CHECK_THROWS(hpfrac::build_macro_preset("no-such-preset"));
}

TEST_CASE("element maps reproduce corners and report consistent areas") {
  const hpfrac::MacroMesh macro = hpfrac::build_macro_preset("square-fan");
  const hpfrac::GlobalMesh mesh = hpfrac::refine(macro, MeshParams{0.5, 3});
  const std::array<Point2, 4> sq_ref{Point2{0, 0}, Point2{1, 0}, Point2{1, 1}, Point2{0, 1}};
  for (const auto& el : mesh.elements) {
    const auto& ref =
        el.shape == hpfrac::ElementShape::Triangle
            ? std::array<Point2, 4>{hpfrac::ref_triangle_corners[0], hpfrac::ref_triangle_corners[1],
                                    hpfrac::ref_triangle_corners[2], Point2{}}
            : sq_ref;
    for (int k = 0; k < el.nv; ++k) {
      const Point2 mapped = el.map.apply(ref[k]);
      const Point2 corner = mesh.vertices[el.vids[k]];
      CHECK(mapped.x == doctest::Approx(corner.x).epsilon(1e-13).scale(1.0));
      CHECK(mapped.y == doctest::Approx(corner.y).epsilon(1e-13).scale(1.0));
    }
    CHECK(el.map.jacobian_det({0.3, 0.2}) > 0.0);
    CHECK(el.diam > 0.0);
  }
}

TEST_CASE("refine rejects invalid parameters") {
  const hpfrac::MacroMesh macro = hpfrac::build_macro_preset("square-fan");
  CHECK_THROWS(hpfrac::refine(macro, MeshParams{0.0, 2}));
  CHECK_THROWS(hpfrac::refine(macro, MeshParams{1.0, 2}));
  CHECK_THROWS(hpfrac::refine(macro, MeshParams{0.5, -1}));
}

TEST_CASE("macro file IO round trips and classification validates contact") {
  const hpfrac::MacroMesh macro = hpfrac::build_macro_preset("lshape-fan");

  // Serialize by hand in the documented JSON schema.
  const char* path = "macro_roundtrip.json";
  {
    std::ofstream f(path);
    f << std::setprecision(17);
    f << "{\n  \"polygon\": [";
    for (std::size_t v = 0; v < macro.domain.num_vertices(); ++v) {
      f << (v ? ", " : "") << "[" << macro.domain.vertex(v).x << ", " << macro.domain.vertex(v).y
        << "]";
    }
    f << "],\n  \"points\": [";
    for (std::size_t p = 0; p < macro.points.size(); ++p) {
      f << (p ? ", " : "") << "[" << macro.points[p].x << ", " << macro.points[p].y << "]";
    }
    f << "],\n  \"elements\": [";
    for (std::size_t e = 0; e < macro.elements.size(); ++e) {
      const auto& me = macro.elements[e];
      f << (e ? ", " : "") << "[";
      for (int k = 0; k < me.nv; ++k) f << (k ? ", " : "") << me.v[k];
      f << "]";
    }
    f << "]\n}\n";
  }
  const hpfrac::MacroMesh back = hpfrac::read_macro_file(path);
  std::remove(path);
  CHECK(back.elements.size() == macro.elements.size());
  CHECK(back.domain.area() == doctest::Approx(macro.domain.area()).epsilon(1e-12));
  const hpfrac::GlobalMesh mesh = hpfrac::refine(back, MeshParams{0.5, 2});
  CHECK(check_conformity(mesh).empty());
}

TEST_CASE("cutoff vanishes on the boundary layer and is one past the collar") {
  const hpfrac::MacroMesh macro = hpfrac::build_macro_preset("square-fan");
  for (int L : {2, 4}) {
    const hpfrac::GlobalMesh mesh = hpfrac::refine(macro, MeshParams{0.5, L});
    const hpfrac::CutoffFunction g = hpfrac::build_cutoff(mesh);

    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
      const auto& el = mesh.elements[e];
      for (int i = 0; i < 12; ++i) {
        const Point2 h = oracles::halton2(i);
        const Point2 ref = el.shape == hpfrac::ElementShape::Triangle
                               ? Point2{h.x, h.x * h.y}
                               : Point2{h.x, h.y};
        const double val = g.value(static_cast<int>(e), ref);
        if (el.layer == hpfrac::Layer::L0) {
          CHECK(val == doctest::Approx(0.0).scale(1.0));
        } else if (el.layer == hpfrac::Layer::Interior) {
          CHECK(val == doctest::Approx(1.0));
          const Point2 grad = g.gradient(static_cast<int>(e), ref);
          CHECK(hpfrac::norm(grad) == doctest::Approx(0.0).scale(1.0));
        } else {
          CHECK(val >= -1e-12);
          CHECK(val <= 1.0 + 1e-12);
        }
      }
    }

    // The L1 gradient scales like the inverse of the thinnest collar width.
    const double g1 = hpfrac::max_cutoff_gradient(g, hpfrac::Layer::L1);
    CHECK(g1 > 1.0);
    const double width_scale = std::pow(0.5, L);
    CHECK(g1 * width_scale > 0.05);
    CHECK(g1 * width_scale < 50.0);
    CHECK(hpfrac::max_cutoff_gradient(g, hpfrac::Layer::Interior) ==
          doctest::Approx(0.0).scale(1.0));
  }
}

TEST_CASE("mesh report JSON carries the headline counts") {
  const hpfrac::MacroMesh macro = hpfrac::build_macro_preset("square-fan");
  const hpfrac::GlobalMesh mesh = hpfrac::refine(macro, MeshParams{0.5, 2});
  const std::string json = hpfrac::mesh_report_json(mesh);
  CHECK(json.find("\"num_elements\"") != std::string::npos);
  CHECK(json.find("\"conforming\"") != std::string::npos);
  CHECK(json.find("\"coverage_residual\"") != std::string::npos);
}

TEST_CASE("element quadrature integrates boundary-singular factors when graded") {
  // Pick an edge-layer quad of the square fan whose bottom side lies on the
  // domain boundary, and integrate dist(x, boundary)^(-0.4) over it. The graded
  // rule must agree with a dense reference; the plain rule must not be better.
  const hpfrac::MacroMesh macro = hpfrac::build_macro_preset("square-fan");
  const hpfrac::GlobalMesh mesh = hpfrac::refine(macro, MeshParams{0.5, 2});
  int pick = -1;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    if (mesh.elements[e].sides_on_boundary != 0 &&
        mesh.elements[e].shape == hpfrac::ElementShape::Quad) {
      pick = static_cast<int>(e);
      break;
    }
  }
  if (pick < 0) {
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
      if (mesh.elements[e].sides_on_boundary != 0) {
        pick = static_cast<int>(e);
        break;
      }
    }
  }
  REQUIRE(pick >= 0);
  const auto& el = mesh.elements[pick];

  const auto integrate = [&](const std::vector<hpfrac::QuadPoint2D>& rule) {
    double acc = 0.0;
    for (const auto& qp : rule) {
      const Point2 x = el.map.apply({qp.x, qp.y});
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t ed = 0; ed < mesh.domain.num_edges(); ++ed) {
        d = std::min(d, hpfrac::point_segment_distance(x, mesh.domain.edge_start(ed),
                                                       mesh.domain.edge_end(ed)));
      }
      acc += qp.w * std::abs(el.map.jacobian_det({qp.x, qp.y})) * std::pow(d, -0.4);
    }
    return acc;
  };

  const double coarse = integrate(hpfrac::element_quadrature(el, 6, 8, true));
  const double fine = integrate(hpfrac::element_quadrature(el, 12, 24, true));
  const double plain = integrate(hpfrac::element_quadrature(el, 12, 0, false));
  CHECK(coarse == doctest::Approx(fine).epsilon(1e-6));
  CHECK(std::abs(plain - fine) > std::abs(coarse - fine));
}
