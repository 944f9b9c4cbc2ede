#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hpfrac/geometry.hpp"
#include "hpfrac/quadrature.hpp"

namespace hpfrac {

enum class PatchKind { Trivial, Vertex, Edge, VertexEdge };
enum class ElementShape { Triangle, Quad };
enum class Layer { L0, L1, Interior };

std::string to_string(PatchKind kind);
std::string to_string(Layer layer);

struct MeshParams {
  double sigma = 0.5;
  int L = 0;
};

void validate(const MeshParams& params);

// One cell of a reference refinement pattern, in patch coordinates.
// Triangles live on T = {0 <= y <= x <= 1}, quads are axis-aligned rectangles.
struct RefElement {
  ElementShape shape;
  std::array<Point2, 4> corners;  // counterclockwise; triangles use [0..2]
  int layer_index = -1;           // scale index: perpendicular size ~ sigma^i
  int col_index = -1;             // column index for vertex-edge grids
  bool patch_boundary = false;    // touches the singular set of the pattern
  double h_par = 0.0, h_perp = 0.0;
};

struct RefPatch {
  PatchKind kind;
  MeshParams params;
  std::vector<RefElement> elements;
};

// Geometric refinement patterns toward the singular set:
//   Trivial:    unrefined unit square (params ignored);
//   Vertex:     2L+1 triangles on T graded toward (0, 0);
//   Edge:       L+1 rectangles on the unit square graded toward {y = 0};
//   VertexEdge: (L+1)(L+2)/2 cells on T graded toward (0,0) and {y = 0}.
RefPatch build_reference_patch(PatchKind kind, MeshParams params);

struct MacroElement {
  ElementShape shape;
  std::array<std::size_t, 4> v;  // indices into MacroMesh::points
  int nv = 0;
  PatchKind kind = PatchKind::Trivial;
  // Alignment after classification: for Vertex and VertexEdge the contact point is
  // local vertex 0; for Edge and VertexEdge the contact edge is (0, 1).
  std::size_t polygon_vertex = no_index;
  std::size_t polygon_edge = no_index;
};

struct MacroMesh {
  Polygon domain;
  std::vector<Point2> points;
  std::vector<MacroElement> elements;
};

// Presets: "square-fan" (unit square, 8 vertex-edge triangles fanned from the
// center) and "lshape-fan" (L-shaped domain, 12 vertex-edge triangles fanned
// from an interior kernel point).
MacroMesh build_macro_preset(const std::string& name);

// Macro mesh from a JSON file with keys "polygon", "points", "elements".
MacroMesh read_macro_file(const std::string& path);

// Assigns each macro element its patch kind from the contact between the element
// closure and the domain boundary, reorders local vertices into alignment, and
// validates coverage and conformity. Throws std::invalid_argument describing the
// first unsupported configuration found.
void classify_macro(MacroMesh& macro);

// Single reference patch as its own one-element macro (identity map); used by the
// patch interpolation studies. The domain polygon is the pattern's own cell.
MacroMesh build_single_patch_macro(PatchKind kind);

// Element map F(x, y) = c0 + x*cx + y*cy + x*y*cxy from the reference domain
// (the triangle T or the unit square) to physical space.
struct ElementMap {
  Point2 c0{}, cx{}, cy{}, cxy{};
  bool affine() const { return cxy.x == 0.0 && cxy.y == 0.0; }
  Point2 apply(Point2 r) const {
    return {c0.x + r.x * cx.x + r.y * cy.x + r.x * r.y * cxy.x,
            c0.y + r.x * cx.y + r.y * cy.y + r.x * r.y * cxy.y};
  }
  // Jacobian columns dF/dx, dF/dy at r.
  void jacobian(Point2 r, Point2* jx, Point2* jy) const {
    *jx = {cx.x + r.y * cxy.x, cx.y + r.y * cxy.y};
    *jy = {cy.x + r.x * cxy.x, cy.y + r.x * cxy.y};
  }
  double jacobian_det(Point2 r) const {
    Point2 jx, jy;
    jacobian(r, &jx, &jy);
    return cross(jx, jy);
  }
};

struct Element {
  ElementShape shape;
  std::array<int, 4> vids;  // global corner vertex ids
  int nv = 0;
  int macro_id = -1;
  PatchKind patch_kind = PatchKind::Trivial;
  int layer_index = -1;
  int col_index = -1;
  bool patch_boundary = false;
  Layer layer = Layer::Interior;
  ElementMap map;
  double h_par_ref = 0.0, h_perp_ref = 0.0;
  double diam = 0.0;
  // Bit k set when local side k (corners k, k+1 mod nv) lies on the domain boundary
  // or local corner k does; used to pick singularity-aware quadrature gradings.
  std::uint8_t sides_on_boundary = 0;
  std::uint8_t corners_on_boundary = 0;
};

struct GlobalMesh {
  Polygon domain;
  MacroMesh macro;
  MeshParams params;
  std::vector<Point2> vertices;
  std::vector<Element> elements;
  std::vector<bool> vertex_on_boundary;

  Point2 corner(const Element& e, int k) const { return vertices[e.vids[k]]; }
  double element_area(int i) const;
  double boundary_tol() const { return 1e-9 * domain.diameter(); }
};

GlobalMesh refine(const MacroMesh& macro, MeshParams params);

// Strong conformity test: every interior element edge is shared by exactly two
// elements with matching endpoints and no vertex lies strictly inside another
// element's edge. Returns a description of the first defect, or an empty string.
std::string check_conformity(const GlobalMesh& mesh);

// Piecewise linear (bilinear on quads) cutoff over the mesh: zero at every corner
// of every boundary-layer (L0) element, one at all other vertices. Identically
// zero on L0, identically one away from L0 u L1.
struct CutoffFunction {
  const GlobalMesh* mesh = nullptr;
  std::vector<double> vertex_values;

  double value(int elem, Point2 ref) const;
  // Physical-space gradient at a reference point of element elem.
  Point2 gradient(int elem, Point2 ref) const;
};

CutoffFunction build_cutoff(const GlobalMesh& mesh);

// Largest sampled |grad g| over elements with the given layer tag.
double max_cutoff_gradient(const CutoffFunction& g, Layer layer);

std::string mesh_report_json(const GlobalMesh& mesh);

// Quadrature on the element's reference domain with n points per direction.
// When graded is set, the rule is composited geometrically (ratio 1/2, the given
// number of levels) toward the sides and corners recorded as touching the domain
// boundary, which resolves boundary-singular integrands.
std::vector<QuadPoint2D> element_quadrature(const Element& el, int n, int levels, bool graded);

}  // namespace hpfrac
