#include "hpfrac/space.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>

namespace hpfrac {

namespace {

// Position-keyed dof lookup over a quantized grid, probing neighbor cells so that
// matching nodes from adjacent elements snap to one id despite roundoff.
class NodeIndexer {
 public:
  explicit NodeIndexer(double tol) : tol_(tol) {}

  int lookup_or_insert(Point2 p, std::vector<Point2>& positions) {
    const long long ix = static_cast<long long>(std::floor(p.x / (4.0 * tol_)));
    const long long iy = static_cast<long long>(std::floor(p.y / (4.0 * tol_)));
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        const auto it = cells_.find(key(ix + dx, iy + dy));
        if (it == cells_.end()) continue;
        for (const int id : it->second) {
          if (dist(positions[id], p) <= tol_) return id;
        }
      }
    }
    const int id = static_cast<int>(positions.size());
    positions.push_back(p);
    cells_[key(ix, iy)].push_back(id);
    return id;
  }

 private:
  static std::uint64_t key(long long ix, long long iy) {
    return (static_cast<std::uint64_t>(ix) << 32) ^
           (static_cast<std::uint64_t>(iy) & 0xffffffffull);
  }
  double tol_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

}  // namespace

HpSpace::HpSpace(const GlobalMesh& mesh, int q, bool constrain_boundary)
    : mesh_(&mesh), q_(q), constrained_(constrain_boundary) {
  if (q < 1) throw std::invalid_argument("HpSpace: degree must be at least 1");

  bool any_tri = false, any_quad = false;
  for (const Element& el : mesh.elements) {
    any_tri = any_tri || el.shape == ElementShape::Triangle;
    any_quad = any_quad || el.shape == ElementShape::Quad;
  }
  if (any_tri) tri_ = std::make_shared<TriBasis>(q);
  if (any_quad) quad_ = std::make_shared<QuadBasis>(q);

  const double tol = mesh.boundary_tol();
  NodeIndexer indexer(tol);
  std::vector<Point2> node_positions;
  std::vector<int> node_dof;  // -2 unseen, -1 constrained, otherwise dof id

  elem_dofs_.resize(mesh.elements.size());
  elem_nodes_.resize(mesh.elements.size());
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const Element& el = mesh.elements[e];
    const auto& ref_nodes = local_nodes(el);
    elem_dofs_[e].resize(ref_nodes.size());
    elem_nodes_[e].resize(ref_nodes.size());
    for (std::size_t i = 0; i < ref_nodes.size(); ++i) {
      const Point2 p = el.map.apply(ref_nodes[i]);
      elem_nodes_[e][i] = p;
      const int node = indexer.lookup_or_insert(p, node_positions);
      if (node == static_cast<int>(node_dof.size())) {
        int dof;
        if (constrained_ && mesh.domain.on_boundary(p, tol)) {
          dof = -1;
        } else {
          dof = num_dofs_++;
          dof_positions_.push_back(p);
        }
        node_dof.push_back(dof);
      }
      elem_dofs_[e][i] = node_dof[node];
    }
  }
}

double FeFunction::value(int elem, Point2 ref) const {
  const HpSpace& sp = *space;
  const Element& el = sp.mesh().elements[elem];
  const int nb = sp.local_size(el);
  std::vector<double> phi(nb);
  sp.local_values(el, ref, phi.data());
  const auto& dofs = sp.element_dofs(elem);
  double v = 0.0;
  for (int i = 0; i < nb; ++i) {
    if (dofs[i] >= 0) v += coeffs[dofs[i]] * phi[i];
  }
  return v;
}

double FeFunction::value_and_grad(int elem, Point2 ref, Point2* grad) const {
  const HpSpace& sp = *space;
  const Element& el = sp.mesh().elements[elem];
  const int nb = sp.local_size(el);
  std::vector<double> phi(nb), gx(nb), gy(nb);
  sp.local_values_and_grads(el, ref, phi.data(), gx.data(), gy.data());
  const auto& dofs = sp.element_dofs(elem);
  double v = 0.0, dx = 0.0, dy = 0.0;
  for (int i = 0; i < nb; ++i) {
    if (dofs[i] < 0) continue;
    const double c = coeffs[dofs[i]];
    v += c * phi[i];
    dx += c * gx[i];
    dy += c * gy[i];
  }
  Point2 jx, jy;
  el.map.jacobian(ref, &jx, &jy);
  const double det = cross(jx, jy);
  grad->x = (jy.y * dx - jx.y * dy) / det;
  grad->y = (-jy.x * dx + jx.x * dy) / det;
  return v;
}

FeFunction zero_function(const HpSpace& space) {
  return {&space, Eigen::VectorXd::Zero(space.num_dofs())};
}

FeFunction interpolate(const HpSpace& space, const std::function<double(Point2)>& f) {
  FeFunction u = zero_function(space);
  for (int d = 0; d < space.num_dofs(); ++d) u.coeffs[d] = f(space.dof_position(d));
  return u;
}

}  // namespace hpfrac
