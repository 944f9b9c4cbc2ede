#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

#include "hpfrac/basis.hpp"
#include "hpfrac/mesh.hpp"

namespace hpfrac {

// Continuous piecewise polynomial space of uniform degree q over a refined mesh.
// Global degrees of freedom are identified by matching physical node positions
// across elements; with constrain_boundary set, nodes on the domain boundary are
// eliminated (homogeneous Dirichlet data).
class HpSpace {
 public:
  HpSpace(const GlobalMesh& mesh, int q, bool constrain_boundary = true);

  const GlobalMesh& mesh() const { return *mesh_; }
  int degree() const { return q_; }
  bool constrained() const { return constrained_; }
  int num_dofs() const { return num_dofs_; }

  // Global dof id per local node of an element; -1 marks eliminated boundary nodes.
  const std::vector<int>& element_dofs(int elem) const { return elem_dofs_[elem]; }
  // Physical position of each local node.
  const std::vector<Point2>& element_nodes(int elem) const { return elem_nodes_[elem]; }
  Point2 dof_position(int dof) const { return dof_positions_[dof]; }

  const TriBasis& tri_basis() const { return *tri_; }
  const QuadBasis& quad_basis() const { return *quad_; }
  int local_size(const Element& el) const {
    return el.shape == ElementShape::Triangle ? tri_->size() : quad_->size();
  }
  const std::vector<Point2>& local_nodes(const Element& el) const {
    return el.shape == ElementShape::Triangle ? tri_->nodes() : quad_->nodes();
  }
  void local_values(const Element& el, Point2 ref, double* out) const {
    if (el.shape == ElementShape::Triangle) {
      tri_->values(ref, out);
    } else {
      quad_->values(ref, out);
    }
  }
  void local_values_and_grads(const Element& el, Point2 ref, double* val, double* gx,
                              double* gy) const {
    if (el.shape == ElementShape::Triangle) {
      tri_->values_and_grads(ref, val, gx, gy);
    } else {
      quad_->values_and_grads(ref, val, gx, gy);
    }
  }

 private:
  const GlobalMesh* mesh_;
  int q_;
  bool constrained_;
  int num_dofs_ = 0;
  std::shared_ptr<TriBasis> tri_;
  std::shared_ptr<QuadBasis> quad_;
  std::vector<std::vector<int>> elem_dofs_;
  std::vector<std::vector<Point2>> elem_nodes_;
  std::vector<Point2> dof_positions_;
};

struct FeFunction {
  const HpSpace* space = nullptr;
  Eigen::VectorXd coeffs;

  // Value at a reference point of an element; eliminated nodes contribute zero.
  double value(int elem, Point2 ref) const;
  // Value plus physical-space gradient.
  double value_and_grad(int elem, Point2 ref, Point2* grad) const;
};

FeFunction zero_function(const HpSpace& space);

// Nodal interpolant: dof values are the function values at the dof positions.
FeFunction interpolate(const HpSpace& space, const std::function<double(Point2)>& f);

}  // namespace hpfrac
