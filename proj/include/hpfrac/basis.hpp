#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

#include "hpfrac/geometry.hpp"

namespace hpfrac {

// Nodal Lagrange basis of degree q on [0, 1] over the Gauss-Lobatto-Legendre
// points, evaluated through barycentric interpolation.
class Lagrange1D {
 public:
  explicit Lagrange1D(int q);

  int degree() const { return q_; }
  const std::vector<double>& nodes() const { return nodes_; }

  // Values of all q + 1 basis functions at t.
  void values(double t, double* out) const;
  // Values and first derivatives of all basis functions at t.
  void values_and_derivs(double t, double* val, double* der) const;

 private:
  int q_;
  std::vector<double> nodes_;
  std::vector<double> bary_;  // barycentric weights
};

// Reference geometries:
//   triangle T = {(x, y) : 0 <= y <= x <= 1}, corners (0,0), (1,0), (1,1);
//   square   S = [0, 1]^2.
inline constexpr std::array<Point2, 3> ref_triangle_corners = {
    Point2{0.0, 0.0}, Point2{1.0, 0.0}, Point2{1.0, 1.0}};

// Barycentric coordinates on T with respect to its corners.
inline std::array<double, 3> tri_barycentric(Point2 p) {
  return {1.0 - p.x, p.x - p.y, p.y};
}

// Scalar polynomial basis of total degree q on the reference triangle, nodal over
// a symmetric point set whose restriction to each triangle edge is exactly the
// Gauss-Lobatto-Legendre point set of degree q. The nodal basis is obtained by
// inverting the Vandermonde matrix of an orthogonal modal basis.
class TriBasis {
 public:
  explicit TriBasis(int q);

  int degree() const { return q_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Point2>& nodes() const { return nodes_; }

  // Values of all basis functions at p (length size()).
  void values(Point2 p, double* out) const;
  // Values plus gradients with respect to (x, y).
  void values_and_grads(Point2 p, double* val, double* gx, double* gy) const;

  // Batched evaluation: returns a size() x npts matrix of basis values.
  Eigen::MatrixXd values_matrix(const Point2* pts, int npts) const;

  // 1-norm condition estimate of the generalized Vandermonde matrix.
  double vandermonde_condition() const { return cond_; }

  // Nodes lying on edge {y = 0}, ordered by increasing x.
  const std::vector<int>& bottom_edge_nodes() const { return bottom_nodes_; }

 private:
  void modal_values(Point2 p, double* out) const;
  void modal_values_and_grads(Point2 p, double* val, double* gx, double* gy) const;

  int q_;
  std::vector<Point2> nodes_;
  Eigen::MatrixXd coeff_;  // inverse transpose of the modal Vandermonde
  double cond_ = 0.0;
  std::vector<int> bottom_nodes_;
};

// Tensor-product nodal basis of degree q per direction on the reference square,
// over the GLL x GLL grid. Node ordering: index = iy * (q + 1) + ix.
class QuadBasis {
 public:
  explicit QuadBasis(int q);

  int degree() const { return q_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Point2>& nodes() const { return nodes_; }

  void values(Point2 p, double* out) const;
  void values_and_grads(Point2 p, double* val, double* gx, double* gy) const;
  Eigen::MatrixXd values_matrix(const Point2* pts, int npts) const;

 private:
  int q_;
  Lagrange1D line_;
  std::vector<Point2> nodes_;
};

}  // namespace hpfrac
