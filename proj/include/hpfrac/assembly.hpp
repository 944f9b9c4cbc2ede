#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "hpfrac/space.hpp"

namespace hpfrac {

// Normalization constant of the planar integral fractional Laplacian,
//   C(s) = 2^(2s) sin(pi s) Gamma(1 + s)^2 / pi^2,
// positive for s in (0, 1); C(1/2) = 1 / (2 pi).
double normalization_constant(double s);

// kappa(x) = C(s) * integral over the polygon complement of |x - z|^(-2-2s) dz
// for x inside the polygon, evaluated through the equivalent boundary integral
//   kappa(x) = C(s)/(2s) * sum_e d_e(x) * integral_e |z - x|^(-2-2s) ds(z),
// where d_e is the distance from x to the line carrying edge e. Each edge
// integral uses a composite Gauss rule with `order` points per cell, graded
// toward the point of the edge nearest to x.
double kappa_value(const Polygon& poly, double s, Point2 x, int order = 8);

struct QuadConfig {
  int far_order = 5;          // Gauss points per direction on well separated panels
  int sing_order = 0;         // points per direction in the singular engine; 0 = q+2, clamped to [6, 12]
  int grading_levels = 6;     // dyadic refinement depth cap for close but disjoint panels
  double aniso_split = 4.0;   // panels of touching pairs are split above this aspect ratio
  double admissibility = 0.5; // dist / max diam above which a panel pair is well separated
  int kappa_order = 0;        // points per direction for the complement mass term; 0 = q+4
  int rhs_order = 0;          // points per direction for the load vector; 0 = q+4

  void validate() const;
  int resolve_sing_order(int q) const;
};

struct AssemblyStats {
  long long element_pairs = 0;
  long long far_subpairs = 0;
  long long sing_coincident = 0;
  long long sing_edge = 0;
  long long sing_vertex = 0;
  long long far_points = 0;
  long long sing_points = 0;
  int sing_order = 0;
  std::string kernel;  // kernel fill variant used for far-field interactions
};

// Dense symmetric Galerkin matrix of
//   a(u, v) = C/2 * double integral of (u(x)-u(z))(v(x)-v(z)) |x-z|^(-2-2s)
//           + integral of u v kappa
// over the unconstrained dofs of the space. Touching element pairs run through
// the singular quadrature engine; separated pairs use tensor rules with
// distance-based dyadic refinement.
Eigen::MatrixXd assemble_matrix(const HpSpace& space, double s, const QuadConfig& cfg = {},
                                int threads = 1, AssemblyStats* stats = nullptr);

// Load vector (f, v) over the unconstrained dofs.
Eigen::VectorXd assemble_rhs(const HpSpace& space, const std::function<double(Point2)>& f,
                             const QuadConfig& cfg = {});

// Raw interaction block of one ordered element pair, for tests and diagnostics:
//   B(a, b) = double integral over K1 x K2 of
//             (phi_a(x) - phi_a(z)) (phi_b(x) - phi_b(z)) |x - z|^(-2-2s) dz dx
// over the union of unconstrained dofs of the two elements, without the C/2
// factor and without the mirrored (K2, K1) order. union_dofs, when nonnull,
// receives the global dof id of each row.
Eigen::MatrixXd pair_interaction_block(const HpSpace& space, int e1, int e2, double s,
                                       const QuadConfig& cfg = {},
                                       std::vector<int>* union_dofs = nullptr);

}  // namespace hpfrac
