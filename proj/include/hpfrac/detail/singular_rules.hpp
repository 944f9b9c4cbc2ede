#pragma once

#include <vector>

#include "hpfrac/geometry.hpp"

// Quadrature tables of the touching-panel engine, exposed for direct testing.
// Each node carries abstract chart coordinates for the two sides and a weight;
// the weight convention is shared by all tables: the Gauss-Jacobi factor in
// the radial variable absorbs the collapse jacobian, and the lambda^(2s)
// factor folded into the weight compensates evaluating the kernel at the node
// instead of factoring out its homogeneous part. Consequently, at s = 1/2 the
// plain weight sums reproduce the chart product measures exactly.
namespace hpfrac::detail {

struct SingNode {
  Point2 xhat, yhat;
  double w;
};

// Triangle pair tables on T x T, T = {0 <= y <= x <= 1}: coincident = true
// gives the self-interaction table (contact on the diagonal, symmetric fold
// included), coincident = false the shared-edge table (both bottom edges
// matched, same traversal direction).
std::vector<SingNode> build_shuffle_table(int n, double s, bool coincident);

// Triangle pair sharing the corner (0, 0) of both copies of T.
std::vector<SingNode> build_vertex_table(int n, double s);

// Quadrilateral self-interaction on the unit square, difference coordinates;
// the symmetric quadrant fold is included, so the table is only valid when
// both sides carry the same chart of the same element.
std::vector<SingNode> build_rect_coincident_table(int n, double s);

// Quadrilateral pair sharing a full edge: side coordinates (t, a) and (tau, b)
// with the first axis along the shared edge (same direction on both sides)
// and the second pointing inward.
std::vector<SingNode> build_rect_edge_table(int n, double s);

}  // namespace hpfrac::detail
