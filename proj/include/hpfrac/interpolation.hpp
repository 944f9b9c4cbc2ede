#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hpfrac/space.hpp"

namespace hpfrac {

// Scalar field with gradient: f(p, grad_out) returns the value and, when grad_out
// is nonnull, writes the gradient.
using ScalarField = std::function<double(Point2, Point2*)>;

enum class WeightKind { None, VertexDist, EdgeDist, BoundaryDist };

// Cell range a norm integrates over.
enum class NormRegion {
  All,
  ExcludePatchBoundary,  // skip cells flagged as patch boundary layer
  OnlyL0L1,              // restrict to the two layers nearest the boundary
  ExcludeL0,             // everything but the boundary layer itself
};

struct NormConfig {
  double beta = 1.0;
  WeightKind weight = WeightKind::None;
  Point2 anchor{};           // VertexDist: distance to this point
  Point2 line_a{}, line_b{};  // EdgeDist: distance to the line through a and b
  NormRegion region = NormRegion::All;
  int order = 0;             // Gauss points per direction; 0 = q + 6
  int grading_levels = 12;   // used on cells touching the singular set
};

struct ErrorNorms {
  double l2_weighted = 0.0;  // || w^(beta-1) (u - u_h) ||_L2
  double h1_weighted = 0.0;  // || w^beta grad(u - u_h) ||_L2
  double total() const;
};

// Mesh-aware scalar field: evaluated per element at a reference point, with the
// matching physical point supplied; writes the physical gradient when grad_out
// is nonnull. Lets integrands combine finite element data with closed forms.
using ElementField = std::function<double(int elem, Point2 ref, Point2 phys, Point2* grad_out)>;

// Weighted L2/H1 norms of an element field over the configured cell range.
// default_order sets the Gauss points per direction when cfg.order is zero.
ErrorNorms weighted_field_norm(const GlobalMesh& mesh, const ElementField& f, int default_order,
                               const NormConfig& cfg);

// Weighted interpolation/approximation error between an exact field and a finite
// element function over the configured cell range.
ErrorNorms weighted_error(const HpSpace& space, const FeFunction& uh, const ScalarField& exact,
                          const NormConfig& cfg);

// Weighted norm of a finite element function (error against zero).
ErrorNorms weighted_norm(const HpSpace& space, const FeFunction& uh, const NormConfig& cfg);

// Model singular fields.
ScalarField vertex_model(double s);                         // |p|^s
ScalarField edge_model(double s);                           // y^s
ScalarField boundary_model(const Polygon& poly, double s);  // prod_e dist_e(p)^s

struct PatchStudyRow {
  PatchKind kind;
  double s, sigma, beta;
  int q, L;
  double l2_weighted, h1_weighted;
};

// Interpolation decay study on a single reference patch: for q = L = q_min..q_max,
// interpolate the kind's model singular function and measure the weighted error
// over the cells away from the patch boundary layer.
std::vector<PatchStudyRow> run_patch_study(PatchKind kind, double s, double sigma, double beta,
                                           int q_min, int q_max);

std::string patch_study_csv(const std::vector<PatchStudyRow>& rows);

}  // namespace hpfrac
