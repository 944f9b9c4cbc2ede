#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hpfrac/assembly.hpp"
#include "hpfrac/interpolation.hpp"

namespace hpfrac {

struct SolveResult {
  Eigen::VectorXd coeffs;
  double energy = 0.0;        // b . x, the discrete energy of the solution
  double residual_rel = 0.0;  // |A x - b| / |b|
  bool spd_ok = false;        // Cholesky succeeded (matrix numerically SPD)
  std::string method;
};

// Direct dense symmetric positive definite solve. Uses LAPACK when available,
// falls back to Eigen's Cholesky, and to conjugate gradients if factorization
// fails (spd_ok then reports false).
SolveResult solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

// Least squares fit of log(err) against n^p; r2 is the coefficient of
// determination of that line.
struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

FitResult fit_log_vs_pow(const std::vector<double>& n, const std::vector<double>& err, double p);

struct StudyConfig {
  std::string preset = "square-fan";  // ignored when macro_path is set
  std::string macro_path;
  double s = 0.5;
  double sigma = 0.5;
  int min_level = 1;
  int max_level = 5;
  int ref_level = 0;  // 0 picks max_level + 2
  std::function<double(Point2)> rhs;  // defaults to the constant 1
  QuadConfig quad;
  int threads = 1;
};

struct StudyRow {
  int level = 0;
  int q = 0;
  int ndofs = 0;
  double energy = 0.0;
  double err_energy = 0.0;  // sqrt(reference energy - energy)
  double residual_rel = 0.0;
  double wall_s = 0.0;
};

struct StudyResult {
  double s = 0.0, sigma = 0.0;
  std::vector<StudyRow> rows;
  int ref_level = 0;
  int ref_ndofs = 0;
  double ref_energy = 0.0;
  double ref_wall_s = 0.0;
  FitResult fit;  // log err_energy against ndofs^(1/4)
};

// Energy convergence sweep: solves with q = L for each level, then measures
// errors against a deeper reference discretization in the energy norm, where
// Galerkin orthogonality turns energy differences into squared errors.
StudyResult convergence_study(const StudyConfig& cfg);

std::string study_csv(const StudyResult& result);
std::string study_json(const StudyResult& result);

struct CutoffCheckConfig {
  std::string preset = "square-fan";
  double s = 0.5;       // sets the model field and the weight exponent
  double sigma = 0.5;
  int q = 2;
  int min_level = 2;
  int max_level = 6;
  int nsamples = 10;
  unsigned long long seed = 1u;
};

struct CutoffLevelRow {
  int level = 0;
  // Stability ratios of the cutoff splitting w = g w + (1 - g) w in the
  // weighted H1 norm, over random finite element functions w: near / whole for
  // the (1 - g) part on the two boundary layers, scaled / whole for g w.
  double ratio_min = 0.0, ratio_med = 0.0, ratio_max = 0.0;
  double grad_max = 0.0;  // largest cutoff gradient over the L1 ring
  double tail = 0.0;      // weighted H1 norm of (1 - g) times the model field
};

struct CutoffCheckResult {
  std::vector<CutoffLevelRow> rows;
  double spread = 0.0;  // max over levels of ratio_med divided by its min
  FitResult tail_fit;   // log tail against level
};

// Level sweep checking that multiplication by the mesh cutoff is uniformly
// stable in weighted norms and that the near-boundary remainder of the model
// singular field decays geometrically with the number of layers.
CutoffCheckResult cutoff_decomposition_check(const CutoffCheckConfig& cfg);

}  // namespace hpfrac
