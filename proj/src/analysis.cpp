#include "hpfrac/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/IterativeLinearSolvers>

#ifdef HPFRAC_HAVE_LAPACKE
#include <lapacke.h>
#endif

namespace hpfrac {

SolveResult solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  if (A.rows() != A.cols() || A.rows() != b.size()) {
    throw std::invalid_argument("solve_spd: dimension mismatch");
  }
  SolveResult res;
  bool solved = false;

#ifdef HPFRAC_HAVE_LAPACKE
  {
    Eigen::MatrixXd F = A;  // factor a copy; the original is kept for the residual
    const auto n = static_cast<lapack_int>(A.rows());
    const lapack_int info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, F.data(), n);
    if (info == 0) {
      res.coeffs = b;
      if (LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', n, 1, F.data(), n, res.coeffs.data(), n) == 0) {
        res.method = "lapack-cholesky";
        res.spd_ok = true;
        solved = true;
      }
    }
  }
#endif

  if (!solved) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      res.coeffs = llt.solve(b);
      res.method = "eigen-cholesky";
      res.spd_ok = true;
      solved = true;
    }
  }

  if (!solved) {
    Eigen::ConjugateGradient<Eigen::MatrixXd, Eigen::Lower | Eigen::Upper> cg;
    cg.setMaxIterations(20000);
    cg.setTolerance(1e-13);
    cg.compute(A);
    res.coeffs = cg.solve(b);
    res.method = "conjugate-gradient";
    res.spd_ok = false;
  }

  res.energy = b.dot(res.coeffs);
  const double bn = b.norm();
  const double rn = (A * res.coeffs - b).norm();
  res.residual_rel = bn > 0.0 ? rn / bn : rn;
  return res;
}

FitResult fit_log_vs_pow(const std::vector<double>& n, const std::vector<double>& err, double p) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n.size() && i < err.size(); ++i) {
    if (err[i] > 0.0 && n[i] > 0.0) {
      xs.push_back(std::pow(n[i], p));
      ys.push_back(std::log(err[i]));
    }
  }
  FitResult fit;
  const std::size_t m = xs.size();
  if (m < 2) return fit;

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy <= 0.0) {
    fit.r2 = 1.0;
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
      ss_res += r * r;
    }
    fit.r2 = 1.0 - ss_res / syy;
  }
  return fit;
}

StudyResult convergence_study(const StudyConfig& cfg) {
  if (cfg.min_level < 1 || cfg.max_level < cfg.min_level) {
    throw std::invalid_argument("study: levels must satisfy 1 <= min_level <= max_level");
  }
  const int ref_level = cfg.ref_level > 0 ? cfg.ref_level : cfg.max_level + 2;
  if (ref_level <= cfg.max_level) {
    throw std::invalid_argument("study: the reference level must exceed max_level");
  }
  const MacroMesh macro =
      cfg.macro_path.empty() ? build_macro_preset(cfg.preset) : read_macro_file(cfg.macro_path);
  const std::function<double(Point2)> rhs =
      cfg.rhs ? cfg.rhs : std::function<double(Point2)>([](Point2) { return 1.0; });

  StudyResult out;
  out.s = cfg.s;
  out.sigma = cfg.sigma;
  out.ref_level = ref_level;

  auto solve_level = [&](int level, int* ndofs, double* wall, double* resid) {
    MeshParams mp;
    mp.sigma = cfg.sigma;
    mp.L = level;
    const GlobalMesh mesh = refine(macro, mp);
    const HpSpace space(mesh, std::max(1, level), true);
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::MatrixXd A = assemble_matrix(space, cfg.s, cfg.quad, cfg.threads);
    const Eigen::VectorXd b = assemble_rhs(space, rhs, cfg.quad);
    const SolveResult sol = solve_spd(A, b);
    const auto t1 = std::chrono::steady_clock::now();
    if (!sol.spd_ok) {
      throw std::runtime_error("study: stiffness matrix failed the Cholesky factorization");
    }
    *ndofs = space.num_dofs();
    *wall = std::chrono::duration<double>(t1 - t0).count();
    *resid = sol.residual_rel;
    return sol.energy;
  };

  double ref_resid = 0.0;
  out.ref_energy = solve_level(ref_level, &out.ref_ndofs, &out.ref_wall_s, &ref_resid);

  std::vector<double> ns, errs;
  for (int level = cfg.min_level; level <= cfg.max_level; ++level) {
    StudyRow row;
    row.level = level;
    row.q = std::max(1, level);
    row.energy = solve_level(level, &row.ndofs, &row.wall_s, &row.residual_rel);
    row.err_energy = std::sqrt(std::max(out.ref_energy - row.energy, 0.0));
    ns.push_back(static_cast<double>(row.ndofs));
    errs.push_back(row.err_energy);
    out.rows.push_back(row);
  }
  out.fit = fit_log_vs_pow(ns, errs, 0.25);
  return out;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::string study_csv(const StudyResult& result) {
  std::ostringstream os;
  os << "level,q,ndofs,energy,err_energy,residual_rel,wall_s\n";
  for (const StudyRow& r : result.rows) {
    os << r.level << ',' << r.q << ',' << r.ndofs << ',' << fmt(r.energy) << ','
       << fmt(r.err_energy) << ',' << fmt(r.residual_rel) << ',' << fmt(r.wall_s) << '\n';
  }
  return os.str();
}

std::string study_json(const StudyResult& result) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"s\": " << fmt(result.s) << ",\n";
  os << "  \"sigma\": " << fmt(result.sigma) << ",\n";
  os << "  \"ref_level\": " << result.ref_level << ",\n";
  os << "  \"ref_ndofs\": " << result.ref_ndofs << ",\n";
  os << "  \"ref_energy\": " << fmt(result.ref_energy) << ",\n";
  os << "  \"ref_wall_s\": " << fmt(result.ref_wall_s) << ",\n";
  os << "  \"fit\": {\"slope\": " << fmt(result.fit.slope)
     << ", \"intercept\": " << fmt(result.fit.intercept) << ", \"r2\": " << fmt(result.fit.r2)
     << "},\n";
  os << "  \"rows\": [\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const StudyRow& r = result.rows[i];
    os << "    {\"level\": " << r.level << ", \"q\": " << r.q << ", \"ndofs\": " << r.ndofs
       << ", \"energy\": " << fmt(r.energy) << ", \"err_energy\": " << fmt(r.err_energy)
       << ", \"residual_rel\": " << fmt(r.residual_rel) << ", \"wall_s\": " << fmt(r.wall_s)
       << '}' << (i + 1 < result.rows.size() ? "," : "") << '\n';
  }
  os << "  ]\n}\n";
  return os.str();
}

CutoffCheckResult cutoff_decomposition_check(const CutoffCheckConfig& cfg) {
  if (cfg.min_level < 1 || cfg.max_level < cfg.min_level) {
    throw std::invalid_argument("cutoff check: levels must satisfy 1 <= min_level <= max_level");
  }
  if (cfg.nsamples < 1) throw std::invalid_argument("cutoff check: nsamples must be positive");
  const MacroMesh macro = build_macro_preset(cfg.preset);
  const double beta = 0.75;

  CutoffCheckResult out;
  std::vector<double> levels, tails;

  for (int level = cfg.min_level; level <= cfg.max_level; ++level) {
    MeshParams mp;
    mp.sigma = cfg.sigma;
    mp.L = level;
    const GlobalMesh mesh = refine(macro, mp);
    const HpSpace space(mesh, cfg.q, false);
    const CutoffFunction g = build_cutoff(mesh);

    NormConfig near_cfg;
    near_cfg.beta = beta;
    near_cfg.weight = WeightKind::BoundaryDist;
    near_cfg.region = NormRegion::OnlyL0L1;
    near_cfg.grading_levels = std::max(12, level + 4);
    NormConfig all_cfg = near_cfg;
    all_cfg.region = NormRegion::All;

    std::mt19937_64 rng(cfg.seed * 1000003ull + static_cast<unsigned long long>(level));
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> ratios;
    for (int sample = 0; sample < cfg.nsamples; ++sample) {
      FeFunction w = zero_function(space);
      for (int i = 0; i < space.num_dofs(); ++i) w.coeffs[i] = gauss(rng);

      // (1 - g) w lives on the two boundary layers; compare it against w there.
      const ElementField near_field = [&](int elem, Point2 ref, Point2, Point2* grad) {
        Point2 gw{};
        const double vw = w.value_and_grad(elem, ref, grad ? &gw : nullptr);
        const double vg = g.value(elem, ref);
        if (grad) {
          const Point2 gg = g.gradient(elem, ref);
          grad->x = (1.0 - vg) * gw.x - gg.x * vw;
          grad->y = (1.0 - vg) * gw.y - gg.y * vw;
        }
        return (1.0 - vg) * vw;
      };
      const ElementField w_field = [&](int elem, Point2 ref, Point2, Point2* grad) {
        return w.value_and_grad(elem, ref, grad);
      };
      const ElementField gw_field = [&](int elem, Point2 ref, Point2, Point2* grad) {
        Point2 gw{};
        const double vw = w.value_and_grad(elem, ref, grad ? &gw : nullptr);
        const double vg = g.value(elem, ref);
        if (grad) {
          const Point2 gg = g.gradient(elem, ref);
          grad->x = vg * gw.x + gg.x * vw;
          grad->y = vg * gw.y + gg.y * vw;
        }
        return vg * vw;
      };

      const int order = cfg.q + 6;
      const double near_part = weighted_field_norm(mesh, near_field, order, near_cfg).total();
      const double near_whole = weighted_field_norm(mesh, w_field, order, near_cfg).total();
      const double scaled = weighted_field_norm(mesh, gw_field, order, all_cfg).total();
      const double whole = weighted_field_norm(mesh, w_field, order, all_cfg).total();
      const double r_near = near_whole > 0.0 ? near_part / near_whole : 0.0;
      const double r_scaled = whole > 0.0 ? scaled / whole : 0.0;
      ratios.push_back(std::max(r_near, r_scaled));
    }
    std::sort(ratios.begin(), ratios.end());

    CutoffLevelRow row;
    row.level = level;
    row.ratio_min = ratios.front();
    row.ratio_max = ratios.back();
    row.ratio_med = ratios[ratios.size() / 2];
    row.grad_max = max_cutoff_gradient(g, Layer::L1);

    // Remainder of the model singular field after the cutoff: decays with the
    // number of layers because (1 - g) is supported within distance ~ sigma^L
    // of the boundary, where the field itself is small.
    const ScalarField model = boundary_model(mesh.domain, cfg.s);
    const ElementField tail_field = [&](int elem, Point2 ref, Point2 phys, Point2* grad) {
      Point2 gu{};
      const double vu = model(phys, grad ? &gu : nullptr);
      const double vg = g.value(elem, ref);
      if (grad) {
        const Point2 gg = g.gradient(elem, ref);
        grad->x = (1.0 - vg) * gu.x - gg.x * vu;
        grad->y = (1.0 - vg) * gu.y - gg.y * vu;
      }
      return (1.0 - vg) * vu;
    };
    row.tail = weighted_field_norm(mesh, tail_field, cfg.q + 6, all_cfg).total();

    levels.push_back(static_cast<double>(level));
    tails.push_back(row.tail);
    out.rows.push_back(row);
  }

  double med_min = std::numeric_limits<double>::infinity(), med_max = 0.0;
  for (const CutoffLevelRow& row : out.rows) {
    med_min = std::min(med_min, row.ratio_med);
    med_max = std::max(med_max, row.ratio_med);
  }
  out.spread = med_min > 0.0 ? med_max / med_min : std::numeric_limits<double>::infinity();
  out.tail_fit = fit_log_vs_pow(levels, tails, 1.0);
  return out;
}

}  // namespace hpfrac
