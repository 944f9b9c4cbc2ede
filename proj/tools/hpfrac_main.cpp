#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hpfrac/analysis.hpp"

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: " + std::string(e.what()));
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
  return j;
}

// Precedence: explicit command line flag, then config file, then the default.
template <typename T>
void override_from(const json& j, const char* key, const CLI::Option* opt, T* var) {
  if (opt != nullptr && opt->count() > 0) return;
  if (!j.contains(key)) return;
  try {
    *var = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config: bad value for \"") + key + '"');
  }
}

struct QuadOpts {
  hpfrac::QuadConfig cfg;
  CLI::Option *far = nullptr, *sing = nullptr, *grad = nullptr, *aniso = nullptr, *adm = nullptr,
              *kapo = nullptr, *rhso = nullptr;

  void add(CLI::App* sub) {
    far = sub->add_option("--far-order", cfg.far_order,
                          "Gauss order per direction on separated panels")
              ->capture_default_str();
    sing = sub->add_option("--sing-order", cfg.sing_order,
                           "order of the touching-panel rules (0 = automatic)")
               ->capture_default_str();
    grad = sub->add_option("--grading-levels", cfg.grading_levels,
                           "panel subdivision depth toward near-singular pairs")
               ->capture_default_str();
    aniso = sub->add_option("--aniso-split", cfg.aniso_split,
                            "aspect ratio bound for touching-panel splits")
                ->capture_default_str();
    adm = sub->add_option("--admissibility", cfg.admissibility,
                          "distance over diameter ratio treated as separated")
              ->capture_default_str();
    kapo = sub->add_option("--kappa-order", cfg.kappa_order,
                           "quadrature order of the complement mass term (0 = automatic)")
               ->capture_default_str();
    rhso = sub->add_option("--rhs-order", cfg.rhs_order,
                           "quadrature order of the load vector (0 = automatic)")
               ->capture_default_str();
  }

  void finish(const json& j) {
    if (j.contains("quadrature")) {
      const json& q = j.at("quadrature");
      override_from(q, "far_order", far, &cfg.far_order);
      override_from(q, "sing_order", sing, &cfg.sing_order);
      override_from(q, "grading_levels", grad, &cfg.grading_levels);
      override_from(q, "aniso_split", aniso, &cfg.aniso_split);
      override_from(q, "admissibility", adm, &cfg.admissibility);
      override_from(q, "kappa_order", kapo, &cfg.kappa_order);
      override_from(q, "rhs_order", rhso, &cfg.rhs_order);
    }
    cfg.validate();
  }

  json to_json() const {
    return json{{"far_order", cfg.far_order},
                {"sing_order", cfg.sing_order},
                {"grading_levels", cfg.grading_levels},
                {"aniso_split", cfg.aniso_split},
                {"admissibility", cfg.admissibility},
                {"kappa_order", cfg.kappa_order},
                {"rhs_order", cfg.rhs_order}};
  }
};

struct MeshOpts {
  std::string preset = "square-fan";
  std::string macro_path;
  double sigma = 0.5;
  int L = 3;
  CLI::Option *opreset = nullptr, *omacro = nullptr, *osigma = nullptr, *olevel = nullptr;

  void add(CLI::App* sub) {
    opreset = sub->add_option("--preset", preset, "macro mesh preset (square-fan, lshape-fan)")
                  ->capture_default_str();
    omacro = sub->add_option("--macro", macro_path, "macro mesh JSON file, overrides --preset");
    osigma = sub->add_option("--sigma", sigma, "geometric grading factor in (0, 1)")
                 ->capture_default_str();
    olevel = sub->add_option("--L", L, "number of geometric boundary layers")
                 ->capture_default_str();
  }

  void finish(const json& j) {
    override_from(j, "preset", opreset, &preset);
    override_from(j, "macro", omacro, &macro_path);
    override_from(j, "sigma", osigma, &sigma);
    override_from(j, "L", olevel, &L);
  }

  hpfrac::GlobalMesh build() const {
    const hpfrac::MacroMesh macro = macro_path.empty() ? hpfrac::build_macro_preset(preset)
                                                       : hpfrac::read_macro_file(macro_path);
    hpfrac::MeshParams mp;
    mp.sigma = sigma;
    mp.L = L;
    return hpfrac::refine(macro, mp);
  }

  json to_json() const {
    return json{{"preset", preset}, {"macro", macro_path}, {"sigma", sigma}, {"L", L}};
  }
};

void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << text;
  std::cout << "wrote " << out << '\n';
}

// Raw dump of a system for external inspection: the magic "HPFRACM1", then
// int64 n, double s, double sigma, int32 L, int32 q, the matrix in row-major
// order, and the load vector, all native little-endian.
void dump_system(const std::string& path, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                 double s, double sigma, int L, int q) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write("HPFRACM1", 8);
  const std::int64_t n = A.rows();
  f.write(reinterpret_cast<const char*>(&n), sizeof n);
  f.write(reinterpret_cast<const char*>(&s), sizeof s);
  f.write(reinterpret_cast<const char*>(&sigma), sizeof sigma);
  const std::int32_t li = L, qi = q;
  f.write(reinterpret_cast<const char*>(&li), sizeof li);
  f.write(reinterpret_cast<const char*>(&qi), sizeof qi);
  Eigen::RowVectorXd row;
  for (std::int64_t i = 0; i < n; ++i) {
    row = A.row(i);
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(n * 8));
  }
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(n * 8));
  if (!f) throw std::runtime_error("write failed for " + path);
  std::cout << "wrote " << path << '\n';
}

json stats_json(const hpfrac::AssemblyStats& st) {
  return json{{"element_pairs", st.element_pairs},
              {"far_subpairs", st.far_subpairs},
              {"sing_coincident", st.sing_coincident},
              {"sing_edge", st.sing_edge},
              {"sing_vertex", st.sing_vertex},
              {"far_points", st.far_points},
              {"sing_points", st.sing_points},
              {"sing_order", st.sing_order},
              {"kernel", st.kernel}};
}

hpfrac::PatchKind parse_kind(const std::string& name) {
  if (name == "trivial") return hpfrac::PatchKind::Trivial;
  if (name == "edge") return hpfrac::PatchKind::Edge;
  if (name == "vertex") return hpfrac::PatchKind::Vertex;
  if (name == "vertex-edge") return hpfrac::PatchKind::VertexEdge;
  throw std::invalid_argument("unknown patch kind: " + name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hp finite elements for the integral fractional Laplacian on polygons"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // mesh-report
  auto* c_mesh = app.add_subcommand("mesh-report", "build a refined mesh and report its layout");
  MeshOpts m_mesh;
  std::string mesh_config, mesh_out;
  m_mesh.add(c_mesh);
  c_mesh->add_option("--config", mesh_config, "JSON config file");
  c_mesh->add_option("--out", mesh_out, "output path (stdout when omitted)");

  // patch-study
  auto* c_patch = app.add_subcommand("patch-study",
                                     "interpolation decay of the model field on one patch");
  std::string patch_kind = "vertex", patch_config, patch_out, patch_csv;
  double patch_s = 0.5, patch_sigma = 0.5;
  double patch_beta = std::numeric_limits<double>::quiet_NaN();
  int patch_qmin = 2, patch_qmax = 6;
  CLI::Option* o_kind =
      c_patch->add_option("--kind", patch_kind, "patch kind: trivial, edge, vertex, vertex-edge")
          ->capture_default_str();
  CLI::Option* o_ps = c_patch->add_option("--s", patch_s, "fractional order")->capture_default_str();
  CLI::Option* o_psig =
      c_patch->add_option("--sigma", patch_sigma, "grading factor")->capture_default_str();
  CLI::Option* o_pbeta =
      c_patch->add_option("--beta", patch_beta, "weight exponent (default 3/4 - s)");
  CLI::Option* o_pqmin =
      c_patch->add_option("--qmin", patch_qmin, "first degree (with L = q)")->capture_default_str();
  CLI::Option* o_pqmax =
      c_patch->add_option("--qmax", patch_qmax, "last degree")->capture_default_str();
  c_patch->add_option("--config", patch_config, "JSON config file");
  c_patch->add_option("--out", patch_out, "summary JSON path (stdout when omitted)");
  c_patch->add_option("--csv", patch_csv, "also write the rows as CSV");

  // assemble-check
  auto* c_asm = app.add_subcommand("assemble-check",
                                   "assemble the stiffness matrix and report diagnostics");
  MeshOpts m_asm;
  QuadOpts q_asm;
  std::string asm_config, asm_out, asm_dump;
  double asm_s = 0.5;
  int asm_q = 2, asm_threads = 1;
  bool asm_det = false;
  m_asm.add(c_asm);
  CLI::Option* o_as = c_asm->add_option("--s", asm_s, "fractional order")->capture_default_str();
  CLI::Option* o_aq = c_asm->add_option("--q", asm_q, "polynomial degree")->capture_default_str();
  CLI::Option* o_at =
      c_asm->add_option("--threads", asm_threads, "worker threads")->capture_default_str();
  q_asm.add(c_asm);
  c_asm->add_option("--config", asm_config, "JSON config file");
  c_asm->add_option("--out", asm_out, "output path (stdout when omitted)");
  c_asm->add_option("--dump-bin", asm_dump, "write the raw system to this file");
  c_asm->add_flag("--deterministic", asm_det, "zero wall clock fields in the output");

  // solve
  auto* c_solve = app.add_subcommand("solve", "assemble and solve with unit load");
  MeshOpts m_solve;
  QuadOpts q_solve;
  std::string solve_config, solve_out, solve_dump;
  double solve_s = 0.5;
  int solve_q = 2, solve_threads = 1;
  bool solve_det = false;
  m_solve.add(c_solve);
  CLI::Option* o_ss =
      c_solve->add_option("--s", solve_s, "fractional order")->capture_default_str();
  CLI::Option* o_sq =
      c_solve->add_option("--q", solve_q, "polynomial degree")->capture_default_str();
  CLI::Option* o_st =
      c_solve->add_option("--threads", solve_threads, "worker threads")->capture_default_str();
  q_solve.add(c_solve);
  c_solve->add_option("--config", solve_config, "JSON config file");
  c_solve->add_option("--out", solve_out, "output path (stdout when omitted)");
  c_solve->add_option("--dump-bin", solve_dump, "write the raw system to this file");
  c_solve->add_flag("--deterministic", solve_det, "zero wall clock fields in the output");

  // converge
  auto* c_conv = app.add_subcommand("converge", "energy convergence sweep with q = L");
  QuadOpts q_conv;
  std::string conv_config, conv_out, conv_csv, conv_preset = "square-fan", conv_macro;
  double conv_s = 0.5, conv_sigma = 0.5;
  int conv_lmin = 1, conv_lmax = 4, conv_ref = 0, conv_threads = 1;
  bool conv_det = false;
  CLI::Option* o_cpre =
      c_conv->add_option("--preset", conv_preset, "macro mesh preset")->capture_default_str();
  CLI::Option* o_cmac = c_conv->add_option("--macro", conv_macro, "macro mesh JSON file");
  CLI::Option* o_cs = c_conv->add_option("--s", conv_s, "fractional order")->capture_default_str();
  CLI::Option* o_csig =
      c_conv->add_option("--sigma", conv_sigma, "grading factor")->capture_default_str();
  CLI::Option* o_clmin =
      c_conv->add_option("--lmin", conv_lmin, "first level")->capture_default_str();
  CLI::Option* o_clmax =
      c_conv->add_option("--lmax", conv_lmax, "last level")->capture_default_str();
  CLI::Option* o_cref =
      c_conv->add_option("--ref-level", conv_ref, "reference level (0 = lmax + 2)")
          ->capture_default_str();
  CLI::Option* o_ct =
      c_conv->add_option("--threads", conv_threads, "worker threads")->capture_default_str();
  q_conv.add(c_conv);
  c_conv->add_option("--config", conv_config, "JSON config file");
  c_conv->add_option("--out", conv_out, "summary JSON path (stdout when omitted)");
  c_conv->add_option("--csv", conv_csv, "also write the rows as CSV");
  c_conv->add_flag("--deterministic", conv_det, "zero wall clock fields in the output");

  // cutoff-check
  auto* c_cut = app.add_subcommand("cutoff-check",
                                   "stability and decay of the boundary layer cutoff");
  std::string cut_config, cut_out, cut_preset = "square-fan";
  double cut_s = 0.5, cut_sigma = 0.5;
  int cut_q = 2, cut_lmin = 2, cut_lmax = 6, cut_samples = 10;
  std::uint64_t cut_seed = 1;
  CLI::Option* o_upre =
      c_cut->add_option("--preset", cut_preset, "macro mesh preset")->capture_default_str();
  CLI::Option* o_us = c_cut->add_option("--s", cut_s, "fractional order")->capture_default_str();
  CLI::Option* o_usig =
      c_cut->add_option("--sigma", cut_sigma, "grading factor")->capture_default_str();
  CLI::Option* o_uq = c_cut->add_option("--q", cut_q, "polynomial degree")->capture_default_str();
  CLI::Option* o_ulmin =
      c_cut->add_option("--lmin", cut_lmin, "first level")->capture_default_str();
  CLI::Option* o_ulmax =
      c_cut->add_option("--lmax", cut_lmax, "last level")->capture_default_str();
  CLI::Option* o_usam =
      c_cut->add_option("--samples", cut_samples, "random fields per level")->capture_default_str();
  CLI::Option* o_useed = c_cut->add_option("--seed", cut_seed, "RNG seed")->capture_default_str();
  c_cut->add_option("--config", cut_config, "JSON config file");
  c_cut->add_option("--out", cut_out, "output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_mesh->parsed()) {
      const json j = load_config(mesh_config);
      m_mesh.finish(j);
      override_from(j, "out", nullptr, &mesh_out);
      const hpfrac::GlobalMesh mesh = m_mesh.build();
      json report = json::parse(hpfrac::mesh_report_json(mesh));
      const std::string confo = hpfrac::check_conformity(mesh);
      report["conformity_ok"] = confo.empty();
      if (!confo.empty()) report["conformity_error"] = confo;
      report["config"] = m_mesh.to_json();
      report["version"] = kVersion;
      emit(mesh_out, report.dump(2));
      return 0;
    }

    if (c_patch->parsed()) {
      const json j = load_config(patch_config);
      override_from(j, "kind", o_kind, &patch_kind);
      override_from(j, "s", o_ps, &patch_s);
      override_from(j, "sigma", o_psig, &patch_sigma);
      override_from(j, "beta", o_pbeta, &patch_beta);
      override_from(j, "qmin", o_pqmin, &patch_qmin);
      override_from(j, "qmax", o_pqmax, &patch_qmax);
      if (std::isnan(patch_beta)) patch_beta = 0.75 - patch_s;
      const hpfrac::PatchKind kind = parse_kind(patch_kind);
      const auto rows =
          hpfrac::run_patch_study(kind, patch_s, patch_sigma, patch_beta, patch_qmin, patch_qmax);
      std::vector<double> qs, l2s, h1s;
      json jrows = json::array();
      for (const auto& r : rows) {
        qs.push_back(r.q);
        l2s.push_back(r.l2_weighted);
        h1s.push_back(r.h1_weighted);
        jrows.push_back(json{{"q", r.q},
                             {"L", r.L},
                             {"l2_weighted", r.l2_weighted},
                             {"h1_weighted", r.h1_weighted}});
      }
      const hpfrac::FitResult fl2 = hpfrac::fit_log_vs_pow(qs, l2s, 1.0);
      const hpfrac::FitResult fh1 = hpfrac::fit_log_vs_pow(qs, h1s, 1.0);
      json outj{{"kind", patch_kind},
                {"s", patch_s},
                {"sigma", patch_sigma},
                {"beta", patch_beta},
                {"rows", jrows},
                {"fit_l2", json{{"slope", fl2.slope}, {"r2", fl2.r2}}},
                {"fit_h1", json{{"slope", fh1.slope}, {"r2", fh1.r2}}},
                {"version", kVersion}};
      if (!patch_csv.empty()) emit(patch_csv, hpfrac::patch_study_csv(rows));
      emit(patch_out, outj.dump(2));
      return 0;
    }

    if (c_asm->parsed() || c_solve->parsed()) {
      const bool solving = c_solve->parsed();
      MeshOpts& mo = solving ? m_solve : m_asm;
      QuadOpts& qo = solving ? q_solve : q_asm;
      const json j = load_config(solving ? solve_config : asm_config);
      mo.finish(j);
      qo.finish(j);
      double s = solving ? solve_s : asm_s;
      int q = solving ? solve_q : asm_q;
      int threads = solving ? solve_threads : asm_threads;
      override_from(j, "s", solving ? o_ss : o_as, &s);
      override_from(j, "q", solving ? o_sq : o_aq, &q);
      override_from(j, "threads", solving ? o_st : o_at, &threads);
      const bool det = solving ? solve_det : asm_det;
      const std::string dump = solving ? solve_dump : asm_dump;
      const std::string out = solving ? solve_out : asm_out;

      const hpfrac::GlobalMesh mesh = mo.build();
      const hpfrac::HpSpace space(mesh, q, true);
      hpfrac::AssemblyStats st;
      const auto t0 = std::chrono::steady_clock::now();
      const Eigen::MatrixXd A = hpfrac::assemble_matrix(space, s, qo.cfg, threads, &st);
      const Eigen::VectorXd b = hpfrac::assemble_rhs(
          space, [](hpfrac::Point2) { return 1.0; }, qo.cfg);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      json outj{{"ndofs", space.num_dofs()},
                {"q", q},
                {"s", s},
                {"stats", stats_json(st)},
                {"symmetry_max_abs", (A - A.transpose()).cwiseAbs().maxCoeff()},
                {"diag_min", A.diagonal().minCoeff()},
                {"wallclock_s", det ? 0.0 : wall},
                {"config", json{{"mesh", mo.to_json()}, {"quadrature", qo.to_json()},
                                {"threads", threads}}},
                {"version", kVersion}};
      if (solving) {
        const hpfrac::SolveResult sol = hpfrac::solve_spd(A, b);
        if (!sol.spd_ok) throw std::runtime_error("solve: matrix is not numerically SPD");
        outj["energy"] = sol.energy;
        outj["residual_rel"] = sol.residual_rel;
        outj["method"] = sol.method;
      }
      if (!dump.empty()) dump_system(dump, A, b, s, mo.sigma, mo.L, q);
      emit(out, outj.dump(2));
      return 0;
    }

    if (c_conv->parsed()) {
      const json j = load_config(conv_config);
      q_conv.finish(j);
      hpfrac::StudyConfig sc;
      sc.preset = conv_preset;
      sc.macro_path = conv_macro;
      sc.s = conv_s;
      sc.sigma = conv_sigma;
      sc.min_level = conv_lmin;
      sc.max_level = conv_lmax;
      sc.ref_level = conv_ref;
      sc.threads = conv_threads;
      override_from(j, "preset", o_cpre, &sc.preset);
      override_from(j, "macro", o_cmac, &sc.macro_path);
      override_from(j, "s", o_cs, &sc.s);
      override_from(j, "sigma", o_csig, &sc.sigma);
      override_from(j, "lmin", o_clmin, &sc.min_level);
      override_from(j, "lmax", o_clmax, &sc.max_level);
      override_from(j, "ref_level", o_cref, &sc.ref_level);
      override_from(j, "threads", o_ct, &sc.threads);
      sc.quad = q_conv.cfg;

      hpfrac::StudyResult res = hpfrac::convergence_study(sc);
      if (conv_det) {
        res.ref_wall_s = 0.0;
        for (auto& row : res.rows) row.wall_s = 0.0;
      }
      json outj = json::parse(hpfrac::study_json(res));
      outj["config"] = json{{"preset", sc.preset},   {"macro", sc.macro_path},
                            {"lmin", sc.min_level},  {"lmax", sc.max_level},
                            {"threads", sc.threads}, {"quadrature", q_conv.to_json()}};
      outj["version"] = kVersion;
      if (!conv_csv.empty()) emit(conv_csv, hpfrac::study_csv(res));
      emit(conv_out, outj.dump(2));
      return 0;
    }

    if (c_cut->parsed()) {
      const json j = load_config(cut_config);
      hpfrac::CutoffCheckConfig cc;
      cc.preset = cut_preset;
      cc.s = cut_s;
      cc.sigma = cut_sigma;
      cc.q = cut_q;
      cc.min_level = cut_lmin;
      cc.max_level = cut_lmax;
      cc.nsamples = cut_samples;
      cc.seed = cut_seed;
      override_from(j, "preset", o_upre, &cc.preset);
      override_from(j, "s", o_us, &cc.s);
      override_from(j, "sigma", o_usig, &cc.sigma);
      override_from(j, "q", o_uq, &cc.q);
      override_from(j, "lmin", o_ulmin, &cc.min_level);
      override_from(j, "lmax", o_ulmax, &cc.max_level);
      override_from(j, "samples", o_usam, &cc.nsamples);
      override_from(j, "seed", o_useed, &cc.seed);

      const hpfrac::CutoffCheckResult res = hpfrac::cutoff_decomposition_check(cc);
      json jrows = json::array();
      for (const auto& r : res.rows) {
        jrows.push_back(json{{"level", r.level},
                             {"ratio_min", r.ratio_min},
                             {"ratio_med", r.ratio_med},
                             {"ratio_max", r.ratio_max},
                             {"grad_max", r.grad_max},
                             {"tail", r.tail}});
      }
      json outj{{"rows", jrows},
                {"spread", res.spread},
                {"tail_fit", json{{"slope", res.tail_fit.slope}, {"r2", res.tail_fit.r2}}},
                {"config", json{{"preset", cc.preset},
                                {"s", cc.s},
                                {"sigma", cc.sigma},
                                {"q", cc.q},
                                {"lmin", cc.min_level},
                                {"lmax", cc.max_level},
                                {"samples", cc.nsamples},
                                {"seed", cc.seed}}},
                {"version", kVersion}};
      emit(cut_out, outj.dump(2));
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
