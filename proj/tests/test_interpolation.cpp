#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <utility>

#include "hpfrac/interpolation.hpp"
#include "oracles.hpp"

using hpfrac::NormConfig;
using hpfrac::Point2;

namespace {

hpfrac::GlobalMesh unit_square_mesh() {
  return hpfrac::refine(hpfrac::build_single_patch_macro(hpfrac::PatchKind::Trivial),
                        hpfrac::MeshParams{0.5, 0});
}

}  // namespace

TEST_CASE("weighted field norms reproduce closed forms on the unit square") {
  const hpfrac::GlobalMesh mesh = unit_square_mesh();
  REQUIRE(mesh.elements.size() == 1);

  const hpfrac::ElementField one = [](int, Point2, Point2, Point2* g) {
    if (g) *g = {0.0, 0.0};
    return 1.0;
  };
  const hpfrac::ElementField linx = [](int, Point2, Point2 p, Point2* g) {
    if (g) *g = {1.0, 0.0};
    return p.x;
  };

  NormConfig cfg;
  SUBCASE("unweighted") {
    const auto n1 = hpfrac::weighted_field_norm(mesh, one, 8, cfg);
    CHECK(n1.l2_weighted == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(n1.h1_weighted == doctest::Approx(0.0).scale(1.0));
    const auto nx = hpfrac::weighted_field_norm(mesh, linx, 8, cfg);
    CHECK(nx.l2_weighted == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
    CHECK(nx.h1_weighted == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(nx.total() == doctest::Approx(std::sqrt(1.0 / 3.0 + 1.0)).epsilon(1e-12));
  }

  SUBCASE("edge-distance weight, smooth exponent") {
    // w = y, beta = 3/2: the L2 weight is y, the H1 weight y^3.
    cfg.weight = hpfrac::WeightKind::EdgeDist;
    cfg.line_a = {0.0, 0.0};
    cfg.line_b = {1.0, 0.0};
    cfg.beta = 1.5;
    cfg.order = 12;
    const auto n1 = hpfrac::weighted_field_norm(mesh, one, 8, cfg);
    CHECK(n1.l2_weighted == doctest::Approx(std::sqrt(0.5)).epsilon(1e-10));
    const auto nx = hpfrac::weighted_field_norm(mesh, linx, 8, cfg);
    CHECK(nx.h1_weighted == doctest::Approx(std::sqrt(0.25)).epsilon(1e-10));
  }

  SUBCASE("edge-distance weight, singular exponent") {
    // beta = 3/4 makes the L2 weight y^(-1/2); the graded rule must still
    // deliver it: integral of y^(-1/2) over the square is 2.
    cfg.weight = hpfrac::WeightKind::EdgeDist;
    cfg.line_a = {0.0, 0.0};
    cfg.line_b = {1.0, 0.0};
    cfg.beta = 0.75;
    cfg.order = 14;
    cfg.grading_levels = 30;
    const auto n1 = hpfrac::weighted_field_norm(mesh, one, 8, cfg);
    CHECK(n1.l2_weighted == doctest::Approx(std::sqrt(2.0)).epsilon(1e-5));
  }

  SUBCASE("vertex-distance weight") {
    // w = |p|, beta = 2: L2 weight r^2, integral of x^2 + y^2 over the square
    // is 2/3.
    cfg.weight = hpfrac::WeightKind::VertexDist;
    cfg.anchor = {0.0, 0.0};
    cfg.beta = 2.0;
    cfg.order = 12;
    const auto n1 = hpfrac::weighted_field_norm(mesh, one, 8, cfg);
    CHECK(n1.l2_weighted == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-10));
    // beta = 1: H1 weight is also r^2.
    cfg.beta = 1.0;
    const auto nx = hpfrac::weighted_field_norm(mesh, linx, 8, cfg);
    CHECK(nx.h1_weighted == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-10));
  }
}

TEST_CASE("norm regions split the mesh by layer") {
  const hpfrac::MacroMesh macro = hpfrac::build_macro_preset("square-fan");
  const hpfrac::GlobalMesh mesh = hpfrac::refine(macro, hpfrac::MeshParams{0.5, 3});
  const hpfrac::ElementField one = [](int, Point2, Point2, Point2* g) {
    if (g) *g = {0.0, 0.0};
    return 1.0;
  };

  double area_l0 = 0.0, area_l0l1 = 0.0, area_all = 0.0;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const double a = mesh.element_area(static_cast<int>(e));
    area_all += a;
    if (mesh.elements[e].layer == hpfrac::Layer::L0) area_l0 += a;
    if (mesh.elements[e].layer != hpfrac::Layer::Interior) area_l0l1 += a;
  }

  NormConfig cfg;
  cfg.order = 6;
  const double all = hpfrac::weighted_field_norm(mesh, one, 6, cfg).l2_weighted;
  cfg.region = hpfrac::NormRegion::ExcludeL0;
  const double no_l0 = hpfrac::weighted_field_norm(mesh, one, 6, cfg).l2_weighted;
  cfg.region = hpfrac::NormRegion::OnlyL0L1;
  const double collar = hpfrac::weighted_field_norm(mesh, one, 6, cfg).l2_weighted;

  CHECK(all * all == doctest::Approx(area_all).epsilon(1e-12));
  CHECK(no_l0 * no_l0 == doctest::Approx(area_all - area_l0).epsilon(1e-12));
  CHECK(collar * collar == doctest::Approx(area_l0l1).epsilon(1e-12));
}

TEST_CASE("interpolation reproduces polynomials of the space") {
  const hpfrac::MacroMesh macro = hpfrac::build_macro_preset("square-fan");
  const hpfrac::GlobalMesh mesh = hpfrac::refine(macro, hpfrac::MeshParams{0.5, 2});
  const hpfrac::HpSpace space(mesh, 3, /*constrain_boundary=*/false);

  const hpfrac::ScalarField exact = [](Point2 p, Point2* g) {
    if (g) *g = {2.0 * p.x + p.y, p.x - 3.0};
    return p.x * p.x + p.x * p.y - 3.0 * p.y + 0.5;
  };
  const hpfrac::FeFunction uh =
      hpfrac::interpolate(space, [&](Point2 p) { return exact(p, nullptr); });

  NormConfig cfg;
  cfg.order = 8;
  const auto err = hpfrac::weighted_error(space, uh, exact, cfg);
  CHECK(err.l2_weighted < 1e-11);
  CHECK(err.h1_weighted < 1e-10);

  // weighted_norm is weighted_error against zero.
  const auto nrm = hpfrac::weighted_norm(space, uh, cfg);
  const hpfrac::ScalarField zero = [](Point2, Point2* g) {
    if (g) *g = {0.0, 0.0};
    return 0.0;
  };
  const auto ref = hpfrac::weighted_error(space, uh, zero, cfg);
  CHECK(nrm.l2_weighted == doctest::Approx(ref.l2_weighted).epsilon(1e-12));
  CHECK(nrm.h1_weighted == doctest::Approx(ref.h1_weighted).epsilon(1e-12));
}

TEST_CASE("model singular fields have consistent gradients") {
  const hpfrac::Polygon sq = hpfrac::Polygon::unit_square();
  const double h = 1e-7;
  for (double s : {0.3, 0.5, 0.7}) {
    for (const auto& [name, field] :
         {std::pair<const char*, hpfrac::ScalarField>{"vertex", hpfrac::vertex_model(s)},
          {"edge", hpfrac::edge_model(s)},
          {"boundary", hpfrac::boundary_model(sq, s)}}) {
      CAPTURE(name);
      CAPTURE(s);
      for (int i = 0; i < 6; ++i) {
        const Point2 hp = oracles::halton2(i + 2);
        const Point2 p{0.15 + 0.7 * hp.x, 0.15 + 0.7 * hp.y};
        Point2 g{};
        const double v = field(p, &g);
        CHECK(std::isfinite(v));
        const double fx = (field({p.x + h, p.y}, nullptr) - field({p.x - h, p.y}, nullptr)) / (2 * h);
        const double fy = (field({p.x, p.y + h}, nullptr) - field({p.x, p.y - h}, nullptr)) / (2 * h);
        CHECK(g.x == doctest::Approx(fx).epsilon(1e-5).scale(1.0));
        CHECK(g.y == doctest::Approx(fy).epsilon(1e-5).scale(1.0));
      }
    }
  }

  // Values at reference points.
  CHECK(hpfrac::vertex_model(0.5)({0.0625, 0.0}, nullptr) == doctest::Approx(0.25));
  CHECK(hpfrac::edge_model(0.5)({0.77, 0.09}, nullptr) == doctest::Approx(0.3));
}

TEST_CASE("patch interpolation errors decay fast in the polynomial degree") {
  for (hpfrac::PatchKind kind :
       {hpfrac::PatchKind::Vertex, hpfrac::PatchKind::Edge, hpfrac::PatchKind::VertexEdge}) {
    const double s = 0.5;
    const double beta = 0.75 - s / 2.0;
    const auto rows = hpfrac::run_patch_study(kind, s, 0.5, beta, 1, 5);
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].q == static_cast<int>(i) + 1);
      CHECK(rows[i].L == rows[i].q);
      CHECK(std::isfinite(rows[i].h1_weighted));
      CHECK(rows[i].h1_weighted > 0.0);
      if (i > 0) CHECK(rows[i].h1_weighted < rows[i - 1].h1_weighted);
    }
    // Five steps of q = L growth on the graded patch shrink the error by
    // orders of magnitude.
    CHECK(rows.back().h1_weighted < 1e-2 * rows.front().h1_weighted);
    CHECK(rows.back().l2_weighted < 1e-2 * rows.front().l2_weighted);
  }
  CHECK_THROWS(hpfrac::run_patch_study(hpfrac::PatchKind::Trivial, 0.5, 0.5, 0.5, 1, 3));

  const auto rows = hpfrac::run_patch_study(hpfrac::PatchKind::Edge, 0.5, 0.5, 0.25, 2, 3);
  const std::string csv = hpfrac::patch_study_csv(rows);
  CHECK(csv.find("kind") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header plus two rows
}
