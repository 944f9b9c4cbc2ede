#include <doctest.h>

#include <cmath>
#include <vector>

#include "hpfrac/basis.hpp"
#include "hpfrac/quadrature.hpp"
#include "oracles.hpp"

using hpfrac::Point2;

TEST_CASE("Lagrange1D is nodal, sums to one, and differentiates exactly") {
  for (int q : {1, 2, 4, 7}) {
    const hpfrac::Lagrange1D basis(q);
    const int m = q + 1;
    REQUIRE(basis.nodes().size() == static_cast<std::size_t>(m));

    std::vector<double> val(m), der(m);
    for (int i = 0; i < m; ++i) {
      basis.values(basis.nodes()[i], val.data());
      for (int j = 0; j < m; ++j) {
        CHECK(val[j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
      }
    }

    // Partition of unity and zero derivative sum at arbitrary points,
    // including exactly at a node (the barycentric formula's special case).
    for (double t : {0.0, 0.1234, 0.5, basis.nodes()[1], 0.987, 1.0}) {
      basis.values_and_derivs(t, val.data(), der.data());
      double sv = 0.0, sd = 0.0;
      for (int j = 0; j < m; ++j) {
        sv += val[j];
        sd += der[j];
      }
      CHECK(sv == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(sd == doctest::Approx(0.0).epsilon(1e-10).scale(1.0));
    }

    // Degree q interpolation reproduces t^q and its derivative.
    for (double t : {0.3, 0.71}) {
      basis.values_and_derivs(t, val.data(), der.data());
      double pv = 0.0, pd = 0.0;
      for (int j = 0; j < m; ++j) {
        const double nj = basis.nodes()[j];
        pv += val[j] * std::pow(nj, q);
        pd += der[j] * std::pow(nj, q);
      }
      CHECK(pv == doctest::Approx(std::pow(t, q)).epsilon(1e-11));
      CHECK(pd == doctest::Approx(q * std::pow(t, q - 1)).epsilon(1e-10));
    }
  }
}

TEST_CASE("tri_barycentric inverts the corner map") {
  for (int i = 0; i < 10; ++i) {
    const Point2 h = oracles::halton2(i);
    const Point2 p{h.x, h.x * h.y};  // inside {0 <= y <= x <= 1}
    const auto lam = hpfrac::tri_barycentric(p);
    CHECK(lam[0] + lam[1] + lam[2] == doctest::Approx(1.0).epsilon(1e-14));
    Point2 back{0, 0};
    for (int c = 0; c < 3; ++c) back = back + lam[c] * hpfrac::ref_triangle_corners[c];
    CHECK(back.x == doctest::Approx(p.x).epsilon(1e-14));
    CHECK(back.y == doctest::Approx(p.y).epsilon(1e-14));
  }
}

namespace {

// All monomials x^a y^b with a + b <= q evaluated through a nodal basis must
// reproduce themselves: sum_j phi_j(p) x_j^a y_j^b == p.x^a p.y^b.
template <class Basis>
void check_total_degree_reproduction(const Basis& basis, int q, double tol) {
  std::vector<double> val(basis.size()), gx(basis.size()), gy(basis.size());
  for (int i = 0; i < 8; ++i) {
    const Point2 h = oracles::halton2(i + 3);
    const Point2 p{h.x, h.x * h.y};
    basis.values_and_grads(p, val.data(), gx.data(), gy.data());
    for (int a = 0; a + 0 <= q; ++a) {
      for (int b = 0; a + b <= q; ++b) {
        double rv = 0.0, rx = 0.0, ry = 0.0;
        for (int j = 0; j < basis.size(); ++j) {
          const Point2 nj = basis.nodes()[j];
          const double mono = std::pow(nj.x, a) * std::pow(nj.y, b);
          rv += val[j] * mono;
          rx += gx[j] * mono;
          ry += gy[j] * mono;
        }
        const double want = std::pow(p.x, a) * std::pow(p.y, b);
        const double wx = a == 0 ? 0.0 : a * std::pow(p.x, a - 1) * std::pow(p.y, b);
        const double wy = b == 0 ? 0.0 : b * std::pow(p.x, a) * std::pow(p.y, b - 1);
        CHECK(rv == doctest::Approx(want).epsilon(tol).scale(1.0));
        CHECK(rx == doctest::Approx(wx).epsilon(tol).scale(1.0));
        CHECK(ry == doctest::Approx(wy).epsilon(tol).scale(1.0));
      }
    }
  }
}

}  // namespace

TEST_CASE("TriBasis is nodal and reproduces total degree q exactly") {
  for (int q : {1, 2, 3, 5, 8}) {
    const hpfrac::TriBasis basis(q);
    CHECK(basis.size() == (q + 1) * (q + 2) / 2);

    std::vector<double> val(basis.size());
    for (int i = 0; i < basis.size(); ++i) {
      basis.values(basis.nodes()[i], val.data());
      for (int j = 0; j < basis.size(); ++j) {
        CHECK(val[j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9).scale(1.0));
      }
    }

    check_total_degree_reproduction(basis, q, 1e-9);
    CHECK(basis.vandermonde_condition() < 1e6);

    // The bottom edge trace carries exactly the GLL points of degree q.
    const auto& bot = basis.bottom_edge_nodes();
    const hpfrac::Rule1D gll = hpfrac::gauss_lobatto(q);
    REQUIRE(bot.size() == static_cast<std::size_t>(q + 1));
    for (int k = 0; k <= q; ++k) {
      const Point2 n = basis.nodes()[bot[k]];
      CHECK(n.y == doctest::Approx(0.0).scale(1.0));
      CHECK(n.x == doctest::Approx(gll.points[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("TriBasis gradients agree with finite differences") {
  const hpfrac::TriBasis basis(4);
  std::vector<double> val(basis.size()), gx(basis.size()), gy(basis.size());
  std::vector<double> vp(basis.size()), vm(basis.size());
  const Point2 p{0.63, 0.21};
  const double h = 1e-6;
  basis.values_and_grads(p, val.data(), gx.data(), gy.data());
  basis.values({p.x + h, p.y}, vp.data());
  basis.values({p.x - h, p.y}, vm.data());
  for (int j = 0; j < basis.size(); ++j) {
    CHECK(gx[j] == doctest::Approx((vp[j] - vm[j]) / (2 * h)).epsilon(1e-5).scale(1.0));
  }
  basis.values({p.x, p.y + h}, vp.data());
  basis.values({p.x, p.y - h}, vm.data());
  for (int j = 0; j < basis.size(); ++j) {
    CHECK(gy[j] == doctest::Approx((vp[j] - vm[j]) / (2 * h)).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("QuadBasis is the GLL tensor basis with the documented ordering") {
  for (int q : {1, 2, 5}) {
    const hpfrac::QuadBasis basis(q);
    CHECK(basis.size() == (q + 1) * (q + 1));

    const hpfrac::Rule1D gll = hpfrac::gauss_lobatto(q);
    for (int iy = 0; iy <= q; ++iy) {
      for (int ix = 0; ix <= q; ++ix) {
        const Point2 n = basis.nodes()[iy * (q + 1) + ix];
        CHECK(n.x == doctest::Approx(gll.points[ix]).epsilon(1e-13));
        CHECK(n.y == doctest::Approx(gll.points[iy]).epsilon(1e-13));
      }
    }

    std::vector<double> val(basis.size());
    for (int i = 0; i < basis.size(); ++i) {
      basis.values(basis.nodes()[i], val.data());
      for (int j = 0; j < basis.size(); ++j) {
        CHECK(val[j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-11).scale(1.0));
      }
    }

    // Tensor basis reproduces x^a y^b for a, b <= q separately; check a mixed
    // case beyond total degree q to see the tensor structure.
    std::vector<double> gx(basis.size()), gy(basis.size());
    const Point2 p{0.37, 0.82};
    basis.values_and_grads(p, val.data(), gx.data(), gy.data());
    double rv = 0.0, rx = 0.0;
    for (int j = 0; j < basis.size(); ++j) {
      const Point2 nj = basis.nodes()[j];
      const double mono = std::pow(nj.x, q) * std::pow(nj.y, q);
      rv += val[j] * mono;
      rx += gx[j] * mono;
    }
    CHECK(rv == doctest::Approx(std::pow(p.x, q) * std::pow(p.y, q)).epsilon(1e-11));
    CHECK(rx == doctest::Approx(q * std::pow(p.x, q - 1) * std::pow(p.y, q)).epsilon(1e-9));
  }
}

TEST_CASE("values_matrix batches match pointwise evaluation") {
  const hpfrac::TriBasis tri(3);
  const hpfrac::QuadBasis quad(3);
  std::vector<Point2> pts;
  for (int i = 0; i < 6; ++i) {
    const Point2 h = oracles::halton2(i);
    pts.push_back({h.x, h.x * h.y});
  }
  const Eigen::MatrixXd mt = tri.values_matrix(pts.data(), static_cast<int>(pts.size()));
  const Eigen::MatrixXd mq = quad.values_matrix(pts.data(), static_cast<int>(pts.size()));
  REQUIRE(mt.rows() == tri.size());
  REQUIRE(mq.rows() == quad.size());
  std::vector<double> val(std::max(tri.size(), quad.size()));
  for (std::size_t k = 0; k < pts.size(); ++k) {
    tri.values(pts[k], val.data());
    for (int j = 0; j < tri.size(); ++j) CHECK(mt(j, k) == doctest::Approx(val[j]).epsilon(1e-14).scale(1.0));
    quad.values(pts[k], val.data());
    for (int j = 0; j < quad.size(); ++j) CHECK(mq(j, k) == doctest::Approx(val[j]).epsilon(1e-14).scale(1.0));
  }
}
