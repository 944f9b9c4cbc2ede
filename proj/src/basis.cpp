#include "hpfrac/basis.hpp"

#include <cmath>
#include <stdexcept>

#include "hpfrac/quadrature.hpp"

namespace hpfrac {

namespace {

constexpr double node_snap_tol = 1e-13;

// Values of the Jacobi polynomials P_0..P_n with parameters (alpha, beta) at z.
void jacobi_values(int n, double alpha, double beta, double z, double* out) {
  out[0] = 1.0;
  if (n == 0) return;
  out[1] = 0.5 * (alpha - beta) + 0.5 * (alpha + beta + 2.0) * z;
  for (int k = 2; k <= n; ++k) {
    const double s = 2.0 * k + alpha + beta;
    const double c1 = 2.0 * k * (k + alpha + beta) * (s - 2.0);
    const double c2 = (s - 1.0) * (alpha * alpha - beta * beta);
    const double c3 = (s - 1.0) * s * (s - 2.0);
    const double c4 = 2.0 * (k + alpha - 1.0) * (k + beta - 1.0) * s;
    out[k] = ((c2 + c3 * z) * out[k - 1] - c4 * out[k - 2]) / c1;
  }
}

}  // namespace

Lagrange1D::Lagrange1D(int q) : q_(q) {
  if (q < 1) throw std::invalid_argument("Lagrange1D: degree must be at least 1");
  nodes_ = gauss_lobatto(q).points;
  const int n = q + 1;
  bary_.assign(n, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j != i) bary_[i] /= (nodes_[i] - nodes_[j]);
    }
  }
}

void Lagrange1D::values(double t, double* out) const {
  const int n = q_ + 1;
  for (int j = 0; j < n; ++j) {
    if (std::abs(t - nodes_[j]) < node_snap_tol) {
      for (int i = 0; i < n; ++i) out[i] = (i == j) ? 1.0 : 0.0;
      return;
    }
  }
  double denom = 0.0;
  for (int j = 0; j < n; ++j) {
    out[j] = bary_[j] / (t - nodes_[j]);
    denom += out[j];
  }
  for (int j = 0; j < n; ++j) out[j] /= denom;
}

void Lagrange1D::values_and_derivs(double t, double* val, double* der) const {
  const int n = q_ + 1;
  for (int k = 0; k < n; ++k) {
    if (std::abs(t - nodes_[k]) < node_snap_tol) {
      // Differentiation-matrix row at node k.
      double dkk = 0.0;
      for (int i = 0; i < n; ++i) {
        val[i] = (i == k) ? 1.0 : 0.0;
        if (i != k) {
          der[i] = (bary_[i] / bary_[k]) / (nodes_[k] - nodes_[i]);
          dkk -= der[i];
        }
      }
      der[k] = dkk;
      return;
    }
  }
  double s0 = 0.0, s1 = 0.0;
  for (int j = 0; j < n; ++j) {
    const double r = bary_[j] / (t - nodes_[j]);
    val[j] = r;
    s0 += r;
    s1 += r / (t - nodes_[j]);
  }
  for (int j = 0; j < n; ++j) {
    const double l = val[j] / s0;
    val[j] = l;
    der[j] = l * (s1 / s0 - 1.0 / (t - nodes_[j]));
  }
}

TriBasis::TriBasis(int q) : q_(q) {
  if (q < 1) throw std::invalid_argument("TriBasis: degree must be at least 1");
  const std::vector<double> zeta = gauss_lobatto(q).points;

  // Symmetric nodal set from the GLL points in barycentric form; the restriction to
  // any edge reproduces the 1D GLL points because zeta_(q-i) = 1 - zeta_i.
  for (int k = 0; k <= q; ++k) {
    for (int j = 0; j + k <= q; ++j) {
      const int i = q - j - k;
      const double l2 = (1.0 + 2.0 * zeta[j] - zeta[k] - zeta[i]) / 3.0;
      const double l3 = (1.0 + 2.0 * zeta[k] - zeta[i] - zeta[j]) / 3.0;
      nodes_.push_back({l2 + l3, l3});
      if (k == 0) bottom_nodes_.push_back(static_cast<int>(nodes_.size()) - 1);
    }
  }

  const int nb = size();
  Eigen::MatrixXd vand(nb, nb);
  std::vector<double> psi(nb);
  for (int i = 0; i < nb; ++i) {
    modal_values(nodes_[i], psi.data());
    for (int j = 0; j < nb; ++j) vand(i, j) = psi[j];
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(vand);
  if (!lu.isInvertible()) throw std::runtime_error("TriBasis: singular Vandermonde matrix");
  const Eigen::MatrixXd inv = lu.inverse();
  cond_ = vand.cwiseAbs().colwise().sum().maxCoeff() * inv.cwiseAbs().colwise().sum().maxCoeff();
  if (cond_ > 1e12) throw std::runtime_error("TriBasis: Vandermonde too ill-conditioned");
  coeff_ = inv.transpose();
}

void TriBasis::modal_values(Point2 p, double* out) const {
  // Simplex coordinates: a = x - y, b = y.
  const double a = p.x - p.y;
  const double b = p.y;
  const double u = 2.0 * a + b - 1.0;
  const double w = 1.0 - b;
  const double z = 2.0 * b - 1.0;

  std::vector<double> f(q_ + 1);
  f[0] = 1.0;
  if (q_ >= 1) f[1] = u;
  for (int m = 1; m < q_; ++m) {
    f[m + 1] = ((2.0 * m + 1.0) * u * f[m] - m * w * w * f[m - 1]) / (m + 1.0);
  }

  std::vector<double> jac(q_ + 1);
  int idx = 0;
  for (int m = 0; m <= q_; ++m) {
    jacobi_values(q_ - m, 2.0 * m + 1.0, 0.0, z, jac.data());
    for (int n = 0; n + m <= q_; ++n) out[idx++] = f[m] * jac[n];
  }
}

void TriBasis::modal_values_and_grads(Point2 p, double* val, double* gx, double* gy) const {
  const double a = p.x - p.y;
  const double b = p.y;
  const double u = 2.0 * a + b - 1.0;
  const double w = 1.0 - b;
  const double z = 2.0 * b - 1.0;

  // f_m and its partials with respect to (a, b); u_a = 2, u_b = 1, w_b = -1.
  std::vector<double> f(q_ + 1), fa(q_ + 1), fb(q_ + 1);
  f[0] = 1.0;
  fa[0] = fb[0] = 0.0;
  if (q_ >= 1) {
    f[1] = u;
    fa[1] = 2.0;
    fb[1] = 1.0;
  }
  for (int m = 1; m < q_; ++m) {
    const double c = 2.0 * m + 1.0;
    f[m + 1] = (c * u * f[m] - m * w * w * f[m - 1]) / (m + 1.0);
    fa[m + 1] = (c * (2.0 * f[m] + u * fa[m]) - m * w * w * fa[m - 1]) / (m + 1.0);
    fb[m + 1] =
        (c * (f[m] + u * fb[m]) - m * (-2.0 * w * f[m - 1] + w * w * fb[m - 1])) / (m + 1.0);
  }

  std::vector<double> jac(q_ + 1), jac_d(q_ + 1);
  int idx = 0;
  for (int m = 0; m <= q_; ++m) {
    const double alpha = 2.0 * m + 1.0;
    jacobi_values(q_ - m, alpha, 0.0, z, jac.data());
    // dP_n^(alpha,0)/dz = (n + alpha + 1)/2 * P_(n-1)^(alpha+1,1).
    if (q_ - m >= 1) jacobi_values(q_ - m - 1, alpha + 1.0, 1.0, z, jac_d.data());
    for (int n = 0; n + m <= q_; ++n) {
      const double pn = jac[n];
      const double dpn = (n == 0) ? 0.0 : 0.5 * (n + alpha + 1.0) * jac_d[n - 1];
      val[idx] = f[m] * pn;
      const double da = fa[m] * pn;
      const double db = fb[m] * pn + f[m] * dpn * 2.0;
      // Chain rule to (x, y): a = x - y, b = y.
      gx[idx] = da;
      gy[idx] = -da + db;
      ++idx;
    }
  }
}

void TriBasis::values(Point2 p, double* out) const {
  const int nb = size();
  std::vector<double> psi(nb);
  modal_values(p, psi.data());
  Eigen::Map<const Eigen::VectorXd> psi_v(psi.data(), nb);
  Eigen::Map<Eigen::VectorXd> out_v(out, nb);
  out_v.noalias() = coeff_ * psi_v;
}

void TriBasis::values_and_grads(Point2 p, double* val, double* gx, double* gy) const {
  const int nb = size();
  std::vector<double> psi(nb), pa(nb), pb(nb);
  modal_values_and_grads(p, psi.data(), pa.data(), pb.data());
  Eigen::Map<Eigen::VectorXd>(val, nb).noalias() =
      coeff_ * Eigen::Map<const Eigen::VectorXd>(psi.data(), nb);
  Eigen::Map<Eigen::VectorXd>(gx, nb).noalias() =
      coeff_ * Eigen::Map<const Eigen::VectorXd>(pa.data(), nb);
  Eigen::Map<Eigen::VectorXd>(gy, nb).noalias() =
      coeff_ * Eigen::Map<const Eigen::VectorXd>(pb.data(), nb);
}

Eigen::MatrixXd TriBasis::values_matrix(const Point2* pts, int npts) const {
  const int nb = size();
  Eigen::MatrixXd psi(nb, npts);
  std::vector<double> col(nb);
  for (int p = 0; p < npts; ++p) {
    modal_values(pts[p], col.data());
    for (int j = 0; j < nb; ++j) psi(j, p) = col[j];
  }
  return coeff_ * psi;
}

QuadBasis::QuadBasis(int q) : q_(q), line_(q) {
  const auto& t = line_.nodes();
  for (int iy = 0; iy <= q; ++iy)
    for (int ix = 0; ix <= q; ++ix) nodes_.push_back({t[ix], t[iy]});
}

void QuadBasis::values(Point2 p, double* out) const {
  const int n = q_ + 1;
  std::vector<double> vx(n), vy(n);
  line_.values(p.x, vx.data());
  line_.values(p.y, vy.data());
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) out[iy * n + ix] = vx[ix] * vy[iy];
}

void QuadBasis::values_and_grads(Point2 p, double* val, double* gx, double* gy) const {
  const int n = q_ + 1;
  std::vector<double> vx(n), vy(n), dx(n), dy(n);
  line_.values_and_derivs(p.x, vx.data(), dx.data());
  line_.values_and_derivs(p.y, vy.data(), dy.data());
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      val[iy * n + ix] = vx[ix] * vy[iy];
      gx[iy * n + ix] = dx[ix] * vy[iy];
      gy[iy * n + ix] = vx[ix] * dy[iy];
    }
  }
}

Eigen::MatrixXd QuadBasis::values_matrix(const Point2* pts, int npts) const {
  const int nb = size();
  Eigen::MatrixXd out(nb, npts);
  std::vector<double> col(nb);
  for (int p = 0; p < npts; ++p) {
    values(pts[p], col.data());
    for (int j = 0; j < nb; ++j) out(j, p) = col[j];
  }
  return out;
}

}  // namespace hpfrac
