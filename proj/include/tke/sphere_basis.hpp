#pragma once

// Real spherical-harmonic basis on the unit two-sphere with an exact-degree
// quadrature grid: Gauss-Legendre nodes in colatitude, uniform nodes in
// longitude. The grid is sized so that products of three band-limited
// functions integrate exactly (3/2-rule dealiasing for quadratic and cubic
// nonlinearities evaluated pointwise).
//
// Conventions:
//   - Y_{l,0}    = Pbar_{l,0}(cos t)
//   - Y_{l,m>0}  = sqrt(2) Pbar_{l,m}(cos t) cos(m p)
//   - Y_{l,-m}   = sqrt(2) Pbar_{l,m}(cos t) sin(m p)
//   with Pbar fully normalized so that ∫_{S^2} Y_a Y_b dA = delta_ab
//   (dA = sin t dt dp, total area 4 pi).
//   - Flat coefficient index a = l^2 + l + m.
//   - Laplace-Beltrami on Y_{l,m} is -l(l+1).

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace tke {

// Gauss-Legendre nodes/weights on [-1,1], Newton iteration on P_n.
// Templated so tests can cross-check the double instantiation in long double.
template <typename Scalar>
void gauss_legendre(int n, Eigen::Array<Scalar, Eigen::Dynamic, 1>& x,
                    Eigen::Array<Scalar, Eigen::Dynamic, 1>& w) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  x.resize(n);
  w.resize(n);
  const Scalar pi = static_cast<Scalar>(3.14159265358979323846264338327950288L);
  for (int i = 0; i < n; ++i) {
    // Chebyshev-type initial guess, then Newton on P_n.
    Scalar xi = std::cos(pi * (static_cast<Scalar>(i) + Scalar(0.75)) /
                         (static_cast<Scalar>(n) + Scalar(0.5)));
    Scalar p0 = 0, p1 = 0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1;
      p1 = xi;
      for (int l = 2; l <= n; ++l) {
        const Scalar p2 = ((2 * l - 1) * xi * p1 - (l - 1) * p0) / l;
        p0 = p1;
        p1 = p2;
      }
      // derivative of P_n via (1-x^2) P_n' = n (P_{n-1} - x P_n)
      const Scalar dp = n * (p0 - xi * p1) / (1 - xi * xi);
      const Scalar dx = p1 / dp;
      xi -= dx;
      if (std::abs(dx) < std::numeric_limits<Scalar>::epsilon() * 4) break;
    }
    // one clean-up pass for the weight
    p0 = 1;
    p1 = xi;
    for (int l = 2; l <= n; ++l) {
      const Scalar p2 = ((2 * l - 1) * xi * p1 - (l - 1) * p0) / l;
      p0 = p1;
      p1 = p2;
    }
    const Scalar dp = n * (p0 - xi * p1) / (1 - xi * xi);
    x[n - 1 - i] = xi;  // ascending order
    w[n - 1 - i] = 2 / ((1 - xi * xi) * dp * dp);
  }
}

// Fully normalized associated Legendre values Pbar_{l,m}(x), l = m..lmax,
// and their colatitude derivatives, at a single point. No Condon-Shortley.
template <typename Scalar>
void legendre_column(int lmax, int m, Scalar x, Scalar* p, Scalar* dp_dtheta) {
  const Scalar pi = static_cast<Scalar>(3.14159265358979323846264338327950288L);
  const Scalar s = std::sqrt(std::max<Scalar>(0, 1 - x * x));  // sin(theta)
  Scalar pmm = 1 / std::sqrt(4 * pi);
  for (int k = 1; k <= m; ++k)
    pmm *= s * std::sqrt(Scalar(2 * k + 1) / Scalar(2 * k));
  Scalar prev2 = 0, prev1 = pmm;
  for (int l = m; l <= lmax; ++l) {
    Scalar val;
    if (l == m) {
      val = pmm;
    } else if (l == m + 1) {
      val = std::sqrt(Scalar(2 * m + 3)) * x * prev1;
    } else {
      const Scalar a = std::sqrt(Scalar(2 * l - 1) * Scalar(2 * l + 1) /
                                 (Scalar(l - m) * Scalar(l + m)));
      const Scalar b = std::sqrt(Scalar(2 * l + 1) * Scalar(l - 1 - m) *
                                 Scalar(l - 1 + m) /
                                 (Scalar(2 * l - 3) * Scalar(l - m) * Scalar(l + m)));
      val = a * x * prev1 - b * prev2;
    }
    p[l - m] = val;
    // sin(t) dPbar_{l,m}/dt = l x Pbar_{l,m} - e_{l,m} Pbar_{l-1,m}
    const Scalar e = (l == m) ? Scalar(0)
                              : std::sqrt(Scalar(2 * l + 1) * Scalar(l - m) *
                                          Scalar(l + m) / Scalar(2 * l - 1));
    dp_dtheta[l - m] = (l * x * val - e * (l == m ? Scalar(0) : prev1)) / s;
    if (l > m) {
      prev2 = prev1;
      prev1 = val;
    }
  }
}

// Band-limited basis with cached transform tables. Immutable after
// construction; all methods are const and safe for concurrent use.
template <typename Scalar>
class SphereBasisT {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  explicit SphereBasisT(int band) : band_(band) {
    if (band < 1) throw std::invalid_argument("SphereBasisT: band must be >= 1");
    // exactness for triple products of band-limited functions
    n_lat_ = (3 * band + 2) / 2 + 1;
    n_lon_ = 3 * band + 2;
    if (n_lon_ % 2 == 1) ++n_lon_;

    gauss_legendre<Scalar>(n_lat_, x_, wq_);
    theta_ = x_.acos();
    phi_.resize(n_lon_);
    const Scalar pi = static_cast<Scalar>(3.14159265358979323846264338327950288L);
    for (int j = 0; j < n_lon_; ++j) phi_[j] = 2 * pi * j / n_lon_;

    // Legendre tables per order m: n_lat x (band+1-m), plus theta-derivatives.
    leg_.resize(band_ + 1);
    dleg_.resize(band_ + 1);
    std::vector<Scalar> col(band_ + 1), dcol(band_ + 1);
    for (int m = 0; m <= band_; ++m) {
      leg_[m].resize(n_lat_, band_ + 1 - m);
      dleg_[m].resize(n_lat_, band_ + 1 - m);
      for (int i = 0; i < n_lat_; ++i) {
        legendre_column<Scalar>(band_, m, x_[i], col.data(), dcol.data());
        for (int l = m; l <= band_; ++l) {
          leg_[m](i, l - m) = col[l - m];
          dleg_[m](i, l - m) = dcol[l - m];
        }
      }
    }

    // trig tables: (band+1) x n_lon
    cosmp_.resize(band_ + 1, n_lon_);
    sinmp_.resize(band_ + 1, n_lon_);
    for (int m = 0; m <= band_; ++m)
      for (int j = 0; j < n_lon_; ++j) {
        cosmp_(m, j) = std::cos(m * phi_[j]);
        sinmp_(m, j) = std::sin(m * phi_[j]);
      }

    quad_.resize(n_nodes());
    for (int i = 0; i < n_lat_; ++i)
      for (int j = 0; j < n_lon_; ++j)
        quad_[i * n_lon_ + j] = wq_[i] * (2 * pi / n_lon_);
  }

  int band() const { return band_; }
  int size() const { return (band_ + 1) * (band_ + 1); }
  int n_lat() const { return n_lat_; }
  int n_lon() const { return n_lon_; }
  int n_nodes() const { return n_lat_ * n_lon_; }

  static int index(int l, int m) { return l * l + l + m; }
  int degree(int a) const { return static_cast<int>(std::sqrt(static_cast<double>(a))); }
  int order(int a) const {
    const int l = degree(a);
    return a - l * l - l;
  }

  // node layout: flat = i_lat * n_lon + j_lon
  Scalar node_theta(int flat) const { return theta_[flat / n_lon_]; }
  Scalar node_phi(int flat) const { return phi_[flat % n_lon_]; }
  const Array& quadrature() const { return quad_; }  // sums to 4 pi
  const Array& lat_nodes_x() const { return x_; }
  const Array& lat_weights() const { return wq_; }

  // index of the antipodal node (theta -> pi - theta, phi -> phi + pi)
  int antipode(int flat) const {
    const int i = flat / n_lon_, j = flat % n_lon_;
    return (n_lat_ - 1 - i) * n_lon_ + (j + n_lon_ / 2) % n_lon_;
  }

  // -l(l+1) multipliers (Laplace-Beltrami symbol)
  Vector lb_coeffs(const Vector& c) const {
    Vector out(c.size());
    for (int a = 0; a < c.size(); ++a) {
      const int l = degree(a);
      out[a] = -Scalar(l * (l + 1)) * c[a];
    }
    return out;
  }

  Vector analysis(const Vector& grid) const { return fused(grid, true, 0); }
  Vector synthesis(const Vector& c) const { return fused(c, false, 0); }
  Vector synthesis_dtheta(const Vector& c) const { return fused(c, false, 1); }
  Vector synthesis_dphi(const Vector& c) const { return fused(c, false, 2); }

  // Point evaluation (value and first derivatives) at arbitrary angles.
  void eval_point(const Vector& c, Scalar theta, Scalar phi, Scalar* val,
                  Scalar* dth, Scalar* dph) const {
    const Scalar x = std::cos(theta);
    std::vector<Scalar> p(band_ + 1), dp(band_ + 1);
    Scalar v = 0, vt = 0, vp = 0;
    const Scalar r2 = std::sqrt(Scalar(2));
    for (int m = 0; m <= band_; ++m) {
      legendre_column<Scalar>(band_, m, x, p.data(), dp.data());
      Scalar gc = 0, gs = 0, gct = 0, gst = 0;
      for (int l = m; l <= band_; ++l) {
        if (m == 0) {
          gc += c[index(l, 0)] * p[l - m];
          gct += c[index(l, 0)] * dp[l - m];
        } else {
          gc += c[index(l, m)] * p[l - m];
          gs += c[index(l, -m)] * p[l - m];
          gct += c[index(l, m)] * dp[l - m];
          gst += c[index(l, -m)] * dp[l - m];
        }
      }
      const Scalar cm = std::cos(m * phi), sm = std::sin(m * phi);
      if (m == 0) {
        v += gc;
        vt += gct;
      } else {
        v += r2 * (gc * cm + gs * sm);
        vt += r2 * (gct * cm + gst * sm);
        vp += r2 * m * (-gc * sm + gs * cm);
      }
    }
    if (val) *val = v;
    if (dth) *dth = vt;
    if (dph) *dph = vp;
  }

  // Dense synthesis matrix (n_nodes x size); built on demand.
  Matrix synthesis_matrix(const std::vector<int>& columns) const {
    Matrix s(n_nodes(), static_cast<int>(columns.size()));
    Vector e = Vector::Zero(size());
    for (size_t k = 0; k < columns.size(); ++k) {
      e[columns[k]] = 1;
      s.col(static_cast<int>(k)) = synthesis(e);
      e[columns[k]] = 0;
    }
    return s;
  }

 private:
  // forward=true: grid -> coeffs. Otherwise coeffs -> grid (deriv 0/1/2).
  Vector fused(const Vector& in, bool forward, int deriv) const {
    const Scalar pi = static_cast<Scalar>(3.14159265358979323846264338327950288L);
    const Scalar r2 = std::sqrt(Scalar(2));
    if (forward) {
      if (in.size() != n_nodes())
        throw std::invalid_argument("analysis: grid size mismatch");
      Vector c = Vector::Zero(size());
      // longitude: fc(i,m) = sum_j f(i,j) cos(m phi_j), similarly sin
      Eigen::Map<const Matrix> f(in.data(), n_lon_, n_lat_);  // col = lat row
      Matrix fc = cosmp_ * f;  // (band+1) x n_lat
      Matrix fs = sinmp_ * f;
      const Scalar dphi = 2 * pi / n_lon_;
      for (int m = 0; m <= band_; ++m) {
        const Scalar scale = (m == 0) ? dphi : r2 * dphi;
        // latitude: c_{l,m} = sum_i w_i Pbar(i,l) fc(m,i)
        Vector gc = (leg_[m].transpose() * (fc.row(m).transpose().array() * wq_).matrix());
        for (int l = m; l <= band_; ++l) c[index(l, m)] = scale * gc[l - m];
        if (m > 0) {
          Vector gs = (leg_[m].transpose() * (fs.row(m).transpose().array() * wq_).matrix());
          for (int l = m; l <= band_; ++l) c[index(l, -m)] = scale * gs[l - m];
        }
      }
      return c;
    }
    if (in.size() != size())
      throw std::invalid_argument("synthesis: coefficient size mismatch");
    // latitude part per order, then mix with trig
    Matrix gc(band_ + 1, n_lat_), gs(band_ + 1, n_lat_);
    gc.setZero();
    gs.setZero();
    for (int m = 0; m <= band_; ++m) {
      const auto& tab = (deriv == 1) ? dleg_[m] : leg_[m];
      const Scalar scale = (m == 0) ? Scalar(1) : r2;
      Vector cl(band_ + 1 - m), sl(band_ + 1 - m);
      for (int l = m; l <= band_; ++l) {
        cl[l - m] = scale * in[index(l, m)];
        sl[l - m] = (m > 0) ? scale * in[index(l, -m)] : Scalar(0);
      }
      gc.row(m) = (tab * cl).transpose();
      if (m > 0) gs.row(m) = (tab * sl).transpose();
    }
    Vector out(n_nodes());
    Eigen::Map<Matrix> o(out.data(), n_lon_, n_lat_);
    if (deriv == 2) {
      // d/dphi swaps cos<->sin with factors -m, +m
      Matrix mc = gc, ms = gs;
      for (int m = 0; m <= band_; ++m) {
        mc.row(m) *= Scalar(m);
        ms.row(m) *= Scalar(m);
      }
      o = cosmp_.transpose() * ms - sinmp_.transpose() * mc;
    } else {
      o = cosmp_.transpose() * gc + sinmp_.transpose() * gs;
    }
    return out;
  }

  int band_, n_lat_, n_lon_;
  Array x_, wq_, theta_, phi_, quad_;
  std::vector<Matrix> leg_, dleg_;
  Matrix cosmp_, sinmp_;
};

using SphereBasis = SphereBasisT<double>;

}  // namespace tke
