#include "tke/estimates.hpp"

#include "tke/functionals.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <random>
#include <stdexcept>

namespace tke {

namespace {
double wrap_angle(double a) {
  const double pi = std::numbers::pi;
  while (a > pi) a -= 2 * pi;
  while (a < -pi) a += 2 * pi;
  return a;
}
}  // namespace

GreenKernel::GreenKernel(const MetricState& state) {
  const TransverseModel& model = state.model();
  const SphereBasis& basis = model.basis();
  const MatrixXd& S = model.active_synthesis();
  const int n = model.n_active();
  const double fiber = model.fiber_length();

  mu_ = fiber * basis.quadrature() * state.density();

  // pencil (D, W): D is exactly diagonal because the box Dirichlet form
  // cancels the state density
  MatrixXd W = fiber * (S.transpose() *
                        ((basis.quadrature() * state.density()).matrix().asDiagonal() * S));
  MatrixXd D = MatrixXd::Zero(n, n);
  const auto& act = model.active_indices();
  for (int b = 0; b < n; ++b) {
    const int l = basis.degree(act[b]);
    D(b, b) = 0.5 * fiber * static_cast<double>(l * (l + 1));
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(D, W);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("GreenKernel: eigensolver failed");

  // drop the constant (zero) mode; scale the rest by 1/sqrt(lambda)
  lambda_ = es.eigenvalues().tail(n - 1);
  if (lambda_[0] <= 0)
    throw std::runtime_error("GreenKernel: discrete laplacian is singular beyond constants");
  MatrixXd grid_modes = S * es.eigenvectors().rightCols(n - 1);
  for (int k = 0; k < n - 1; ++k) grid_modes.col(k) /= std::sqrt(lambda_[k]);
  modes_ = std::move(grid_modes);
}

double GreenKernel::entry(int node_x, int node_y) const {
  return modes_.row(node_x).dot(modes_.row(node_y));
}

ArrayXd GreenKernel::apply(const ArrayXd& g) const {
  const VectorXd inner = modes_.transpose() * (mu_ * g).matrix();
  return (modes_ * inner).array();
}

double GreenKernel::row_mean(int node) const {
  const VectorXd pillar = modes_.transpose() * mu_.matrix();
  return modes_.row(node).dot(pillar);
}

double GreenKernel::min_entry(int stride) const {
  const int n = static_cast<int>(modes_.rows());
  double mn = std::numeric_limits<double>::infinity();
  const int block = 512;
  std::vector<int> rows;
  for (int i = 0; i < n; i += stride) rows.push_back(i);
  for (size_t b0 = 0; b0 < rows.size(); b0 += block) {
    const int nb = static_cast<int>(std::min<size_t>(block, rows.size() - b0));
    MatrixXd sub(nb, modes_.cols());
    for (int r = 0; r < nb; ++r) sub.row(r) = modes_.row(rows[b0 + r]);
    for (size_t c0 = b0; c0 < rows.size(); c0 += block) {
      const int nc = static_cast<int>(std::min<size_t>(block, rows.size() - c0));
      MatrixXd subc(nc, modes_.cols());
      for (int r = 0; r < nc; ++r) subc.row(r) = modes_.row(rows[c0 + r]);
      const MatrixXd g = sub * subc.transpose();
      mn = std::min(mn, g.minCoeff());
    }
  }
  return mn;
}

GreenBound green_lower_bound(const MetricState& state, int kernel_stride) {
  if (!state.positive())
    throw std::runtime_error("green_lower_bound: state is not positive");
  GreenBound out;
  out.kernel = std::make_shared<GreenKernel>(state);

  out.K = std::max(0.0, -out.kernel->min_entry(kernel_stride));

  const TransverseModel& model = state.model();
  // reproduction identity on probe functions, box applied independently
  std::mt19937_64 rng(2024);
  double rep_err = 0;
  for (int probe = 0; probe < 4; ++probe) {
    BasicFunction f =
        (probe == 0) ? model.harmonic(2, 0, 1.0)
                     : random_admissible_potential(state.model_ptr(), rng, 0.0, 0.03);
    const ArrayXd fg = model.grid_values(f).array();
    const ArrayXd boxf = complex_laplacian_grid(state, f);
    const double mean = integrate_grid(state, fg) / state.lifted_volume();
    const ArrayXd rec = mean + out.kernel->apply(boxf);
    rep_err = std::max(rep_err, (rec - fg).abs().maxCoeff());
  }
  out.reproduction_error = rep_err;

  double rm = 0;
  for (int node = 0; node < model.basis().n_nodes(); node += 97)
    rm = std::max(rm, std::abs(out.kernel->row_mean(node)));
  out.max_row_mean = rm;

  double sym = 0;
  for (int i = 0; i < 40; ++i) {
    const int a = (i * 131) % model.basis().n_nodes();
    const int b = (i * 257 + 11) % model.basis().n_nodes();
    sym = std::max(sym, std::abs(out.kernel->entry(a, b) - out.kernel->entry(b, a)));
  }
  out.symmetry_error = sym;
  return out;
}

namespace {

struct HopfSample {
  Eigen::Vector4d p;         // (Re z1, Im z1, Re z2, Im z2)
  Eigen::Vector3d base_vec;  // quotient point as a unit vector
  double theta, beta1, beta2;
  int base;                  // index into the base-point table
};

struct BaseData {
  double theta, phi;
  double rho;                  // state density
  double du_dtheta, du_dphihat;  // orthonormal gradient components
};

// Second-order edge length in the rescaled metric. The transverse part
// projects the base chord onto an orthonormal frame at the chord midpoint,
// which stays well conditioned near the chart poles.
double edge_length(const HopfSample& a, const HopfSample& b, const BaseData& da,
                   const BaseData& db, double mu) {
  const Eigen::Vector3d mid = (a.base_vec + b.base_vec).normalized();
  const double ct = mid.z();
  const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
  const double phibar = std::atan2(mid.y(), mid.x());
  const Eigen::Vector3d e_theta(ct * std::cos(phibar), ct * std::sin(phibar), -st);
  const Eigen::Vector3d e_phihat(-std::sin(phibar), std::cos(phibar), 0.0);

  const Eigen::Vector3d w = b.base_vec - a.base_vec;
  const double w_theta = w.dot(e_theta);
  const double w_phihat = w.dot(e_phihat);

  const double rho = 0.5 * (da.rho + db.rho);
  const double ut = 0.5 * (da.du_dtheta + db.du_dtheta);
  const double uph = 0.5 * (da.du_dphihat + db.du_dphihat);

  const double trans2 = (rho / mu) * (w_theta * w_theta + w_phihat * w_phihat);
  // d^c u on the base displacement (orthonormal components)
  const double dcu = -0.5 * (w_theta * uph - w_phihat * ut);
  const double db1 = wrap_angle(b.beta1 - a.beta1);
  const double db2 = wrap_angle(b.beta2 - a.beta2);
  const double c2 = 0.5 * (1.0 + 0.5 * (a.base_vec.z() + b.base_vec.z()));  // cos^2(t/2)
  const double eta = c2 * db1 + (1.0 - c2) * db2 + 2.0 * dcu;
  return std::sqrt(trans2 + (eta / mu) * (eta / mu));
}

}  // namespace

double diameter_estimate(const MetricState& state, double mu,
                         const DiameterOptions& opt) {
  const TransverseModel& model = state.model();
  const SphereBasis& basis = model.basis();
  const double pi = std::numbers::pi;

  // base points: Fibonacci sphere, fiber staggered per base point
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<BaseData> base(opt.base_samples);
  // state density as a band-limited function for off-grid evaluation
  const VectorXd rho_coeff = basis.analysis(state.density().matrix());
  for (int i = 0; i < opt.base_samples; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / opt.base_samples;
    base[i].theta = std::acos(z);
    base[i].phi = std::fmod(2.0 * pi * i / golden, 2.0 * pi);
    double rho, ut, up;
    basis.eval_point(rho_coeff, base[i].theta, base[i].phi, &rho, nullptr, nullptr);
    base[i].rho = rho;
    basis.eval_point(state.potential().coeff, base[i].theta, base[i].phi, nullptr,
                     &ut, &up);
    base[i].du_dtheta = ut;
    base[i].du_dphihat = up / std::sin(base[i].theta);
  }

  const int n = opt.base_samples * opt.fiber_samples;
  std::vector<HopfSample> pts(n);
  for (int i = 0; i < opt.base_samples; ++i) {
    const double th = base[i].theta, ph = base[i].phi;
    const double stagger = std::fmod(i * golden, 1.0);
    for (int j = 0; j < opt.fiber_samples; ++j) {
      const double psi = 2.0 * pi * (j + stagger) / opt.fiber_samples;
      HopfSample s;
      s.theta = th;
      s.beta1 = psi;
      s.beta2 = std::fmod(psi + ph, 2.0 * pi);
      const double c = std::cos(0.5 * th), sn = std::sin(0.5 * th);
      s.p << c * std::cos(s.beta1), c * std::sin(s.beta1), sn * std::cos(s.beta2),
          sn * std::sin(s.beta2);
      s.base_vec << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph),
          std::cos(th);
      s.base = i;
      pts[i * opt.fiber_samples + j] = s;
    }
  }

  // k-nearest-neighbor graph by chordal distance in the embedding
  Eigen::MatrixXd P(4, n);
  for (int i = 0; i < n; ++i) P.col(i) = pts[i].p;
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  std::vector<std::pair<double, int>> cand(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd d2 =
        (P.colwise() - P.col(i)).colwise().squaredNorm().transpose();
    for (int j = 0; j < n; ++j) cand[j] = {d2[j], j};
    std::partial_sort(cand.begin(), cand.begin() + opt.knn + 1, cand.end());
    for (int k = 1; k <= opt.knn; ++k) {
      const int j = cand[k].second;
      const double w =
          edge_length(pts[i], pts[j], base[pts[i].base], base[pts[j].base], mu);
      adj[i].push_back({j, w});
      adj[j].push_back({i, w});
    }
  }

  // farthest-point Dijkstra sweeps
  auto dijkstra = [&](int src, std::vector<double>& dist) {
    dist.assign(n, std::numeric_limits<double>::infinity());
    std::priority_queue<std::pair<double, int>, std::vector<std::pair<double, int>>,
                        std::greater<>> heap;
    dist[src] = 0;
    heap.push({0.0, src});
    while (!heap.empty()) {
      auto [d, v] = heap.top();
      heap.pop();
      if (d > dist[v]) continue;
      for (const auto& [w, len] : adj[v]) {
        const double nd = d + len;
        if (nd < dist[w]) {
          dist[w] = nd;
          heap.push({nd, w});
        }
      }
    }
  };

  double diameter = 0;
  std::vector<double> dist, min_dist(n, std::numeric_limits<double>::infinity());
  int src = 0;
  for (int sweep = 0; sweep < opt.sources; ++sweep) {
    dijkstra(src, dist);
    double mx = 0;
    int far = src;
    for (int i = 0; i < n; ++i) {
      if (std::isinf(dist[i]))
        throw std::runtime_error("diameter_estimate: graph disconnected; increase knn");
      if (dist[i] > mx) {
        mx = dist[i];
        far = i;
      }
      min_dist[i] = std::min(min_dist[i], dist[i]);
    }
    diameter = std::max(diameter, mx);
    // alternate: farthest along current sweep, then worst-covered node
    if (sweep % 2 == 0) {
      src = far;
    } else {
      src = static_cast<int>(std::max_element(min_dist.begin(), min_dist.end()) -
                             min_dist.begin());
    }
  }
  return diameter;
}

RescaledMetric rescaled_family_check(const MetricState& state, double t,
                                     const DiameterOptions& options,
                                     double solution_tol, bool with_diameter) {
  if (t <= 0.0 || t > 1.0)
    throw std::invalid_argument("rescaled_family_check: t must be in (0,1]");
  const TransverseModel& model = state.model();
  const BasicFunction& h = model.ricci_potential();
  const double r1 = residual_norm(state, t, Equation::s1, h);
  const double r2 = residual_norm(state, t, Equation::s2, h);
  if (std::min(r1, r2) > solution_tol)
    throw std::invalid_argument(
        "rescaled_family_check: state does not solve (s1)/(s2) at this t (residual " +
        std::to_string(std::min(r1, r2)) + ")");

  RescaledMetric out;
  out.t = t;
  out.mu = 1.0 / t;
  const int m = model.m();
  out.volume = std::pow(t, m + 1) * state.lifted_volume();
  out.volume_identity_error =
      std::abs(out.volume - std::pow(t, m + 1) * model.volume()) /
      (std::pow(t, m + 1) * model.volume());
  out.transverse_ricci_min = state.scalar_curvature_grid().minCoeff();
  out.sasaki_lower_bound = sasaki_ricci_bound(state, t);
  if (with_diameter) {
    out.diameter = diameter_estimate(state, out.mu, options);
    out.diameter_method =
        "knn-graph base=" + std::to_string(options.base_samples) +
        " fiber=" + std::to_string(options.fiber_samples) +
        " k=" + std::to_string(options.knn) +
        " tol=" + std::to_string(options.tolerance);
  }
  return out;
}

EstimateReport apriori_report(const ContinuityFamily& family, const GreenBound* green) {
  if (family.size() < 5)
    throw std::invalid_argument("apriori_report: family too sparse (need >= 5 samples)");
  const ModelPtr model = family.model;
  const double c = 2.0 * model->m() + 2.0;
  const double V = model->volume();
  const ArrayXd h_grid = model->ricci_potential_grid();

  GreenBound local;
  if (!green) {
    local = green_lower_bound(metric_state(model, model->zero_function()), 2);
    green = &local;
  }

  EstimateReport rep;
  rep.green_K = green->K;
  const int n = family.size();
  rep.per_t.resize(n);

  for (int k = 0; k < n; ++k) {
    PerTRecord& r = rep.per_t[k];
    r.t = family.t[k];
    const VectorXd ug = model->grid_values(family.u[k]);
    r.osc = ug.maxCoeff() - ug.minCoeff();
    r.sup_abs_u = ug.lpNorm<Eigen::Infinity>();
    r.t_osc = r.t * r.osc;
    r.L = family.trace[k].L;
    r.M = family.trace[k].M;
    r.I = family.trace[k].I;

    // zero of the log-residual combination
    const ArrayXd zeta = -c * r.t * ug.array() - c * r.L + h_grid;
    int arg = 0;
    zeta.abs().minCoeff(&arg);
    r.x_t_node = arg;
    r.u_at_xt = ug[arg];
    r.L_minus_u_xt = std::abs(r.L - r.u_at_xt);
    const double tol = 1e-10;
    r.xt_exists = (zeta.minCoeff() <= tol) && (zeta.maxCoeff() >= -tol);
  }

  // interior finite differences for the M-identity
  for (int k = 1; k + 1 < n; ++k) {
    PerTRecord& r = rep.per_t[k];
    const double dt = family.t[k + 1] - family.t[k - 1];
    r.dMdt = (family.trace[k + 1].M - family.trace[k - 1].M) / dt;
    const double dIJ = ((family.trace[k + 1].I - family.trace[k + 1].J) -
                        (family.trace[k - 1].I - family.trace[k - 1].J)) /
                       dt;
    r.identity_rhs = -c * (1.0 - family.t[k]) * dIJ;
    r.identity_error = std::abs(r.dMdt - r.identity_rhs);
  }

  // Tightest t-independent constant making the oscillation bound hold
  // family-wide. Negative values mean the Green term alone already
  // dominates, which is the typical desk-scale situation.
  const double m = model->m();
  double mfact = 1.0;
  for (int i = 2; i <= model->m(); ++i) mfact *= i;
  const double base_term = 2.0 * m * rep.green_K * V / mfact;
  double C = -std::numeric_limits<double>::infinity();
  for (const auto& r : rep.per_t) {
    if (r.t <= 0) continue;
    C = std::max(C, r.t * ((r.osc - r.I) - base_term) / (2.0 * m));
  }
  rep.fitted_C = C;

  rep.m_monotone = true;
  rep.oscillation_bound_holds = true;
  rep.xt_exists_everywhere = true;
  rep.L_bound_holds = true;
  rep.max_dMdt = -std::numeric_limits<double>::infinity();
  rep.max_identity_error = 0;
  rep.max_t_osc = 0;
  for (auto& r : rep.per_t) {
    if (!std::isnan(r.dMdt)) {
      rep.max_dMdt = std::max(rep.max_dMdt, r.dMdt);
      rep.max_identity_error = std::max(rep.max_identity_error, r.identity_error);
      if (r.dMdt > 1e-8) rep.m_monotone = false;
    }
    if (r.t > 0) {
      r.osc_bound_slack = 2.0 * m * (rep.green_K * V / mfact + rep.fitted_C / r.t) -
                          (r.osc - r.I);
      if (r.osc_bound_slack < -1e-12) rep.oscillation_bound_holds = false;
    }
    rep.max_t_osc = std::max(rep.max_t_osc, r.t_osc);
    rep.xt_exists_everywhere = rep.xt_exists_everywhere && r.xt_exists;
    if (r.L_minus_u_xt > r.osc + 1e-9) rep.L_bound_holds = false;
  }
  return rep;
}

}  // namespace tke
