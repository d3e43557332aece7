#include "tke/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace tke {

namespace {
constexpr double kCanonicalDensity = 0.25;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

BasicFunction operator+(const BasicFunction& a, const BasicFunction& b) {
  require(a.band_limit == b.band_limit, "BasicFunction: band limit mismatch");
  BasicFunction r = a;
  r.coeff += b.coeff;
  r.even_only = a.even_only && b.even_only;
  return r;
}

BasicFunction operator-(const BasicFunction& a, const BasicFunction& b) {
  require(a.band_limit == b.band_limit, "BasicFunction: band limit mismatch");
  BasicFunction r = a;
  r.coeff -= b.coeff;
  r.even_only = a.even_only && b.even_only;
  return r;
}

BasicFunction operator*(double s, const BasicFunction& f) {
  BasicFunction r = f;
  r.coeff *= s;
  return r;
}

BasicFunction operator+(const BasicFunction& f, double c) {
  BasicFunction r = f;
  r.coeff[0] += c * std::sqrt(4.0 * std::numbers::pi);
  return r;
}

EtaEinsteinConstants eta_einstein_map(double tau, int m) {
  EtaEinsteinConstants k;
  k.tau = tau;
  k.m = m;
  k.lambda = tau - 2.0;
  k.nu = 2.0 * m + 2.0 - tau;
  return k;
}

BasicFunction TransverseModel::function_from_coeff(VectorXd coeff) const {
  require(coeff.size() == basis_.size(), "function_from_coeff: size mismatch");
  BasicFunction f;
  f.band_limit = basis_.band();
  f.even_only = (mode_ == SymmetryMode::even);
  if (f.even_only) {
    for (int a = 0; a < coeff.size(); ++a)
      if (basis_.degree(a) % 2 != 0) coeff[a] = 0.0;
  }
  f.coeff = std::move(coeff);
  return f;
}

BasicFunction TransverseModel::function_from_grid(const VectorXd& grid) const {
  return function_from_coeff(basis_.analysis(grid));
}

BasicFunction TransverseModel::zero_function() const {
  return function_from_coeff(VectorXd::Zero(basis_.size()));
}

BasicFunction TransverseModel::harmonic(int degree, int order, double amplitude) const {
  require(degree >= 0 && degree <= basis_.band(), "harmonic: degree out of range");
  require(std::abs(order) <= degree, "harmonic: |order| must be <= degree");
  VectorXd c = VectorXd::Zero(basis_.size());
  c[SphereBasis::index(degree, order)] = amplitude;
  if (mode_ == SymmetryMode::even && degree % 2 != 0)
    throw std::invalid_argument("harmonic: odd degree not representable in even mode");
  return function_from_coeff(std::move(c));
}

BasicFunction TransverseModel::constant(double c) const {
  VectorXd v = VectorXd::Zero(basis_.size());
  v[0] = c * std::sqrt(4.0 * std::numbers::pi);
  return function_from_coeff(std::move(v));
}

VectorXd TransverseModel::grid_values(const BasicFunction& f) const {
  check_compatible(f, "grid_values");
  return basis_.synthesis(f.coeff);
}

double TransverseModel::mean_background(const BasicFunction& f) const {
  const VectorXd g = grid_values(f);
  return fiber_length_ * (basis_.quadrature() * rho_ * g.array()).sum() / volume_;
}

VectorXd TransverseModel::gather(const VectorXd& full) const {
  VectorXd out(active_.size());
  for (size_t k = 0; k < active_.size(); ++k) out[k] = full[active_[k]];
  return out;
}

VectorXd TransverseModel::scatter(const VectorXd& act) const {
  VectorXd out = VectorXd::Zero(basis_.size());
  for (size_t k = 0; k < active_.size(); ++k) out[active_[k]] = act[k];
  return out;
}

const MatrixXd& TransverseModel::active_synthesis() const {
  std::call_once(synth_once_, [this] { synth_active_ = basis_.synthesis_matrix(active_); });
  return synth_active_;
}

void TransverseModel::check_compatible(const BasicFunction& f, const char* where) const {
  if (f.band_limit != basis_.band())
    throw std::invalid_argument(std::string(where) + ": band limit mismatch");
  if (mode_ == SymmetryMode::even && !f.even_only)
    throw std::invalid_argument(std::string(where) + ": function is not in the even subspace");
}

ModelPtr build_model(const ModelConfig& config) {
  require(config.band_limit >= 8, "build_model: band_limit must be >= 8");
  require(config.fiber_length > 0, "build_model: fiber_length must be positive");

  auto model = std::shared_ptr<TransverseModel>(new TransverseModel(config));
  model->fiber_length_ = config.fiber_length;
  model->mode_ = config.symmetry_mode;

  const SphereBasis& basis = model->basis_;
  for (int a = 0; a < basis.size(); ++a)
    if (model->mode_ == SymmetryMode::full || basis.degree(a) % 2 == 0)
      model->active_.push_back(a);

  VectorXd psi_coeff = VectorXd::Zero(basis.size());
  for (const auto& term : config.perturbation) {
    require(term.degree >= 1 && term.degree <= basis.band(),
            "build_model: perturbation degree out of range");
    require(std::abs(term.order) <= term.degree,
            "build_model: perturbation |order| must be <= degree");
    if (model->mode_ == SymmetryMode::even && term.degree % 2 != 0)
      throw std::invalid_argument(
          "build_model: odd perturbation degree is incompatible with even symmetry mode");
    psi_coeff[SphereBasis::index(term.degree, term.order)] += term.amplitude;
  }
  model->psi_ = model->function_from_coeff(psi_coeff);

  // rho = 1/4 + (1/2) Δ psi
  const VectorXd lap_psi = basis.synthesis(basis.lb_coeffs(model->psi_.coeff));
  model->rho_ = kCanonicalDensity + 0.5 * lap_psi.array();

  const double min_rho = model->rho_.minCoeff();
  if (min_rho <= 0.0) {
    int worst = 0;
    model->rho_.minCoeff(&worst);
    std::ostringstream msg;
    msg << "build_model: perturbation destroys positivity; most negative node "
        << worst << " (theta=" << basis.node_theta(worst)
        << ", phi=" << basis.node_phi(worst) << ") density=" << min_rho;
    throw std::invalid_argument(msg.str());
  }

  model->volume_ = model->fiber_length_ * (basis.quadrature() * model->rho_).sum();

  model->h_ = compute_h(*model);
  model->h_closed_ = compute_h_closed_form(*model);
  model->h_grid_ = basis.synthesis(model->h_.coeff).array();
  return model;
}

MetricState::MetricState(ModelPtr model, BasicFunction u) : model_(std::move(model)) {
  model_->check_compatible(u, "metric_state");
  u_ = std::move(u);
  const SphereBasis& basis = model_->basis();
  u_grid_ = basis.synthesis(u_.coeff);
  const VectorXd lap_u = basis.synthesis(basis.lb_coeffs(u_.coeff));
  rho_u_ = model_->background_density() + 0.5 * lap_u.array();
  ratio_ = rho_u_ / model_->background_density();
  positive_ = (ratio_.minCoeff() > 0.0);
  measure_ = model_->fiber_length() * basis.quadrature() * rho_u_;
  if (positive_) {
    const ArrayXd logrho = rho_u_.log();
    const VectorXd lap_logrho =
        basis.synthesis(basis.lb_coeffs(basis.analysis(logrho.matrix())));
    scurv_ = (1.0 - 0.5 * lap_logrho.array()) / rho_u_;
  }
}

const ArrayXd& MetricState::scalar_curvature_grid() const {
  if (!positive_)
    throw std::runtime_error("scalar_curvature: state is not positive");
  return scurv_;
}

MetricState metric_state(ModelPtr model, const BasicFunction& u) {
  return MetricState(std::move(model), u);
}

ArrayXd complex_laplacian_grid(const MetricState& state, const BasicFunction& f) {
  if (!state.positive())
    throw std::runtime_error("complex_laplacian: state is not positive");
  const TransverseModel& model = state.model();
  model.check_compatible(f, "complex_laplacian");
  const SphereBasis& basis = model.basis();
  const VectorXd lap_f = basis.synthesis(basis.lb_coeffs(f.coeff));
  return -lap_f.array() / (2.0 * state.density());
}

BasicFunction complex_laplacian(const MetricState& state, const BasicFunction& f) {
  return state.model().function_from_grid(complex_laplacian_grid(state, f).matrix());
}

BasicFunction transverse_scalar_curvature(const MetricState& state) {
  return state.model().function_from_grid(state.scalar_curvature_grid().matrix());
}

BasicFunction compute_h(const TransverseModel& model) {
  const SphereBasis& basis = model.basis();
  const ArrayXd& rho = model.background_density();
  // Ricci form density: F = 1 - (1/2) Δ log rho
  const VectorXd lap_logrho =
      basis.synthesis(basis.lb_coeffs(basis.analysis(rho.log().matrix())));
  const ArrayXd ricci_density = 1.0 - 0.5 * lap_logrho.array();
  const ArrayXd rhs = ricci_density - (2.0 * model.m() + 2.0) * rho;

  // class condition: the mean of s - m(2m+2) under the background measure
  const double mean_defect =
      model.fiber_length() * (basis.quadrature() * rhs).sum() / model.volume();
  if (std::abs(mean_defect) > 1e-8)
    throw std::runtime_error("compute_h: basic class condition violated, residual " +
                             std::to_string(mean_defect));

  // solve (1/2) Δ h = rhs spectrally
  VectorXd c = basis.analysis(rhs.matrix());
  for (int a = 0; a < c.size(); ++a) {
    const int l = basis.degree(a);
    c[a] = (l == 0) ? 0.0 : -2.0 * c[a] / (l * (l + 1.0));
  }

  // normalization: ∫ (e^h - 1) dmu_0 = 0
  const ArrayXd h_grid = basis.synthesis(c).array();
  const double mass = (basis.quadrature() * rho * h_grid.exp()).sum();
  const double target = (basis.quadrature() * rho).sum();
  const double shift = std::log(target / mass);
  BasicFunction h = model.function_from_coeff(std::move(c));
  return h + shift;
}

BasicFunction compute_h_closed_form(const TransverseModel& model) {
  const SphereBasis& basis = model.basis();
  const ArrayXd& rho = model.background_density();
  const ArrayXd ratio_psi = rho / kCanonicalDensity;
  const VectorXd base =
      -(2.0 * model.m() + 2.0) * basis.synthesis(model.perturbation_potential().coeff);
  const ArrayXd h_grid = base.array() - ratio_psi.log();
  BasicFunction h = model.function_from_grid(h_grid.matrix());
  const ArrayXd hg = basis.synthesis(h.coeff).array();
  const double mass = (basis.quadrature() * rho * hg.exp()).sum();
  const double target = (basis.quadrature() * rho).sum();
  return h + std::log(target / mass);
}

double integrate_grid(const MetricState& state, const ArrayXd& grid_values) {
  return (state.measure() * grid_values).sum();
}

double integrate(const MetricState& state, const BasicFunction& f) {
  const VectorXd g = state.model().grid_values(f);
  return integrate_grid(state, g.array());
}

double sasaki_ricci_bound(const MetricState& state, double t) {
  if (t <= 0.0) throw std::invalid_argument("sasaki_ricci_bound: t must be in (0,1]");
  if (!state.positive())
    throw std::runtime_error("sasaki_ricci_bound: state is not positive");
  const double m = state.model().m();
  // transverse block: mu * min s(u) - 2 with mu = 1/t; Reeb row contributes 2m
  const double transverse = state.scalar_curvature_grid().minCoeff() / t - 2.0;
  return std::min(2.0 * m, transverse);
}

}  // namespace tke
