#pragma once

// Quotient geometry of the regular Hopf model: the total space is the unit
// three-sphere fibered over the two-sphere, transverse complex dimension
// m = 1. Every basic object lives on the quotient, which we chart as the
// unit round sphere.
//
// Fixed conventions (asserted throughout the test suite):
//   - The background transverse Kahler form is stored as a density rho
//     against the round area element dA; the canonical background has
//     rho = 1/4 (Fubini-Study normalization, Ric^T = (2m+2) * form).
//   - Lifted integrals: ∫ f (form_u)^m ∧ eta = fiber_length * Σ q rho_u f.
//   - Complex Laplacian of a state u: box_u f = -(Δ_round f) / (2 rho_u);
//     nonnegative spectrum, and tr_u(i ddbar f) = -box_u f. The basic
//     de Rham Laplacian equals 2 box.
//   - Monge-Ampere ratio at m = 1: rho_u / rho = 1 - box_bg u.
//   - Scalar curvature: s(u) = (1 - (1/2) Δ_round log rho_u) / rho_u.
//   - The geometric contact form of the Hopf model satisfies
//     d(eta_geom) = 2 * (transverse Kahler form); potentials enter it as
//     eta_u = eta_geom + 2 d^c u. Only the diameter estimator needs this.

#include "tke/sphere_basis.hpp"

#include <Eigen/Dense>

#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace tke {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class SymmetryMode { full, even };

// A real basic function, held as spherical-harmonic coefficients in the
// flat l^2+l+m layout. Inactive (odd-degree) entries are zero in even mode.
struct BasicFunction {
  VectorXd coeff;
  int band_limit = 0;
  bool even_only = false;
};

BasicFunction operator+(const BasicFunction& a, const BasicFunction& b);
BasicFunction operator-(const BasicFunction& a, const BasicFunction& b);
BasicFunction operator*(double s, const BasicFunction& f);
BasicFunction operator+(const BasicFunction& f, double c);  // adds a constant

struct EtaEinsteinConstants {
  double tau = 0;
  double lambda = 0;
  double nu = 0;
  int m = 1;
};

// (lambda, nu) = (tau - 2, 2m + 2 - tau)
EtaEinsteinConstants eta_einstein_map(double tau, int m);

struct PerturbationTerm {
  int degree = 0;
  int order = 0;
  double amplitude = 0;
};

struct ModelConfig {
  int band_limit = 32;
  double fiber_length = 2.0 * 3.14159265358979323846;
  SymmetryMode symmetry_mode = SymmetryMode::full;
  std::vector<PerturbationTerm> perturbation;
};

class TransverseModel;
using ModelPtr = std::shared_ptr<const TransverseModel>;

// Immutable background geometry. Constructed through build_model.
class TransverseModel {
 public:
  int m() const { return 1; }
  double fiber_length() const { return fiber_length_; }
  SymmetryMode symmetry_mode() const { return mode_; }
  const SphereBasis& basis() const { return basis_; }
  const ModelConfig& config() const { return config_; }

  const ArrayXd& background_density() const { return rho_; }
  const BasicFunction& perturbation_potential() const { return psi_; }
  const BasicFunction& ricci_potential() const { return h_; }         // normalized
  const BasicFunction& ricci_potential_closed_form() const { return h_closed_; }
  const ArrayXd& ricci_potential_grid() const { return h_grid_; }

  double volume() const { return volume_; }  // V = fiber * ∫ rho dA

  // active coefficient indices (all of them in full mode, even degrees only
  // in even mode)
  const std::vector<int>& active_indices() const { return active_; }
  int n_active() const { return static_cast<int>(active_.size()); }

  // grid -> coefficients with the symmetry projection applied
  BasicFunction function_from_grid(const VectorXd& grid) const;
  BasicFunction function_from_coeff(VectorXd coeff) const;
  BasicFunction zero_function() const;
  // coefficients of a single (degree, order) harmonic with given amplitude
  BasicFunction harmonic(int degree, int order, double amplitude) const;
  BasicFunction constant(double c) const;

  VectorXd grid_values(const BasicFunction& f) const;
  double mean_background(const BasicFunction& f) const;  // (1/V) ∫ f dmu_0

  // gather/scatter between full coefficient vectors and active subvectors
  VectorXd gather(const VectorXd& full) const;
  VectorXd scatter(const VectorXd& act) const;

  // synthesis matrix restricted to active columns (cached)
  const MatrixXd& active_synthesis() const;

  void check_compatible(const BasicFunction& f, const char* where) const;

 private:
  friend ModelPtr build_model(const ModelConfig&);

  ModelConfig config_;
  SphereBasis basis_;
  double fiber_length_ = 0;
  SymmetryMode mode_ = SymmetryMode::full;
  ArrayXd rho_;
  BasicFunction psi_;
  BasicFunction h_;
  BasicFunction h_closed_;
  ArrayXd h_grid_;
  double volume_ = 0;
  std::vector<int> active_;

  mutable std::once_flag synth_once_;
  mutable MatrixXd synth_active_;

  explicit TransverseModel(const ModelConfig& cfg) : config_(cfg), basis_(cfg.band_limit) {}
};

// Builds the background: canonical density 1/4 plus (1/2) Δ psi from the
// optional perturbation potential. Rejects non-positive backgrounds and odd
// perturbations in even mode.
ModelPtr build_model(const ModelConfig& config);

// Derived geometry of form_u = background + i ddbar u, cached on the grid.
class MetricState {
 public:
  MetricState(ModelPtr model, BasicFunction u);

  const TransverseModel& model() const { return *model_; }
  ModelPtr model_ptr() const { return model_; }
  const BasicFunction& potential() const { return u_; }

  const ArrayXd& density() const { return rho_u_; }     // rho_u at nodes
  const ArrayXd& ma_ratio() const { return ratio_; }    // rho_u / rho
  bool positive() const { return positive_; }
  const ArrayXd& measure() const { return measure_; }   // fiber * q * rho_u
  const ArrayXd& scalar_curvature_grid() const;         // requires positivity
  const VectorXd& potential_grid() const { return u_grid_; }

  double lifted_volume() const { return measure_.sum(); }

 private:
  ModelPtr model_;
  BasicFunction u_;
  VectorXd u_grid_;
  ArrayXd rho_u_, ratio_, measure_;
  bool positive_ = false;
  ArrayXd scurv_;
};

MetricState metric_state(ModelPtr model, const BasicFunction& u);

// box_u f = -(Δ f) / (2 rho_u), projected back to the band limit.
BasicFunction complex_laplacian(const MetricState& state, const BasicFunction& f);
// Same operator as raw grid values (no reprojection); used by oracles.
ArrayXd complex_laplacian_grid(const MetricState& state, const BasicFunction& f);

// s(u) projected to the band limit. Requires a positive state.
BasicFunction transverse_scalar_curvature(const MetricState& state);

// Ricci potential of the background: i ddbar h = Ric^T - (2m+2) * form,
// normalized by ∫ (e^h - 1) dmu_0 = 0. Solved spectrally (Poisson route).
BasicFunction compute_h(const TransverseModel& model);
// Closed form h = -(2m+2) psi - log(ratio of psi) + const, same normalization.
BasicFunction compute_h_closed_form(const TransverseModel& model);

// fiber * ∫ f (density_u) dA; with f = 1 this is the lifted volume.
double integrate(const MetricState& state, const BasicFunction& f);
double integrate_grid(const MetricState& state, const ArrayXd& grid_values);

// Certified lower bound on the full Sasaki Ricci tensor of the rescaled
// metric with mu = 1/t, assembled from min over nodes of s(u) and the Reeb
// row Ric(., xi) = 2m eta(.).
double sasaki_ricci_bound(const MetricState& state, double t);

}  // namespace tke
