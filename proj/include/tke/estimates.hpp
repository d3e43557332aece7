#pragma once

// The quantitative estimate chain for a continuity family: discrete Green
// kernel of the complex Laplacian with the lifted measure, the rescaled
// Sasakian family (volume identity, Ricci lower bound, diameter by geodesic
// graph), the oscillation bound with its fitted constant, and the
// M-monotonicity / derivative-identity finite-difference checks.

#include "tke/ma_solver.hpp"
#include "tke/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tke {

// Zero-row-mean symmetric Green kernel built from the weighted eigenpairs of
// the complex Laplacian of a state. Acts as the inverse of box_u on the
// mean-free subspace: f = mean_mu(f) + G (box_u f).
class GreenKernel {
 public:
  GreenKernel(const MetricState& state);

  // kernel entry G(x, y) for grid nodes
  double entry(int node_x, int node_y) const;
  // ∫ G(x, y) g(y) dmu(y) for a grid function g
  ArrayXd apply(const ArrayXd& g) const;
  // ∫ G(x_node, y) dmu(y)
  double row_mean(int node) const;
  // most negative kernel entry over the (strided) node pairs
  double min_entry(int stride = 1) const;

  const VectorXd& eigenvalues() const { return lambda_; }
  const ArrayXd& measure() const { return mu_; }

 private:
  VectorXd lambda_;  // positive eigenvalues, ascending
  MatrixXd modes_;   // n_nodes x (n_active - 1), scaled by 1/sqrt(lambda)
  ArrayXd mu_;
};

struct GreenBound {
  double K = 0;                  // -(min kernel entry), >= 0
  double reproduction_error = 0; // max over probe functions
  double max_row_mean = 0;
  double symmetry_error = 0;     // sampled pairs
  std::shared_ptr<GreenKernel> kernel;
};

GreenBound green_lower_bound(const MetricState& state, int kernel_stride = 1);

struct DiameterOptions {
  int base_samples = 360;   // Fibonacci points on the quotient
  int fiber_samples = 56;   // per base point
  int knn = 40;
  int sources = 48;         // farthest-point Dijkstra sweeps
  double tolerance = 0.05;  // documented resolution tolerance
};

// Geodesic-graph diameter of the rescaled Sasakian metric mu^{-1} g^T_u plus
// (mu^{-1} eta_u)^2 on Hopf-coordinate samples of the total space.
double diameter_estimate(const MetricState& state, double mu,
                         const DiameterOptions& options = {});

struct RescaledMetric {
  double t = 0;
  double mu = 0;
  double volume = 0;                 // mu^{-(m+1)} x lifted volume
  double volume_identity_error = 0;  // relative, vs t^{m+1} V
  double transverse_ricci_min = 0;   // min over nodes of s(u)
  double sasaki_lower_bound = 0;     // min(2m, mu min s - 2)
  double diameter = 0;
  std::string diameter_method;
};

// pre: the state solves (s1)/(s2) at this t to the given tolerance.
RescaledMetric rescaled_family_check(const MetricState& state, double t,
                                     const DiameterOptions& options = {},
                                     double solution_tol = 1e-6,
                                     bool with_diameter = true);

struct PerTRecord {
  double t = 0;
  double osc = 0, I = 0, L = 0, M = 0;
  double sup_abs_u = 0;
  double t_osc = 0;
  int x_t_node = 0;
  double u_at_xt = 0;
  double L_minus_u_xt = 0;
  bool xt_exists = false;
  // interior nodes only
  double dMdt = std::numeric_limits<double>::quiet_NaN();
  double identity_rhs = std::numeric_limits<double>::quiet_NaN();
  double identity_error = std::numeric_limits<double>::quiet_NaN();
  double osc_bound_slack = std::numeric_limits<double>::quiet_NaN();
};

struct EstimateReport {
  std::vector<PerTRecord> per_t;
  double green_K = 0;
  double fitted_C = 0;
  double max_dMdt = 0;             // most positive interior finite difference
  double max_identity_error = 0;
  double max_t_osc = 0;
  bool m_monotone = false;
  bool oscillation_bound_holds = false;
  bool xt_exists_everywhere = false;
  bool L_bound_holds = false;      // |L - u(x_t)| <= osc + 1e-9
};

// pre: family has at least 5 converged samples.
EstimateReport apriori_report(const ContinuityFamily& family,
                              const GreenBound* green = nullptr);

}  // namespace tke
