#pragma once

// Newton continuity solver for the two parametrized Monge-Ampere families.
// In log form the residuals are
//   r1(u,t) = log(ma_ratio(u)) + t (2m+2) u - h
//   r2(u,t) = r1(u,t) + (2m+2) L(0,u)
// and the linearizations are
//   d r1 = -box_u + t (2m+2)
//   d r2 = d r1 + (2m+2)/V * (integral against dmu_u)
// The gauge-fixed family (r2) is solved directly; (r1) states for t > 0 are
// produced by the constant-shift correspondence u + L(0,u)/t.

#include "tke/functionals.hpp"
#include "tke/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tke {

enum class Equation { s1, s2 };

struct SolverOptions {
  double newton_tol = 1e-10;   // max norm of the band-projected residual
  int max_newton = 30;
  double min_step = 1e-4;      // smallest allowed t substep before giving up
  int max_line_search = 12;
  bool projection = false;     // least-squares on the near-kernel complement
  double kernel_threshold = 1e-3;
  bool record_sigma_min = true;
};

struct NewtonRecord {
  double t = 0;
  int iterations = 0;
  double final_residual = 0;
  double conv_order = std::numeric_limits<double>::quiet_NaN();
  double sigma_min = std::numeric_limits<double>::quiet_NaN();
};

struct FunctionalTrace {
  double L = 0, M = 0, I = 0, J = 0;
};

struct SolverFailure {
  double t = 0;
  double last_residual = 0;
  double sigma_min = std::numeric_limits<double>::quiet_NaN();
  std::string reason;
};

struct ContinuityFamily {
  Equation equation = Equation::s2;
  ModelPtr model;
  std::vector<double> t;
  std::vector<BasicFunction> u;
  std::vector<NewtonRecord> newton;
  std::vector<FunctionalTrace> trace;
  double reached_t = 0;
  bool complete = false;  // reached the last requested node
  std::optional<SolverFailure> failure;

  int size() const { return static_cast<int>(t.size()); }
  const BasicFunction& at_t(double tv) const;
};

// Band-projected residual of (s1)/(s2) at the given state.
BasicFunction residual(const MetricState& state, double t, Equation eqn,
                       const BasicFunction& h);
double residual_norm(const MetricState& state, double t, Equation eqn,
                     const BasicFunction& h);

struct LinearizedSolveResult {
  BasicFunction delta;
  double sigma_min = 0;
  int dropped_modes = 0;
};

// Solves (d r)_u delta = rhs. Reports the smallest singular value of the
// operator in the state's weighted inner product; with options.projection the
// solve is least-squares on the complement of the near-kernel, otherwise a
// near-singular operator throws.
LinearizedSolveResult linearized_solve(const MetricState& state, double t, Equation eqn,
                                       const BasicFunction& rhs,
                                       const SolverOptions& options = {});

// Smallest |eigenvalue| of the linearized operator (self-adjoint in the
// weighted inner product).
double linearized_sigma_min(const MetricState& state, double t, Equation eqn);

// Marches the family across the requested t nodes (default: uniform grid of
// n_nodes between 0 and t_final). Newton failures halve the substep; loss of
// positivity or a singular operator stops the march gracefully with the
// family built so far.
ContinuityFamily continuity_solve(const ModelPtr& model, Equation eqn,
                                  const SolverOptions& options = {},
                                  std::vector<double> t_nodes = {},
                                  const BasicFunction* initial_guess = nullptr);

std::vector<double> uniform_t_nodes(int n, double t_final = 1.0);

struct UniquenessBranch {
  ContinuityFamily family;
  std::string label;
};

struct UniquenessReport {
  std::vector<UniquenessBranch> branches;
  double max_pairwise_distance = 0;     // over matching t nodes
  double t_final_distance = 0;
  double backward_endpoint_distance = 0;
  double backward_L0 = 0;
  bool all_converged = false;
};

// Runs the continuity solve from several Newton initializations and
// t-schedules, then extends the solution at backward_tau back to t = 0 and
// compares with the forward start.
UniquenessReport uniqueness_experiment(const ModelPtr& model, Equation eqn,
                                       const std::vector<BasicFunction>& seeds,
                                       double backward_tau = 0.7,
                                       const SolverOptions& options = {});

}  // namespace tke
