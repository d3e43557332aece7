#include "tke/ma_solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace tke {

namespace {

double einstein_factor(const TransverseModel& model) { return 2.0 * model.m() + 2.0; }

// Raw residual grid of (s1)/(s2) in log form.
ArrayXd residual_grid(const MetricState& state, double t, Equation eqn,
                      const BasicFunction& h) {
  if (!state.positive())
    throw std::runtime_error("residual: state is not positive");
  const TransverseModel& model = state.model();
  const double c = einstein_factor(model);
  ArrayXd r = state.ma_ratio().log() + c * t * state.potential_grid().array() -
              model.grid_values(h).array();
  if (eqn == Equation::s2) {
    const double L = evaluate_functional(FunctionalKind::L, state.model_ptr(),
                                         model.constant(0.0), state.potential());
    r += c * L;
  }
  return r;
}

struct JacobianParts {
  MatrixXd J;       // exact derivative of the band-projected residual map
  VectorXd rhs_mu;  // integrals of active basis functions against dmu_u
};

JacobianParts assemble_jacobian(const MetricState& state, double t, Equation eqn) {
  const TransverseModel& model = state.model();
  const SphereBasis& basis = model.basis();
  const MatrixXd& S = model.active_synthesis();
  const int n = model.n_active();
  const double c = einstein_factor(model);

  const ArrayXd w_box = basis.quadrature() / (2.0 * state.density());
  MatrixXd A = S.transpose() * (w_box.matrix().asDiagonal() * S);
  // box_u Y_b = l(l+1) Y_b / (2 rho_u); columns scale with the symbol
  const auto& act = model.active_indices();
  for (int b = 0; b < n; ++b) {
    const int l = basis.degree(act[b]);
    A.col(b) *= static_cast<double>(l * (l + 1));
  }

  JacobianParts parts;
  parts.J = -A;
  parts.J.diagonal().array() += c * t;
  parts.rhs_mu = model.fiber_length() *
                 (S.transpose() * (basis.quadrature() * state.density()).matrix());
  if (eqn == Equation::s2) {
    // mean term: (2m+2)/V * (integral of delta) lands on the constant mode
    const double y00 = std::sqrt(4.0 * std::numbers::pi);
    parts.J.row(0) += (c / model.volume()) * y00 * parts.rhs_mu.transpose();
  }
  return parts;
}

// Symmetric pencil (G, W) of the linearized operator in the weighted inner
// product; eigenvalues are the operator spectrum.
void assemble_pencil(const MetricState& state, double t, Equation eqn, MatrixXd& G,
                     MatrixXd& W) {
  const TransverseModel& model = state.model();
  const SphereBasis& basis = model.basis();
  const MatrixXd& S = model.active_synthesis();
  const int n = model.n_active();
  const double c = einstein_factor(model);
  const double fiber = model.fiber_length();

  W = fiber * (S.transpose() *
               ((basis.quadrature() * state.density()).matrix().asDiagonal() * S));
  G = c * t * W;
  const auto& act = model.active_indices();
  for (int b = 0; b < n; ++b) {
    const int l = basis.degree(act[b]);
    G(b, b) -= 0.5 * fiber * static_cast<double>(l * (l + 1));
  }
  if (eqn == Equation::s2) {
    const double y00 = std::sqrt(4.0 * std::numbers::pi);
    VectorXd c1 = VectorXd::Zero(n);
    c1[0] = y00;
    const VectorXd wc1 = W * c1;
    G += (c / model.volume()) * wc1 * wc1.transpose();
  }
}

struct NewtonOutcome {
  bool ok = false;
  BasicFunction u;
  NewtonRecord record;
  std::string reason;
};

NewtonOutcome newton_solve(const ModelPtr& model, Equation eqn, double t,
                           const BasicFunction& start, const SolverOptions& opt) {
  NewtonOutcome out;
  out.record.t = t;
  const BasicFunction& h = model->ricci_potential();
  BasicFunction u = start;
  MetricState st = metric_state(model, u);
  if (!st.positive()) {
    out.reason = "initial state not positive";
    return out;
  }
  std::vector<double> history;
  double rn = residual_norm(st, t, eqn, h);
  history.push_back(rn);

  int it = 0;
  for (; it < opt.max_newton && rn >= opt.newton_tol; ++it) {
    const BasicFunction r = residual(st, t, eqn, h);
    const JacobianParts parts = assemble_jacobian(st, t, eqn);
    const VectorXd rhs = -model->gather(r.coeff);
    Eigen::PartialPivLU<MatrixXd> lu(parts.J);
    const VectorXd delta_act = lu.solve(rhs);
    if (!delta_act.allFinite()) {
      out.reason = "singular linearized operator";
      out.record.iterations = it;
      out.record.final_residual = rn;
      return out;
    }
    const BasicFunction delta = model->function_from_coeff(model->scatter(delta_act));

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < opt.max_line_search; ++ls, alpha *= 0.5) {
      const BasicFunction u_try = u + alpha * delta;
      MetricState st_try = metric_state(model, u_try);
      if (!st_try.positive()) continue;
      const double rn_try = residual_norm(st_try, t, eqn, h);
      if (rn_try < rn) {
        u = u_try;
        st = std::move(st_try);
        rn = rn_try;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.reason = "line search failed (positivity or no residual decrease)";
      out.record.iterations = it;
      out.record.final_residual = rn;
      return out;
    }
    history.push_back(rn);
  }

  if (rn >= opt.newton_tol) {
    out.reason = "newton did not converge";
    out.record.iterations = it;
    out.record.final_residual = rn;
    return out;
  }

  out.ok = true;
  out.u = u;
  out.record.iterations = it;
  out.record.final_residual = rn;
  // terminal convergence order from the last residual triple above the
  // round-off floor
  for (size_t k = history.size(); k >= 3; --k) {
    const double r0 = history[k - 3], r1 = history[k - 2], r2 = history[k - 1];
    if (r2 > 1e-14 && r1 > 1e-14 && r0 > r1 && r1 > r2) {
      out.record.conv_order = std::log(r2 / r1) / std::log(r1 / r0);
      break;
    }
  }
  return out;
}

FunctionalTrace trace_at(const ModelPtr& model, const BasicFunction& u) {
  FunctionalTrace tr;
  const BasicFunction zero = model->zero_function();
  tr.L = evaluate_functional(FunctionalKind::L, model, zero, u);
  tr.M = evaluate_functional(FunctionalKind::M, model, zero, u);
  tr.I = evaluate_functional(FunctionalKind::I, model, zero, u);
  tr.J = evaluate_functional(FunctionalKind::J, model, zero, u);
  return tr;
}

}  // namespace

const BasicFunction& ContinuityFamily::at_t(double tv) const {
  for (int k = 0; k < size(); ++k)
    if (std::abs(t[k] - tv) < 1e-12) return u[k];
  throw std::out_of_range("ContinuityFamily::at_t: no state stored at requested t");
}

BasicFunction residual(const MetricState& state, double t, Equation eqn,
                       const BasicFunction& h) {
  return state.model().function_from_grid(residual_grid(state, t, eqn, h).matrix());
}

double residual_norm(const MetricState& state, double t, Equation eqn,
                     const BasicFunction& h) {
  const BasicFunction r = residual(state, t, eqn, h);
  return state.model().grid_values(r).lpNorm<Eigen::Infinity>();
}

double linearized_sigma_min(const MetricState& state, double t, Equation eqn) {
  MatrixXd G, W;
  assemble_pencil(state, t, eqn, G, W);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(G, W);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("linearized_sigma_min: eigensolver failed");
  return es.eigenvalues().array().abs().minCoeff();
}

LinearizedSolveResult linearized_solve(const MetricState& state, double t, Equation eqn,
                                       const BasicFunction& rhs,
                                       const SolverOptions& options) {
  const TransverseModel& model = state.model();
  model.check_compatible(rhs, "linearized_solve");
  if (!state.positive())
    throw std::runtime_error("linearized_solve: state is not positive");

  MatrixXd G, W;
  assemble_pencil(state, t, eqn, G, W);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(G, W);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("linearized_solve: eigensolver failed");
  const VectorXd evals = es.eigenvalues();
  const double sigma_min = evals.array().abs().minCoeff();

  LinearizedSolveResult out;
  out.sigma_min = sigma_min;

  if (!options.projection) {
    if (sigma_min < options.kernel_threshold)
      throw std::runtime_error(
          "linearized_solve: operator is singular to tolerance (sigma_min = " +
          std::to_string(sigma_min) + "); set the projection flag");
    const JacobianParts parts = assemble_jacobian(state, t, eqn);
    const VectorXd delta_act =
        Eigen::PartialPivLU<MatrixXd>(parts.J).solve(model.gather(rhs.coeff));
    out.delta = model.function_from_coeff(model.scatter(delta_act));
    return out;
  }

  // least squares on the complement of the near-kernel, in the weighted
  // inner product: expand over W-orthonormal eigenvectors
  const VectorXd beta = es.eigenvectors().transpose() * (W * model.gather(rhs.coeff));
  VectorXd delta_act = VectorXd::Zero(model.n_active());
  for (int k = 0; k < evals.size(); ++k) {
    if (std::abs(evals[k]) < options.kernel_threshold) {
      ++out.dropped_modes;
      continue;
    }
    delta_act += (beta[k] / evals[k]) * es.eigenvectors().col(k);
  }
  out.delta = model.function_from_coeff(model.scatter(delta_act));
  return out;
}

std::vector<double> uniform_t_nodes(int n, double t_final) {
  if (n < 2) throw std::invalid_argument("uniform_t_nodes: need at least 2 nodes");
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = t_final * k / (n - 1.0);
  return t;
}

ContinuityFamily continuity_solve(const ModelPtr& model, Equation eqn,
                                  const SolverOptions& options,
                                  std::vector<double> t_nodes,
                                  const BasicFunction* initial_guess) {
  if (options.newton_tol <= 0 || options.min_step <= 0 || options.kernel_threshold <= 0)
    throw std::invalid_argument("continuity_solve: tolerances must be positive");
  if (options.max_newton < 1 || options.max_line_search < 1)
    throw std::invalid_argument("continuity_solve: iteration limits must be positive");
  if (t_nodes.empty()) t_nodes = uniform_t_nodes(21, 1.0);

  ContinuityFamily fam;
  fam.equation = eqn;
  fam.model = model;
  const BasicFunction& h = model->ricci_potential();

  // the gauge-fixed equation is marched; (s1) states come from the shift
  const Equation march_eqn = Equation::s2;

  BasicFunction u = initial_guess ? *initial_guess : model->zero_function();

  auto record_node = [&](double t, const BasicFunction& u_node, NewtonRecord rec) {
    BasicFunction stored = u_node;
    if (eqn == Equation::s1 && t > 0.0) {
      const double L = evaluate_functional(FunctionalKind::L, model,
                                           model->zero_function(), u_node);
      stored = u_node + L / t;
      MetricState st = metric_state(model, stored);
      rec.final_residual = residual_norm(st, t, Equation::s1, h);
    }
    if (options.record_sigma_min) {
      MetricState st = metric_state(model, stored);
      rec.sigma_min = linearized_sigma_min(st, t, eqn);
    }
    fam.t.push_back(t);
    fam.u.push_back(stored);
    fam.newton.push_back(rec);
    fam.trace.push_back(trace_at(model, stored));
    fam.reached_t = t;
  };

  // first node
  {
    NewtonOutcome first = newton_solve(model, march_eqn, t_nodes.front(), u, options);
    if (!first.ok) {
      fam.failure = SolverFailure{t_nodes.front(), first.record.final_residual,
                                  std::numeric_limits<double>::quiet_NaN(), first.reason};
      return fam;
    }
    u = first.u;
    record_node(t_nodes.front(), u, first.record);
  }

  for (size_t k = 1; k < t_nodes.size(); ++k) {
    const double t_target = t_nodes[k];
    double t_cur = t_nodes[k - 1];
    BasicFunction u_cur = u;
    bool reached = false;
    double step = t_target - t_cur;
    NewtonOutcome last;
    while (!reached) {
      const double t_try = (std::abs((t_cur + step) - t_target) < 1e-15)
                               ? t_target
                               : t_cur + step;
      last = newton_solve(model, march_eqn, t_try, u_cur, options);
      if (last.ok) {
        t_cur = t_try;
        u_cur = last.u;
        if (t_cur == t_target) reached = true;
        // grow back toward the full remaining interval
        step = t_target - t_cur;
      } else {
        step *= 0.5;
        if (std::abs(step) < options.min_step) {
          MetricState st = metric_state(model, u_cur);
          fam.failure = SolverFailure{
              t_try, last.record.final_residual,
              linearized_sigma_min(st, t_cur, march_eqn), last.reason};
          fam.complete = false;
          return fam;
        }
      }
    }
    u = u_cur;
    record_node(t_target, u, last.record);
  }

  fam.complete = true;

  // gauge identity at t = 0 for the gauge-fixed family: L(0, u_0) = 0
  if (eqn == Equation::s2 && std::abs(t_nodes.front()) < 1e-15) {
    const double L0 = fam.trace.front().L;
    if (std::abs(L0) > 1e-8)
      throw std::runtime_error("continuity_solve: gauge identity violated at t=0, L = " +
                               std::to_string(L0));
  }
  return fam;
}

UniquenessReport uniqueness_experiment(const ModelPtr& model, Equation eqn,
                                       const std::vector<BasicFunction>& seeds,
                                       double backward_tau,
                                       const SolverOptions& options) {
  if (model->symmetry_mode() != SymmetryMode::even)
    throw std::invalid_argument(
        "uniqueness_experiment: requires the even symmetry mode (no Hamiltonian fields)");

  UniquenessReport rep;
  const int base_nodes = 21;
  for (size_t s = 0; s < seeds.size(); ++s) {
    // distinct t-schedules that share the base grid
    const int nodes = base_nodes + static_cast<int>(s) * (base_nodes - 1);
    ContinuityFamily fam = continuity_solve(model, eqn, options,
                                            uniform_t_nodes(nodes, 1.0), &seeds[s]);
    rep.branches.push_back({std::move(fam), "seed " + std::to_string(s)});
  }

  rep.all_converged = true;
  for (const auto& b : rep.branches) rep.all_converged = rep.all_converged && b.family.complete;

  // pairwise distances at matching t
  for (size_t i = 0; i < rep.branches.size(); ++i) {
    for (size_t j = i + 1; j < rep.branches.size(); ++j) {
      const auto& fi = rep.branches[i].family;
      const auto& fj = rep.branches[j].family;
      for (int a = 0; a < fi.size(); ++a) {
        for (int b = 0; b < fj.size(); ++b) {
          if (std::abs(fi.t[a] - fj.t[b]) > 1e-12) continue;
          const double d =
              model->grid_values(fi.u[a] - fj.u[b]).lpNorm<Eigen::Infinity>();
          rep.max_pairwise_distance = std::max(rep.max_pairwise_distance, d);
          if (std::abs(fi.t[a] - 1.0) < 1e-12)
            rep.t_final_distance = std::max(rep.t_final_distance, d);
        }
      }
    }
  }

  // backward extension from tau to t = 0, started from the first branch
  if (!rep.branches.empty() && rep.branches.front().family.complete) {
    const auto& base = rep.branches.front().family;
    const BasicFunction& u_tau = base.at_t(backward_tau);
    const int down_nodes =
        static_cast<int>(std::lround(backward_tau * (base_nodes - 1))) + 1;
    std::vector<double> down(down_nodes);
    for (int k = 0; k < down_nodes; ++k)
      down[k] = backward_tau * (1.0 - k / (down_nodes - 1.0));
    ContinuityFamily back = continuity_solve(model, eqn, options, down, &u_tau);
    rep.all_converged = rep.all_converged && back.complete;
    if (back.complete) {
      rep.backward_endpoint_distance =
          model->grid_values(back.u.back() - base.u.front()).lpNorm<Eigen::Infinity>();
      rep.backward_L0 = back.trace.back().L;
    }
    rep.branches.push_back({std::move(back), "backward from tau"});
  }
  return rep;
}

}  // namespace tke
