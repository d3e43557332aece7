#include "tke/functionals.hpp"

#include <cmath>
#include <stdexcept>

namespace tke {

namespace {

// Gauss-Legendre rule mapped to [0,1].
void unit_rule(int order, std::vector<double>& s, std::vector<double>& w) {
  Eigen::Array<double, Eigen::Dynamic, 1> x, wq;
  gauss_legendre<double>(order, x, wq);
  s.resize(order);
  w.resize(order);
  for (int k = 0; k < order; ++k) {
    s[k] = 0.5 * (x[k] + 1.0);
    w[k] = 0.5 * wq[k];
  }
}

// One pass of the path quadrature for L or M at a fixed order.
double path_value(FunctionalKind kind, const ModelPtr& model, const FunctionalPath& path,
                  int order) {
  std::vector<double> s, w;
  unit_rule(order, s, w);
  const double V = model->volume();
  const double target = model->m() * (2.0 * model->m() + 2.0);
  double acc = 0;
  for (int k = 0; k < order; ++k) {
    const PathSample ps = path.at(s[k]);
    MetricState st = metric_state(model, ps.phi);
    if (!st.positive())
      throw std::runtime_error("evaluate_functional: inadmissible intermediate state on the path");
    const VectorXd dot = model->grid_values(ps.phi_dot);
    double inner;
    if (kind == FunctionalKind::L) {
      inner = integrate_grid(st, dot.array());
    } else {
      inner = -integrate_grid(st, dot.array() * (st.scalar_curvature_grid() - target));
    }
    acc += w[k] * inner / V;
  }
  return acc;
}

double adaptive_path_value(FunctionalKind kind, const ModelPtr& model,
                           const FunctionalPath& path, const PathQuadrature& quad) {
  int order = quad.initial_order;
  double prev = path_value(kind, model, path, order);
  for (int d = 0; d < quad.max_doublings; ++d) {
    order *= 2;
    const double next = path_value(kind, model, path, order);
    if (std::abs(next - prev) < quad.tol) return next;
    prev = next;
  }
  throw std::runtime_error("evaluate_functional: s-refinement did not converge");
}

}  // namespace

FunctionalPath FunctionalPath::linear(BasicFunction from, BasicFunction to) {
  FunctionalPath p;
  p.from_ = from;
  p.to_ = to;
  const BasicFunction diff = to - from;
  p.eval_ = [from, diff](double s) {
    return PathSample{from + s * diff, diff};
  };
  return p;
}

FunctionalPath FunctionalPath::quadratic_detour(BasicFunction from, BasicFunction to,
                                                BasicFunction bump) {
  FunctionalPath p;
  p.from_ = from;
  p.to_ = to;
  const BasicFunction diff = to - from;
  p.eval_ = [from, diff, bump](double s) {
    PathSample out;
    out.phi = from + s * diff + (s * (1.0 - s)) * bump;
    out.phi_dot = diff + (1.0 - 2.0 * s) * bump;
    return out;
  };
  return p;
}

double evaluate_functional(FunctionalKind kind, const ModelPtr& model,
                           const BasicFunction& phi, const BasicFunction& phi_prime,
                           const std::optional<FunctionalPath>& path,
                           const PathQuadrature& quad) {
  model->check_compatible(phi, "evaluate_functional");
  model->check_compatible(phi_prime, "evaluate_functional");
  const double V = model->volume();

  MetricState st_a = metric_state(model, phi);
  if (!st_a.positive())
    throw std::runtime_error("evaluate_functional: phi is not admissible");

  switch (kind) {
    case FunctionalKind::L:
    case FunctionalKind::M: {
      const FunctionalPath p = path ? *path : FunctionalPath::linear(phi, phi_prime);
      return adaptive_path_value(kind, model, p, quad);
    }
    case FunctionalKind::I: {
      MetricState st_b = metric_state(model, phi_prime);
      if (!st_b.positive())
        throw std::runtime_error("evaluate_functional: phi' is not admissible");
      const VectorXd diff = model->grid_values(phi_prime - phi);
      return (integrate_grid(st_a, diff.array()) - integrate_grid(st_b, diff.array())) / V;
    }
    case FunctionalKind::J: {
      const double L =
          evaluate_functional(FunctionalKind::L, model, phi, phi_prime, path, quad);
      const VectorXd diff = model->grid_values(phi_prime - phi);
      return -L + integrate_grid(st_a, diff.array()) / V;
    }
  }
  throw std::logic_error("evaluate_functional: unknown kind");
}

double functional_J_path(const ModelPtr& model, const FunctionalPath& path,
                         const PathQuadrature& quad) {
  MetricState st_a = metric_state(model, path.from());
  const double V = model->volume();
  auto value = [&](int order) {
    std::vector<double> s, w;
    unit_rule(order, s, w);
    double acc = 0;
    for (int k = 0; k < order; ++k) {
      const PathSample ps = path.at(s[k]);
      MetricState st = metric_state(model, ps.phi);
      if (!st.positive())
        throw std::runtime_error("functional_J_path: inadmissible intermediate state");
      const VectorXd dot = model->grid_values(ps.phi_dot);
      acc += w[k] *
             (integrate_grid(st_a, dot.array()) - integrate_grid(st, dot.array())) / V;
    }
    return acc;
  };
  int order = quad.initial_order;
  double prev = value(order);
  for (int d = 0; d < quad.max_doublings; ++d) {
    order *= 2;
    const double next = value(order);
    if (std::abs(next - prev) < quad.tol) return next;
    prev = next;
  }
  throw std::runtime_error("functional_J_path: s-refinement did not converge");
}

BasicFunction random_admissible_potential(const ModelPtr& model, std::mt19937_64& rng,
                                          double margin, double scale) {
  const SphereBasis& basis = model->basis();
  std::normal_distribution<double> gauss;
  VectorXd c = VectorXd::Zero(basis.size());
  for (int a : model->active_indices()) {
    const int l = basis.degree(a);
    if (l == 0) continue;
    c[a] = scale * gauss(rng) * std::exp(-0.35 * l);
  }
  BasicFunction u = model->function_from_coeff(std::move(c));
  for (int tries = 0; tries < 200; ++tries) {
    MetricState st = metric_state(model, u);
    if (st.ma_ratio().minCoeff() >= margin) return u;
    u = 0.7 * u;
  }
  throw std::runtime_error("random_admissible_potential: rescaling failed");
}

double FunctionalReport::max_residual(const std::string& name) const {
  double r = 0;
  for (const auto& rec : records)
    if (rec.name == name) r = std::max(r, std::abs(rec.residual));
  return r;
}

FunctionalReport verify_functional_identities(const ModelPtr& model, int samples,
                                              uint64_t seed,
                                              const IdentityTolerances& tol) {
  FunctionalReport report;
  report.seed = seed;
  report.samples = samples;
  report.chain_left_min_margin = std::numeric_limits<double>::infinity();
  report.chain_right_min_margin = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  const double V = model->volume();
  const int m = model->m();

  auto push = [&](const std::string& name, int sample, double residual, double tolerance) {
    IdentityRecord rec{name, sample, residual, tolerance, std::abs(residual) <= tolerance};
    report.all_pass = report.all_pass && rec.pass;
    report.records.push_back(std::move(rec));
  };

  for (int k = 0; k < samples; ++k) {
    const BasicFunction a = random_admissible_potential(model, rng);
    const BasicFunction b = random_admissible_potential(model, rng);
    const BasicFunction c = random_admissible_potential(model, rng);

    const double Lab = evaluate_functional(FunctionalKind::L, model, a, b);
    const double Lbc = evaluate_functional(FunctionalKind::L, model, b, c);
    const double Lac = evaluate_functional(FunctionalKind::L, model, a, c);
    push("L_cocycle", k, Lab + Lbc - Lac, tol.cocycle);

    const double Mab = evaluate_functional(FunctionalKind::M, model, a, b);
    const double Mbc = evaluate_functional(FunctionalKind::M, model, b, c);
    const double Mac = evaluate_functional(FunctionalKind::M, model, a, c);
    push("M_cocycle", k, Mab + Mbc - Mac, tol.cocycle);

    // translation invariances
    const double c1 = 0.17, c2 = -0.31;
    push("L_translation", k,
         evaluate_functional(FunctionalKind::L, model, a, b + c2) - Lab - c2,
         tol.translation);
    push("M_translation", k,
         evaluate_functional(FunctionalKind::M, model, a + c1, b + c2) - Mab,
         tol.translation);

    const double Iab = evaluate_functional(FunctionalKind::I, model, a, b);
    const double Jab = evaluate_functional(FunctionalKind::J, model, a, b);
    push("I_shift", k,
         evaluate_functional(FunctionalKind::I, model, a, b + c2) - Iab, tol.translation);
    push("J_shift", k,
         evaluate_functional(FunctionalKind::J, model, a, b + c2) - Jab, tol.translation);

    // corrected J-cocycle
    {
      const double Jbc = evaluate_functional(FunctionalKind::J, model, b, c);
      const double Jac = evaluate_functional(FunctionalKind::J, model, a, c);
      MetricState st_a = metric_state(model, a);
      MetricState st_b = metric_state(model, b);
      const VectorXd diff = model->grid_values(c - b);
      const double corr =
          (integrate_grid(st_a, diff.array()) - integrate_grid(st_b, diff.array())) / V;
      push("J_cocycle_corrected", k, Jab + Jbc - (Jac - corr), tol.cocycle);
    }

    // chain 0 <= I <= (m+1)(I-J) <= m I, margins recorded
    {
      const double mid = (m + 1.0) * (Iab - Jab);
      push("chain_nonneg_I", k, std::min(0.0, Iab), tol.chain_margin);
      const double left = mid - Iab;
      const double right = m * Iab - mid;
      push("chain_left", k, std::min(0.0, left), tol.chain_margin);
      push("chain_right", k, std::min(0.0, right), tol.chain_margin);
      report.chain_left_min_margin = std::min(report.chain_left_min_margin, left);
      report.chain_right_min_margin = std::min(report.chain_right_min_margin, right);
    }

    // derivative identity: d/dt (I - J)(a, phi_t) against the laplacian form
    {
      const double t0 = 0.5, dt = 1e-3;
      const BasicFunction dir = b - a;
      auto phi_at = [&](double t) { return a + t * dir; };
      auto imj = [&](double t) {
        const BasicFunction p = phi_at(t);
        return evaluate_functional(FunctionalKind::I, model, a, p) -
               evaluate_functional(FunctionalKind::J, model, a, p);
      };
      const double fd = (imj(t0 + dt) - imj(t0 - dt)) / (2.0 * dt);
      const BasicFunction pt = phi_at(t0);
      MetricState st_t = metric_state(model, pt);
      const VectorXd dphi = model->grid_values(pt - a);
      const double integral =
          integrate_grid(st_t, dphi.array() * complex_laplacian_grid(st_t, dir)) / V;
      push("derivative_identity", k, fd - integral, tol.derivative_identity);
    }

    // path independence: quadratic detour against the linear default
    if (k < std::max(1, samples / 10)) {
      BasicFunction bump = random_admissible_potential(model, rng, 0.0, 0.01);
      const FunctionalPath detour = FunctionalPath::quadratic_detour(a, b, bump);
      push("L_path_independence", k,
           evaluate_functional(FunctionalKind::L, model, a, b, detour) - Lab,
           tol.path_independence);
      push("M_path_independence", k,
           evaluate_functional(FunctionalKind::M, model, a, b, detour) - Mab,
           tol.path_independence);
      push("J_two_routes", k,
           functional_J_path(model, FunctionalPath::linear(a, b)) - Jab,
           tol.j_two_routes);
    }
  }
  return report;
}

}  // namespace tke
