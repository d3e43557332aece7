#include "tke/cli.hpp"

#include "tke/config.hpp"
#include "tke/estimates.hpp"
#include "tke/functionals.hpp"
#include "tke/io.hpp"
#include "tke/ma_solver.hpp"
#include "tke/model.hpp"
#include "tke/spectral.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <numbers>
#include <random>

namespace tke {

namespace {

using io::json;
using io::Provenance;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;

struct SuiteResult {
  std::string name;
  bool pass = false;
  double margin = 0;
  std::string detail;
};

void print_suite(const SuiteResult& r) {
  std::printf("[%s] %-38s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
              r.detail.c_str());
}

bool is_canonical(const TransverseModel& model) {
  return model.config().perturbation.empty();
}

// ---------------------------------------------------------------- model ---

int cmd_model(const std::string& config_path, const std::string& out,
              const std::string& grid_csv) {
  const ModelConfig cfg = parse_model_config_file(config_path);
  auto model = build_model(cfg);
  MetricState bg = metric_state(model, model->zero_function());

  std::printf("model: band_limit=%d nodes=%d mode=%s volume=%.12g min_density=%.6g\n",
              cfg.band_limit, model->basis().n_nodes(),
              symmetry_mode_name(cfg.symmetry_mode).c_str(), model->volume(),
              model->background_density().minCoeff());

  if (!out.empty()) {
    json payload;
    payload["volume"] = model->volume();
    payload["min_background_density"] = model->background_density().minCoeff();
    payload["ricci_potential_max"] =
        model->ricci_potential_grid().abs().maxCoeff();
    payload["ricci_dual_route_error"] =
        (model->grid_values(model->ricci_potential()) -
         model->grid_values(model->ricci_potential_closed_form()))
            .lpNorm<Eigen::Infinity>();
    payload["scalar_curvature_min"] = bg.scalar_curvature_grid().minCoeff();
    payload["scalar_curvature_max"] = bg.scalar_curvature_grid().maxCoeff();
    payload["n_active"] = model->n_active();
    payload["config"] = io::to_json(cfg);
    io::write_summary(out, "tke.model/1", 0,
                      {{"model", "build_model", io::to_json(cfg)}}, payload);
  }
  if (!grid_csv.empty()) {
    const SphereBasis& basis = model->basis();
    std::vector<std::vector<double>> rows;
    for (int n = 0; n < basis.n_nodes(); ++n)
      rows.push_back({static_cast<double>(n), basis.node_theta(n), basis.node_phi(n),
                      model->background_density()[n], model->ricci_potential_grid()[n],
                      bg.scalar_curvature_grid()[n]});
    io::write_csv(grid_csv, {"node", "theta", "phi", "density", "ricci_potential",
                             "scalar_curvature"},
                  rows);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- solve ---

int cmd_solve(const std::string& config_path, const std::string& eqn_name,
              double t_final, int t_nodes, const std::string& out,
              const std::string& csv, uint64_t seed, int uniqueness_seeds,
              double backward_tau, double newton_tol) {
  const ModelConfig cfg = parse_model_config_file(config_path);
  auto model = build_model(cfg);
  const Equation eqn = (eqn_name == "s1") ? Equation::s1 : Equation::s2;
  SolverOptions opt;
  opt.newton_tol = newton_tol;

  if (uniqueness_seeds > 0) {
    std::vector<BasicFunction> seeds;
    seeds.push_back(model->zero_function());
    std::mt19937_64 rng(seed);
    for (int k = 1; k < uniqueness_seeds; ++k)
      seeds.push_back(random_admissible_potential(model, rng, 0.3, 0.02));
    UniquenessReport rep = uniqueness_experiment(model, eqn, seeds, backward_tau, opt);
    std::printf(
        "uniqueness: branches=%zu max_distance=%.3e t1_distance=%.3e backward=%.3e "
        "L0=%.3e converged=%d\n",
        rep.branches.size(), rep.max_pairwise_distance, rep.t_final_distance,
        rep.backward_endpoint_distance, rep.backward_L0, static_cast<int>(rep.all_converged));
    if (!out.empty())
      io::write_summary(out, "tke.uniqueness/1", seed,
                        {{"ma_solver", "uniqueness_experiment", io::to_json(cfg)}},
                        io::to_json(rep));
    return rep.all_converged ? kExitOk : kExitCheckFailed;
  }

  ContinuityFamily fam =
      continuity_solve(model, eqn, opt, uniform_t_nodes(t_nodes, t_final));
  std::printf("solve: eqn=%s reached_t=%.4f complete=%d states=%d\n", eqn_name.c_str(),
              fam.reached_t, static_cast<int>(fam.complete), fam.size());
  if (fam.failure)
    std::printf("solve: stopped at t=%.4f (%s), residual=%.3e\n", fam.failure->t,
                fam.failure->reason.c_str(), fam.failure->last_residual);

  if (!out.empty())
    io::write_summary(out, "tke.family/1", seed,
                      {{"ma_solver", "continuity_solve", io::to_json(cfg)}},
                      io::to_json(fam));
  if (!csv.empty()) {
    std::vector<std::vector<double>> rows;
    for (int k = 0; k < fam.size(); ++k)
      rows.push_back({fam.t[k], fam.newton[k].final_residual, fam.trace[k].L,
                      fam.trace[k].M, fam.trace[k].I, fam.trace[k].J,
                      fam.newton[k].sigma_min});
    io::write_csv(csv, {"t", "residual", "L", "M", "I", "J", "min_eigenvalue"}, rows);
  }
  return fam.complete ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------- functionals ---

int cmd_functionals(const std::string& config_path, int samples, uint64_t seed,
                    const std::string& out) {
  const ModelConfig cfg = parse_model_config_file(config_path);
  auto model = build_model(cfg);
  FunctionalReport rep = verify_functional_identities(model, samples, seed);
  int failed = 0;
  for (const auto& r : rep.records)
    if (!r.pass) ++failed;
  std::printf("functionals: samples=%d records=%zu failed=%d\n", samples,
              rep.records.size(), failed);
  if (!out.empty())
    io::write_summary(out, "tke.functionals/1", seed,
                      {{"functionals", "verify_functional_identities", io::to_json(cfg)}},
                      io::to_json(rep));
  return rep.all_pass ? kExitOk : kExitCheckFailed;
}

// ------------------------------------------------------------ estimates ---

int cmd_estimates(const std::string& family_path, const std::string& out,
                  const std::string& csv, int rescale_points, int graph_base,
                  int graph_fiber, int graph_knn) {
  ContinuityFamily fam = io::family_from_json(io::read_json_file(family_path).at("data"));
  GreenBound green =
      green_lower_bound(metric_state(fam.model, fam.model->zero_function()), 1);
  EstimateReport rep = apriori_report(fam, &green);

  DiameterOptions dopt;
  dopt.base_samples = graph_base;
  dopt.fiber_samples = graph_fiber;
  dopt.knn = graph_knn;

  // rescaled checks on solution states drawn from the family
  std::vector<RescaledMetric> rescaled;
  for (int k = 1; k <= rescale_points; ++k) {
    const double t_want = static_cast<double>(k) / rescale_points * fam.reached_t;
    // nearest recorded node with t > 0
    int best = -1;
    for (int i = 0; i < fam.size(); ++i) {
      if (fam.t[i] <= 0) continue;
      if (best < 0 || std::abs(fam.t[i] - t_want) < std::abs(fam.t[best] - t_want))
        best = i;
    }
    if (best < 0) continue;
    if (!rescaled.empty() && rescaled.back().t == fam.t[best]) continue;
    MetricState st = metric_state(fam.model, fam.u[best]);
    rescaled.push_back(rescaled_family_check(st, fam.t[best], dopt, 1e-6, true));
  }

  std::printf("estimates: K=%.6g fitted_C=%.6g m_monotone=%d osc_bound=%d\n",
              rep.green_K, rep.fitted_C, static_cast<int>(rep.m_monotone),
              static_cast<int>(rep.oscillation_bound_holds));
  for (const auto& r : rescaled)
    std::printf("  t=%.3f volume_err=%.2e ricci_bound=%.6f diameter=%.4f\n", r.t,
                r.volume_identity_error, r.sasaki_lower_bound, r.diameter);

  if (!out.empty()) {
    json payload;
    payload["report"] = io::to_json(rep);
    payload["green"] = io::to_json(green);
    json rs = json::array();
    for (const auto& r : rescaled) rs.push_back(io::to_json(r));
    payload["rescaled"] = rs;
    io::write_summary(out, "tke.estimates/1", 0,
                      {{"estimates", "apriori_report", io::to_json(fam.model->config())},
                       {"estimates", "rescaled_family_check",
                        io::to_json(fam.model->config())}},
                      payload);
  }
  if (!csv.empty()) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : rep.per_t)
      rows.push_back({r.t, r.osc, r.I, r.L, r.M, r.sup_abs_u, r.t_osc, r.u_at_xt,
                      r.L_minus_u_xt, r.dMdt, r.identity_rhs, r.identity_error,
                      r.osc_bound_slack});
    io::write_csv(csv,
                  {"t", "osc", "I", "L", "M", "sup_abs_u", "t_osc", "u_at_xt",
                   "L_minus_u_xt", "dMdt", "identity_rhs", "identity_error",
                   "osc_bound_slack"},
                  rows);
  }

  const bool ok = rep.m_monotone && rep.oscillation_bound_holds &&
                  rep.xt_exists_everywhere && rep.L_bound_holds;
  return ok ? kExitOk : kExitCheckFailed;
}

// -------------------------------------------------------------- spectrum ---

int cmd_spectrum(const std::string& config_path, int count, const std::string& out) {
  const ModelConfig cfg = parse_model_config_file(config_path);
  auto model = build_model(cfg);
  MetricState bg = metric_state(model, model->zero_function());
  SpectrumResult spec = basic_spectrum(model, bg, count);
  DetectorResult det = hamiltonian_detector(model);

  std::printf("spectrum: lambda1=%.9f eigenvalues:", spec.lambda1);
  for (int k = 0; k < std::min<int>(8, spec.eigenvalues.size()); ++k)
    std::printf(" %.6f", spec.eigenvalues[k]);
  std::printf("\ndetector: records=%zu ambiguous=%d\n", det.records.size(),
              static_cast<int>(det.ambiguous));

  if (!out.empty()) {
    json payload;
    payload["spectrum"] = io::to_json(spec);
    payload["detector"] = io::to_json(det);
    io::write_summary(out, "tke.spectrum/1", 0,
                      {{"spectral", "basic_spectrum", io::to_json(cfg)},
                       {"spectral", "hamiltonian_detector", io::to_json(cfg)}},
                      payload);
  }
  return det.ambiguous ? kExitCheckFailed : kExitOk;
}

// ---------------------------------------------------------------- verify ---

std::vector<SuiteResult> run_verify_suites(const ModelPtr& model, int samples,
                                           uint64_t seed) {
  std::vector<SuiteResult> suites;
  const SphereBasis& basis = model->basis();
  std::mt19937_64 rng(seed);
  MetricState bg = metric_state(model, model->zero_function());

  {  // quadrature exactness on sampled basis products
    SuiteResult r;
    r.name = "quadrature_exactness";
    double err = 0;
    std::uniform_int_distribution<int> pick(0, basis.size() - 1);
    for (int k = 0; k < 100; ++k) {
      const int a = pick(rng), b = pick(rng);
      VectorXd ea = VectorXd::Zero(basis.size()), eb = VectorXd::Zero(basis.size());
      ea[a] = 1;
      eb[b] = 1;
      const double ip = (basis.quadrature() * basis.synthesis(ea).array() *
                         basis.synthesis(eb).array())
                            .sum();
      err = std::max(err, std::abs(ip - (a == b ? 1.0 : 0.0)));
    }
    r.margin = 1e-12 - err;
    r.pass = err < 1e-12;
    r.detail = "max orthonormality error " + std::to_string(err);
    suites.push_back(r);
  }

  {  // volume invariance
    SuiteResult r;
    r.name = "volume_invariance";
    double err = 0;
    for (int k = 0; k < samples * 2; ++k) {
      BasicFunction u = random_admissible_potential(model, rng);
      MetricState st = metric_state(model, u);
      err = std::max(err, std::abs(st.lifted_volume() - model->volume()) / model->volume());
    }
    r.margin = 1e-8 - err;
    r.pass = err < 1e-8;
    r.detail = "max relative volume drift " + std::to_string(err);
    suites.push_back(r);
  }

  {  // laplacian routes: derivative assembly on a wider engine vs the symbol
    SuiteResult r;
    r.name = "laplacian_consistency";
    SphereBasis wide(basis.band() + 2);
    Eigen::ArrayXd sint(wide.n_nodes());
    for (int i = 0; i < wide.n_nodes(); ++i) sint[i] = std::sin(wide.node_theta(i));
    double err = 0;
    for (int k = 0; k < 50; ++k) {
      BasicFunction f = random_admissible_potential(model, rng, 0.0, 0.02);
      VectorXd cw = VectorXd::Zero(wide.size());
      for (int a = 0; a < f.coeff.size(); ++a) {
        const int l = basis.degree(a);
        cw[SphereBasis::index(l, a - l * l - l)] = f.coeff[a];
      }
      const VectorXd sft = (sint * wide.synthesis_dtheta(cw).array()).matrix();
      const VectorXd dsft = wide.synthesis_dtheta(wide.analysis(sft));
      const VectorXd dpp = wide.synthesis_dphi(wide.analysis(wide.synthesis_dphi(cw)));
      const Eigen::ArrayXd lap_grid = dsft.array() / sint + dpp.array() / (sint * sint);
      const VectorXd lap_c = wide.analysis(lap_grid.matrix());
      err = std::max(err, (lap_c - wide.lb_coeffs(cw)).lpNorm<Eigen::Infinity>());
    }
    r.margin = 1e-8 - err;
    r.pass = err < 1e-8;
    r.detail = "max coefficient error " + std::to_string(err);
    suites.push_back(r);
  }

  {  // integration by parts
    SuiteResult r;
    r.name = "integration_by_parts";
    double err = 0;
    MetricState st = metric_state(model, random_admissible_potential(model, rng));
    for (int k = 0; k < 20; ++k) {
      BasicFunction f = random_admissible_potential(model, rng, 0.0, 0.02);
      BasicFunction g = random_admissible_potential(model, rng, 0.0, 0.02);
      const double a = integrate_grid(
          st, model->grid_values(f).array() * complex_laplacian_grid(st, g));
      const double b = integrate_grid(
          st, model->grid_values(g).array() * complex_laplacian_grid(st, f));
      err = std::max(err, std::abs(a - b) / (1.0 + std::abs(a)));
    }
    r.margin = 1e-8 - err;
    r.pass = err < 1e-8;
    r.detail = "max relative asymmetry " + std::to_string(err);
    suites.push_back(r);
  }

  {  // ricci potential dual route + normalization
    SuiteResult r;
    r.name = "ricci_potential_dual_route";
    const double route_err =
        (model->grid_values(model->ricci_potential()) -
         model->grid_values(model->ricci_potential_closed_form()))
            .lpNorm<Eigen::Infinity>();
    const double norm_err = std::abs(integrate_grid(
        bg, model->ricci_potential_grid().exp() - 1.0));
    r.pass = route_err < 1e-8 && norm_err < 1e-10 * model->volume();
    r.margin = 1e-8 - route_err;
    r.detail = "route diff " + std::to_string(route_err) + ", normalization " +
               std::to_string(norm_err);
    suites.push_back(r);
  }

  {  // discrete box: nonnegative and self-adjoint
    SuiteResult r;
    r.name = "box_nonnegative_selfadjoint";
    const MatrixXd& S = model->active_synthesis();
    const int n = model->n_active();
    MatrixXd W = model->fiber_length() *
                 (S.transpose() *
                  ((basis.quadrature() * bg.density()).matrix().asDiagonal() * S));
    MatrixXd D = MatrixXd::Zero(n, n);
    for (int b = 0; b < n; ++b) {
      const int l = basis.degree(model->active_indices()[b]);
      D(b, b) = 0.5 * model->fiber_length() * l * (l + 1.0);
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(D, W);
    const double min_eig = es.eigenvalues().minCoeff();
    r.pass = es.info() == Eigen::Success && min_eig >= -1e-10;
    r.margin = min_eig + 1e-10;
    r.detail = "min eigenvalue " + std::to_string(min_eig);
    suites.push_back(r);
  }

  {  // functional identities
    SuiteResult r;
    r.name = "functional_identities";
    FunctionalReport rep = verify_functional_identities(model, samples, seed + 1);
    double worst = 0;
    for (const auto& rec : rep.records)
      worst = std::max(worst, std::abs(rec.residual) / rec.tolerance);
    r.pass = rep.all_pass;
    r.margin = 1.0 - worst;
    r.detail = std::to_string(rep.records.size()) + " records, worst residual at " +
               std::to_string(worst) + " of tolerance";
    suites.push_back(r);
  }

  {  // spectrum bound and detector consistency
    SuiteResult r;
    r.name = "spectrum_bound_detector";
    try {
      SpectrumResult spec = basic_spectrum(model, bg, std::min(model->n_active(), 12));
      DetectorResult det = hamiltonian_detector(model);
      bool ok = !det.ambiguous;
      for (const auto& rec : det.records)
        ok = ok && rec.normalization_residual < 1e-8 && rec.eigen_residual < 1e-6 &&
             rec.identity_residual < 1e-6;
      r.pass = ok;
      r.margin = spec.lambda1 - (2.0 * model->m() + 2.0 - 1e-6);
      r.detail = "lambda1 " + std::to_string(spec.lambda1) + ", " +
                 std::to_string(det.records.size()) + " hamiltonian records";
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = e.what();
    }
    suites.push_back(r);
  }

  {  // green kernel
    SuiteResult r;
    r.name = "green_kernel";
    GreenBound gb = green_lower_bound(bg, 2);
    r.pass = gb.reproduction_error < 1e-8 && gb.max_row_mean < 1e-12 &&
             gb.symmetry_error < 1e-10 && gb.K >= 0;
    r.margin = 1e-8 - gb.reproduction_error;
    r.detail = "K " + std::to_string(gb.K) + ", reproduction error " +
               std::to_string(gb.reproduction_error);
    suites.push_back(r);
  }

  {  // linearization slope
    SuiteResult r;
    r.name = "linearization_slope";
    BasicFunction u = random_admissible_potential(model, rng, 0.2);
    BasicFunction delta = random_admissible_potential(model, rng, 0.0, 0.02);
    MetricState st = metric_state(model, u);
    const BasicFunction& h = model->ricci_potential();
    const double t = 0.4;
    const Eigen::ArrayXd r0 =
        model->grid_values(residual(st, t, Equation::s2, h)).array();
    Eigen::ArrayXd lin = -complex_laplacian_grid(st, delta) +
                         4.0 * t * model->grid_values(delta).array();
    lin += 4.0 / model->volume() * integrate(st, delta);
    const BasicFunction lin_p = model->function_from_grid(lin.matrix());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const std::vector<double> eps = {1e-3, 1e-4, 1e-5, 1e-6};
    for (double e : eps) {
      MetricState ste = metric_state(model, u + e * delta);
      const Eigen::ArrayXd re =
          model->grid_values(residual(ste, t, Equation::s2, h)).array();
      const double err =
          ((re - r0) / e - model->grid_values(lin_p).array()).abs().maxCoeff();
      sx += std::log(e);
      sy += std::log(err);
      sxx += std::log(e) * std::log(e);
      sxy += std::log(e) * std::log(err);
    }
    const int n = 4;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    r.pass = slope >= 0.9;
    r.margin = slope - 0.9;
    r.detail = "finite-difference slope " + std::to_string(slope);
    suites.push_back(r);
  }

  {  // continuity solve, monotonicity, rescaled identities
    SuiteResult r;
    r.name = "continuity_and_estimates";
    SolverOptions opt;
    opt.record_sigma_min = false;
    ContinuityFamily fam = continuity_solve(model, Equation::s2, opt);
    bool ok = fam.complete;
    std::string detail;
    if (!fam.complete) {
      detail = "family stopped at t=" + std::to_string(fam.reached_t);
    } else {
      if (is_canonical(*model)) {
        for (const auto& rec : fam.newton) ok = ok && rec.iterations == 0;
        detail = "canonical fixed point, zero corrections";
      } else {
        MetricState end = metric_state(model, fam.u.back());
        const double curv =
            (end.scalar_curvature_grid() - 2.0 * model->m() * (model->m() + 1.0))
                .abs()
                .maxCoeff();
        ok = ok && curv < 1e-5;
        detail = "final curvature residual " + std::to_string(curv);
      }
      EstimateReport rep = apriori_report(fam);
      ok = ok && rep.m_monotone && rep.oscillation_bound_holds &&
           rep.xt_exists_everywhere && rep.L_bound_holds;
      for (double t : {0.2, 0.5, 1.0}) {
        const BasicFunction* u_at = nullptr;
        for (int i = 0; i < fam.size(); ++i)
          if (std::abs(fam.t[i] - t) < 1e-12) u_at = &fam.u[i];
        if (!u_at) continue;
        MetricState st = metric_state(model, *u_at);
        RescaledMetric rm = rescaled_family_check(st, t, {}, 1e-6, false);
        ok = ok && rm.volume_identity_error < 1e-10 &&
             rm.sasaki_lower_bound >= 2.0 * model->m() - 1e-6;
      }
    }
    r.pass = ok;
    r.detail = detail;
    suites.push_back(r);
  }

  return suites;
}

int cmd_verify(const std::string& config_path, int samples, uint64_t seed,
               const std::string& out) {
  const ModelConfig cfg = parse_model_config_file(config_path);
  auto model = build_model(cfg);
  const auto suites = run_verify_suites(model, samples, seed);
  bool all = true;
  for (const auto& s : suites) {
    print_suite(s);
    all = all && s.pass;
  }
  if (!out.empty()) {
    json payload;
    json arr = json::array();
    for (const auto& s : suites)
      arr.push_back({{"suite", s.name},
                     {"pass", s.pass},
                     {"margin", s.margin},
                     {"detail", s.detail}});
    payload["suites"] = arr;
    payload["all_pass"] = all;
    io::write_summary(out, "tke.verify/1", seed,
                      {{"cli", "verify", io::to_json(cfg)}}, payload);
  }
  return all ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- report ---

struct ReportLine {
  std::string item;
  std::string status;  // PASS / FAIL / SKIPPED
  std::string detail;
};

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  json verify_data, functionals_data, family_data, estimates_data, spectrum_data,
      uniqueness_data;
  for (const auto& path : inputs) {
    const json j = io::read_json_file(path);
    const std::string schema = j.value("schema", "");
    if (schema == "tke.verify/1") verify_data = j["data"];
    else if (schema == "tke.functionals/1") functionals_data = j["data"];
    else if (schema == "tke.family/1") family_data = j["data"];
    else if (schema == "tke.estimates/1") estimates_data = j["data"];
    else if (schema == "tke.spectrum/1") spectrum_data = j["data"];
    else if (schema == "tke.uniqueness/1") uniqueness_data = j["data"];
    else throw std::invalid_argument("report: unrecognized schema in '" + path + "'");
  }

  std::vector<ReportLine> lines;
  auto add = [&](const std::string& item, int state, const std::string& detail) {
    lines.push_back({item, state < 0 ? "SKIPPED" : (state ? "PASS" : "FAIL"), detail});
  };

  // volume invariance from the verify run
  if (verify_data.is_null()) {
    add("volume invariance under deformation", -1, "no verify input");
  } else {
    int st = -1;
    std::string detail;
    for (const auto& s : verify_data["suites"]) {
      if (s["suite"] == "volume_invariance") {
        st = s["pass"].get<bool>() ? 1 : 0;
        detail = s["detail"];
      }
    }
    add("volume invariance under deformation", st, detail);
  }

  if (functionals_data.is_null()) {
    add("L/M cocycle + path independence", -1, "no functionals input");
    add("I/J identities + chain inequality", -1, "no functionals input");
  } else {
    bool p41 = true, p42 = true;
    double w41 = 0, w42 = 0;
    for (const auto& r : functionals_data["records"]) {
      const std::string name = r["identity"];
      const bool pass = r["pass"].get<bool>();
      const double q = std::abs(r["residual"].get<double>());
      const bool is41 = name.rfind("L_", 0) == 0 || name.rfind("M_", 0) == 0;
      if (is41) {
        p41 = p41 && pass;
        w41 = std::max(w41, q);
      } else {
        p42 = p42 && pass;
        w42 = std::max(w42, q);
      }
    }
    add("L/M cocycle + path independence", p41,
        "worst residual " + std::to_string(w41));
    add("I/J identities + chain inequality", p42, "worst residual " + std::to_string(w42));
  }

  if (spectrum_data.is_null()) {
    add("spectrum bound + field detector", -1, "no spectrum input");
  } else {
    const double l1 = spectrum_data["spectrum"]["lambda1"].get<double>();
    const bool amb = spectrum_data["detector"]["ambiguous"].get<bool>();
    add("spectrum bound + field detector", (l1 >= 4.0 - 1e-6 && !amb) ? 1 : 0,
        "lambda1 " + std::to_string(l1) + ", records " +
            std::to_string(spectrum_data["detector"]["records"].size()));
  }

  if (family_data.is_null()) {
    add("linearized invertibility along the path", -1, "no family input");
    add("continuity target t = 1", -1, "no family input");
  } else {
    const bool complete = family_data["complete"].get<bool>();
    double min_sigma = std::numeric_limits<double>::infinity();
    bool have_sigma = false;
    for (const auto& s : family_data["states"]) {
      if (!s["sigma_min"].is_null()) {
        min_sigma = std::min(min_sigma, s["sigma_min"].get<double>());
        have_sigma = true;
      }
    }
    add("linearized invertibility along the path", have_sigma ? (min_sigma > 1e-3 ? 1 : 0) : -1,
        have_sigma ? "min sigma " + std::to_string(min_sigma) : "sigma not recorded");
    add("continuity target t = 1", complete ? 1 : 0,
        "reached t " + std::to_string(family_data["reached_t"].get<double>()));
  }

  if (estimates_data.is_null()) {
    add("M-monotonicity + derivative identity", -1, "no estimates input");
    add("Green kernel reproduction + bound", -1, "no estimates input");
    add("rescaled volume/Ricci/diameter", -1, "no estimates input");
    add("oscillation bound with fitted constant", -1, "no estimates input");
    add("C0 chain constituents", -1, "no estimates input");
  } else {
    const auto& rep = estimates_data["report"];
    add("M-monotonicity + derivative identity", rep["m_monotone"].get<bool>() ? 1 : 0,
        "max dM/dt " + std::to_string(rep["max_dMdt"].get<double>()));
    const auto& g = estimates_data["green"];
    const bool gok = g["reproduction_error"].get<double>() < 1e-8 &&
                     g["max_row_mean"].get<double>() < 1e-12;
    add("Green kernel reproduction + bound", gok ? 1 : 0,
        "K " + std::to_string(g["K"].get<double>()));
    bool rs_ok = true;
    double max_diam = 0;
    for (const auto& r : estimates_data["rescaled"]) {
      rs_ok = rs_ok && r["volume_identity_error"].get<double>() < 1e-10 &&
              r["sasaki_lower_bound"].get<double>() >= 2.0 - 1e-6 &&
              r["diameter"].get<double>() <= std::numbers::pi * 1.05;
      max_diam = std::max(max_diam, r["diameter"].get<double>());
    }
    add("rescaled volume/Ricci/diameter",
        estimates_data["rescaled"].empty() ? -1 : (rs_ok ? 1 : 0),
        "max diameter " + std::to_string(max_diam));
    add("oscillation bound with fitted constant",
        rep["oscillation_bound_holds"].get<bool>() ? 1 : 0,
        "fitted C " + std::to_string(rep["fitted_C"].get<double>()));
    const bool l59 = rep["xt_exists_everywhere"].get<bool>() &&
                     rep["L_bound_holds"].get<bool>();
    add("C0 chain constituents", l59 ? 1 : 0,
        "max t*osc " + std::to_string(rep["max_t_osc"].get<double>()));
  }

  if (uniqueness_data.is_null()) {
    add("uniqueness along the path", -1, "no uniqueness input");
  } else {
    const bool ok = uniqueness_data["all_converged"].get<bool>() &&
                    uniqueness_data["max_pairwise_distance"].get<double>() < 1e-7 &&
                    uniqueness_data["backward_endpoint_distance"].get<double>() < 1e-7 &&
                    std::abs(uniqueness_data["backward_L0"].get<double>()) < 1e-8;
    add("uniqueness along the path", ok ? 1 : 0,
        "max distance " +
            std::to_string(uniqueness_data["max_pairwise_distance"].get<double>()));
  }

  bool any_fail = false;
  for (const auto& l : lines) {
    std::printf("[%s] %-45s %s\n", l.status.c_str(), l.item.c_str(), l.detail.c_str());
    any_fail = any_fail || l.status == "FAIL";
  }

  if (!out.empty()) {
    json arr = json::array();
    for (const auto& l : lines)
      arr.push_back({{"item", l.item}, {"status", l.status}, {"detail", l.detail}});
    io::write_summary(out, "tke.report/1", 0, {{"cli", "report", json::object()}},
                      {{"lines", arr}});
  }
  return any_fail ? kExitCheckFailed : kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"transverse Kahler-Einstein continuity-method laboratory"};
  app.require_subcommand(1);

  std::string config_path, out, csv, grid_csv, eqn_name = "s2", family_path;
  double t_final = 1.0, backward_tau = 0.7, newton_tol = 1e-10;
  int t_nodes = 21, samples = 100, count = 12, uniq_seeds = 0;
  int rescale_points = 10, graph_base = 360, graph_fiber = 56, graph_knn = 40;
  uint64_t seed = 0;
  std::vector<std::string> inputs;

  // the only environment overrides: output directory and parallelism degree
  if (const char* par = std::getenv("TKE_PARALLEL")) {
    const int n = std::atoi(par);
    if (n < 1) {
      std::cerr << "{\"error\":\"config\",\"message\":\"TKE_PARALLEL must be >= 1\"}\n";
      return kExitConfigError;
    }
    Eigen::setNbThreads(n);
  }

  auto* cmodel = app.add_subcommand("model", "build a model and report its invariants");
  cmodel->add_option("--config", config_path, "model config file")->required();
  cmodel->add_option("--out", out, "JSON summary path");
  cmodel->add_option("--grid-csv", grid_csv, "CSV of grid fields");

  auto* csolve = app.add_subcommand("solve", "run the continuity solver");
  csolve->add_option("--config", config_path)->required();
  csolve->add_option("--eqn", eqn_name)->check(CLI::IsMember({"s1", "s2"}));
  csolve->add_option("--t-final", t_final);
  csolve->add_option("--t-nodes", t_nodes);
  csolve->add_option("--out", out);
  csolve->add_option("--csv", csv);
  csolve->add_option("--seed", seed);
  csolve->add_option("--uniqueness-seeds", uniq_seeds,
                     "run the uniqueness experiment with this many branches");
  csolve->add_option("--backward-tau", backward_tau);
  csolve->add_option("--newton-tol", newton_tol, "residual max-norm tolerance");

  auto* cfunc = app.add_subcommand("functionals", "run the functional identity suite");
  cfunc->add_option("--config", config_path)->required();
  cfunc->add_option("--samples", samples);
  cfunc->add_option("--seed", seed);
  cfunc->add_option("--out", out);

  auto* cest = app.add_subcommand("estimates", "a priori estimate chain for a family");
  cest->add_option("--family", family_path, "family JSON from solve")->required();
  cest->add_option("--out", out);
  cest->add_option("--csv", csv);
  cest->add_option("--rescale-points", rescale_points);
  cest->add_option("--graph-base", graph_base, "diameter graph base samples");
  cest->add_option("--graph-fiber", graph_fiber, "diameter graph fiber samples");
  cest->add_option("--graph-knn", graph_knn, "diameter graph neighbors");

  auto* cspec = app.add_subcommand("spectrum", "weighted laplacian eigenanalysis");
  cspec->add_option("--config", config_path)->required();
  cspec->add_option("--count", count);
  cspec->add_option("--out", out);

  auto* cver = app.add_subcommand("verify", "run the full invariant suite");
  cver->add_option("--config", config_path)->required();
  cver->add_option("--samples", samples);
  cver->add_option("--seed", seed);
  cver->add_option("--out", out);

  auto* crep = app.add_subcommand("report", "merge prior outputs into one summary");
  crep->add_option("--inputs", inputs, "JSON outputs of other subcommands")->required();
  crep->add_option("--out", out);

  std::vector<const char*> argv_ptrs;
  argv_ptrs.push_back("tke");
  for (const auto& a : args) argv_ptrs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv_ptrs.size()), argv_ptrs.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return kExitOk;
    }
    std::cerr << "{\"error\":\"cli\",\"message\":\"" << e.what() << "\"}\n";
    return kExitConfigError;
  }

  try {
    if (cmodel->parsed()) return cmd_model(config_path, out, grid_csv);
    if (csolve->parsed())
      return cmd_solve(config_path, eqn_name, t_final, t_nodes, out, csv, seed,
                       uniq_seeds, backward_tau, newton_tol);
    if (cfunc->parsed()) return cmd_functionals(config_path, samples, seed, out);
    if (cest->parsed())
      return cmd_estimates(family_path, out, csv, rescale_points, graph_base,
                           graph_fiber, graph_knn);
    if (cspec->parsed()) return cmd_spectrum(config_path, count, out);
    if (cver->parsed()) return cmd_verify(config_path, samples, seed, out);
    if (crep->parsed()) return cmd_report(inputs, out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "{\"error\":\"config\",\"message\":\"" << e.what() << "\"}\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":\"runtime\",\"message\":\"" << e.what() << "\"}\n";
    return kExitCheckFailed;
  }
  return kExitConfigError;
}

}  // namespace tke
