// Acceptance suite: one test case per criterion, each printing a single
// pass/fail line. Tolerances are pinned here and nowhere else.

#include "tke/estimates.hpp"
#include "tke/functionals.hpp"
#include "tke/ma_solver.hpp"
#include "tke/model.hpp"
#include "tke/spectral.hpp"

#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>

using namespace tke;
using std::numbers::pi;

namespace {

constexpr int kBand = 32;

ModelPtr canonical_model() {
  static ModelPtr model = [] {
    ModelConfig cfg;
    cfg.band_limit = kBand;
    return build_model(cfg);
  }();
  return model;
}

ModelPtr perturbed_even_model(int band = kBand) {
  static std::map<int, ModelPtr> cache;
  auto it = cache.find(band);
  if (it != cache.end()) return it->second;
  ModelConfig cfg;
  cfg.band_limit = band;
  cfg.symmetry_mode = SymmetryMode::even;
  cfg.perturbation.push_back({2, 0, 0.05});
  auto model = build_model(cfg);
  cache[band] = model;
  return model;
}

const ContinuityFamily& criterion4_family(int nodes = 21, int band = kBand) {
  static std::map<std::pair<int, int>, ContinuityFamily> cache;
  const auto key = std::make_pair(nodes, band);
  auto it = cache.find(key);
  if (it == cache.end()) {
    SolverOptions opt;
    opt.record_sigma_min = false;
    it = cache
             .emplace(key, continuity_solve(perturbed_even_model(band), Equation::s2,
                                            opt, uniform_t_nodes(nodes, 1.0)))
             .first;
  }
  return it->second;
}

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
}

double elapsed_s(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

TEST_CASE("criterion 1: volume invariance over 200 random potentials") {
  const auto start = std::chrono::steady_clock::now();
  auto model = canonical_model();
  std::mt19937_64 rng(20240601);
  double worst = 0;
  for (int k = 0; k < 200; ++k) {
    BasicFunction u = random_admissible_potential(model, rng);
    MetricState st = metric_state(model, u);
    worst = std::max(worst,
                     std::abs(st.lifted_volume() - model->volume()) / model->volume());
  }
  const double secs = elapsed_s(start);
  const bool pass = worst < 1e-8 && secs < 30.0;
  report(1, pass,
         "max relative drift " + std::to_string(worst) + " over 200 potentials in " +
             std::to_string(secs) + " s");
  CHECK(worst < 1e-8);
  CHECK(secs < 30.0);
}

TEST_CASE("criterion 2: functional identity suite over 100 random pairs") {
  const auto start = std::chrono::steady_clock::now();
  auto model = perturbed_even_model();
  FunctionalReport rep = verify_functional_identities(model, 100, 20240602);
  double worst_identity = 0;
  double worst_chain = 0;
  for (const auto& r : rep.records) {
    if (r.name.rfind("chain", 0) == 0) {
      worst_chain = std::max(worst_chain, std::abs(r.residual));
    } else if (r.name == "derivative_identity") {
      // covered by its own tolerance in the report
    } else {
      worst_identity = std::max(worst_identity, std::abs(r.residual));
    }
  }
  const double chain_margin =
      std::min(rep.chain_left_min_margin, rep.chain_right_min_margin);
  const double secs = elapsed_s(start);
  const bool pass =
      rep.all_pass && worst_identity < 1e-7 && chain_margin >= -1e-9 && secs < 120.0;
  report(2, pass,
         "worst identity residual " + std::to_string(worst_identity) +
             ", chain margin " + std::to_string(chain_margin) + ", " +
             std::to_string(secs) + " s");
  CHECK(rep.all_pass);
  CHECK(worst_identity < 1e-7);
  CHECK(worst_chain <= 1e-9);
  CHECK(chain_margin >= -1e-9);
  CHECK(secs < 120.0);
}

TEST_CASE("criterion 3: canonical fixed point") {
  auto model = canonical_model();
  const double h_norm = model->ricci_potential_grid().abs().maxCoeff();

  MetricState st = metric_state(model, model->zero_function());
  double worst_residual = 0;
  for (int k = 0; k <= 10; ++k) {
    const double t = k / 10.0;
    worst_residual = std::max(
        worst_residual, residual_norm(st, t, Equation::s1, model->ricci_potential()));
    worst_residual = std::max(
        worst_residual, residual_norm(st, t, Equation::s2, model->ricci_potential()));
  }

  SolverOptions opt;
  opt.record_sigma_min = false;
  ContinuityFamily fam = continuity_solve(model, Equation::s2, opt);
  int total_iterations = 0;
  for (const auto& rec : fam.newton) total_iterations += rec.iterations;

  const bool pass = h_norm < 1e-8 && worst_residual < 1e-12 && fam.complete &&
                    total_iterations == 0;
  report(3, pass,
         "|h| " + std::to_string(h_norm) + ", residual " +
             std::to_string(worst_residual) + ", corrections " +
             std::to_string(total_iterations));
  CHECK(h_norm < 1e-8);
  CHECK(worst_residual < 1e-12);
  CHECK(fam.complete);
  CHECK(total_iterations == 0);
}

TEST_CASE("criterion 4: continuity solve reaches the Einstein metric") {
  const auto start = std::chrono::steady_clock::now();
  const ContinuityFamily& fam = criterion4_family();
  const double secs = elapsed_s(start);

  REQUIRE(fam.complete);
  MetricState end = metric_state(fam.model, fam.u.back());
  const double target = 2.0 * fam.model->m() * (fam.model->m() + 1.0);
  const double curv = (end.scalar_curvature_grid() - target).abs().maxCoeff();
  const bool pass = fam.complete && curv < 1e-5 && secs < 300.0;
  report(4, pass,
         "reached t=1, curvature residual " + std::to_string(curv) + " in " +
             std::to_string(secs) + " s");
  CHECK(curv < 1e-5);
  CHECK(secs < 300.0);
}

TEST_CASE("criterion 5: uniqueness along the path and backward extension") {
  auto model = perturbed_even_model();
  SolverOptions opt;
  opt.record_sigma_min = false;
  std::mt19937_64 rng(20240605);
  std::vector<BasicFunction> seeds;
  seeds.push_back(model->zero_function());
  seeds.push_back(random_admissible_potential(model, rng, 0.3, 0.02));
  UniquenessReport rep = uniqueness_experiment(model, Equation::s2, seeds, 0.7, opt);

  const bool pass = rep.all_converged && rep.max_pairwise_distance < 1e-7 &&
                    rep.backward_endpoint_distance < 1e-7 &&
                    std::abs(rep.backward_L0) < 1e-8;
  report(5, pass,
         "max distance " + std::to_string(rep.max_pairwise_distance) + ", backward " +
             std::to_string(rep.backward_endpoint_distance) + ", L(0,u0) " +
             std::to_string(rep.backward_L0));
  CHECK(rep.all_converged);
  CHECK(rep.max_pairwise_distance < 1e-7);
  CHECK(rep.t_final_distance < 1e-7);
  CHECK(rep.backward_endpoint_distance < 1e-7);
  CHECK(std::abs(rep.backward_L0) < 1e-8);
}

TEST_CASE("criterion 6: M-monotonicity and the derivative identity") {
  const ContinuityFamily& fam = criterion4_family();
  EstimateReport rep = apriori_report(fam);

  const ContinuityFamily& fine = criterion4_family(41);
  EstimateReport rep_fine = apriori_report(fine);

  const bool monotone = rep.max_dMdt <= 1e-8;
  // halving the step must shrink the identity mismatch like Δt^2
  const bool second_order = rep_fine.max_identity_error < rep.max_identity_error / 2.5;
  const bool pass = monotone && second_order;
  report(6, pass,
         "max dM/dt " + std::to_string(rep.max_dMdt) + ", identity error " +
             std::to_string(rep.max_identity_error) + " -> " +
             std::to_string(rep_fine.max_identity_error) + " after halving");
  CHECK(monotone);
  CHECK(second_order);
}

TEST_CASE("criterion 7: rescaled family volume, Ricci bound and diameter") {
  const ContinuityFamily& fam = criterion4_family();
  DiameterOptions dopt;

  bool volume_ok = true, bound_ok = true, diameter_ok = true;
  double worst_vol = 0, min_bound = 10, max_diam = 0;
  for (int k = 2; k <= 20; k += 2) {  // the ten-point grid t = 0.1 ... 1.0
    const double t = fam.t[k];
    MetricState st = metric_state(fam.model, fam.u[k]);
    RescaledMetric rm = rescaled_family_check(st, t, dopt, 1e-6, true);
    worst_vol = std::max(worst_vol, rm.volume_identity_error);
    min_bound = std::min(min_bound, rm.sasaki_lower_bound);
    max_diam = std::max(max_diam, rm.diameter);
    volume_ok = volume_ok && rm.volume_identity_error < 1e-10;
    bound_ok = bound_ok && rm.sasaki_lower_bound >= 2.0 - 1e-6;
    diameter_ok = diameter_ok && rm.diameter <= pi * 1.05;
  }

  // canonical total space at t = 1: diameter equals pi within 5%
  MetricState canon = metric_state(canonical_model(), canonical_model()->zero_function());
  const double d1 = diameter_estimate(canon, 1.0, dopt);
  const bool canon_ok = d1 >= pi * 0.95 && d1 <= pi * 1.05;

  const bool pass = volume_ok && bound_ok && diameter_ok && canon_ok;
  report(7, pass,
         "volume err " + std::to_string(worst_vol) + ", min bound " +
             std::to_string(min_bound) + ", max diameter " + std::to_string(max_diam) +
             ", canonical diameter " + std::to_string(d1));
  CHECK(volume_ok);
  CHECK(bound_ok);
  CHECK(diameter_ok);
  CHECK(canon_ok);
}

TEST_CASE("criterion 8: Green kernel and the oscillation bound") {
  const ContinuityFamily& fam = criterion4_family();
  GreenBound green =
      green_lower_bound(metric_state(fam.model, fam.model->zero_function()), 1);
  EstimateReport rep = apriori_report(fam, &green);

  // refinement: same t-grid at half the band limit
  const ContinuityFamily& coarse = criterion4_family(21, kBand / 2);
  EstimateReport rep_coarse = apriori_report(coarse);

  const double c_drift = std::abs(rep.fitted_C - rep_coarse.fitted_C);
  const bool stable = c_drift <= 0.1 * std::abs(rep.fitted_C);
  const bool pass = green.reproduction_error < 1e-8 && rep.oscillation_bound_holds &&
                    stable && green.K >= 0;
  report(8, pass,
         "reproduction error " + std::to_string(green.reproduction_error) +
             ", K " + std::to_string(green.K) + ", fitted C " +
             std::to_string(rep.fitted_C) + " (drift " + std::to_string(c_drift) +
             " under refinement)");
  CHECK(green.reproduction_error < 1e-8);
  CHECK(green.K >= 0.0);
  CHECK(rep.oscillation_bound_holds);
  CHECK(stable);
}

TEST_CASE("criterion 9: spectrum and Hamiltonian-field detection") {
  auto model = canonical_model();
  MetricState bg = metric_state(model, model->zero_function());
  SpectrumResult spec = basic_spectrum(model, bg, 9);

  double eig_err = std::abs(spec.eigenvalues[0]);
  for (int k = 1; k <= 3; ++k)
    eig_err = std::max(eig_err, std::abs(spec.eigenvalues[k] - 4.0));
  for (int k = 4; k <= 8; ++k)
    eig_err = std::max(eig_err, std::abs(spec.eigenvalues[k] - 12.0));

  DetectorResult full = hamiltonian_detector(model);

  ModelConfig even_cfg;
  even_cfg.band_limit = kBand;
  even_cfg.symmetry_mode = SymmetryMode::even;
  DetectorResult even = hamiltonian_detector(build_model(even_cfg));

  double worst_identity = 0;
  for (const auto& rec : full.records)
    worst_identity = std::max(worst_identity, rec.identity_residual);

  const bool pass = eig_err < 1e-8 && spec.lambda1 >= 4.0 - 1e-6 &&
                    full.records.size() == 3 && even.records.empty() &&
                    worst_identity < 1e-6;
  report(9, pass,
         "eigenvalue error " + std::to_string(eig_err) + ", lambda1 " +
             std::to_string(spec.lambda1) + ", full records " +
             std::to_string(full.records.size()) + ", even records " +
             std::to_string(even.records.size()) + ", identity residual " +
             std::to_string(worst_identity));
  CHECK(eig_err < 1e-8);
  CHECK(spec.lambda1 >= 4.0 - 1e-6);
  CHECK(full.records.size() == 3);
  CHECK(even.records.empty());
  CHECK(worst_identity < 1e-6);
}

TEST_CASE("criterion 10: linearization slopes and the t=1 kernel") {
  auto model = perturbed_even_model();
  std::mt19937_64 rng(20240610);
  const BasicFunction u = random_admissible_potential(model, rng, 0.2);
  const BasicFunction delta = random_admissible_potential(model, rng, 0.0, 0.02);
  MetricState st = metric_state(model, u);
  const BasicFunction& h = model->ricci_potential();

  auto slope_for = [&](Equation eqn) {
    const double t = 0.4;
    const ArrayXd r0 = model->grid_values(residual(st, t, eqn, h)).array();
    ArrayXd lin = -complex_laplacian_grid(st, delta) +
                  4.0 * t * model->grid_values(delta).array();
    if (eqn == Equation::s2) lin += 4.0 / model->volume() * integrate(st, delta);
    const BasicFunction lin_p = model->function_from_grid(lin.matrix());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double e : {1e-3, 1e-4, 1e-5, 1e-6}) {
      MetricState ste = metric_state(model, u + e * delta);
      const ArrayXd re = model->grid_values(residual(ste, t, eqn, h)).array();
      const double err =
          ((re - r0) / e - model->grid_values(lin_p).array()).abs().maxCoeff();
      sx += std::log(e);
      sy += std::log(err);
      sxx += std::log(e) * std::log(e);
      sxy += std::log(e) * std::log(err);
    }
    return (4 * sxy - sx * sy) / (4 * sxx - sx * sx);
  };
  const double slope1 = slope_for(Equation::s1);
  const double slope2 = slope_for(Equation::s2);

  // (s1) at t = 1: full space is singular, the even subspace is not
  auto canon = canonical_model();
  MetricState canon_bg = metric_state(canon, canon->zero_function());
  const double sigma_full = linearized_sigma_min(canon_bg, 1.0, Equation::s1);

  ModelConfig even_cfg;
  even_cfg.band_limit = kBand;
  even_cfg.symmetry_mode = SymmetryMode::even;
  auto even = build_model(even_cfg);
  MetricState even_bg = metric_state(even, even->zero_function());
  const double sigma_even = linearized_sigma_min(even_bg, 1.0, Equation::s1);

  const bool pass =
      slope1 >= 0.9 && slope2 >= 0.9 && sigma_full < 1e-6 && sigma_even >= 1.0;
  report(10, pass,
         "slopes " + std::to_string(slope1) + "/" + std::to_string(slope2) +
             ", sigma(full,t=1) " + std::to_string(sigma_full) + ", sigma(even,t=1) " +
             std::to_string(sigma_even));
  CHECK(slope1 >= 0.9);
  CHECK(slope2 >= 0.9);
  CHECK(sigma_full < 1e-6);
  CHECK(sigma_even >= 1.0);
}
