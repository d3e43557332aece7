#include "tke/estimates.hpp"

#include "support.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace tke;
using tke::test::canonical_config;
using tke::test::perturbed_config;
using std::numbers::pi;

TEST_CASE("green kernel on the canonical state") {
  auto model = build_model(canonical_config(12));
  MetricState st = metric_state(model, model->zero_function());
  GreenBound gb = green_lower_bound(st);

  CHECK(gb.K >= 0.0);
  CHECK(gb.reproduction_error < 1e-8);
  CHECK(gb.max_row_mean < 1e-12);
  CHECK(gb.symmetry_error < 1e-10);

  // the kernel acts as 1/eigenvalue on harmonics: G Y10 = Y10 / 4
  const BasicFunction y10 = model->harmonic(1, 0, 1.0);
  const ArrayXd y10g = model->grid_values(y10).array();
  const ArrayXd applied = gb.kernel->apply(y10g);
  CHECK((applied - y10g / 4.0).abs().maxCoeff() < 1e-10);

  const BasicFunction y20 = model->harmonic(2, 0, 1.0);
  const ArrayXd y20g = model->grid_values(y20).array();
  CHECK((gb.kernel->apply(y20g) - y20g / 12.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("green reproduction on a perturbed state") {
  auto model = build_model(perturbed_config(12, 0.05, SymmetryMode::even));
  std::mt19937_64 rng(5);
  MetricState st = metric_state(model, random_admissible_potential(model, rng, 0.3));
  GreenBound gb = green_lower_bound(st);
  CHECK(gb.reproduction_error < 1e-8);
  CHECK(gb.max_row_mean < 1e-12);
  CHECK(gb.K > 0.0);
}

TEST_CASE("rescaled family: volume identity and ricci bound") {
  auto model = build_model(canonical_config(12));
  MetricState st = metric_state(model, model->zero_function());

  RescaledMetric half = rescaled_family_check(st, 0.5, {}, 1e-6, false);
  CHECK(half.mu == 2.0);
  CHECK(std::abs(half.volume - 0.25 * 2 * pi * pi) < 1e-10 * half.volume);
  CHECK(half.volume_identity_error < 1e-10);
  CHECK(half.sasaki_lower_bound >= 2.0 - 1e-6);

  // a ten-point t-grid: the identity is exact at quadrature accuracy
  for (int k = 1; k <= 10; ++k) {
    RescaledMetric r = rescaled_family_check(st, k / 10.0, {}, 1e-6, false);
    CHECK(r.volume_identity_error < 1e-10);
    CHECK(r.sasaki_lower_bound >= 2.0 - 1e-6);
  }

  CHECK_THROWS_AS(rescaled_family_check(st, 0.0, {}, 1e-6, false), std::invalid_argument);
  // non-solution states are rejected
  MetricState bad = metric_state(model, model->harmonic(2, 0, 0.02));
  CHECK_THROWS_AS(rescaled_family_check(bad, 0.5, {}, 1e-8, false), std::invalid_argument);
}

TEST_CASE("diameter of the canonical total space is pi within tolerance") {
  auto model = build_model(canonical_config(12));
  MetricState st = metric_state(model, model->zero_function());
  DiameterOptions opt;  // defaults define the documented resolution
  const double d = diameter_estimate(st, 1.0, opt);
  MESSAGE("canonical diameter estimate: ", d);
  CHECK(d >= pi * (1.0 - opt.tolerance));
  CHECK(d <= pi * (1.0 + opt.tolerance));
}

TEST_CASE("diameter of a rescaled squashed state stays below the Myers ceiling") {
  auto model = build_model(canonical_config(12));
  MetricState st = metric_state(model, model->zero_function());
  RescaledMetric r = rescaled_family_check(st, 0.5);
  MESSAGE("t=1/2 diameter estimate: ", r.diameter);
  CHECK(r.diameter <= pi * 1.05);
  CHECK(r.diameter > 0.5);
}

TEST_CASE("apriori report on the canonical family is trivially clean") {
  auto model = build_model(canonical_config(12));
  ContinuityFamily fam = continuity_solve(model, Equation::s2);
  EstimateReport rep = apriori_report(fam);
  CHECK(rep.m_monotone);
  CHECK(rep.oscillation_bound_holds);
  CHECK(rep.xt_exists_everywhere);
  CHECK(rep.L_bound_holds);
  CHECK(rep.fitted_C <= 0.0);  // Green term alone dominates the zero family
  CHECK(rep.max_t_osc < 1e-12);
  for (const auto& r : rep.per_t) {
    CHECK(r.osc < 1e-12);
    CHECK(std::abs(r.I) < 1e-12);
  }
}

TEST_CASE("apriori report on the perturbed even family") {
  auto model = build_model(perturbed_config(16, 0.05, SymmetryMode::even));
  SolverOptions opt;
  opt.record_sigma_min = false;
  ContinuityFamily fam = continuity_solve(model, Equation::s2, opt);
  REQUIRE(fam.complete);
  EstimateReport rep = apriori_report(fam);

  CHECK(rep.m_monotone);
  CHECK(rep.max_dMdt <= 1e-8);
  CHECK(rep.oscillation_bound_holds);
  CHECK(rep.xt_exists_everywhere);
  CHECK(rep.L_bound_holds);
  CHECK(rep.green_K >= 0.0);
  CHECK(std::isfinite(rep.fitted_C));

  // identity error shrinks by ~4 when the step is halved
  ContinuityFamily fine = continuity_solve(model, Equation::s2, opt, uniform_t_nodes(41, 1.0));
  REQUIRE(fine.complete);
  EstimateReport rep_fine = apriori_report(fine);
  CHECK(rep_fine.max_identity_error < rep.max_identity_error / 2.5);
}

TEST_CASE("fitted oscillation constant is stable under refinement") {
  auto coarse = build_model(perturbed_config(12, 0.05, SymmetryMode::even));
  auto fine = build_model(perturbed_config(24, 0.05, SymmetryMode::even));
  SolverOptions opt;
  opt.record_sigma_min = false;
  const auto nodes = uniform_t_nodes(11, 1.0);
  EstimateReport rc = apriori_report(continuity_solve(coarse, Equation::s2, opt, nodes));
  EstimateReport rf = apriori_report(continuity_solve(fine, Equation::s2, opt, nodes));
  REQUIRE(rc.fitted_C != 0.0);
  CHECK(std::abs(rc.fitted_C - rf.fitted_C) < 0.1 * std::abs(rc.fitted_C));
}

TEST_CASE("apriori report requires enough samples") {
  auto model = build_model(canonical_config(12));
  ContinuityFamily fam = continuity_solve(model, Equation::s2, {}, uniform_t_nodes(3, 1.0));
  CHECK_THROWS_AS(apriori_report(fam), std::invalid_argument);
}
