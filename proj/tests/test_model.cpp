#include "tke/model.hpp"

#include "support.hpp"

#include <doctest.h>

#include <atomic>
#include <numbers>
#include <random>
#include <thread>

using namespace tke;
using tke::test::canonical_config;
using tke::test::perturbed_config;
using std::numbers::pi;

TEST_CASE("canonical model: background, volume and h") {
  auto model = build_model(canonical_config(16));
  CHECK(model->background_density().minCoeff() > 0.0);
  CHECK(std::abs(model->background_density().minCoeff() - 0.25) < 1e-14);
  CHECK(std::abs(model->volume() - 2 * pi * pi) < 1e-10 * 2 * pi * pi);
  const VectorXd hg = model->grid_values(model->ricci_potential());
  CHECK(hg.lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("perturbed background matches the closed-form density") {
  auto model = build_model(perturbed_config(16, 0.05, SymmetryMode::full));
  // density = canonical * (1 - box psi), box Y20 = 12 Y20
  auto canon = build_model(canonical_config(16));
  const BasicFunction y20 = canon->harmonic(2, 0, 1.0);
  const VectorXd y20g = canon->grid_values(y20);
  const ArrayXd expect = 0.25 * (1.0 - 12.0 * 0.05 * y20g.array());
  CHECK((model->background_density() - expect).abs().maxCoeff() < 1e-13);

  // cross-check i ddbar psi against finite differences at a few nodes
  const SphereBasis& basis = model->basis();
  VectorXd psi_c = model->perturbation_potential().coeff;
  for (int flat : {23, 500, 1100}) {
    const double lap_fd = tke::test::fd_laplace_beltrami(basis, psi_c, basis.node_theta(flat),
                                                         basis.node_phi(flat));
    const double dens_fd = 0.25 + 0.5 * lap_fd;
    CHECK(std::abs(dens_fd - model->background_density()[flat]) < 1e-5);
  }
}

TEST_CASE("large perturbation is rejected with node diagnostics") {
  ModelConfig cfg = perturbed_config(16, 10.0, SymmetryMode::full);
  CHECK_THROWS_WITH_AS(build_model(cfg),
                       doctest::Contains("positivity"), std::invalid_argument);
}

TEST_CASE("odd perturbation is rejected in even mode") {
  ModelConfig cfg = canonical_config(16);
  cfg.symmetry_mode = SymmetryMode::even;
  cfg.perturbation.push_back({3, 1, 0.01});
  CHECK_THROWS_AS(build_model(cfg), std::invalid_argument);
}

TEST_CASE("metric_state: ratio, positivity, volume invariance") {
  auto model = build_model(canonical_config(16));

  SUBCASE("zero potential") {
    MetricState st = metric_state(model, model->zero_function());
    CHECK((st.ma_ratio() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(st.positive());
  }

  SUBCASE("harmonic potential has exact linear ratio at m = 1") {
    const double eps = 0.01;
    MetricState st = metric_state(model, model->harmonic(2, 0, eps));
    const VectorXd y20g = model->grid_values(model->harmonic(2, 0, 1.0));
    CHECK((st.ma_ratio() - (1.0 - 12.0 * eps * y20g.array())).abs().maxCoeff() < 1e-13);
  }

  SUBCASE("large potential flips the positivity flag") {
    MetricState st = metric_state(model, model->harmonic(2, 0, 0.5));
    CHECK_FALSE(st.positive());
    CHECK(st.ma_ratio().minCoeff() < 0.0);
  }

  SUBCASE("lifted volume is invariant under admissible deformations") {
    std::mt19937_64 rng(42);
    for (int k = 0; k < 10; ++k) {
      BasicFunction u = tke::test::random_admissible_potential(model, rng);
      MetricState st = metric_state(model, u);
      CHECK(std::abs(st.lifted_volume() - model->volume()) < 1e-8 * model->volume());
    }
  }
}

TEST_CASE("complex laplacian eigenfunctions") {
  auto model = build_model(canonical_config(16));
  MetricState st = metric_state(model, model->zero_function());

  const BasicFunction c1 = model->constant(3.0);
  CHECK(model->grid_values(complex_laplacian(st, c1)).lpNorm<Eigen::Infinity>() < 1e-12);

  const BasicFunction y10 = model->harmonic(1, 0, 1.0);
  const VectorXd r1 =
      model->grid_values(complex_laplacian(st, y10)) - 4.0 * model->grid_values(y10);
  CHECK(r1.lpNorm<Eigen::Infinity>() < 1e-11);

  const BasicFunction y20 = model->harmonic(2, 0, 1.0);
  const VectorXd r2 =
      model->grid_values(complex_laplacian(st, y20)) - 12.0 * model->grid_values(y20);
  CHECK(r2.lpNorm<Eigen::Infinity>() < 1e-11);
}

TEST_CASE("scalar curvature") {
  SUBCASE("canonical is constant 4") {
    auto model = build_model(canonical_config(16));
    MetricState st = metric_state(model, model->zero_function());
    CHECK((st.scalar_curvature_grid() - 4.0).abs().maxCoeff() < 1e-10);
  }

  SUBCASE("perturbed background has mean-zero deviation") {
    auto model = build_model(perturbed_config(16, 0.05, SymmetryMode::even));
    MetricState st = metric_state(model, model->zero_function());
    const ArrayXd dev = st.scalar_curvature_grid() - 4.0;
    CHECK(dev.abs().maxCoeff() > 1e-3);  // genuinely non-constant
    CHECK(std::abs(integrate_grid(st, dev)) < 1e-6 * model->volume());
  }
}

TEST_CASE("ricci potential: dual routes and normalization") {
  auto model = build_model(perturbed_config(16, 0.05, SymmetryMode::even));
  const VectorXd ha = model->grid_values(model->ricci_potential());
  const VectorXd hb = model->grid_values(model->ricci_potential_closed_form());
  CHECK((ha - hb).lpNorm<Eigen::Infinity>() < 1e-8);

  // exponential normalization
  MetricState bg = metric_state(model, model->zero_function());
  const double mass = integrate_grid(bg, ha.array().exp() - 1.0);
  CHECK(std::abs(mass) < 1e-10 * model->volume());

  // i ddbar h matches Ric^T - (2m+2) form in the max norm
  const SphereBasis& basis = model->basis();
  const VectorXd lap_h = basis.synthesis(basis.lb_coeffs(model->ricci_potential().coeff));
  const ArrayXd lhs = 0.5 * lap_h.array();
  const ArrayXd rhs = bg.scalar_curvature_grid() * bg.density() - 4.0 * bg.density();
  CHECK((lhs - rhs).abs().maxCoeff() < 1e-8);
}

TEST_CASE("integrate") {
  auto model = build_model(canonical_config(16));
  MetricState st = metric_state(model, model->zero_function());
  CHECK(std::abs(integrate(st, model->constant(1.0)) - 2 * pi * pi) < 1e-11 * 2 * pi * pi);
  CHECK(std::abs(integrate(st, model->harmonic(2, 0, 1.0))) < 1e-12);
}

TEST_CASE("eta-Einstein constants") {
  const auto se = eta_einstein_map(4.0, 1);
  CHECK(se.lambda == 2.0);
  CHECK(se.nu == 0.0);
  const auto k = eta_einstein_map(2.0, 1);
  CHECK(k.lambda == 0.0);
  CHECK(k.nu == 2.0);
}

TEST_CASE("sasaki ricci bound at the canonical state") {
  auto model = build_model(canonical_config(16));
  MetricState st = metric_state(model, model->zero_function());
  CHECK(sasaki_ricci_bound(st, 1.0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(sasaki_ricci_bound(st, 0.5) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK_THROWS_AS(sasaki_ricci_bound(st, 0.0), std::invalid_argument);
}

TEST_CASE("laplacian consistency: de Rham equals twice the complex laplacian") {
  // de Rham route assembled from first-derivative tables on a slightly wider
  // engine (sin t * f_t has degree N+1); spectral route uses the eigenvalue
  // symbol. They must agree on random basic functions.
  auto model = build_model(perturbed_config(12, 0.04, SymmetryMode::full));
  const SphereBasis& basis = model->basis();
  SphereBasis wide(basis.band() + 2);
  std::mt19937_64 rng(9);
  BasicFunction u = tke::test::random_admissible_potential(model, rng);
  MetricState st = metric_state(model, u);

  ArrayXd sint(wide.n_nodes());
  for (int i = 0; i < wide.n_nodes(); ++i) sint[i] = std::sin(wide.node_theta(i));

  for (int k = 0; k < 50; ++k) {
    BasicFunction f = tke::test::random_admissible_potential(model, rng, 0.0, 0.02);
    VectorXd cw = VectorXd::Zero(wide.size());
    for (int a = 0; a < f.coeff.size(); ++a) {
      const int l = basis.degree(a);
      cw[SphereBasis::index(l, a - l * l - l)] = f.coeff[a];
    }
    // div(grad f) from derivative grids:
    //   Δf = (1/sin t) d/dt (sin t f_t) + f_pp / sin^2 t
    const VectorXd ft = wide.synthesis_dtheta(cw);
    const VectorXd fp = wide.synthesis_dphi(cw);
    const VectorXd sft = (sint * ft.array()).matrix();
    const VectorXd dsft = wide.synthesis_dtheta(wide.analysis(sft));
    const VectorXd dpp = wide.synthesis_dphi(wide.analysis(fp));
    const ArrayXd lap_grid = dsft.array() / sint + dpp.array() / (sint * sint);
    // compare as coefficients: derivative route against the symbol
    const VectorXd lap_c = wide.analysis(lap_grid.matrix());
    const VectorXd lap_sym = wide.lb_coeffs(cw);
    CHECK((lap_c - lap_sym).lpNorm<Eigen::Infinity>() < 1e-9);
    // and the de Rham / complex-laplacian ratio on the model grid
    const ArrayXd de_rham =
        -basis.synthesis(basis.lb_coeffs(f.coeff)).array() / st.density();
    const ArrayXd twice_box = 2.0 * complex_laplacian_grid(st, f);
    CHECK((de_rham - twice_box).abs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("integration by parts for the complex laplacian") {
  auto model = build_model(perturbed_config(12, 0.04, SymmetryMode::full));
  std::mt19937_64 rng(13);
  MetricState st = metric_state(model, tke::test::random_admissible_potential(model, rng));
  for (int k = 0; k < 20; ++k) {
    BasicFunction f = tke::test::random_admissible_potential(model, rng, 0.0, 0.02);
    BasicFunction g = tke::test::random_admissible_potential(model, rng, 0.0, 0.02);
    const double a = integrate_grid(
        st, model->grid_values(f).array() * complex_laplacian_grid(st, g));
    const double b = integrate_grid(
        st, model->grid_values(g).array() * complex_laplacian_grid(st, f));
    CHECK(std::abs(a - b) < 1e-8 * (1.0 + std::abs(a)));
  }
}

TEST_CASE("model is safe for concurrent read-only use") {
  auto model = build_model(perturbed_config(12, 0.04, SymmetryMode::even));
  std::vector<std::thread> workers;
  std::atomic<bool> ok{true};
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      std::mt19937_64 rng(100 + w);
      for (int k = 0; k < 5; ++k) {
        BasicFunction u = tke::test::random_admissible_potential(model, rng);
        MetricState st = metric_state(model, u);
        if (std::abs(st.lifted_volume() - model->volume()) > 1e-8 * model->volume())
          ok = false;
        // exercises the lazily built synthesis matrix from several threads
        if (model->active_synthesis().rows() != model->basis().n_nodes()) ok = false;
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK(ok);
}

TEST_CASE("even mode enforces the even subspace") {
  auto model = build_model(perturbed_config(12, 0.05, SymmetryMode::even));
  BasicFunction f = model->function_from_grid(
      VectorXd::Ones(model->basis().n_nodes()) * 0.3);
  for (int a = 0; a < f.coeff.size(); ++a)
    if (model->basis().degree(a) % 2 != 0) CHECK(f.coeff[a] == 0.0);

  // grid values of an even-mode function are antipodally symmetric
  std::mt19937_64 rng(1);
  BasicFunction u = tke::test::random_admissible_potential(model, rng);
  const VectorXd g = model->grid_values(u);
  for (int flat : {3, 77, 401}) {
    CHECK(std::abs(g[flat] - g[model->basis().antipode(flat)]) < 1e-11);
  }
}
