#pragma once

// Shared helpers for the test suites: model factories, random admissible
// potentials, and small independent oracles.

#include "tke/functionals.hpp"
#include "tke/model.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

namespace tke::test {

using tke::random_admissible_potential;

inline ModelConfig canonical_config(int band = 16) {
  ModelConfig cfg;
  cfg.band_limit = band;
  return cfg;
}

inline ModelConfig perturbed_config(int band = 16, double amp = 0.05,
                                    SymmetryMode mode = SymmetryMode::even) {
  ModelConfig cfg;
  cfg.band_limit = band;
  cfg.symmetry_mode = mode;
  cfg.perturbation.push_back({2, 0, amp});
  return cfg;
}

// Second-order finite-difference Laplace-Beltrami of a coefficient vector at
// a point, via independent point evaluations. Oracle for spectral routes.
inline double fd_laplace_beltrami(const SphereBasis& basis, const VectorXd& c,
                                  double theta, double phi, double h = 1e-4) {
  auto val = [&](double t, double p) {
    double v;
    basis.eval_point(c, t, p, &v, nullptr, nullptr);
    return v;
  };
  const double f0 = val(theta, phi);
  const double ftp = val(theta + h, phi), ftm = val(theta - h, phi);
  const double fpp = val(theta, phi + h), fpm = val(theta, phi - h);
  const double ftt = (ftp - 2 * f0 + ftm) / (h * h);
  const double ft = (ftp - ftm) / (2 * h);
  const double fpp2 = (fpp - 2 * f0 + fpm) / (h * h);
  const double s = std::sin(theta);
  return ftt + std::cos(theta) / s * ft + fpp2 / (s * s);
}

}  // namespace tke::test
