#pragma once

// Eigenanalysis of the weighted complex Laplacian (weight e^h on the
// measure side, Dirichlet form unchanged by conformal invariance at m = 1)
// and detection of normalized Hamiltonian holomorphic vector fields as the
// eigenspace at 2m+2.
//
// Discretized as a symmetric generalized eigenproblem so the spectrum is
// real by construction; eigenfunctions come back orthonormal under the
// weighted measure.

#include "tke/model.hpp"

#include <array>
#include <complex>
#include <string>
#include <vector>

namespace tke {

struct SpectrumResult {
  VectorXd eigenvalues;                       // lowest `count`, ascending
  std::vector<BasicFunction> eigenfunctions;  // weighted-orthonormal
  std::vector<std::pair<double, int>> multiplicity;  // clustered table
  double lambda1 = 0;                         // first nonzero eigenvalue
};

// Lowest `count` eigenpairs of the e^h-weighted Laplacian of the state's
// transverse metric. At the background state this is the operator whose
// first nonzero eigenvalue is bounded below by 2m+2; that bound is asserted.
SpectrumResult basic_spectrum(const ModelPtr& model, const MetricState& state, int count);

// Strong-form application on the grid, for residual checks:
//   op(f) = -(Δf + grad h . grad f) / (2 rho_u)
ArrayXd weighted_laplacian_grid(const ModelPtr& model, const MetricState& state,
                                const BasicFunction& f);

struct HamiltonianFieldRecord {
  BasicFunction hamiltonian;          // u_X, zero weighted mean, unit norm
  double eigenvalue = 0;
  double normalization_residual = 0;  // |∫ u_X e^h dmu_0|
  double eigen_residual = 0;          // ||(op - (2m+2)) u_X||_inf
  double identity_residual = 0;       // chart-form pairing check, relative
  std::array<std::complex<double>, 3> chart_coeffs{};  // a0 + a1 w + a2 w^2
  double chart_fit_residual = 0;      // relative misfit of the quadratic
};

struct DetectorResult {
  std::vector<HamiltonianFieldRecord> records;
  bool ambiguous = false;     // ill-separated cluster at 2m+2
  std::string note;
  VectorXd spectrum_window;   // eigenvalues inspected around 2m+2
};

// Basis of the eigenspace at 2m+2 (threshold 1e-4, required gap 1e-3).
// An empty record list certifies the no-Hamiltonian-fields hypothesis for
// this model/subspace.
DetectorResult hamiltonian_detector(const ModelPtr& model);

}  // namespace tke
