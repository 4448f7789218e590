#pragma once

#include <Eigen/Dense>

#include "specboot/mp.hpp"
#include "specboot/spectra.hpp"

namespace specboot {

struct QuestOptions {
  int k = 100;           // support points (capped at p)
  int max_iters = 500;
  double tol = 1e-6;     // relative objective improvement
  int grid_points = 1024; // forward-map density grid
  double eta = 1e-4;      // forward-map imaginary offset floor (see quest.cpp)
};

struct SpectrumEstimate {
  Eigen::VectorXd eigenvalues;  // descending, length p
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;

  SpectrumModel spectrum() const;  // empirical distribution of the estimates
  std::string to_json() const;
};

// Predicted sorted sample eigenvalues for a candidate population spectrum:
// quantiles of Psi(candidate, c) at levels (p - j + 1/2) / p, descending.
// The zero atom contributes exact zeros.
Eigen::VectorXd forward_sample_spectrum(const SpectrumModel& candidate, double c,
                                        int p, const EsdOptions& opts = {});

// QuEST-style inversion of the MP map: minimizes the squared l2 discrepancy
// between the model spectral CDF evaluated at the observed eigenvalues and
// the empirical levels (p - j + 1/2)/p, over candidate spectra with K
// equally weighted support points. Optimization runs on eigenvalues
// normalized by their mean, which makes the estimate scale equivariant.
// Never throws on optimizer failure; inspect `converged`.
SpectrumEstimate estimate_population_spectrum(const Eigen::VectorXd& sample_eigs,
                                              int n, int p,
                                              const QuestOptions& opts = {});

// sup_t |F(t) - G(t)| between two discrete distributions; test/diagnostic
// helper for consistency checks.
double kolmogorov_distance(const SpectrumModel& a, const SpectrumModel& b);
// Levy distance (metrizes weak convergence).
double levy_distance(const SpectrumModel& a, const SpectrumModel& b);

}  // namespace specboot
