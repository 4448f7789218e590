#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "specboot/sampling.hpp"
#include "specboot/spectra.hpp"

namespace specboot {

// A scalar statistic function f with a label, usable as an LSS kernel.
struct ScalarFn {
  std::string label;
  std::function<double(double)> fn;

  double operator()(double x) const { return fn(x); }
  // "identity" | "square" | "x_minus_log" | "one", or a custom callable.
  static ScalarFn named(const std::string& label);
  static ScalarFn custom(std::function<double(double)> fn,
                         const std::string& label = "custom");
};

struct SolveOptions {
  double tol = 1e-11;
  int max_iter = 5000;
  double damping = 0.5;
};

// Stieltjes transform of Psi(H, c) at z (Im z > 0): the unique solution m
// of the fixed-point equation m = int dH(t) / (t(1-c-czm) - z) with
// (c-1)/z + c m in the upper half plane. Throws on non-convergence.
std::complex<double> solve_stieltjes(const SpectrumModel& H, double c,
                                     std::complex<double> z,
                                     const SolveOptions& opts = {},
                                     std::complex<double> warm_start = {0.0, 0.0});

struct EsdOptions {
  int grid_points = 4096;
  // Imaginary offset for density recovery, relative to the top of the
  // spectrum (the solver uses eta * max(H)). The default is small enough to
  // keep the normalization defect of the recovered density below 1e-4.
  double eta = 1e-5;
  double density_floor = 1e-8;
  double span_factor = 1.05;
  SolveOptions solver;
};

// Numerically tabulated Psi(H, c).
struct MPDistribution {
  double c = 0.0;
  SpectrumModel source;
  double zero_atom = 0.0;
  std::vector<double> x;
  std::vector<double> density;
  std::vector<double> cdf;  // includes the zero atom
  std::vector<std::pair<double, double>> support_intervals;
  double eta = 0.0;

  double total_mass() const { return cdf.empty() ? zero_atom : cdf.back(); }
  // Quantile with the continuous part renormalized to mass 1 - zero_atom;
  // levels at or below the zero atom map to 0.
  double quantile(double q) const;
  void write_csv(const std::string& path) const;
};

// Solves the MP equation along an adaptive grid covering
// [0, (1+sqrt(c))^2 * lambda_max * span_factor] and recovers the density by
// Stieltjes inversion. The mass at zero is set analytically.
MPDistribution esd_grid(const SpectrumModel& H, double c, const EsdOptions& opts = {});

// Analytic mass of Psi(H,c) at 0: max(H({0}), 1 - 1/c).
double psi_zero_atom(const SpectrumModel& H, double c);

// Centering parameter: integral of f against the tabulated distribution,
// including f(0) * zero_atom. Throws if f is undefined at 0 while the zero
// atom is positive.
double centering_parameter(const MPDistribution& dist, const ScalarFn& f);

// Exact first two centering moments from the population spectrum:
// theta1 = (1/p) tr Sigma, theta2 = (1/p) tr Sigma^2 + (1/(np)) tr(Sigma)^2.
std::pair<double, double> centering_moments(const SpectrumModel& H, int n, int p);

// Radial sampler indexed by the (expanded) dimension.
using RadialSampler = std::function<double(int dim, Rng&)>;

struct McOptions {
  int reps = 30;
  int expansion = 40;
  int dim_cap = 8192;  // memory guard on expansion * p
};

// Monte Carlo centering parameter: averages reps realizations of
// (1/(E p)) sum_j f(lambda_j(W)) where W is the sample covariance of
// E*n draws xi_i u_i from the E-fold expanded spectrum.
double centering_parameter_mc(const Eigen::VectorXd& eigenvalues_p,
                              const RadialSampler& radial, int n, int p,
                              const ScalarFn& f, const McOptions& opts,
                              std::uint64_t seed);
// Convenience wrapper drawing xi^2 from an elliptical law at the expanded
// dimension.
double centering_parameter_mc(const Eigen::VectorXd& eigenvalues_p,
                              const EllipticalLaw& law, int n, int p,
                              const ScalarFn& f, const McOptions& opts,
                              std::uint64_t seed);

}  // namespace specboot
