#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "specboot/rng.hpp"
#include "specboot/spectra.hpp"

namespace specboot {

enum class RadialFamily {
  ChiSquared,
  Poisson,
  ScaledNegBinomial,
  Gamma,
  BetaPrime,
  LogNormal,
  ScaledBeta,
  PointMass,
};

// Radial law of xi_1^2 with E(xi_1^2) = p. tau_limit is the asymptotic
// value of var((xi_1^2 - p) / sqrt(p)).
struct EllipticalLaw {
  RadialFamily family = RadialFamily::ChiSquared;
  double tau = 0.0;   // Gamma / BetaPrime / LogNormal / ScaledNegBinomial
  double beta = 0.0;  // ScaledBeta
  double tau_limit = 2.0;

  static EllipticalLaw chi_squared();
  static EllipticalLaw poisson();
  static EllipticalLaw scaled_neg_binomial(double tau);  // tau in (0,1)
  static EllipticalLaw gamma(double tau);                // tau > 0
  static EllipticalLaw beta_prime(double tau);           // tau > 0
  static EllipticalLaw log_normal(double tau);           // tau > 0
  static EllipticalLaw scaled_beta(double beta);         // beta > 0
  static EllipticalLaw point_mass();

  std::string name() const;
  static EllipticalLaw from_name(const std::string& name);
};

// Elliptical dataset x_i = xi_i Sigma^{1/2} u_i, rows i.i.d.
struct Dataset {
  Eigen::MatrixXd values;  // n x p
  int n = 0;
  int p = 0;
  EllipticalLaw law;
  CovarianceSpec spec;
  std::uint64_t master_seed = 0;
};

// Uniform draw from the unit sphere of R^p (Gaussian vector normalized).
Eigen::VectorXd sample_unit_sphere(int p, Rng& rng);

// One draw of xi^2 from the law at dimension p.
double sample_xi_squared(const EllipticalLaw& law, int p, Rng& rng);

// n i.i.d. rows xi_i Sigma^{1/2} u_i; row i's stream depends only on
// (master_seed, i), so the result is independent of generation order.
Dataset sample_dataset(const CovarianceSpec& spec, const EllipticalLaw& law,
                       int n, std::uint64_t master_seed);

// CSV (rows = observations) and a little binary format with an
// (n, p, seed) header.
void write_dataset_csv(const Dataset& ds, const std::string& path);
void write_dataset_binary(const Dataset& ds, const std::string& path);
Eigen::MatrixXd read_dataset_binary(const std::string& path, int& n, int& p,
                                    std::uint64_t& seed);

}  // namespace specboot
