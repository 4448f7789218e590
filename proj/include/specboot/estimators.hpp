#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "specboot/sampling.hpp"

namespace specboot {

// Plug-in estimators computed from one dataset.
struct EstimatorBundle {
  double alpha_hat = 0.0;        // estimate of tr(Sigma^2)
  double beta_hat = 0.0;         // sample variance of ||x_i||^2
  double gamma_hat = 0.0;        // tr(Sigma_hat)^2
  double varsigma_sq_hat = 0.0;  // nonnegative
  double b_hat = 0.0;            // lambda_1(Sigma_hat) + 1
  double r_hat = 0.0;            // stable rank estimate, in [1, n]
  Eigen::VectorXd sample_eigs;   // descending, length p

  std::string to_json() const;
};

// Eigenvalues of (1/n) X^T X, descending, clamped at 0. When p > n the
// Gram route (1/n) X X^T plus p - n exact zeros is used.
Eigen::VectorXd sample_covariance_eigs(const Eigen::MatrixXd& X);

struct MomentEstimates {
  double alpha_hat;
  double beta_hat;
  double gamma_hat;
};
MomentEstimates estimate_moments(const Eigen::MatrixXd& X);

// (p(p+2)(beta - 2 alpha)/(gamma + 2 alpha) + 2p)_+; throws on a zero
// denominator instead of guessing.
double estimate_varsigma_sq(double alpha_hat, double beta_hat, double gamma_hat,
                            int p);

// tr^2 / (tr(Sq) - tr^2/n); n when the denominator vanishes.
double stable_rank_hat(const Eigen::VectorXd& sample_eigs_desc, int n);

// Elementwise min with b_hat, order preserved.
Eigen::VectorXd eigenvalue_cap(const Eigen::VectorXd& eigs_desc, double b_hat);

EstimatorBundle compute_estimators(const Eigen::MatrixXd& X);
inline EstimatorBundle compute_estimators(const Dataset& ds) {
  return compute_estimators(ds.values);
}

}  // namespace specboot
