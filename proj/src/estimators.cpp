#include "specboot/estimators.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace specboot {

Eigen::VectorXd sample_covariance_eigs(const Eigen::MatrixXd& X) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (n < 1 || p < 1) throw std::invalid_argument("empty data matrix");
  if (!X.allFinite()) throw std::invalid_argument("data matrix has non-finite entries");

  Eigen::VectorXd eigs(p);
  if (p <= n) {
    Eigen::MatrixXd s = (X.transpose() * X) / n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
    for (int j = 0; j < p; ++j) eigs(j) = es.eigenvalues()(p - 1 - j);
  } else {
    Eigen::MatrixXd g = (X * X.transpose()) / n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    eigs.setZero();
    for (int j = 0; j < n; ++j) eigs(j) = es.eigenvalues()(n - 1 - j);
  }
  for (int j = 0; j < p; ++j)
    if (eigs(j) < 0.0) eigs(j) = 0.0;
  return eigs;
}

MomentEstimates estimate_moments(const Eigen::MatrixXd& X) {
  const int n = static_cast<int>(X.rows());
  if (n < 2) throw std::invalid_argument("estimate_moments needs n >= 2");
  if (!X.allFinite()) throw std::invalid_argument("data matrix has non-finite entries");

  Eigen::VectorXd eigs = sample_covariance_eigs(X);
  double tr = eigs.sum();
  double tr2 = eigs.squaredNorm();

  Eigen::VectorXd norms_sq = X.rowwise().squaredNorm();
  double mean = norms_sq.mean();
  double beta = (norms_sq.array() - mean).square().sum() / (n - 1);

  return {tr2 - tr * tr / n, beta, tr * tr};
}

double estimate_varsigma_sq(double alpha_hat, double beta_hat, double gamma_hat,
                            int p) {
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  double denom = gamma_hat + 2.0 * alpha_hat;
  if (denom <= 0.0)
    throw std::domain_error("degenerate input: tr(S)^2 + 2 tr(S^2) estimate is 0");
  double v = static_cast<double>(p) * (p + 2.0) * (beta_hat - 2.0 * alpha_hat) / denom +
             2.0 * p;
  return v > 0.0 ? v : 0.0;
}

double stable_rank_hat(const Eigen::VectorXd& eigs, int n) {
  double tr = eigs.sum();
  double tr2 = eigs.squaredNorm();
  double denom = tr2 - tr * tr / n;
  if (denom <= 0.0) return static_cast<double>(n);
  return tr * tr / denom;
}

Eigen::VectorXd eigenvalue_cap(const Eigen::VectorXd& eigs, double b_hat) {
  return eigs.array().min(b_hat);
}

EstimatorBundle compute_estimators(const Eigen::MatrixXd& X) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  EstimatorBundle b;
  b.sample_eigs = sample_covariance_eigs(X);
  auto m = estimate_moments(X);
  b.alpha_hat = m.alpha_hat;
  b.beta_hat = m.beta_hat;
  b.gamma_hat = m.gamma_hat;
  b.varsigma_sq_hat = estimate_varsigma_sq(m.alpha_hat, m.beta_hat, m.gamma_hat, p);
  b.b_hat = b.sample_eigs(0) + 1.0;
  b.r_hat = stable_rank_hat(b.sample_eigs, n);
  return b;
}

std::string EstimatorBundle::to_json() const {
  nlohmann::json j;
  j["alpha_hat"] = alpha_hat;
  j["beta_hat"] = beta_hat;
  j["gamma_hat"] = gamma_hat;
  j["varsigma_sq_hat"] = varsigma_sq_hat;
  j["b_hat"] = b_hat;
  j["r_hat"] = r_hat;
  j["sample_eigs"] = std::vector<double>(sample_eigs.data(),
                                         sample_eigs.data() + sample_eigs.size());
  return j.dump();
}

}  // namespace specboot
