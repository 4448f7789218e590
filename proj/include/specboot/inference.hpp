#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "specboot/bootstrap.hpp"
#include "specboot/quest.hpp"
#include "specboot/sampling.hpp"

namespace specboot {

struct RankInferenceResult {
  double r_hat = 0.0;
  std::optional<std::pair<double, double>> interval;  // (lo, hi)
  double q_lo = 0.0;  // bootstrap quantiles used by the procedure
  double q_hi = 0.0;
  std::optional<bool> reject;
  double alpha = 0.0;
  int B = 0;
  double comparison_lhs = 0.0;  // test statistic compared against a quantile

  std::string to_json() const;
  std::string summary() const;  // one-line human rendering
};

struct LimitMoments {
  std::array<double, 4> phi{};  // phi_1 .. phi_4
  double c = 0.0;
  double tau = 0.0;
  Eigen::Matrix2d k = Eigen::Matrix2d::Zero();
  double var_rank = 0.0;

  std::string to_json() const;
};

struct InferenceOptions {
  QuestOptions quest;
  int workers = 0;             // 0 -> default_workers()
  std::uint64_t bootstrap_seed = 1;
};

// Order statistic at index ceil(q * B) (1-based) of the sorted draws.
double empirical_quantile(const Eigen::VectorXd& draws, double q);

// Confidence interval for the stable rank:
// [r_hat - p q_{1-alpha/2}, r_hat - p q_{alpha/2}] over B StableRankStar
// draws generated with Sigma-tilde from the capped QuEST estimate.
RankInferenceResult stable_rank_ci(const Dataset& x, int B, double alpha,
                                   const InferenceOptions& opts = {});

// Test of H0: r/p <= epsilon0; rejects iff r_hat/p - epsilon0 > q_{1-alpha}.
RankInferenceResult stable_rank_test(const Dataset& x, double epsilon0,
                                     double alpha, int B,
                                     const InferenceOptions& opts = {});

// Sphericity test: bootstrap with Sigma-tilde = I (no QuEST); rejects iff
// r_hat/p - 1 <= q_alpha.
RankInferenceResult sphericity_test(const Dataset& x, double alpha, int B,
                                    const InferenceOptions& opts = {});

// Limiting variance of the stable-rank error (delta method): populates the
// 2x2 covariance K of the limiting Gaussian of (T(x), T(x^2)) and
// var_rank = grad^T K grad with grad = (2phi1/phi2 + 2c phi1^3/phi2^2,
// -phi1^2/phi2^2). Requires phi2 > 0.
LimitMoments limiting_rank_variance(const std::array<double, 4>& phi, double c,
                                    double tau);

// Closed form for the same variance; used as a consistency check against
// the quadratic-form route.
double limiting_rank_variance_closed_form(const std::array<double, 4>& phi,
                                          double c);

}  // namespace specboot
