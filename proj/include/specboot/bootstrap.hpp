#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "specboot/mp.hpp"
#include "specboot/rng.hpp"

namespace specboot {

// Radial sampler for the bootstrap: Gamma with mean p and variance
// varsigma_sq_hat, degenerating to the point mass at p.
struct GammaXiParams {
  bool point_mass = false;
  double shape = 0.0;
  double scale = 0.0;
  double p = 0.0;

  double sample_xi_sq(Rng& rng) const;  // a draw of xi*^2
};
GammaXiParams gamma_xi_params(int p, double varsigma_sq_hat);

// Which function psi of the sorted sample eigenvalues to bootstrap.
struct StatisticSpec {
  enum class Kind { LSS, LargestEig, EigenGap, StableRankStar, Custom };
  Kind kind = Kind::LargestEig;
  ScalarFn f;  // LSS kernel, ignored otherwise
  std::function<double(const Eigen::VectorXd&)> custom;
  std::string custom_label = "custom";

  std::string label() const;

  static StatisticSpec lss(const ScalarFn& f);
  static StatisticSpec largest_eig();
  static StatisticSpec eigen_gap();
  static StatisticSpec stable_rank_star();
  static StatisticSpec make_custom(std::function<double(const Eigen::VectorXd&)> fn,
                                   const std::string& label = "custom");
};

// Extra inputs some statistics need beyond the eigenvalues themselves.
struct StatisticContext {
  int n = 0;                         // sample size behind the eigenvalues
  Eigen::VectorXd spectrum_tilde;    // reference spectrum (StableRankStar)
};

// psi(eigs): LSS(f) = (1/p) sum f(lambda_j); LargestEig = lambda_1;
// EigenGap = lambda_1 - lambda_2; StableRankStar =
// (1/p) tr^2 / (tr(Sq) - tr^2/n) - (1/p) tr(tilde)^2 / tr(tilde^2),
// returning 0 if either denominator is 0. Throws on a non-finite result.
double evaluate_statistic(const StatisticSpec& spec, const Eigen::VectorXd& eigs,
                          const StatisticContext& ctx = {});

struct BootstrapConfig {
  int B = 250;
  int n = 0;
  int p = 0;
  double varsigma_sq_hat = 0.0;
  Eigen::VectorXd spectrum_tilde;  // diag of Sigma-tilde, sorted descending
  std::uint64_t master_seed = 0;
  StatisticSpec statistic;
  int workers = 0;  // 0 -> default_workers()
  bool skip_failed = false;

  void validate() const;
};

struct BootstrapDraws {
  Eigen::MatrixXd values;  // B x (number of statistics), replicate order
  std::vector<std::string> labels;
  std::vector<std::uint64_t> per_replicate_seeds;

  Eigen::VectorXd column(int j = 0) const { return values.col(j); }
  // CSV with header replicate_index,<label>[,<label>...].
  void write_csv(const std::string& path) const;
};

// One replicate of Algorithm 1: from seed derive(master_seed, b), draw n
// radial values xi*^2 and n sphere vectors, form x* = xi* diag(sqrt(tilde)) u*,
// take the eigenvalues of (1/n) sum x* x*^T, and evaluate the statistic(s).
double bootstrap_replicate(const BootstrapConfig& config, int replicate_index);
Eigen::VectorXd bootstrap_replicate_multi(const BootstrapConfig& config,
                                          const std::vector<StatisticSpec>& stats,
                                          int replicate_index);

// B replicates, parallel over workers with deterministic per-replicate
// seeding: output is identical for any worker count. A failed replicate
// aborts with its index unless config.skip_failed (failed rows are dropped).
BootstrapDraws bootstrap_distribution(const BootstrapConfig& config);
BootstrapDraws bootstrap_distribution(const BootstrapConfig& config,
                                      const std::vector<StatisticSpec>& stats);

}  // namespace specboot
