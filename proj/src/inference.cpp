#include "specboot/inference.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "specboot/estimators.hpp"

namespace specboot {

double empirical_quantile(const Eigen::VectorXd& draws, double q) {
  const int b = static_cast<int>(draws.size());
  if (b == 0) throw std::invalid_argument("no draws");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("q must be in (0,1)");
  std::vector<double> sorted(draws.data(), draws.data() + b);
  std::sort(sorted.begin(), sorted.end());
  const int idx = std::clamp(static_cast<int>(std::ceil(q * b)), 1, b);
  return sorted[idx - 1];
}

namespace {

struct Pipeline {
  EstimatorBundle bundle;
  BootstrapConfig config;
};

// Shared front end of the rank procedures: plug-in estimates, QuEST
// inversion, eigenvalue cap, and the bootstrap configuration.
Pipeline prepare(const Dataset& x, int B, const InferenceOptions& opts,
                 bool identity_tilde) {
  Pipeline pl;
  pl.bundle = compute_estimators(x.values);
  pl.config.B = B;
  pl.config.n = x.n;
  pl.config.p = x.p;
  pl.config.varsigma_sq_hat = pl.bundle.varsigma_sq_hat;
  pl.config.master_seed = opts.bootstrap_seed;
  pl.config.workers = opts.workers;
  pl.config.statistic = StatisticSpec::stable_rank_star();
  if (identity_tilde) {
    pl.config.spectrum_tilde = Eigen::VectorXd::Ones(x.p);
  } else {
    const SpectrumEstimate quest =
        estimate_population_spectrum(pl.bundle.sample_eigs, x.n, x.p, opts.quest);
    pl.config.spectrum_tilde = eigenvalue_cap(quest.eigenvalues, pl.bundle.b_hat);
  }
  return pl;
}

}  // namespace

RankInferenceResult stable_rank_ci(const Dataset& x, int B, double alpha,
                                   const InferenceOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha in (0,1)");
  Pipeline pl = prepare(x, B, opts, /*identity_tilde=*/false);
  const BootstrapDraws draws = bootstrap_distribution(pl.config);
  RankInferenceResult out;
  out.r_hat = pl.bundle.r_hat;
  out.alpha = alpha;
  out.B = B;
  out.q_lo = empirical_quantile(draws.column(), alpha / 2.0);
  out.q_hi = empirical_quantile(draws.column(), 1.0 - alpha / 2.0);
  out.interval = {out.r_hat - x.p * out.q_hi, out.r_hat - x.p * out.q_lo};
  return out;
}

RankInferenceResult stable_rank_test(const Dataset& x, double epsilon0,
                                     double alpha, int B,
                                     const InferenceOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha in (0,1)");
  if (!(epsilon0 > 0.0 && epsilon0 < 1.0))
    throw std::invalid_argument("epsilon0 in (0,1)");
  Pipeline pl = prepare(x, B, opts, /*identity_tilde=*/false);
  const BootstrapDraws draws = bootstrap_distribution(pl.config);
  RankInferenceResult out;
  out.r_hat = pl.bundle.r_hat;
  out.alpha = alpha;
  out.B = B;
  const double q = empirical_quantile(draws.column(), 1.0 - alpha);
  out.q_lo = q;
  out.q_hi = q;
  out.comparison_lhs = out.r_hat / x.p - epsilon0;
  out.reject = out.comparison_lhs > q;
  return out;
}

RankInferenceResult sphericity_test(const Dataset& x, double alpha, int B,
                                    const InferenceOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha in (0,1)");
  Pipeline pl = prepare(x, B, opts, /*identity_tilde=*/true);
  const BootstrapDraws draws = bootstrap_distribution(pl.config);
  RankInferenceResult out;
  out.r_hat = pl.bundle.r_hat;
  out.alpha = alpha;
  out.B = B;
  const double q = empirical_quantile(draws.column(), alpha);
  out.q_lo = q;
  out.q_hi = q;
  out.comparison_lhs = out.r_hat / x.p - 1.0;
  out.reject = out.comparison_lhs <= q;
  return out;
}

LimitMoments limiting_rank_variance(const std::array<double, 4>& phi, double c,
                                    double tau) {
  const double p1 = phi[0], p2 = phi[1], p3 = phi[2], p4 = phi[3];
  if (!(p2 > 0.0)) throw std::domain_error("phi_2 must be positive");
  LimitMoments out;
  out.phi = phi;
  out.c = c;
  out.tau = tau;
  const double t2 = tau - 2.0;
  out.k(0, 0) = 2.0 * c * p2 + c * t2 * p1 * p1;
  out.k(0, 1) = 4.0 * c * p3 + 4.0 * c * c * p1 * p2 +
                2.0 * c * t2 * p1 * (c * p1 * p1 + p2);
  out.k(1, 0) = out.k(0, 1);
  out.k(1, 1) = 8.0 * c * p4 + 4.0 * c * c * p2 * p2 + 16.0 * c * c * p1 * p3 +
                8.0 * c * c * c * p1 * p1 * p2 +
                4.0 * c * t2 * (c * p1 * p1 + p2) * (c * p1 * p1 + p2);
  Eigen::Vector2d grad;
  grad << 2.0 * p1 / p2 + 2.0 * c * p1 * p1 * p1 / (p2 * p2),
      -p1 * p1 / (p2 * p2);
  out.var_rank = grad.dot(out.k * grad);
  if (!(out.var_rank >= -1e-9))
    throw std::logic_error("limiting rank variance came out negative");
  out.var_rank = std::max(0.0, out.var_rank);
  return out;
}

double limiting_rank_variance_closed_form(const std::array<double, 4>& phi,
                                          double c) {
  const double p1 = phi[0], p2 = phi[1], p3 = phi[2], p4 = phi[3];
  if (!(p2 > 0.0)) throw std::domain_error("phi_2 must be positive");
  return (4.0 * c * p1 * p1 / (p2 * p2 * p2 * p2)) *
         (c * p1 * p1 * p2 * p2 + 2.0 * p1 * p1 * p4 + 2.0 * p2 * p2 * p2 -
          4.0 * p1 * p2 * p3);
}

std::string RankInferenceResult::to_json() const {
  nlohmann::json doc;
  doc["r_hat"] = r_hat;
  if (interval) doc["interval"] = {interval->first, interval->second};
  doc["q_lo"] = q_lo;
  doc["q_hi"] = q_hi;
  if (reject) doc["reject"] = *reject;
  doc["alpha"] = alpha;
  doc["B"] = B;
  doc["comparison_lhs"] = comparison_lhs;
  return doc.dump();
}

std::string RankInferenceResult::summary() const {
  std::ostringstream out;
  out.precision(6);
  out << "r_hat=" << r_hat;
  if (interval)
    out << " ci=[" << interval->first << ", " << interval->second << "]";
  if (reject) out << (*reject ? " reject" : " no-reject");
  out << " alpha=" << alpha << " B=" << B;
  return out.str();
}

std::string LimitMoments::to_json() const {
  nlohmann::json doc;
  doc["phi"] = phi;
  doc["c"] = c;
  doc["tau"] = tau;
  doc["K"] = {{k(0, 0), k(0, 1)}, {k(1, 0), k(1, 1)}};
  doc["var_rank"] = var_rank;
  return doc.dump();
}

}  // namespace specboot
