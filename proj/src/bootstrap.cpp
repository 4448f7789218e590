#include "specboot/bootstrap.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <utility>

#include "specboot/estimators.hpp"
#include "specboot/parallel.hpp"
#include "specboot/sampling.hpp"

namespace specboot {

double GammaXiParams::sample_xi_sq(Rng& rng) const {
  if (point_mass) return p;
  std::gamma_distribution<double> dist(shape, scale);
  return dist(rng);
}

GammaXiParams gamma_xi_params(int p, double varsigma_sq_hat) {
  if (p < 1) throw std::invalid_argument("need p >= 1");
  if (!(varsigma_sq_hat >= 0.0))
    throw std::invalid_argument("varsigma_sq_hat must be >= 0");
  GammaXiParams out;
  out.p = p;
  if (varsigma_sq_hat == 0.0) {
    out.point_mass = true;
  } else {
    out.shape = static_cast<double>(p) * p / varsigma_sq_hat;
    out.scale = varsigma_sq_hat / p;
  }
  return out;
}

std::string StatisticSpec::label() const {
  switch (kind) {
    case Kind::LSS: return "lss_" + f.label;
    case Kind::LargestEig: return "largest_eig";
    case Kind::EigenGap: return "eigen_gap";
    case Kind::StableRankStar: return "stable_rank_star";
    case Kind::Custom: return custom_label;
  }
  return "unknown";
}

StatisticSpec StatisticSpec::lss(const ScalarFn& f) {
  StatisticSpec s;
  s.kind = Kind::LSS;
  s.f = f;
  return s;
}
StatisticSpec StatisticSpec::largest_eig() {
  StatisticSpec s;
  s.kind = Kind::LargestEig;
  return s;
}
StatisticSpec StatisticSpec::eigen_gap() {
  StatisticSpec s;
  s.kind = Kind::EigenGap;
  return s;
}
StatisticSpec StatisticSpec::stable_rank_star() {
  StatisticSpec s;
  s.kind = Kind::StableRankStar;
  return s;
}
StatisticSpec StatisticSpec::make_custom(
    std::function<double(const Eigen::VectorXd&)> fn, const std::string& label) {
  StatisticSpec s;
  s.kind = Kind::Custom;
  s.custom = std::move(fn);
  s.custom_label = label;
  return s;
}

double evaluate_statistic(const StatisticSpec& spec, const Eigen::VectorXd& eigs,
                          const StatisticContext& ctx) {
  const int p = static_cast<int>(eigs.size());
  if (p < 1) throw std::invalid_argument("empty eigenvalue sequence");
  double value = 0.0;
  switch (spec.kind) {
    case StatisticSpec::Kind::LSS: {
      if (!spec.f.fn) throw std::invalid_argument("LSS statistic without kernel");
      double acc = 0.0;
      for (int j = 0; j < p; ++j) acc += spec.f(eigs(j));
      value = acc / p;
      break;
    }
    case StatisticSpec::Kind::LargestEig:
      value = eigs(0);
      break;
    case StatisticSpec::Kind::EigenGap:
      if (p < 2) throw std::invalid_argument("eigengap needs p >= 2");
      value = eigs(0) - eigs(1);
      break;
    case StatisticSpec::Kind::StableRankStar: {
      if (ctx.n < 1)
        throw std::invalid_argument("StableRankStar needs the sample size n");
      if (ctx.spectrum_tilde.size() == 0)
        throw std::invalid_argument("StableRankStar needs the reference spectrum");
      const double tr = eigs.sum();
      const double tr_sq = eigs.squaredNorm();
      const double denom_star = tr_sq - tr * tr / ctx.n;
      const double trt = ctx.spectrum_tilde.sum();
      const double denom_tilde = ctx.spectrum_tilde.squaredNorm();
      if (denom_star <= 0.0 || denom_tilde <= 0.0) return 0.0;
      value = (tr * tr / denom_star - trt * trt / denom_tilde) / p;
      break;
    }
    case StatisticSpec::Kind::Custom:
      if (!spec.custom) throw std::invalid_argument("custom statistic unset");
      value = spec.custom(eigs);
      break;
  }
  if (!std::isfinite(value))
    throw std::domain_error("statistic " + spec.label() + " is not finite");
  return value;
}

void BootstrapConfig::validate() const {
  if (B < 1) throw std::invalid_argument("B must be >= 1");
  if (n < 1 || p < 1) throw std::invalid_argument("n and p must be >= 1");
  if (!(varsigma_sq_hat >= 0.0))
    throw std::invalid_argument("varsigma_sq_hat must be >= 0");
  if (static_cast<int>(spectrum_tilde.size()) != p)
    throw std::invalid_argument("spectrum_tilde must have length p");
  for (int j = 0; j < p; ++j) {
    if (!std::isfinite(spectrum_tilde(j)) || spectrum_tilde(j) < 0.0)
      throw std::invalid_argument("spectrum_tilde must be finite and >= 0");
    if (j > 0 && spectrum_tilde(j) > spectrum_tilde(j - 1) + 1e-12)
      throw std::invalid_argument("spectrum_tilde must be sorted descending");
  }
}

namespace {

Eigen::VectorXd replicate_eigs(const BootstrapConfig& config, int b) {
  Rng rng = make_rng(config.master_seed, static_cast<std::uint64_t>(b));
  const GammaXiParams xi = gamma_xi_params(config.p, config.varsigma_sq_hat);
  const Eigen::VectorXd d = config.spectrum_tilde.cwiseSqrt();
  Eigen::MatrixXd y(config.n, config.p);
  for (int i = 0; i < config.n; ++i) {
    const double xi_sq = xi.sample_xi_sq(rng);
    const Eigen::VectorXd u = sample_unit_sphere(config.p, rng);
    y.row(i) = std::sqrt(xi_sq) * u.cwiseProduct(d).transpose();
  }
  return sample_covariance_eigs(y);
}

}  // namespace

Eigen::VectorXd bootstrap_replicate_multi(const BootstrapConfig& config,
                                          const std::vector<StatisticSpec>& stats,
                                          int replicate_index) {
  config.validate();
  if (replicate_index < 0) throw std::invalid_argument("negative replicate index");
  const Eigen::VectorXd eigs = replicate_eigs(config, replicate_index);
  StatisticContext ctx;
  ctx.n = config.n;
  ctx.spectrum_tilde = config.spectrum_tilde;
  Eigen::VectorXd out(static_cast<int>(stats.size()));
  for (std::size_t s = 0; s < stats.size(); ++s)
    out(static_cast<int>(s)) = evaluate_statistic(stats[s], eigs, ctx);
  return out;
}

double bootstrap_replicate(const BootstrapConfig& config, int replicate_index) {
  return bootstrap_replicate_multi(config, {config.statistic}, replicate_index)(0);
}

BootstrapDraws bootstrap_distribution(const BootstrapConfig& config,
                                      const std::vector<StatisticSpec>& stats) {
  config.validate();
  if (stats.empty()) throw std::invalid_argument("no statistics requested");
  const int k = static_cast<int>(stats.size());
  Eigen::MatrixXd values(config.B, k);
  std::vector<std::uint64_t> seeds(config.B);
  std::vector<char> ok(config.B, 1);
  const int workers = config.workers > 0 ? config.workers : default_workers();
  parallel_for(static_cast<std::size_t>(config.B), workers, [&](std::size_t b) {
    seeds[b] = derive_seed(config.master_seed, b);
    try {
      values.row(static_cast<int>(b)) =
          bootstrap_replicate_multi(config, stats, static_cast<int>(b)).transpose();
    } catch (const std::exception& e) {
      if (!config.skip_failed)
        throw std::runtime_error("replicate " + std::to_string(b) + ": " + e.what());
      ok[b] = 0;
    }
  });
  BootstrapDraws out;
  for (const auto& s : stats) out.labels.push_back(s.label());
  int kept = 0;
  for (int b = 0; b < config.B; ++b) kept += ok[b];
  out.values.resize(kept, k);
  out.per_replicate_seeds.reserve(kept);
  int row = 0;
  for (int b = 0; b < config.B; ++b) {
    if (!ok[b]) continue;
    out.values.row(row++) = values.row(b);
    out.per_replicate_seeds.push_back(seeds[b]);
  }
  return out;
}

BootstrapDraws bootstrap_distribution(const BootstrapConfig& config) {
  return bootstrap_distribution(config, {config.statistic});
}

void BootstrapDraws::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "replicate_index";
  for (const auto& label : labels) out << ',' << label;
  out << '\n';
  out.precision(17);
  for (int b = 0; b < values.rows(); ++b) {
    out << b;
    for (int j = 0; j < values.cols(); ++j) out << ',' << values(b, j);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace specboot
