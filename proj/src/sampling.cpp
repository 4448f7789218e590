#include "specboot/sampling.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace specboot {

EllipticalLaw EllipticalLaw::chi_squared() {
  return {RadialFamily::ChiSquared, 0.0, 0.0, 2.0};
}
EllipticalLaw EllipticalLaw::poisson() {
  return {RadialFamily::Poisson, 0.0, 0.0, 1.0};
}
EllipticalLaw EllipticalLaw::scaled_neg_binomial(double tau) {
  if (tau <= 0.0 || tau >= 1.0)
    throw std::invalid_argument("scaled negative binomial needs tau in (0,1)");
  return {RadialFamily::ScaledNegBinomial, tau, 0.0, tau};
}
EllipticalLaw EllipticalLaw::gamma(double tau) {
  if (tau <= 0.0) throw std::invalid_argument("gamma law needs tau > 0");
  return {RadialFamily::Gamma, tau, 0.0, tau};
}
EllipticalLaw EllipticalLaw::beta_prime(double tau) {
  if (tau <= 0.0) throw std::invalid_argument("beta-prime law needs tau > 0");
  return {RadialFamily::BetaPrime, tau, 0.0, tau};
}
EllipticalLaw EllipticalLaw::log_normal(double tau) {
  if (tau <= 0.0) throw std::invalid_argument("log-normal law needs tau > 0");
  return {RadialFamily::LogNormal, tau, 0.0, tau};
}
EllipticalLaw EllipticalLaw::scaled_beta(double beta) {
  if (beta <= 0.0) throw std::invalid_argument("scaled beta law needs beta > 0");
  return {RadialFamily::ScaledBeta, 0.0, beta, 0.0};
}
EllipticalLaw EllipticalLaw::point_mass() {
  return {RadialFamily::PointMass, 0.0, 0.0, 0.0};
}

std::string EllipticalLaw::name() const {
  switch (family) {
    case RadialFamily::ChiSquared: return "chi_squared";
    case RadialFamily::Poisson: return "poisson";
    case RadialFamily::ScaledNegBinomial: return "scaled_neg_binomial";
    case RadialFamily::Gamma: return "gamma";
    case RadialFamily::BetaPrime: return "beta_prime";
    case RadialFamily::LogNormal: return "log_normal";
    case RadialFamily::ScaledBeta: return "scaled_beta";
    case RadialFamily::PointMass: return "point_mass";
  }
  return "unknown";
}

EllipticalLaw EllipticalLaw::from_name(const std::string& name) {
  // Paper's simulation laws (i)-(iii) use tau = 8 for beta-prime and
  // beta = 2 for the scaled beta.
  if (name == "chi_squared" || name == "i") return chi_squared();
  if (name == "poisson") return poisson();
  if (name == "beta_prime" || name == "ii") return beta_prime(8.0);
  if (name == "scaled_beta" || name == "iii") return scaled_beta(2.0);
  if (name == "point_mass") return point_mass();
  throw std::invalid_argument("unknown law name: " + name);
}

Eigen::VectorXd sample_unit_sphere(int p, Rng& rng) {
  if (p < 1) throw std::invalid_argument("sphere dimension must be >= 1");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd z(p);
  double norm_sq = 0.0;
  do {
    for (int j = 0; j < p; ++j) z(j) = gauss(rng);
    norm_sq = z.squaredNorm();
  } while (norm_sq == 0.0);
  return z / std::sqrt(norm_sq);
}

double sample_xi_squared(const EllipticalLaw& law, int p, Rng& rng) {
  if (p < 1) throw std::invalid_argument("dimension must be >= 1");
  switch (law.family) {
    case RadialFamily::ChiSquared: {
      std::chi_squared_distribution<double> d(static_cast<double>(p));
      return d(rng);
    }
    case RadialFamily::Poisson: {
      std::poisson_distribution<long long> d(static_cast<double>(p));
      return static_cast<double>(d(rng));
    }
    case RadialFamily::ScaledNegBinomial: {
      // (1-tau) * NegativeBinomial(p, 1-tau) with the total-trials
      // convention: trials = failures + p, mean p/(1-tau), so the scaled
      // draw has mean p and var((xi^2-p)/sqrt(p)) = tau.
      std::negative_binomial_distribution<long long> d(p, 1.0 - law.tau);
      long long failures = d(rng);
      return (1.0 - law.tau) * static_cast<double>(failures + p);
    }
    case RadialFamily::Gamma: {
      // Gamma(p/tau, rate 1/tau): shape p/tau, scale tau.
      std::gamma_distribution<double> d(p / law.tau, law.tau);
      return d(rng);
    }
    case RadialFamily::BetaPrime: {
      double a = p * (1.0 + p + law.tau) / law.tau;
      double b = (1.0 + p + 2.0 * law.tau) / law.tau;
      std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
      double x = ga(rng), y = gb(rng);
      if (y == 0.0) throw std::runtime_error("beta-prime draw degenerate");
      return x / y;
    }
    case RadialFamily::LogNormal: {
      double sigma_sq = std::log1p(law.tau / p);
      double mu = std::log(static_cast<double>(p)) - 0.5 * sigma_sq;
      std::lognormal_distribution<double> d(mu, std::sqrt(sigma_sq));
      return d(rng);
    }
    case RadialFamily::ScaledBeta: {
      std::gamma_distribution<double> ga(p / 2.0, 1.0), gb(law.beta, 1.0);
      double x = ga(rng), y = gb(rng);
      return (p + 2.0 * law.beta) * x / (x + y);
    }
    case RadialFamily::PointMass:
      return static_cast<double>(p);
  }
  throw std::invalid_argument("unsupported radial family");
}

Dataset sample_dataset(const CovarianceSpec& spec, const EllipticalLaw& law,
                       int n, std::uint64_t master_seed) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const int p = spec.p;
  Eigen::MatrixXd rows(n, p);  // xi_i * u_i^T
  for (int i = 0; i < n; ++i) {
    Rng rng = make_rng(master_seed, static_cast<std::uint64_t>(i));
    double xi_sq = sample_xi_squared(law, p, rng);
    Eigen::VectorXd u = sample_unit_sphere(p, rng);
    rows.row(i) = std::sqrt(xi_sq) * u.transpose();
  }
  Dataset ds;
  ds.values = rows * spec.sqrt_matrix();
  ds.n = n;
  ds.p = p;
  ds.law = law;
  ds.spec = spec;
  ds.master_seed = master_seed;
  return ds;
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  for (int i = 0; i < ds.n; ++i) {
    for (int j = 0; j < ds.p; ++j) {
      if (j) out << ',';
      out << ds.values(i, j);
    }
    out << '\n';
  }
}

void write_dataset_binary(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  const char magic[8] = {'S', 'B', 'M', 'A', 'T', '0', '1', '\0'};
  out.write(magic, 8);
  std::int64_t n = ds.n, p = ds.p;
  std::uint64_t seed = ds.master_seed;
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&p), 8);
  out.write(reinterpret_cast<const char*>(&seed), 8);
  for (int i = 0; i < ds.n; ++i)
    out.write(reinterpret_cast<const char*>(ds.values.row(i).eval().data()),
              sizeof(double) * ds.p);
}

Eigen::MatrixXd read_dataset_binary(const std::string& path, int& n, int& p,
                                    std::uint64_t& seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::string(magic, 7) != "SBMAT01")
    throw std::runtime_error("bad magic in " + path);
  std::int64_t n64 = 0, p64 = 0;
  in.read(reinterpret_cast<char*>(&n64), 8);
  in.read(reinterpret_cast<char*>(&p64), 8);
  in.read(reinterpret_cast<char*>(&seed), 8);
  n = static_cast<int>(n64);
  p = static_cast<int>(p64);
  Eigen::MatrixXd m(n, p);
  std::vector<double> buf(p);
  for (int i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), sizeof(double) * p);
    for (int j = 0; j < p; ++j) m(i, j) = buf[j];
  }
  if (!in) throw std::runtime_error("truncated matrix file " + path);
  return m;
}

}  // namespace specboot
