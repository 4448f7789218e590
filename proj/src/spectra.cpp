#include "specboot/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "specboot/rng.hpp"

namespace specboot {

double SpectrumModel::mean() const { return moment(1); }

double SpectrumModel::moment(int k) const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.weight * std::pow(a.value, k);
  return s;
}

double SpectrumModel::cdf(double t) const {
  double s = 0.0;
  for (const auto& a : atoms) {
    if (a.value <= t) s += a.weight;
  }
  return s;
}

double SpectrumModel::max_value() const {
  return atoms.empty() ? 0.0 : atoms.back().value;
}

double SpectrumModel::min_value() const {
  return atoms.empty() ? 0.0 : atoms.front().value;
}

SpectrumModel SpectrumModel::scaled(double s) const {
  SpectrumModel out = *this;
  for (auto& a : out.atoms) a.value *= s;
  return out;
}

SpectrumModel SpectrumModel::point_mass(double value) {
  return SpectrumModel{{{value, 1.0}}};
}

void SpectrumModel::validate() const {
  if (atoms.empty()) throw std::invalid_argument("spectrum has no atoms");
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto& a = atoms[i];
    if (!std::isfinite(a.value) || a.value < 0.0)
      throw std::invalid_argument("spectrum atom value must be finite and >= 0");
    if (a.weight <= 0.0 || a.weight > 1.0)
      throw std::invalid_argument("spectrum atom weight must be in (0,1]");
    if (i > 0 && atoms[i - 1].value > a.value)
      throw std::invalid_argument("spectrum atoms must be sorted ascending");
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("spectrum weights must sum to 1");
}

void CovarianceSpec::validate() const {
  if (p <= 0) throw std::invalid_argument("p must be positive");
  if (static_cast<int>(eigenvalues.size()) != p)
    throw std::invalid_argument("eigenvalue count must equal p");
  bool any_positive = false;
  for (std::size_t j = 0; j < eigenvalues.size(); ++j) {
    double v = eigenvalues[j];
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("eigenvalues must be finite and >= 0");
    if (v > 0.0) any_positive = true;
    if (j > 0 && eigenvalues[j - 1] < v)
      throw std::invalid_argument("eigenvalues must be sorted descending");
  }
  if (!any_positive) throw std::invalid_argument("at least one eigenvalue must be > 0");
}

double CovarianceSpec::trace() const {
  double s = 0.0;
  for (double v : eigenvalues) s += v;
  return s;
}

double CovarianceSpec::trace_sq() const {
  double s = 0.0;
  for (double v : eigenvalues) s += v * v;
  return s;
}

Eigen::MatrixXd haar_orthogonal(int p, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < p; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

namespace {

Eigen::MatrixXd eigenbasis(const CovarianceSpec& spec) {
  if (spec.kind == CovarianceKind::ToeplitzPlusIdentity) {
    Eigen::MatrixXd m(spec.p, spec.p);
    for (int i = 0; i < spec.p; ++i)
      for (int j = 0; j < spec.p; ++j)
        m(i, j) = std::pow(0.1, std::abs(i - j)) + (i == j ? 1.0 : 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    // Columns reordered so that column j pairs with the j-th descending
    // eigenvalue stored in the spec.
    Eigen::MatrixXd v(spec.p, spec.p);
    for (int j = 0; j < spec.p; ++j) v.col(j) = es.eigenvectors().col(spec.p - 1 - j);
    return v;
  }
  if (spec.rotation_seed) return haar_orthogonal(spec.p, *spec.rotation_seed);
  return Eigen::MatrixXd::Identity(spec.p, spec.p);
}

}  // namespace

Eigen::MatrixXd CovarianceSpec::sqrt_matrix() const {
  validate();
  Eigen::MatrixXd v = eigenbasis(*this);
  Eigen::VectorXd d(p);
  for (int j = 0; j < p; ++j) d(j) = std::sqrt(eigenvalues[j]);
  return v * d.asDiagonal() * v.transpose();
}

Eigen::MatrixXd CovarianceSpec::matrix() const {
  validate();
  Eigen::MatrixXd v = eigenbasis(*this);
  Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(eigenvalues.data(), p);
  return v * d.asDiagonal() * v.transpose();
}

CovarianceSpec make_covariance_setting(SettingId id, int p,
                                       std::optional<std::uint64_t> rotation_seed) {
  CovarianceSpec spec;
  spec.p = p;
  spec.rotation_seed = rotation_seed;
  switch (id) {
    case SettingId::S1: {
      if (p < 6) throw std::invalid_argument("setting S1 requires p >= 6");
      spec.setting = "S1";
      spec.eigenvalues.assign(p, 1.0);
      for (int j = 0; j < 5; ++j) spec.eigenvalues[j] = 4.0 / 3.0;
      break;
    }
    case SettingId::S2: {
      if (p < 21) throw std::invalid_argument("setting S2 requires p >= 21");
      spec.setting = "S2";
      spec.eigenvalues.resize(p);
      for (int j = 0; j < p; ++j) {
        int idx = j + 1;
        spec.eigenvalues[j] = idx <= 20 ? std::exp(-idx / 10.0) : std::exp(-2.0);
      }
      break;
    }
    case SettingId::S3: {
      if (p < 1) throw std::invalid_argument("setting S3 requires p >= 1");
      spec.setting = "S3";
      spec.kind = CovarianceKind::ToeplitzPlusIdentity;
      spec.rotation_seed.reset();
      Eigen::MatrixXd m(p, p);
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
          m(i, j) = std::pow(0.1, std::abs(i - j)) + (i == j ? 1.0 : 0.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
      spec.eigenvalues.resize(p);
      for (int j = 0; j < p; ++j) {
        double v = es.eigenvalues()(p - 1 - j);
        spec.eigenvalues[j] = v < 0.0 ? 0.0 : v;
      }
      break;
    }
  }
  spec.validate();
  return spec;
}

CovarianceSpec make_rescaled_s1(double s, int p,
                                std::optional<std::uint64_t> rotation_seed) {
  if (p < 16) throw std::invalid_argument("rescaled S1 requires p >= 16");
  if (s <= 0.0) throw std::invalid_argument("scale must be positive");
  CovarianceSpec spec;
  spec.p = p;
  spec.setting = "custom";
  spec.rotation_seed = rotation_seed;
  spec.eigenvalues.assign(p, 1.0);
  for (int j = 0; j < 5; ++j) spec.eigenvalues[j] = 4.0 * s / 3.0;
  for (int j = 5; j < 15; ++j) spec.eigenvalues[j] = s;
  std::sort(spec.eigenvalues.begin(), spec.eigenvalues.end(), std::greater<>());
  spec.validate();
  return spec;
}

double solve_rescaled_s1_scale(double target_r_over_p, int p) {
  if (p < 16) throw std::invalid_argument("rescaled S1 requires p >= 16");
  auto r_over_p = [&](double s) {
    double tr = 5.0 * (4.0 * s / 3.0) + 10.0 * s + (p - 15);
    double tr2 = 5.0 * std::pow(4.0 * s / 3.0, 2) + 10.0 * s * s + (p - 15);
    return tr * tr / tr2 / p;
  };
  // r/p is decreasing in s for s >= 1; its limit as s -> inf is
  // (50/3)^2 / (170/9) / p. Target must be above that floor.
  double floor = (2500.0 / 9.0) / (170.0 / 9.0) / p;
  if (target_r_over_p <= floor || target_r_over_p >= r_over_p(1.0))
    throw std::invalid_argument("target r/p out of reachable range");
  double lo = 1.0, hi = 2.0;
  while (r_over_p(hi) > target_r_over_p) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (r_over_p(mid) > target_r_over_p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

SpectrumModel spectral_distribution(const CovarianceSpec& spec) {
  spec.validate();
  std::map<double, int> mult;
  for (double v : spec.eigenvalues) mult[v] += 1;
  SpectrumModel h;
  h.atoms.reserve(mult.size());
  for (const auto& [value, count] : mult)
    h.atoms.push_back({value, static_cast<double>(count) / spec.p});
  return h;
}

std::string CovarianceSpec::to_json() const {
  nlohmann::json j;
  j["setting"] = setting;
  j["p"] = p;
  j["eigenvalues"] = eigenvalues;
  if (rotation_seed) j["rotation_seed"] = *rotation_seed;
  return j.dump();
}

CovarianceSpec CovarianceSpec::from_json(const std::string& doc) {
  nlohmann::json j = nlohmann::json::parse(doc);
  std::string setting = j.value("setting", "custom");
  int p = j.at("p").get<int>();
  std::optional<std::uint64_t> seed;
  if (j.contains("rotation_seed")) seed = j["rotation_seed"].get<std::uint64_t>();
  if (setting == "S1") return make_covariance_setting(SettingId::S1, p, seed);
  if (setting == "S2") return make_covariance_setting(SettingId::S2, p, seed);
  if (setting == "S3") return make_covariance_setting(SettingId::S3, p, seed);
  CovarianceSpec spec;
  spec.p = p;
  spec.rotation_seed = seed;
  spec.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  spec.validate();
  return spec;
}

}  // namespace specboot
