#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace specboot {

enum class SettingId { S1, S2, S3 };

// One atom of a discrete spectral distribution.
struct SpectrumAtom {
  double value;
  double weight;
};

// Discrete spectral distribution: atoms sorted ascending, weights sum to 1.
struct SpectrumModel {
  std::vector<SpectrumAtom> atoms;

  double mean() const;
  double moment(int k) const;
  // CDF: fraction of mass at values <= t.
  double cdf(double t) const;
  double max_value() const;
  double min_value() const;
  // Scales every atom value by s > 0.
  SpectrumModel scaled(double s) const;

  static SpectrumModel point_mass(double value);
  // Validates invariants (weights sum to 1, sorted, nonnegative); throws.
  void validate() const;
};

enum class CovarianceKind { EigenProfile, ToeplitzPlusIdentity };

// Population covariance specification. The spectrum is explicit; the
// eigenvector basis is either Haar-random (from rotation_seed) or identity.
struct CovarianceSpec {
  CovarianceKind kind = CovarianceKind::EigenProfile;
  std::vector<double> eigenvalues;  // sorted descending, all >= 0
  int p = 0;
  std::optional<std::uint64_t> rotation_seed;
  std::string setting = "custom";  // "S1" | "S2" | "S3" | "custom"

  void validate() const;

  double trace() const;
  double trace_sq() const;  // tr(Sigma^2)
  // Symmetric square root V diag(sqrt(lambda)) V^T.
  Eigen::MatrixXd sqrt_matrix() const;
  // The realized covariance matrix itself.
  Eigen::MatrixXd matrix() const;

  std::string to_json() const;
  static CovarianceSpec from_json(const std::string& doc);
};

// Settings (1)-(3): S1 = five eigenvalues 4/3 on a background of 1s;
// S2 = exp(-j/10) for j <= 20 with a flat exp(-2) tail; S3 = Toeplitz
// (1/10)^|i-j| plus the identity.
CovarianceSpec make_covariance_setting(SettingId id, int p,
                                       std::optional<std::uint64_t> rotation_seed = {});

// Rescaled-S1 design used for rank-test level/power studies: eigenvalues
// 4s/3 (x5), s (x10), 1 (x(p-15)).
CovarianceSpec make_rescaled_s1(double s, int p,
                                std::optional<std::uint64_t> rotation_seed = {});
// Chooses s so that the rescaled-S1 stable rank satisfies r/p = target.
double solve_rescaled_s1_scale(double target_r_over_p, int p);

// Empirical distribution of the spec's eigenvalues (one atom per distinct
// value, weight = multiplicity / p).
SpectrumModel spectral_distribution(const CovarianceSpec& spec);

// Haar-distributed orthogonal matrix via QR of a Gaussian matrix with the
// R diagonal sign-fixed.
Eigen::MatrixXd haar_orthogonal(int p, std::uint64_t seed);

}  // namespace specboot
