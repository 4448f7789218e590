#include "specboot/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "specboot/estimators.hpp"
#include "specboot/parallel.hpp"

namespace specboot {
namespace {

constexpr const char* kVersion = "0.1.0";

// Published numbers: ground (mean, sd, 95th) and bootstrap means of the
// same three summaries. For table 5 the pair is (width/r_n in %, coverage
// in %) stored in g[0], g[1].
struct PaperRow {
  int table;
  int law;      // 1 = (i), 2 = (ii), 3 = (iii)
  int setting;  // 1..3
  double ratio;
  double g[3];
  double b[3];
};

const PaperRow kPaperRows[] = {
    // Table 1: p(T(f) - theta(f)), f(x) = x^2
    {1, 1, 1, 0.5, {0.51, 3.31, 6.02}, {0.48, 3.27, 5.85}},
    {1, 1, 1, 1.0, {0.85, 6.11, 10.87}, {0.96, 6.09, 11.02}},
    {1, 1, 1, 1.5, {1.44, 9.15, 16.48}, {1.47, 9.25, 16.73}},
    {1, 1, 2, 0.5, {0.0, 0.11, 0.19}, {0.0, 0.11, 0.19}},
    {1, 1, 2, 1.0, {0.01, 0.11, 0.19}, {0.0, 0.11, 0.19}},
    {1, 1, 2, 1.5, {0.0, 0.11, 0.2}, {0.0, 0.11, 0.2}},
    {1, 1, 3, 0.5, {2.16, 12.88, 23.12}, {1.9, 12.85, 23.2}},
    {1, 1, 3, 1.0, {4.02, 24.12, 44.03}, {3.94, 24.27, 43.95}},
    {1, 1, 3, 1.5, {5.8, 36.13, 65.72}, {5.8, 37.08, 67.09}},
    {1, 2, 1, 0.5, {3.57, 6.35, 14.09}, {3.47, 6.36, 14.03}},
    {1, 2, 1, 1.0, {6.69, 11.93, 26.9}, {6.83, 11.85, 26.51}},
    {1, 2, 1, 1.5, {10.25, 18.09, 39.92}, {10.26, 17.99, 39.92}},
    {1, 2, 2, 0.5, {0.01, 0.12, 0.21}, {0.01, 0.12, 0.2}},
    {1, 2, 2, 1.0, {0.0, 0.11, 0.2}, {0.01, 0.11, 0.2}},
    {1, 2, 2, 1.5, {0.0, 0.11, 0.19}, {0.0, 0.11, 0.2}},
    {1, 2, 3, 0.5, {14.16, 25.27, 56.0}, {13.67, 25.12, 55.35}},
    {1, 2, 3, 1.0, {27.59, 47.57, 105.75}, {26.94, 47.09, 104.85}},
    {1, 2, 3, 1.5, {41.49, 71.66, 159.75}, {40.39, 71.59, 158.55}},
    {1, 3, 1, 0.5, {-0.46, 1.13, 1.44}, {-0.47, 1.14, 1.4}},
    {1, 3, 1, 1.0, {-0.95, 2.13, 2.61}, {-0.96, 2.15, 2.58}},
    {1, 3, 1, 1.5, {-1.47, 3.12, 3.71}, {-1.43, 3.17, 3.81}},
    {1, 3, 2, 0.5, {0.01, 0.11, 0.19}, {0.0, 0.11, 0.19}},
    {1, 3, 2, 1.0, {0.0, 0.11, 0.19}, {0.0, 0.11, 0.19}},
    {1, 3, 2, 1.5, {0.0, 0.11, 0.19}, {0.0, 0.11, 0.19}},
    {1, 3, 3, 0.5, {-1.93, 4.49, 5.41}, {-1.85, 4.56, 5.68}},
    {1, 3, 3, 1.0, {-3.89, 8.66, 10.62}, {-3.78, 8.69, 10.57}},
    {1, 3, 3, 1.5, {-5.62, 13.0, 15.33}, {-5.7, 12.87, 15.52}},
    // Table 2: p(T(f) - theta(f)), f(x) = x - log(x) - 1
    {2, 1, 1, 0.3, {0.18, 0.35, 0.77}, {0.17, 0.35, 0.74}},
    {2, 1, 1, 0.5, {0.34, 0.64, 1.4}, {0.34, 0.63, 1.37}},
    {2, 1, 1, 0.7, {0.6, 1.0, 2.24}, {0.58, 1.01, 2.25}},
    {2, 1, 2, 0.3, {0.18, 0.83, 1.55}, {0.19, 0.79, 1.49}},
    {2, 1, 2, 0.5, {0.36, 1.16, 2.25}, {0.36, 1.11, 2.19}},
    {2, 1, 2, 0.7, {0.59, 1.53, 3.1}, {0.62, 1.51, 3.1}},
    {2, 1, 3, 0.3, {0.18, 0.86, 1.62}, {0.17, 0.86, 1.59}},
    {2, 1, 3, 0.5, {0.35, 1.19, 2.27}, {0.33, 1.19, 2.3}},
    {2, 1, 3, 0.7, {0.55, 1.58, 3.12}, {0.58, 1.56, 3.17}},
    {2, 2, 1, 0.3, {1.0, 0.37, 1.62}, {1.04, 0.37, 1.66}},
    {2, 2, 1, 0.5, {1.74, 0.65, 2.79}, {1.79, 0.66, 2.87}},
    {2, 2, 1, 0.7, {2.56, 1.02, 4.25}, {2.64, 1.04, 4.35}},
    {2, 2, 2, 0.3, {1.04, 1.52, 3.54}, {1.05, 1.51, 3.54}},
    {2, 2, 2, 0.5, {1.74, 2.02, 5.06}, {1.77, 2.01, 5.09}},
    {2, 2, 2, 0.7, {2.54, 2.49, 6.54}, {2.54, 2.46, 6.59}},
    {2, 2, 3, 0.3, {1.02, 1.63, 3.78}, {1.04, 1.6, 3.68}},
    {2, 2, 3, 0.5, {1.78, 2.15, 5.34}, {1.8, 2.11, 5.31}},
    {2, 2, 3, 0.7, {2.57, 2.63, 6.94}, {2.61, 2.59, 6.88}},
    {2, 3, 1, 0.3, {-0.11, 0.34, 0.45}, {-0.11, 0.34, 0.45}},
    {2, 3, 1, 0.5, {-0.13, 0.62, 0.9}, {-0.14, 0.62, 0.88}},
    {2, 3, 1, 0.7, {-0.14, 1.0, 1.49}, {-0.09, 1.01, 1.57}},
    {2, 3, 2, 0.3, {-0.12, 0.36, 0.49}, {-0.04, 0.47, 0.74}},
    {2, 3, 2, 0.5, {-0.14, 0.64, 0.93}, {0.05, 0.85, 1.45}},
    {2, 3, 2, 0.7, {-0.08, 1.01, 1.57}, {0.18, 1.22, 2.19}},
    {2, 3, 3, 0.3, {-0.11, 0.38, 0.52}, {-0.11, 0.38, 0.51}},
    {2, 3, 3, 0.5, {-0.14, 0.65, 0.93}, {-0.14, 0.65, 0.93}},
    {2, 3, 3, 0.7, {-0.07, 1.03, 1.66}, {-0.09, 1.03, 1.6}},
    // Table 3: lambda_1
    {3, 1, 1, 0.5, {2.9, 0.06, 3.0}, {2.93, 0.06, 3.04}},
    {3, 1, 1, 1.0, {3.96, 0.06, 4.07}, {3.99, 0.06, 4.1}},
    {3, 1, 1, 1.5, {4.9, 0.06, 5.01}, {4.93, 0.07, 5.05}},
    {3, 1, 2, 0.5, {0.8, 0.05, 0.89}, {0.8, 0.05, 0.89}},
    {3, 1, 2, 1.0, {0.8, 0.05, 0.89}, {0.8, 0.05, 0.89}},
    {3, 1, 2, 1.5, {0.81, 0.05, 0.9}, {0.81, 0.05, 0.9}},
    {3, 1, 3, 0.5, {5.76, 0.11, 5.95}, {5.81, 0.12, 6.02}},
    {3, 1, 3, 1.0, {7.91, 0.12, 8.12}, {7.98, 0.13, 8.21}},
    {3, 1, 3, 1.5, {9.81, 0.13, 10.03}, {9.87, 0.14, 10.12}},
    {3, 2, 1, 0.5, {2.96, 0.07, 3.08}, {3.03, 0.07, 3.15}},
    {3, 2, 1, 1.0, {4.02, 0.07, 4.14}, {4.09, 0.07, 4.22}},
    {3, 2, 1, 1.5, {4.96, 0.07, 5.08}, {5.04, 0.08, 5.17}},
    {3, 2, 2, 0.5, {0.8, 0.06, 0.89}, {0.8, 0.05, 0.89}},
    {3, 2, 2, 1.0, {0.8, 0.05, 0.89}, {0.8, 0.05, 0.89}},
    {3, 2, 2, 1.5, {0.8, 0.05, 0.9}, {0.81, 0.05, 0.9}},
    {3, 2, 3, 0.5, {5.88, 0.13, 6.11}, {6.03, 0.14, 6.27}},
    {3, 2, 3, 1.0, {8.04, 0.14, 8.26}, {8.2, 0.15, 8.47}},
    {3, 2, 3, 1.5, {9.93, 0.14, 10.16}, {10.1, 0.16, 10.37}},
    {3, 3, 1, 0.5, {2.88, 0.05, 2.97}, {2.89, 0.06, 2.98}},
    {3, 3, 1, 1.0, {3.94, 0.06, 4.04}, {3.95, 0.06, 4.06}},
    {3, 3, 1, 1.5, {4.88, 0.06, 4.99}, {4.89, 0.06, 5.0}},
    {3, 3, 2, 0.5, {0.8, 0.05, 0.89}, {0.8, 0.05, 0.89}},
    {3, 3, 2, 1.0, {0.8, 0.05, 0.89}, {0.8, 0.05, 0.89}},
    {3, 3, 2, 1.5, {0.8, 0.05, 0.9}, {0.8, 0.05, 0.89}},
    {3, 3, 3, 0.5, {5.72, 0.1, 5.9}, {5.74, 0.11, 5.94}},
    {3, 3, 3, 1.0, {7.88, 0.12, 8.08}, {7.9, 0.12, 8.12}},
    {3, 3, 3, 1.5, {9.77, 0.12, 9.99}, {9.79, 0.13, 10.01}},
    // Table 4: lambda_1 - lambda_2
    {4, 1, 1, 0.5, {0.09, 0.05, 0.18}, {0.1, 0.06, 0.2}},
    {4, 1, 1, 1.0, {0.1, 0.05, 0.19}, {0.1, 0.06, 0.21}},
    {4, 1, 1, 1.5, {0.1, 0.06, 0.21}, {0.11, 0.06, 0.22}},
    {4, 1, 2, 0.5, {0.18, 0.07, 0.3}, {0.19, 0.06, 0.29}},
    {4, 1, 2, 1.0, {0.18, 0.07, 0.29}, {0.18, 0.06, 0.29}},
    {4, 1, 2, 1.5, {0.18, 0.07, 0.29}, {0.19, 0.06, 0.3}},
    {4, 1, 3, 0.5, {0.18, 0.1, 0.35}, {0.2, 0.11, 0.4}},
    {4, 1, 3, 1.0, {0.19, 0.1, 0.38}, {0.22, 0.12, 0.44}},
    {4, 1, 3, 1.5, {0.2, 0.11, 0.41}, {0.23, 0.13, 0.47}},
    {4, 2, 1, 0.5, {0.1, 0.05, 0.2}, {0.11, 0.06, 0.22}},
    {4, 2, 1, 1.0, {0.1, 0.05, 0.2}, {0.11, 0.06, 0.23}},
    {4, 2, 1, 1.5, {0.11, 0.06, 0.21}, {0.12, 0.07, 0.24}},
    {4, 2, 2, 0.5, {0.18, 0.07, 0.29}, {0.18, 0.06, 0.29}},
    {4, 2, 2, 1.0, {0.18, 0.07, 0.29}, {0.19, 0.06, 0.29}},
    {4, 2, 2, 1.5, {0.18, 0.07, 0.29}, {0.19, 0.06, 0.3}},
    {4, 2, 3, 0.5, {0.19, 0.1, 0.38}, {0.22, 0.12, 0.44}},
    {4, 2, 3, 1.0, {0.2, 0.11, 0.41}, {0.23, 0.13, 0.48}},
    {4, 2, 3, 1.5, {0.21, 0.11, 0.42}, {0.24, 0.13, 0.49}},
    {4, 3, 1, 0.5, {0.09, 0.05, 0.17}, {0.09, 0.05, 0.19}},
    {4, 3, 1, 1.0, {0.09, 0.05, 0.19}, {0.1, 0.05, 0.2}},
    {4, 3, 1, 1.5, {0.1, 0.06, 0.21}, {0.11, 0.06, 0.21}},
    {4, 3, 2, 0.5, {0.18, 0.07, 0.29}, {0.19, 0.06, 0.3}},
    {4, 3, 2, 1.0, {0.18, 0.07, 0.29}, {0.18, 0.06, 0.29}},
    {4, 3, 2, 1.5, {0.18, 0.07, 0.29}, {0.18, 0.06, 0.29}},
    {4, 3, 3, 0.5, {0.17, 0.09, 0.34}, {0.19, 0.1, 0.38}},
    {4, 3, 3, 1.0, {0.19, 0.1, 0.38}, {0.21, 0.11, 0.42}},
    {4, 3, 3, 1.5, {0.2, 0.11, 0.41}, {0.18, 0.06, 0.29}},
    // Table 5: (width/r_n in %, coverage in %)
    {5, 1, 1, 0.5, {1.98, 94.40, 0}, {0, 0, 0}},
    {5, 1, 1, 1.0, {1.96, 94.30, 0}, {0, 0, 0}},
    {5, 1, 1, 1.5, {1.96, 96.20, 0}, {0, 0, 0}},
    {5, 1, 2, 0.5, {14.44, 93.60, 0}, {0, 0, 0}},
    {5, 1, 2, 1.0, {17.04, 95.20, 0}, {0, 0, 0}},
    {5, 1, 2, 1.5, {18.68, 92.40, 0}, {0, 0, 0}},
    {5, 1, 3, 0.5, {1.98, 92.20, 0}, {0, 0, 0}},
    {5, 1, 3, 1.0, {1.98, 95.20, 0}, {0, 0, 0}},
    {5, 1, 3, 1.5, {1.97, 95.60, 0}, {0, 0, 0}},
    {5, 2, 1, 0.5, {2.07, 95.80, 0}, {0, 0, 0}},
    {5, 2, 1, 1.0, {2.00, 93.20, 0}, {0, 0, 0}},
    {5, 2, 1, 1.5, {1.98, 95.40, 0}, {0, 0, 0}},
    {5, 2, 2, 0.5, {14.60, 95.00, 0}, {0, 0, 0}},
    {5, 2, 2, 1.0, {17.08, 95.60, 0}, {0, 0, 0}},
    {5, 2, 2, 1.5, {18.60, 93.60, 0}, {0, 0, 0}},
    {5, 2, 3, 0.5, {2.06, 94.80, 0}, {0, 0, 0}},
    {5, 2, 3, 1.0, {2.01, 94.60, 0}, {0, 0, 0}},
    {5, 2, 3, 1.5, {1.98, 95.80, 0}, {0, 0, 0}},
    {5, 3, 1, 0.5, {1.97, 95.00, 0}, {0, 0, 0}},
    {5, 3, 1, 1.0, {1.96, 94.70, 0}, {0, 0, 0}},
    {5, 3, 1, 1.5, {1.96, 95.40, 0}, {0, 0, 0}},
    {5, 3, 2, 0.5, {14.43, 95.20, 0}, {0, 0, 0}},
    {5, 3, 2, 1.0, {16.98, 94.80, 0}, {0, 0, 0}},
    {5, 3, 2, 1.5, {18.61, 95.40, 0}, {0, 0, 0}},
    {5, 3, 3, 0.5, {1.98, 95.20, 0}, {0, 0, 0}},
    {5, 3, 3, 1.0, {1.97, 94.00, 0}, {0, 0, 0}},
    {5, 3, 3, 1.5, {1.97, 93.40, 0}, {0, 0, 0}},
};

int law_index(const std::string& law) {
  if (law == "i") return 1;
  if (law == "ii") return 2;
  if (law == "iii") return 3;
  throw std::invalid_argument("unknown law " + law);
}

int setting_index(const std::string& setting) {
  if (setting == "S1") return 1;
  if (setting == "S2") return 2;
  if (setting == "S3") return 3;
  throw std::invalid_argument("unknown setting " + setting);
}

SettingId setting_id(const std::string& setting) {
  switch (setting_index(setting)) {
    case 1: return SettingId::S1;
    case 2: return SettingId::S2;
    default: return SettingId::S3;
  }
}

const PaperRow* find_paper_row(int table, int law, int setting, double ratio) {
  for (const auto& row : kPaperRows)
    if (row.table == table && row.law == law && row.setting == setting &&
        std::abs(row.ratio - ratio) < 1e-9)
      return &row;
  return nullptr;
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double sample_sd(const std::vector<double>& v) {
  const int m = static_cast<int>(v.size());
  if (m < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= m;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / (m - 1));
}

double sample_mean(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  return v.empty() ? 0.0 : mean / v.size();
}

SpectrumModel model_from_eigs(const Eigen::VectorXd& eigs) {
  std::map<double, int> counts;
  for (int i = 0; i < eigs.size(); ++i)
    counts[std::max(0.0, eigs(i))] += 1;
  SpectrumModel h;
  for (const auto& [value, count] : counts)
    h.atoms.push_back({value, static_cast<double>(count) / eigs.size()});
  return h;
}

struct TrialRow {
  std::string law;
  std::string setting;
  double ratio;
  int trial;
  std::string stat;
  std::string kind;
  double value;
  std::uint64_t seed;
};

struct SummaryRow {
  std::string law;
  std::string setting;
  double ratio;
  std::string stat;
  std::vector<double> ground;  // values behind ground_mean/sd/p95
  std::vector<double> boot_mean, boot_sd, boot_p95;
  double paper_ref = std::numeric_limits<double>::quiet_NaN();
};

// Centering parameter for a spectrum at aspect ratio c_n = p/n, either by
// quadrature on the tabulated MP density or by the expanded-dimension Monte
// Carlo recipe.
double theta_for(const ExperimentConfig& cfg, const Eigen::VectorXd& eigs,
                 const ScalarFn& f, int n, int p, const RadialSampler& radial,
                 std::uint64_t seed) {
  if (cfg.theta_method == ExperimentConfig::Theta::quadrature) {
    const MPDistribution dist =
        esd_grid(model_from_eigs(eigs), static_cast<double>(p) / n);
    return centering_parameter(dist, f);
  }
  McOptions mc;
  return centering_parameter_mc(eigs, radial, n, p, f, mc, seed);
}

struct CellSpec {
  std::string law;
  std::string setting;  // covariance label; "S1r" for rank-power cells
  double ratio;
  double rank_target = 0.0;  // r/p gridpoint (RankPower only)
};

StatisticSpec design_statistic(DesignId design) {
  switch (design) {
    case DesignId::Table1:
      return StatisticSpec::lss(ScalarFn::named("square"));
    case DesignId::Table2:
      return StatisticSpec::lss(ScalarFn::named("x_minus_log"));
    case DesignId::Table3:
      return StatisticSpec::largest_eig();
    case DesignId::Table4:
      return StatisticSpec::eigen_gap();
    default:
      return StatisticSpec::lss(ScalarFn::named("square"));
  }
}

bool design_centered(DesignId design) {
  return design == DesignId::Table1 || design == DesignId::Table2 ||
         design == DesignId::Adhoc;
}

int design_table(DesignId design) {
  switch (design) {
    case DesignId::Table1: return 1;
    case DesignId::Table2: return 2;
    case DesignId::Table3: return 3;
    case DesignId::Table4: return 4;
    case DesignId::Table5: return 5;
    default: return 0;
  }
}

// One Tables-1-to-4 style cell: ground trials of the (optionally centered)
// statistic, then bootstrap runs each summarized by (mean, sd, 95th).
void run_statistic_cell(const ExperimentConfig& cfg, const CellSpec& cell,
                        std::uint64_t cell_seed, std::vector<TrialRow>& rows,
                        std::vector<SummaryRow>& summaries) {
  const int p = static_cast<int>(std::lround(cell.ratio * cfg.n));
  const int n = cfg.n;
  const CovarianceSpec spec = make_covariance_setting(setting_id(cell.setting), p);
  const EllipticalLaw law = EllipticalLaw::from_name(cell.law);
  const StatisticSpec stat = design_statistic(cfg.design);
  const bool centered = design_centered(cfg.design);
  const int workers = cfg.workers > 0 ? cfg.workers : default_workers();

  Eigen::VectorXd true_eigs(p);
  for (int j = 0; j < p; ++j) true_eigs(j) = spec.eigenvalues[j];

  double theta_ground = 0.0;
  if (centered) {
    const RadialSampler radial = [&law](int dim, Rng& rng) {
      return sample_xi_squared(law, dim, rng);
    };
    theta_ground = theta_for(cfg, true_eigs, stat.f, n, p, radial,
                             derive_seed(cell_seed, 0xC00000));
  }

  SummaryRow summary;
  summary.law = cell.law;
  summary.setting = cell.setting;
  summary.ratio = cell.ratio;
  summary.stat = stat.label();
  summary.paper_ref = paper_reference(design_table(cfg.design), cell.law,
                                      setting_index(cell.setting), cell.ratio,
                                      stat.label());

  // Ground trials.
  std::vector<double> ground(cfg.trials);
  std::vector<std::uint64_t> ground_seeds(cfg.trials);
  parallel_for(static_cast<std::size_t>(cfg.trials), workers, [&](std::size_t t) {
    const std::uint64_t seed = derive_seed(cell_seed, 2 * t);
    ground_seeds[t] = seed;
    const Dataset ds = sample_dataset(spec, law, n, seed);
    const Eigen::VectorXd eigs = sample_covariance_eigs(ds.values);
    StatisticContext ctx;
    ctx.n = n;
    const double value = evaluate_statistic(stat, eigs, ctx);
    ground[t] = centered ? p * (value - theta_ground) : value;
  });
  for (int t = 0; t < cfg.trials; ++t)
    rows.push_back({cell.law, cell.setting, cell.ratio, t, stat.label(), "ground",
                    ground[t], ground_seeds[t]});
  summary.ground = ground;

  // Bootstrap runs: a fresh dataset each, Algorithm 1 on its estimates.
  const int boot_trials = cfg.resolved_boot_trials();
  struct BootRun {
    double mean, sd, p95;
    std::uint64_t seed;
  };
  std::vector<BootRun> runs(boot_trials);
  parallel_for(static_cast<std::size_t>(boot_trials), workers, [&](std::size_t t) {
    const std::uint64_t seed = derive_seed(cell_seed, 0x400000 + t);
    const Dataset ds = sample_dataset(spec, law, n, seed);
    const EstimatorBundle bundle = compute_estimators(ds.values);
    const SpectrumEstimate quest =
        estimate_population_spectrum(bundle.sample_eigs, n, p, cfg.quest);
    const Eigen::VectorXd tilde =
        eigenvalue_cap(quest.eigenvalues, bundle.b_hat);
    BootstrapConfig bc;
    bc.B = cfg.B;
    bc.n = n;
    bc.p = p;
    bc.varsigma_sq_hat = bundle.varsigma_sq_hat;
    bc.spectrum_tilde = tilde;
    bc.master_seed = derive_seed(cell_seed, 0x800000 + t);
    bc.statistic = stat;
    bc.workers = 1;  // outer loop owns the parallelism
    const Eigen::VectorXd draws = bootstrap_distribution(bc).column();
    std::vector<double> values(draws.data(), draws.data() + draws.size());
    if (centered) {
      const double vs = bundle.varsigma_sq_hat;
      const RadialSampler radial = [p, vs](int dim, Rng& rng) {
        const double var = vs * dim / p;
        if (var <= 0.0) return static_cast<double>(dim);
        std::gamma_distribution<double> g(dim * static_cast<double>(dim) / var,
                                          var / dim);
        return g(rng);
      };
      const double theta_tilde = theta_for(cfg, tilde, stat.f, n, p, radial,
                                           derive_seed(cell_seed, 0xD00000 + t));
      for (double& v : values) v = p * (v - theta_tilde);
    }
    Eigen::Map<const Eigen::VectorXd> mapped(values.data(), values.size());
    runs[t] = {sample_mean(values), sample_sd(values),
               empirical_quantile(mapped, 0.95), seed};
  });
  for (int t = 0; t < boot_trials; ++t) {
    rows.push_back({cell.law, cell.setting, cell.ratio, t, stat.label(),
                    "boot_mean", runs[t].mean, runs[t].seed});
    rows.push_back({cell.law, cell.setting, cell.ratio, t, stat.label(),
                    "boot_sd", runs[t].sd, runs[t].seed});
    rows.push_back({cell.law, cell.setting, cell.ratio, t, stat.label(),
                    "boot_p95", runs[t].p95, runs[t].seed});
    summary.boot_mean.push_back(runs[t].mean);
    summary.boot_sd.push_back(runs[t].sd);
    summary.boot_p95.push_back(runs[t].p95);
  }
  summaries.push_back(std::move(summary));
}

// Table-5 style cell: confidence-interval width and coverage over trials.
void run_ci_cell(const ExperimentConfig& cfg, const CellSpec& cell,
                 std::uint64_t cell_seed, std::vector<TrialRow>& rows,
                 std::vector<SummaryRow>& summaries) {
  const int p = static_cast<int>(std::lround(cell.ratio * cfg.n));
  const int n = cfg.n;
  const CovarianceSpec spec = make_covariance_setting(setting_id(cell.setting), p);
  const EllipticalLaw law = EllipticalLaw::from_name(cell.law);
  const double r_n = spec.trace() * spec.trace() / spec.trace_sq();
  const int workers = cfg.workers > 0 ? cfg.workers : default_workers();

  struct Trial {
    double width_pct;
    double covered;
    std::uint64_t seed;
  };
  std::vector<Trial> trials(cfg.trials);
  parallel_for(static_cast<std::size_t>(cfg.trials), workers, [&](std::size_t t) {
    const std::uint64_t seed = derive_seed(cell_seed, 2 * t);
    const Dataset ds = sample_dataset(spec, law, n, seed);
    InferenceOptions opts;
    opts.quest = cfg.quest;
    opts.workers = 1;
    opts.bootstrap_seed = derive_seed(cell_seed, 0x800000 + t);
    const RankInferenceResult res = stable_rank_ci(ds, cfg.B, cfg.alpha, opts);
    const auto [lo, hi] = *res.interval;
    trials[t] = {(hi - lo) / r_n * 100.0,
                 (lo <= r_n && r_n <= hi) ? 1.0 : 0.0, seed};
  });

  SummaryRow width, coverage;
  width.law = coverage.law = cell.law;
  width.setting = coverage.setting = cell.setting;
  width.ratio = coverage.ratio = cell.ratio;
  width.stat = "ci_width_pct";
  coverage.stat = "ci_coverage";
  width.paper_ref = paper_reference(5, cell.law, setting_index(cell.setting),
                                    cell.ratio, "ci_width_pct");
  coverage.paper_ref = paper_reference(5, cell.law, setting_index(cell.setting),
                                       cell.ratio, "ci_coverage");
  for (int t = 0; t < cfg.trials; ++t) {
    rows.push_back({cell.law, cell.setting, cell.ratio, t, "stable_rank_ci",
                    "width_pct", trials[t].width_pct, trials[t].seed});
    rows.push_back({cell.law, cell.setting, cell.ratio, t, "stable_rank_ci",
                    "covered", trials[t].covered, trials[t].seed});
    width.ground.push_back(trials[t].width_pct);
    coverage.ground.push_back(trials[t].covered * 100.0);
  }
  summaries.push_back(std::move(width));
  summaries.push_back(std::move(coverage));
}

// Rank-power cell: rejection rate of the rank test at one r/p gridpoint of
// the rescaled-S1 design.
void run_rank_cell(const ExperimentConfig& cfg, const CellSpec& cell,
                   std::uint64_t cell_seed, std::vector<TrialRow>& rows,
                   std::vector<SummaryRow>& summaries) {
  const int p = static_cast<int>(std::lround(cell.ratio * cfg.n));
  const int n = cfg.n;
  const double s = solve_rescaled_s1_scale(cell.rank_target, p);
  const CovarianceSpec spec = make_rescaled_s1(s, p);
  const EllipticalLaw law = EllipticalLaw::from_name(cell.law);
  const int workers = cfg.workers > 0 ? cfg.workers : default_workers();

  std::vector<double> rejects(cfg.trials);
  std::vector<std::uint64_t> seeds(cfg.trials);
  parallel_for(static_cast<std::size_t>(cfg.trials), workers, [&](std::size_t t) {
    const std::uint64_t seed = derive_seed(cell_seed, 2 * t);
    seeds[t] = seed;
    const Dataset ds = sample_dataset(spec, law, n, seed);
    InferenceOptions opts;
    opts.quest = cfg.quest;
    opts.workers = 1;
    opts.bootstrap_seed = derive_seed(cell_seed, 0x800000 + t);
    const RankInferenceResult res =
        stable_rank_test(ds, cfg.epsilon0, cfg.alpha, cfg.B, opts);
    rejects[t] = *res.reject ? 1.0 : 0.0;
  });

  const std::string stat = "rank_test_" + fmt6(cell.rank_target);
  SummaryRow summary;
  summary.law = cell.law;
  summary.setting = cell.setting;
  summary.ratio = cell.ratio;
  summary.stat = stat;
  for (int t = 0; t < cfg.trials; ++t) {
    rows.push_back({cell.law, cell.setting, cell.ratio, t, stat, "reject",
                    rejects[t], seeds[t]});
    summary.ground.push_back(rejects[t] * 100.0);
  }
  summaries.push_back(std::move(summary));
}

void write_trial_csv(const std::string& path, const std::vector<TrialRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "law,setting,ratio,trial,stat,kind,value,seed\n";
  for (const auto& r : rows)
    out << r.law << ',' << r.setting << ',' << fmt6(r.ratio) << ',' << r.trial
        << ',' << r.stat << ',' << r.kind << ',' << fmt6(r.value) << ','
        << r.seed << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

void write_summary_csv(const std::string& path,
                       const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "law,setting,ratio,stat,ground_mean,ground_sd,ground_p95,"
         "boot_mean_mean,boot_mean_sd,boot_sd_mean,boot_sd_sd,"
         "boot_p95_mean,boot_p95_sd,paper_ref_value\n";
  for (const auto& r : rows) {
    out << r.law << ',' << r.setting << ',' << fmt6(r.ratio) << ',' << r.stat
        << ',';
    if (!r.ground.empty()) {
      Eigen::Map<const Eigen::VectorXd> g(r.ground.data(), r.ground.size());
      out << fmt6(sample_mean(r.ground)) << ',' << fmt6(sample_sd(r.ground))
          << ',' << fmt6(empirical_quantile(g, 0.95));
    } else {
      out << ",,";
    }
    auto pair = [&](const std::vector<double>& v) {
      if (v.empty())
        out << ",,";
      else
        out << ',' << fmt6(sample_mean(v)) << ',' << fmt6(sample_sd(v));
    };
    pair(r.boot_mean);
    pair(r.boot_sd);
    pair(r.boot_p95);
    out << ',';
    if (std::isfinite(r.paper_ref)) out << fmt6(r.paper_ref);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

std::string design_name(DesignId id) {
  switch (id) {
    case DesignId::Table1: return "table1";
    case DesignId::Table2: return "table2";
    case DesignId::Table3: return "table3";
    case DesignId::Table4: return "table4";
    case DesignId::Table5: return "table5";
    case DesignId::RankPower: return "rank_power";
    case DesignId::Adhoc: return "adhoc";
  }
  return "adhoc";
}

DesignId design_from_name(const std::string& name) {
  if (name == "table1") return DesignId::Table1;
  if (name == "table2") return DesignId::Table2;
  if (name == "table3") return DesignId::Table3;
  if (name == "table4") return DesignId::Table4;
  if (name == "table5") return DesignId::Table5;
  if (name == "rank_power") return DesignId::RankPower;
  if (name == "adhoc") return DesignId::Adhoc;
  throw std::invalid_argument("unknown design " + name);
}

int ExperimentConfig::resolved_boot_trials() const {
  if (boot_trials >= 0) return boot_trials;
  return std::max(1, trials / 10);
}

void ExperimentConfig::validate() const {
  if (n < 2) throw std::invalid_argument("n must be >= 2");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (B < 1) throw std::invalid_argument("B must be >= 1");
  if (ratios.empty()) throw std::invalid_argument("empty ratio grid");
  for (double r : ratios)
    if (!(r > 0.0)) throw std::invalid_argument("ratios must be > 0");
  if (laws.empty() || settings.empty())
    throw std::invalid_argument("empty law or setting grid");
  for (const auto& l : laws) law_index(l);
  for (const auto& s : settings) setting_index(s);
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must be in (0,1)");
  if (!(epsilon0 > 0.0 && epsilon0 < 1.0))
    throw std::invalid_argument("epsilon0 must be in (0,1)");
  if (design == DesignId::RankPower && rank_grid.empty())
    throw std::invalid_argument("empty rank grid");
}

std::string ExperimentConfig::to_json() const {
  nlohmann::json doc;
  doc["design"] = design_name(design);
  doc["n"] = n;
  doc["ratios"] = ratios;
  doc["laws"] = laws;
  doc["settings"] = settings;
  doc["trials"] = trials;
  doc["boot_trials"] = boot_trials;
  doc["B"] = B;
  doc["master_seed"] = master_seed;
  doc["output_dir"] = output_dir;
  doc["theta_method"] = theta_method == Theta::quadrature ? "quadrature" : "mc";
  doc["rank_grid"] = rank_grid;
  doc["epsilon0"] = epsilon0;
  doc["alpha"] = alpha;
  doc["workers"] = workers;
  doc["quest"] = {{"k", quest.k},
                  {"max_iters", quest.max_iters},
                  {"tol", quest.tol},
                  {"grid_points", quest.grid_points}};
  return doc.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  ExperimentConfig cfg;
  if (doc.contains("design")) cfg.design = design_from_name(doc["design"]);
  if (doc.contains("n")) cfg.n = doc["n"];
  if (doc.contains("ratios")) cfg.ratios = doc["ratios"].get<std::vector<double>>();
  if (doc.contains("laws")) cfg.laws = doc["laws"].get<std::vector<std::string>>();
  if (doc.contains("settings"))
    cfg.settings = doc["settings"].get<std::vector<std::string>>();
  if (doc.contains("trials")) cfg.trials = doc["trials"];
  if (doc.contains("boot_trials")) cfg.boot_trials = doc["boot_trials"];
  if (doc.contains("B")) cfg.B = doc["B"];
  if (doc.contains("master_seed")) cfg.master_seed = doc["master_seed"];
  if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"];
  if (doc.contains("theta_method"))
    cfg.theta_method =
        doc["theta_method"] == "mc" ? Theta::mc : Theta::quadrature;
  if (doc.contains("rank_grid"))
    cfg.rank_grid = doc["rank_grid"].get<std::vector<double>>();
  if (doc.contains("epsilon0")) cfg.epsilon0 = doc["epsilon0"];
  if (doc.contains("alpha")) cfg.alpha = doc["alpha"];
  if (doc.contains("workers")) cfg.workers = doc["workers"];
  if (doc.contains("quest")) {
    const auto& q = doc["quest"];
    if (q.contains("k")) cfg.quest.k = q["k"];
    if (q.contains("max_iters")) cfg.quest.max_iters = q["max_iters"];
    if (q.contains("tol")) cfg.quest.tol = q["tol"];
    if (q.contains("grid_points")) cfg.quest.grid_points = q["grid_points"];
  }
  return cfg;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);
  {  // fail before any computation if the directory is unusable
    const fs::path probe = fs::path(config.output_dir) / ".write_probe";
    std::ofstream test(probe);
    if (!test) throw std::runtime_error("output_dir not writable: " +
                                        config.output_dir);
    test.close();
    fs::remove(probe);
  }

  std::vector<CellSpec> cells;
  for (const auto& law : config.laws)
    for (const auto& setting : config.settings)
      for (double ratio : config.ratios) {
        if (config.design == DesignId::RankPower) {
          for (double target : config.rank_grid)
            cells.push_back({law, "S1r", ratio, target});
        } else {
          cells.push_back({law, setting, ratio, 0.0});
        }
      }

  std::vector<TrialRow> rows;
  std::vector<SummaryRow> summaries;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const std::uint64_t cell_seed = derive_seed(config.master_seed, 1000 + ci);
    switch (config.design) {
      case DesignId::Table5:
        run_ci_cell(config, cells[ci], cell_seed, rows, summaries);
        break;
      case DesignId::RankPower:
        run_rank_cell(config, cells[ci], cell_seed, rows, summaries);
        break;
      default:
        run_statistic_cell(config, cells[ci], cell_seed, rows, summaries);
        break;
    }
  }

  ExperimentResult result;
  const fs::path dir(config.output_dir);
  result.per_trial_csv = (dir / "per_trial.csv").string();
  result.summary_csv = (dir / "summary.csv").string();
  result.manifest_path = (dir / "manifest.json").string();
  write_trial_csv(result.per_trial_csv, rows);
  write_summary_csv(result.summary_csv, summaries);

  nlohmann::json manifest;
  manifest["config"] = nlohmann::json::parse(config.to_json());
  manifest["version"] = kVersion;
  manifest["files"] = {{"per_trial", "per_trial.csv"},
                       {"summary", "summary.csv"}};
  std::ofstream mf(result.manifest_path);
  mf << manifest.dump(2) << '\n';
  if (!mf) throw std::runtime_error("write failed for " + result.manifest_path);
  return result;
}

ExperimentResult reproduce_table(int table_id, double scale,
                                 const std::string& output_dir,
                                 std::uint64_t master_seed, int workers) {
  if (table_id < 1 || table_id > 5)
    throw std::invalid_argument("table_id must be in 1..5");
  if (!(scale > 0.0 && scale <= 1.0))
    throw std::invalid_argument("scale must be in (0,1]");
  ExperimentConfig cfg;
  cfg.design = static_cast<DesignId>(table_id - 1);
  cfg.laws = {"i", "ii", "iii"};
  cfg.settings = {"S1", "S2", "S3"};
  cfg.ratios = table_id == 2 ? std::vector<double>{0.3, 0.5, 0.7}
                             : std::vector<double>{0.5, 1.0, 1.5};
  if (table_id == 5) {
    cfg.trials = std::max(1, static_cast<int>(std::lround(scale * 500)));
    cfg.boot_trials = 0;
  } else {
    cfg.trials = std::max(1, static_cast<int>(std::lround(scale * 5000)));
    cfg.boot_trials = std::max(1, static_cast<int>(std::lround(scale * 500)));
  }
  cfg.B = 250;
  cfg.master_seed = master_seed;
  cfg.output_dir = output_dir;
  cfg.workers = workers;
  return run_experiment(cfg);
}

double paper_reference(int table_id, const std::string& law, int setting,
                       double ratio, const std::string& stat) {
  const PaperRow* row = find_paper_row(table_id, law_index(law), setting, ratio);
  if (!row) return std::numeric_limits<double>::quiet_NaN();
  if (table_id == 5) {
    if (stat == "ci_width_pct") return row->g[0];
    if (stat == "ci_coverage") return row->g[1];
    return std::numeric_limits<double>::quiet_NaN();
  }
  // Headline number: sd of the centered LSS for tables 1-2, mean otherwise.
  return (table_id == 1 || table_id == 2) ? row->g[1] : row->g[0];
}

}  // namespace specboot
