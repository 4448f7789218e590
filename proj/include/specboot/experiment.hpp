#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specboot/inference.hpp"

namespace specboot {

enum class DesignId { Table1, Table2, Table3, Table4, Table5, RankPower, Adhoc };

std::string design_name(DesignId id);
DesignId design_from_name(const std::string& name);

struct ExperimentConfig {
  DesignId design = DesignId::Adhoc;
  int n = 400;
  std::vector<double> ratios = {0.5};           // p/n values
  std::vector<std::string> laws = {"i"};        // subset of i, ii, iii
  std::vector<std::string> settings = {"S1"};   // subset of S1, S2, S3
  int trials = 1;          // ground trials (Tables 1-4), CI/test trials otherwise
  int boot_trials = -1;    // bootstrap runs per cell; -1 -> max(1, trials/10)
  int B = 250;
  std::uint64_t master_seed = 0;
  std::string output_dir = ".";
  enum class Theta { quadrature, mc } theta_method = Theta::quadrature;
  std::vector<double> rank_grid = {0.098, 0.1, 0.105};  // r/p targets (RankPower)
  double epsilon0 = 0.1;   // null boundary for the rank test
  double alpha = 0.05;
  int workers = 0;
  QuestOptions quest;

  int resolved_boot_trials() const;
  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& doc);
};

struct ExperimentResult {
  std::string per_trial_csv;
  std::string summary_csv;
  std::string manifest_path;
};

// Runs the configured grid; writes per-trial and summary CSVs plus a JSON
// manifest into output_dir. Deterministic in master_seed for any worker
// count; output rows ordered by (cell, trial).
ExperimentResult run_experiment(const ExperimentConfig& config);

// Reproduces a published table at a fraction of the full trial counts
// (full scale: 5000 ground / 500 bootstrap runs / B = 250; 500 trials for
// the interval table). Published numbers appear as the reference column.
ExperimentResult reproduce_table(int table_id, double scale,
                                 const std::string& output_dir,
                                 std::uint64_t master_seed = 0, int workers = 0);

// Published reference value for a summary row (headline number of that
// table: sd of the centered LSS for tables 1-2, mean for tables 3-4,
// width%% or coverage for table 5). NaN when no reference exists.
double paper_reference(int table_id, const std::string& law, int setting,
                       double ratio, const std::string& stat);

}  // namespace specboot
