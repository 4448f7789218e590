// Command-line front end: dataset simulation, the parametric bootstrap,
// stable-rank inference, table reproduction, and MP density tabulation.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "specboot/bootstrap.hpp"
#include "specboot/estimators.hpp"
#include "specboot/experiment.hpp"
#include "specboot/inference.hpp"
#include "specboot/parallel.hpp"
#include "specboot/quest.hpp"

namespace {

using nlohmann::json;
using namespace specboot;

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json doc;
  in >> doc;
  return doc;
}

CovarianceSpec spec_from_config(const json& cfg, int default_p) {
  const int p = cfg.value("p", default_p);
  if (cfg.contains("eigenvalues")) {
    CovarianceSpec spec;
    spec.p = p;
    spec.eigenvalues = cfg["eigenvalues"].get<std::vector<double>>();
    if (cfg.contains("rotation_seed"))
      spec.rotation_seed = cfg["rotation_seed"].get<std::uint64_t>();
    spec.validate();
    return spec;
  }
  const std::string setting = cfg.value("setting", "S1");
  SettingId id = setting == "S2"   ? SettingId::S2
                 : setting == "S3" ? SettingId::S3
                                   : SettingId::S1;
  std::optional<std::uint64_t> rot;
  if (cfg.contains("rotation_seed")) rot = cfg["rotation_seed"].get<std::uint64_t>();
  return make_covariance_setting(id, p, rot);
}

StatisticSpec statistic_from_config(const json& cfg) {
  const json stat = cfg.value("statistic", json::object());
  const std::string kind = stat.value("kind", "lss");
  if (kind == "lss") return StatisticSpec::lss(ScalarFn::named(stat.value("f", "square")));
  if (kind == "largest_eig") return StatisticSpec::largest_eig();
  if (kind == "eigen_gap") return StatisticSpec::eigen_gap();
  if (kind == "stable_rank_star") return StatisticSpec::stable_rank_star();
  throw std::runtime_error("unknown statistic kind " + kind);
}

Dataset dataset_from_config(const json& cfg, std::uint64_t seed) {
  if (cfg.contains("data")) {
    Dataset ds;
    ds.values = read_dataset_binary(cfg["data"], ds.n, ds.p, ds.master_seed);
    return ds;
  }
  const int n = cfg.value("n", 400);
  const CovarianceSpec spec = spec_from_config(cfg, cfg.value("p", 200));
  const EllipticalLaw law = EllipticalLaw::from_name(cfg.value("law", "i"));
  return sample_dataset(spec, law, n, seed);
}

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON configuration file");
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--workers", flags.workers,
                  "worker threads (default: SPECBOOT_WORKERS or hardware)");
  cmd->add_option("--out", flags.out, "output path");
}

int cmd_simulate(const CommonFlags& flags) {
  const json cfg = load_config(flags.config);
  const Dataset ds = dataset_from_config(cfg, flags.seed);
  const std::string out = flags.out.empty() ? "dataset.csv" : flags.out;
  if (out.size() > 4 && out.substr(out.size() - 4) == ".bin")
    write_dataset_binary(ds, out);
  else
    write_dataset_csv(ds, out);
  std::cout << "wrote " << ds.n << "x" << ds.p << " dataset to " << out << "\n";
  return 0;
}

int cmd_bootstrap(const CommonFlags& flags) {
  const json cfg = load_config(flags.config);
  BootstrapConfig bc;
  bc.B = cfg.value("B", 250);
  bc.master_seed = flags.seed;
  bc.workers = flags.workers;
  bc.statistic = statistic_from_config(cfg);
  if (cfg.contains("spectrum_tilde")) {
    const auto tilde = cfg["spectrum_tilde"].get<std::vector<double>>();
    bc.p = static_cast<int>(tilde.size());
    bc.n = cfg.value("n", 400);
    bc.varsigma_sq_hat = cfg.value("varsigma_sq_hat", 0.0);
    bc.spectrum_tilde =
        Eigen::Map<const Eigen::VectorXd>(tilde.data(), tilde.size());
  } else {
    const Dataset ds = dataset_from_config(cfg, derive_seed(flags.seed, 1));
    const EstimatorBundle bundle = compute_estimators(ds.values);
    const SpectrumEstimate quest =
        estimate_population_spectrum(bundle.sample_eigs, ds.n, ds.p, {});
    bc.n = ds.n;
    bc.p = ds.p;
    bc.varsigma_sq_hat = bundle.varsigma_sq_hat;
    bc.spectrum_tilde = eigenvalue_cap(quest.eigenvalues, bundle.b_hat);
  }
  const BootstrapDraws draws = bootstrap_distribution(bc);
  const std::string out = flags.out.empty() ? "draws.csv" : flags.out;
  draws.write_csv(out);
  std::cout << "wrote " << draws.values.rows() << " draws of "
            << bc.statistic.label() << " to " << out << "\n";
  return 0;
}

int cmd_inference(const CommonFlags& flags, const std::string& which) {
  const json cfg = load_config(flags.config);
  const Dataset ds = dataset_from_config(cfg, flags.seed);
  InferenceOptions opts;
  opts.workers = flags.workers;
  opts.bootstrap_seed = derive_seed(flags.seed, 0xB007);
  const int b = cfg.value("B", 250);
  const double alpha = cfg.value("alpha", 0.05);
  RankInferenceResult res;
  if (which == "ci") {
    res = stable_rank_ci(ds, b, alpha, opts);
  } else if (which == "rank") {
    res = stable_rank_test(ds, cfg.value("epsilon0", 0.1), alpha, b, opts);
  } else {
    res = sphericity_test(ds, alpha, b, opts);
  }
  std::cout << res.summary() << "\n";
  if (!flags.out.empty()) {
    std::ofstream out(flags.out);
    out << res.to_json() << "\n";
    if (!out) throw std::runtime_error("write failed for " + flags.out);
  }
  return 0;
}

int cmd_reproduce(const CommonFlags& flags, int table, double scale) {
  const std::string out = flags.out.empty() ? "." : flags.out;
  const ExperimentResult res =
      reproduce_table(table, scale, out, flags.seed, flags.workers);
  std::cout << "summary: " << res.summary_csv << "\n";
  return 0;
}

int cmd_run(const CommonFlags& flags) {
  ExperimentConfig cfg;
  if (!flags.config.empty()) {
    std::ifstream in(flags.config);
    if (!in) throw std::runtime_error("cannot open config " + flags.config);
    std::ostringstream buf;
    buf << in.rdbuf();
    cfg = ExperimentConfig::from_json(buf.str());
  }
  if (flags.seed) cfg.master_seed = flags.seed;
  if (flags.workers) cfg.workers = flags.workers;
  if (!flags.out.empty()) cfg.output_dir = flags.out;
  const ExperimentResult res = run_experiment(cfg);
  std::cout << "summary: " << res.summary_csv << "\n";
  return 0;
}

int cmd_mp_density(const CommonFlags& flags) {
  const json cfg = load_config(flags.config);
  SpectrumModel h;
  if (cfg.contains("atoms")) {
    for (const auto& a : cfg["atoms"])
      h.atoms.push_back({a.at("value"), a.at("weight")});
  } else {
    const CovarianceSpec spec = spec_from_config(cfg, cfg.value("p", 200));
    h = spectral_distribution(spec);
  }
  h.validate();
  const double c = cfg.value("c", 0.5);
  EsdOptions opts;
  if (cfg.contains("grid_points")) opts.grid_points = cfg["grid_points"];
  if (cfg.contains("eta")) opts.eta = cfg["eta"];
  const MPDistribution dist = esd_grid(h, c, opts);
  const std::string out = flags.out.empty() ? "mp_density.csv" : flags.out;
  dist.write_csv(out);
  std::cout << "wrote density (zero atom " << dist.zero_atom << ") to " << out
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bootstrap inference for spectral statistics of elliptical data"};
  app.require_subcommand(1);

  CommonFlags sim_flags, boot_flags, ci_flags, rank_flags, sph_flags,
      rep_flags, run_flags, mp_flags;
  int table = 1;
  double scale = 0.1;

  add_common(app.add_subcommand("simulate", "generate an elliptical dataset"),
             sim_flags);
  add_common(app.add_subcommand("bootstrap", "draw bootstrap replicates"),
             boot_flags);
  add_common(app.add_subcommand("ci", "stable-rank confidence interval"),
             ci_flags);
  add_common(app.add_subcommand("test-rank", "stable-rank threshold test"),
             rank_flags);
  add_common(app.add_subcommand("test-sphericity", "sphericity test"), sph_flags);
  CLI::App* rep = app.add_subcommand("reproduce-table",
                                     "reproduce a published table at scale");
  add_common(rep, rep_flags);
  rep->add_option("--table", table, "table number 1-5")->required();
  rep->add_option("--scale", scale, "fraction of the full trial counts");
  add_common(app.add_subcommand("run", "run an experiment grid from a config"),
             run_flags);
  add_common(app.add_subcommand("mp-density", "tabulate a limiting density"),
             mp_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("simulate")) return cmd_simulate(sim_flags);
    if (app.got_subcommand("bootstrap")) return cmd_bootstrap(boot_flags);
    if (app.got_subcommand("ci")) return cmd_inference(ci_flags, "ci");
    if (app.got_subcommand("test-rank")) return cmd_inference(rank_flags, "rank");
    if (app.got_subcommand("test-sphericity"))
      return cmd_inference(sph_flags, "sphericity");
    if (app.got_subcommand("reproduce-table"))
      return cmd_reproduce(rep_flags, table, scale);
    if (app.got_subcommand("run")) return cmd_run(run_flags);
    if (app.got_subcommand("mp-density")) return cmd_mp_density(mp_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
