// Python bindings for the main operations: dataset simulation, estimators,
// the MP solver, QuEST, the bootstrap, and stable-rank inference.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "specboot/bootstrap.hpp"
#include "specboot/estimators.hpp"
#include "specboot/experiment.hpp"
#include "specboot/inference.hpp"
#include "specboot/quest.hpp"

namespace py = pybind11;
using namespace specboot;

namespace {

CovarianceSpec setting_spec(const std::string& setting, int p) {
  SettingId id = setting == "S2"   ? SettingId::S2
                 : setting == "S3" ? SettingId::S3
                                   : SettingId::S1;
  return make_covariance_setting(id, p);
}

}  // namespace

PYBIND11_MODULE(_specboot, m) {
  m.doc() = "bootstrap inference for spectral statistics of elliptical data";

  m.def(
      "sample_dataset",
      [](const std::string& setting, int p, const std::string& law, int n,
         std::uint64_t seed) {
        const Dataset ds = sample_dataset(setting_spec(setting, p),
                                          EllipticalLaw::from_name(law), n, seed);
        return ds.values;
      },
      py::arg("setting"), py::arg("p"), py::arg("law"), py::arg("n"),
      py::arg("seed") = 0, "n x p elliptical sample for a named setting/law");

  m.def("sample_covariance_eigs", &sample_covariance_eigs, py::arg("x"),
        "descending eigenvalues of (1/n) X^T X");

  m.def(
      "estimators",
      [](const Eigen::MatrixXd& x) {
        const EstimatorBundle b = compute_estimators(x);
        py::dict out;
        out["alpha_hat"] = b.alpha_hat;
        out["beta_hat"] = b.beta_hat;
        out["gamma_hat"] = b.gamma_hat;
        out["varsigma_sq_hat"] = b.varsigma_sq_hat;
        out["b_hat"] = b.b_hat;
        out["r_hat"] = b.r_hat;
        out["sample_eigs"] = b.sample_eigs;
        return out;
      },
      py::arg("x"), "plug-in estimators from one dataset");

  m.def(
      "mp_density",
      [](const std::vector<double>& values, const std::vector<double>& weights,
         double c) {
        SpectrumModel h;
        for (std::size_t i = 0; i < values.size(); ++i)
          h.atoms.push_back({values[i], weights[i]});
        h.validate();
        const MPDistribution dist = esd_grid(h, c);
        return py::make_tuple(dist.x, dist.density, dist.zero_atom);
      },
      py::arg("values"), py::arg("weights"), py::arg("c"),
      "grid, density, and zero atom of the limiting spectral distribution");

  m.def(
      "estimate_population_spectrum",
      [](const Eigen::VectorXd& sample_eigs, int n, int p) {
        const SpectrumEstimate est =
            estimate_population_spectrum(sample_eigs, n, p);
        return py::make_tuple(est.eigenvalues, est.objective_value,
                              est.converged);
      },
      py::arg("sample_eigs"), py::arg("n"), py::arg("p"),
      "population eigenvalue estimates (QuEST-style inversion)");

  m.def(
      "bootstrap_draws",
      [](int n, int p, double varsigma_sq_hat,
         const Eigen::VectorXd& spectrum_tilde, int B, std::uint64_t seed,
         const std::string& statistic, const std::string& f) {
        BootstrapConfig cfg;
        cfg.B = B;
        cfg.n = n;
        cfg.p = p;
        cfg.varsigma_sq_hat = varsigma_sq_hat;
        cfg.spectrum_tilde = spectrum_tilde;
        cfg.master_seed = seed;
        if (statistic == "lss")
          cfg.statistic = StatisticSpec::lss(ScalarFn::named(f));
        else if (statistic == "largest_eig")
          cfg.statistic = StatisticSpec::largest_eig();
        else if (statistic == "eigen_gap")
          cfg.statistic = StatisticSpec::eigen_gap();
        else if (statistic == "stable_rank_star")
          cfg.statistic = StatisticSpec::stable_rank_star();
        else
          throw std::invalid_argument("unknown statistic " + statistic);
        return Eigen::VectorXd(bootstrap_distribution(cfg).column());
      },
      py::arg("n"), py::arg("p"), py::arg("varsigma_sq_hat"),
      py::arg("spectrum_tilde"), py::arg("B") = 250, py::arg("seed") = 0,
      py::arg("statistic") = "lss", py::arg("f") = "square",
      "replicates of a spectral statistic from the parametric bootstrap");

  m.def(
      "stable_rank_ci",
      [](const std::string& setting, int p, const std::string& law, int n,
         std::uint64_t seed, int B, double alpha) {
        const Dataset ds = sample_dataset(setting_spec(setting, p),
                                          EllipticalLaw::from_name(law), n, seed);
        InferenceOptions opts;
        opts.bootstrap_seed = derive_seed(seed, 0xB007);
        const RankInferenceResult res = stable_rank_ci(ds, B, alpha, opts);
        return py::make_tuple(res.r_hat, res.interval->first,
                              res.interval->second);
      },
      py::arg("setting"), py::arg("p"), py::arg("law"), py::arg("n"),
      py::arg("seed") = 0, py::arg("B") = 250, py::arg("alpha") = 0.05,
      "(r_hat, lo, hi) for a freshly simulated dataset");
}
