#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "specboot/bootstrap.hpp"
#include "specboot/mp.hpp"
#include "specboot/spectra.hpp"

using namespace specboot;

TEST_CASE("gamma radial parameters") {
  SUBCASE("moment matching") {
    GammaXiParams g = gamma_xi_params(100, 200.0);
    CHECK_FALSE(g.point_mass);
    CHECK(g.shape == doctest::Approx(50.0));
    CHECK(g.scale == doctest::Approx(2.0));
  }
  SUBCASE("zero variance degenerates to the point mass at p") {
    GammaXiParams g = gamma_xi_params(64, 0.0);
    CHECK(g.point_mass);
    Rng rng = make_rng(1, 0);
    for (int i = 0; i < 10; ++i) CHECK(g.sample_xi_sq(rng) == doctest::Approx(64.0));
  }
  SUBCASE("empirical moments over one million draws") {
    GammaXiParams g = gamma_xi_params(100, 200.0);
    Rng rng = make_rng(2, 0);
    const int draws = 1000000;
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < draws; ++i) {
      double v = g.sample_xi_sq(rng);
      mean += v;
      sq += v * v;
    }
    mean /= draws;
    double var = sq / draws - mean * mean;
    CHECK(std::abs(mean - 100.0) < 0.5);
    CHECK(std::abs(var - 200.0) < 0.03 * 200.0);
  }
}

TEST_CASE("statistic evaluation on fixed eigenvalues") {
  SUBCASE("linear spectral statistic with the square kernel") {
    Eigen::VectorXd e(3);
    e << 2.0, 1.0, 1.0;
    CHECK(evaluate_statistic(StatisticSpec::lss(ScalarFn::named("square")), e) ==
          doctest::Approx(2.0));
  }
  SUBCASE("tied top eigenvalues have zero gap") {
    Eigen::VectorXd e(2);
    e << 3.0, 3.0;
    CHECK(evaluate_statistic(StatisticSpec::eigen_gap(), e) == doctest::Approx(0.0));
  }
  SUBCASE("largest eigenvalue") {
    Eigen::VectorXd e(2);
    e << 3.0, 1.0;
    CHECK(evaluate_statistic(StatisticSpec::largest_eig(), e) == doctest::Approx(3.0));
  }
  SUBCASE("stable-rank zero-denominator convention") {
    Eigen::VectorXd zeros = Eigen::VectorXd::Zero(4);
    StatisticContext ctx;
    ctx.n = 8;
    ctx.spectrum_tilde = Eigen::VectorXd::Zero(4);
    CHECK(evaluate_statistic(StatisticSpec::stable_rank_star(), zeros, ctx) ==
          doctest::Approx(0.0));
  }
  SUBCASE("eigengap needs two eigenvalues") {
    Eigen::VectorXd one(1);
    one << 2.0;
    CHECK_THROWS(evaluate_statistic(StatisticSpec::eigen_gap(), one));
  }
}

static BootstrapConfig identity_config(int n, int p, double varsigma_sq) {
  BootstrapConfig c;
  c.n = n;
  c.p = p;
  c.varsigma_sq_hat = varsigma_sq;
  c.spectrum_tilde = Eigen::VectorXd::Ones(p);
  c.master_seed = 42;
  c.workers = 1;
  return c;
}

TEST_CASE("replicate exactness on degenerate inputs") {
  SUBCASE("a zero reference spectrum makes the zero matrix") {
    BootstrapConfig c = identity_config(10, 5, 0.0);
    c.spectrum_tilde = Eigen::VectorXd::Zero(5);
    c.statistic = StatisticSpec::largest_eig();
    CHECK(bootstrap_replicate(c, 0) == doctest::Approx(0.0));
  }
  SUBCASE("point-mass radial on the identity: trace / p is exactly one") {
    BootstrapConfig c = identity_config(30, 12, 0.0);
    c.statistic = StatisticSpec::lss(ScalarFn::named("identity"));
    for (int b = 0; b < 5; ++b)
      CHECK(bootstrap_replicate(c, b) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("scaled identity reproduces the scale exactly") {
    BootstrapConfig c = identity_config(30, 12, 0.0);
    c.spectrum_tilde = Eigen::VectorXd::Constant(12, 3.5);
    c.statistic = StatisticSpec::lss(ScalarFn::named("identity"));
    CHECK(bootstrap_replicate(c, 3) == doctest::Approx(3.5).epsilon(1e-12));
  }
}

TEST_CASE("bootstrap distribution bookkeeping") {
  BootstrapConfig c = identity_config(20, 10, 15.0);
  c.statistic = StatisticSpec::largest_eig();
  SUBCASE("B = 1 equals the single replicate") {
    c.B = 1;
    BootstrapDraws d = bootstrap_distribution(c);
    REQUIRE(d.values.rows() == 1);
    CHECK(d.values(0, 0) == doctest::Approx(bootstrap_replicate(c, 0)));
  }
  SUBCASE("runs are bitwise deterministic") {
    c.B = 25;
    BootstrapDraws a = bootstrap_distribution(c);
    BootstrapDraws b = bootstrap_distribution(c);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.per_replicate_seeds == b.per_replicate_seeds);
  }
  SUBCASE("output is identical for any worker count") {
    c.B = 25;
    c.workers = 1;
    BootstrapDraws one = bootstrap_distribution(c);
    c.workers = 4;
    BootstrapDraws four = bootstrap_distribution(c);
    CHECK((one.values - four.values).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("draw b equals replicate b: no cross-replicate state") {
    c.B = 8;
    BootstrapDraws d = bootstrap_distribution(c);
    for (int b = 0; b < 8; ++b)
      CHECK(d.values(b, 0) == doctest::Approx(bootstrap_replicate(c, b)));
  }
  SUBCASE("multi-statistic evaluation shares the eigendecomposition") {
    c.B = 5;
    std::vector<StatisticSpec> stats = {StatisticSpec::largest_eig(),
                                        StatisticSpec::eigen_gap(),
                                        StatisticSpec::lss(ScalarFn::named("square"))};
    BootstrapDraws d = bootstrap_distribution(c, stats);
    REQUIRE(d.values.cols() == 3);
    CHECK(d.labels[0] == "largest_eig");
    CHECK(d.labels[1] == "eigen_gap");
    for (int b = 0; b < 5; ++b)
      CHECK(d.values(b, 0) == doctest::Approx(bootstrap_replicate(c, b)));
  }
}

TEST_CASE("failed replicates abort with an index unless skipped") {
  BootstrapConfig c = identity_config(6, 3, 0.0);
  c.B = 10;
  c.statistic = StatisticSpec::make_custom(
      [](const Eigen::VectorXd&) -> double {
        throw std::runtime_error("synthetic failure");
      },
      "always_fails");
  CHECK_THROWS_WITH_AS(bootstrap_distribution(c), doctest::Contains("replicate"),
                       std::runtime_error);
  c.skip_failed = true;
  BootstrapDraws d = bootstrap_distribution(c);
  CHECK(d.values.rows() == 0);
}

TEST_CASE("largest bootstrap eigenvalue concentrates at the MP edge") {
  // Identity reference spectrum with chi-squared-matched radial variance at
  // p/n = 0.5: lambda_1 concentrates near (1 + sqrt(0.5))^2 = 2.914.
  BootstrapConfig c = identity_config(400, 200, 400.0);
  c.B = 60;
  c.statistic = StatisticSpec::largest_eig();
  BootstrapDraws d = bootstrap_distribution(c);
  double mean = d.column().mean();
  CHECK(mean > 2.75);
  CHECK(mean < 3.05);
}

TEST_CASE("bootstrap LSS dispersion matches the published scale") {
  // Reference spectrum = population S1 spectrum, radial variance 2p, f = x^2
  // at n = 400, p = 200: the published bootstrap sd of p(T - theta) is 3.27.
  const int n = 400, p = 200;
  CovarianceSpec s1 = make_covariance_setting(SettingId::S1, p);
  BootstrapConfig c;
  c.n = n;
  c.p = p;
  c.varsigma_sq_hat = 2.0 * p;
  c.spectrum_tilde =
      Eigen::Map<const Eigen::VectorXd>(s1.eigenvalues.data(), p);
  c.master_seed = 7;
  c.workers = 1;
  c.B = 250;
  c.statistic = StatisticSpec::lss(ScalarFn::named("square"));
  BootstrapDraws d = bootstrap_distribution(c);
  Eigen::VectorXd v = double(p) * d.column();  // centering cancels in the sd
  double mean = v.mean();
  double sd = std::sqrt((v.array() - mean).square().sum() / (v.size() - 1));
  CHECK(std::abs(sd - 3.27) < 0.15 * 3.27);
}

TEST_CASE("config validation and CSV export") {
  BootstrapConfig c = identity_config(10, 4, 1.0);
  c.statistic = StatisticSpec::largest_eig();
  SUBCASE("invalid configs are rejected") {
    BootstrapConfig bad = c;
    bad.B = 0;
    CHECK_THROWS(bad.validate());
    bad = c;
    bad.spectrum_tilde(0) = -1.0;
    CHECK_THROWS(bad.validate());
    bad = c;
    bad.spectrum_tilde(3) = 10.0;  // not descending
    CHECK_THROWS(bad.validate());
  }
  SUBCASE("CSV has the replicate header and B rows") {
    c.B = 4;
    BootstrapDraws d = bootstrap_distribution(c);
    const std::string path = "/tmp/specboot_test_draws.csv";
    d.write_csv(path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "replicate_index,largest_eig");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 4);
    std::remove(path.c_str());
  }
}
