#include "specboot/mp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace specboot {

ScalarFn ScalarFn::named(const std::string& label) {
  if (label == "identity") return {"identity", [](double x) { return x; }};
  if (label == "square") return {"square", [](double x) { return x * x; }};
  if (label == "x_minus_log")
    return {"x_minus_log", [](double x) { return x - std::log(x) - 1.0; }};
  if (label == "one") return {"one", [](double) { return 1.0; }};
  throw std::invalid_argument("unknown statistic function: " + label);
}

ScalarFn ScalarFn::custom(std::function<double(double)> fn, const std::string& label) {
  return {label, std::move(fn)};
}

namespace {

using cd = std::complex<double>;

// The solver works on the companion transform v = c m + (c - 1)/z, which
// satisfies the scalar inverse relation z = -1/v + c * int t/(1 + t v) dH(t).
// Unlike m, v stays bounded as z approaches 0 when the limit has a zero atom
// (the 1/z blow-up of m lives entirely in the explicit (c-1)/z term), and the
// paper's uniqueness-set condition Im((c-1)/z + c m) > 0 is exactly Im v > 0.

struct InvEval {
  cd value;  // z(v) - z
  cd deriv;  // d/dv of z(v)
};

InvEval companion_residual(const SpectrumModel& H, double c, cd z, cd v) {
  cd zv = -1.0 / v, dz = 1.0 / (v * v);
  for (const auto& a : H.atoms) {
    cd denom = 1.0 + a.value * v;
    zv += c * a.weight * a.value / denom;
    dz -= c * a.weight * a.value * a.value / (denom * denom);
  }
  return {zv - z, dz};
}

// Damped Newton on z(v) = z constrained to the upper half plane.
cd solve_companion(const SpectrumModel& H, double c, cd z, cd v,
                   const SolveOptions& opts, bool* ok, double* final_residual) {
  if (!(std::imag(v) > 0.0) || !std::isfinite(std::abs(v))) v = -1.0 / z;
  double resid = std::abs(companion_residual(H, c, z, v).value);
  for (int it = 0; it < opts.max_iter; ++it) {
    InvEval e = companion_residual(H, c, z, v);
    resid = std::abs(e.value);
    if (resid < opts.tol * std::max(1.0, std::abs(z))) {
      *ok = std::imag(v) > 0.0;
      *final_residual = resid;
      return v;
    }
    if (std::abs(e.deriv) < 1e-300) break;
    cd full = -e.value / e.deriv;
    double step = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      cd trial = v + step * full;
      if (std::imag(trial) > 0.0 && std::isfinite(std::abs(trial))) {
        double tr = std::abs(companion_residual(H, c, z, trial).value);
        if (tr < resid) {
          v = trial;
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  *ok = false;
  *final_residual = resid;
  return v;
}

}  // namespace

cd solve_stieltjes(const SpectrumModel& H, double c, cd z, const SolveOptions& opts,
                   cd warm_start) {
  H.validate();
  if (c <= 0.0) throw std::invalid_argument("c must be positive");
  if (std::imag(z) <= 0.0) throw std::invalid_argument("z must have Im z > 0");

  cd v = std::imag(warm_start) > 0.0 ? c * warm_start + (c - 1.0) / z : cd(0.0, 0.0);
  bool ok = false;
  double resid = 0.0;
  v = solve_companion(H, c, z, v, opts, &ok, &resid);
  if (!ok) {
    // Continuation from high in the upper half plane down to the target.
    double lift = std::max(1.0, 4.0 * H.max_value() * (1.0 + std::sqrt(c)));
    double im_target = std::imag(z);
    cd vv(0.0, 0.0);
    for (double im = lift; ; im = std::max(im_target, im * 0.5)) {
      cd zz(std::real(z), im);
      vv = solve_companion(H, c, zz, vv, opts, &ok, &resid);
      if (!ok || im <= im_target) break;
    }
    v = vv;
  }
  if (!ok)
    throw std::runtime_error("MP solver did not converge (residual " +
                             std::to_string(resid) + ")");
  return (v - (c - 1.0) / z) / c;
}

double psi_zero_atom(const SpectrumModel& H, double c) {
  double h0 = 0.0;
  for (const auto& a : H.atoms)
    if (a.value == 0.0) h0 += a.weight;
  return std::max(h0, 1.0 - 1.0 / c);
}

MPDistribution esd_grid(const SpectrumModel& H, double c, const EsdOptions& opts) {
  H.validate();
  if (c <= 0.0) throw std::invalid_argument("c must be positive");
  const int g = opts.grid_points;
  if (g < 16) throw std::invalid_argument("grid_points too small");

  MPDistribution dist;
  dist.c = c;
  dist.source = H;
  dist.zero_atom = psi_zero_atom(H, c);

  double lam_max = H.max_value();
  double upper = std::pow(1.0 + std::sqrt(c), 2) * lam_max * opts.span_factor;
  if (upper <= 0.0) throw std::invalid_argument("spectrum has zero support");

  dist.x.resize(g);
  dist.density.resize(g);
  double h = upper / (g - 1);
  // The imaginary offset scales with the spectrum so the whole tabulation is
  // exactly scale equivariant (s * H yields the s-dilated grid and density).
  double eta = opts.eta * lam_max;
  dist.eta = eta;

  cd warm(0.0, 0.0);
  for (int i = 0; i < g; ++i) {
    double xi = i * h;
    cd z(xi, eta);
    cd m;
    try {
      m = solve_stieltjes(H, c, z, opts.solver, warm);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("esd_grid failed at x = " + std::to_string(xi) + ": " +
                               e.what());
    }
    warm = m;
    double rho = std::imag(m) / M_PI;
    // Remove the Cauchy bleed of the analytic zero atom so it is not
    // double counted against the analytic mass.
    rho -= dist.zero_atom * eta / (M_PI * (xi * xi + eta * eta));
    dist.x[i] = xi;
    dist.density[i] = rho > 0.0 ? rho : 0.0;
  }

  // Per-cell masses of the continuous part. A plain trapezoid misses
  // O(sqrt(h)) mass in the leading cells when the density carries an
  // integrable x^{-1/2} singularity at the origin (c = 1), so those cells
  // are integrated with midpoint sub-sampling before the continuous part is
  // normalized to total mass 1 - zero_atom.
  std::vector<double> cell_mass(g - 1);
  for (int i = 1; i < g; ++i)
    cell_mass[i - 1] = 0.5 * (dist.density[i - 1] + dist.density[i]) * h;
  const int refine_cells = std::min(64, g - 1);
  const int sub = 32;
  // A sharper offset keeps the Cauchy kernel from pushing O(sqrt(eta)) of
  // the singular head mass below x = 0, and the u = sqrt(x) substitution
  // makes the integrand 2 u rho(u^2) bounded at the origin.
  const double eta_head = 0.01 * eta;
  cd head_warm(0.0, 0.0);
  for (int i = 0; i < refine_cells; ++i) {
    const double ua = std::sqrt(i * h);
    const double ub = std::sqrt((i + 1) * h);
    const double du = (ub - ua) / sub;
    double mass = 0.0;
    for (int k = 0; k < sub; ++k) {
      double u = ua + (k + 0.5) * du;
      double xi = u * u;
      cd m;
      try {
        m = solve_stieltjes(H, c, cd(xi, eta_head), opts.solver, head_warm);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("esd_grid failed at x = " + std::to_string(xi) +
                                 ": " + e.what());
      }
      head_warm = m;
      double rho = std::imag(m) / M_PI -
                   dist.zero_atom * eta_head / (M_PI * (xi * xi + eta_head * eta_head));
      if (rho > 0.0) mass += 2.0 * u * rho * du;
    }
    cell_mass[i] = mass;
  }
  double raw = std::accumulate(cell_mass.begin(), cell_mass.end(), 0.0);
  if (raw > 0.0) {
    double scale = (1.0 - dist.zero_atom) / raw;
    for (double& d : dist.density) d *= scale;
    for (double& cm : cell_mass) cm *= scale;
  }

  dist.cdf.resize(g);
  double acc = dist.zero_atom;
  dist.cdf[0] = acc;
  for (int i = 1; i < g; ++i) {
    acc += cell_mass[i - 1];
    dist.cdf[i] = acc;
  }

  bool in_run = false;
  double run_start = 0.0;
  for (int i = 0; i < g; ++i) {
    bool on = dist.density[i] > opts.density_floor;
    if (on && !in_run) {
      in_run = true;
      run_start = dist.x[i];
    } else if (!on && in_run) {
      in_run = false;
      dist.support_intervals.emplace_back(run_start, dist.x[i - 1]);
    }
  }
  if (in_run) dist.support_intervals.emplace_back(run_start, dist.x.back());
  return dist;
}

double MPDistribution::quantile(double q) const {
  if (q <= 0.0 || q >= 1.0) throw std::invalid_argument("quantile level must be in (0,1)");
  if (q <= zero_atom) return 0.0;
  double total = cdf.back();
  double cont = total - zero_atom;
  if (cont <= 0.0) return 0.0;
  // Renormalize the continuous part to mass 1 - zero_atom.
  double target = zero_atom + (q - zero_atom) * cont / (1.0 - zero_atom);
  auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
  if (it == cdf.end()) return x.back();
  std::size_t i = static_cast<std::size_t>(it - cdf.begin());
  if (i == 0) return x.front();
  double c0 = cdf[i - 1], c1 = cdf[i];
  if (c1 <= c0) return x[i];
  double t = (target - c0) / (c1 - c0);
  return x[i - 1] + t * (x[i] - x[i - 1]);
}

void MPDistribution::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "x,density,cdf\n";
  out.precision(12);
  for (std::size_t i = 0; i < x.size(); ++i)
    out << x[i] << ',' << density[i] << ',' << cdf[i] << '\n';
}

double centering_parameter(const MPDistribution& dist, const ScalarFn& f) {
  double atom_term = 0.0;
  if (dist.zero_atom > 0.0) {
    double f0 = f(0.0);
    if (!std::isfinite(f0))
      throw std::domain_error("statistic function undefined at 0 with a zero atom");
    atom_term = dist.zero_atom * f0;
  }
  const std::size_t g = dist.x.size();
  std::vector<double> integrand(g, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    if (dist.density[i] <= 0.0) continue;
    double fx = f(dist.x[i]);
    // The eta-smoothed tabulation bleeds O(eta) mass outside the support;
    // where f is unbounded (e.g. log terms at x = 0) that bleed contributes
    // nothing in the eta -> 0 limit, and a genuine atom at zero is already
    // handled analytically above.
    if (!std::isfinite(fx)) continue;
    integrand[i] = fx * dist.density[i];
  }
  double h = dist.x[1] - dist.x[0];
  double s = 0.0;
  for (std::size_t i = 1; i < g; ++i) s += 0.5 * (integrand[i - 1] + integrand[i]) * h;
  return atom_term + s;
}

std::pair<double, double> centering_moments(const SpectrumModel& H, int n, int p) {
  H.validate();
  if (n < 1 || p < 1) throw std::invalid_argument("n, p must be >= 1");
  double m1 = H.moment(1);
  double m2 = H.moment(2);
  double cn = static_cast<double>(p) / n;
  return {m1, m2 + cn * m1 * m1};
}

double centering_parameter_mc(const Eigen::VectorXd& eigenvalues_p,
                              const RadialSampler& radial, int n, int p,
                              const ScalarFn& f, const McOptions& opts,
                              std::uint64_t seed) {
  if (opts.reps < 1 || opts.expansion < 1)
    throw std::invalid_argument("reps and expansion must be >= 1");
  if (static_cast<int>(eigenvalues_p.size()) != p)
    throw std::invalid_argument("eigenvalue count must equal p");
  const int e = opts.expansion;
  const int dim = e * p;
  const int m = e * n;
  if (dim > opts.dim_cap)
    throw std::invalid_argument("expansion * p exceeds the configured cap");

  if (dim > m && !std::isfinite(f(0.0)))
    throw std::domain_error("statistic function undefined at 0 with dim > n * expansion");

  Eigen::VectorXd sqrt_lam(dim);
  for (int j = 0; j < dim; ++j) sqrt_lam(j) = std::sqrt(eigenvalues_p(j % p));

  double total = 0.0;
  for (int rep = 0; rep < opts.reps; ++rep) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(rep));
    Eigen::MatrixXd rows(m, dim);
    for (int i = 0; i < m; ++i) {
      double xi_sq = radial(dim, rng);
      Eigen::VectorXd u = sample_unit_sphere(dim, rng);
      rows.row(i) = (std::sqrt(xi_sq) * u.cwiseProduct(sqrt_lam)).transpose();
    }
    Eigen::VectorXd eigs(dim);
    if (dim <= m) {
      Eigen::MatrixXd s = (rows.transpose() * rows) / m;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
      eigs = es.eigenvalues();
    } else {
      Eigen::MatrixXd gram = (rows * rows.transpose()) / m;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
      eigs.setZero();
      eigs.tail(m) = es.eigenvalues();
    }
    double acc = 0.0;
    for (int j = 0; j < dim; ++j) acc += f(std::max(0.0, eigs(j)));
    total += acc / dim;
  }
  return total / opts.reps;
}

double centering_parameter_mc(const Eigen::VectorXd& eigenvalues_p,
                              const EllipticalLaw& law, int n, int p,
                              const ScalarFn& f, const McOptions& opts,
                              std::uint64_t seed) {
  RadialSampler radial = [&law](int dim, Rng& rng) {
    return sample_xi_squared(law, dim, rng);
  };
  return centering_parameter_mc(eigenvalues_p, radial, n, p, f, opts, seed);
}

}  // namespace specboot
