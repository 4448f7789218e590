#include "specboot/quest.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace specboot {
namespace {

using cd = std::complex<double>;

SpectrumModel model_from_support(const Eigen::VectorXd& t) {
  SpectrumModel h;
  const int k = static_cast<int>(t.size());
  h.atoms.reserve(k);
  for (int i = 0; i < k; ++i) h.atoms.push_back({std::max(0.0, t(i)), 1.0 / k});
  return h;
}

struct ForwardEval {
  Eigen::VectorXd F;   // model spectral CDF at the observed eigenvalues
  Eigen::MatrixXd dF;  // p x K Jacobian dF_j / dt_k (only when want_grad)
};

// Tabulates Psi(H(t), c) on a midpoint grid and evaluates its CDF at the
// observed eigenvalues e (descending). Matching CDF values instead of
// quantiles keeps the Jacobian bounded: quantile sensitivities carry a
// 1/density factor that explodes in thin-density regions, whereas the CDF
// Jacobian is an integral of the density sensitivity. Gradients come from
// implicit differentiation of the MP equation: with W = 1 - c - c z m and
// d_k = t_k W - z,
//   dm/dt_k = -(w_k W) / (d_k^2 (1 - D)),  D = sum_i w_i t_i c z / d_i^2,
// so d(density)/dt_k = Im(dm/dt_k)/pi, accumulated into d(CDF)/dt_k.
ForwardEval forward_eval(const Eigen::VectorXd& t, double c,
                         const Eigen::VectorXd& e, int grid_points, double eta,
                         bool want_grad, double hi) {
  const int k = static_cast<int>(t.size());
  const int p = static_cast<int>(e.size());
  const double w = 1.0 / k;
  ForwardEval out;
  out.F = Eigen::VectorXd::Zero(p);
  if (want_grad) out.dF = Eigen::MatrixXd::Zero(p, k);

  const double tmax = t.maxCoeff();
  if (tmax <= 0.0) {  // all mass at zero: CDF is 1 at every positive point
    for (int j = 0; j < p; ++j) out.F(j) = 1.0;
    return out;
  }

  SpectrumModel h = model_from_support(t);
  double zero_mass = 0.0;
  for (const auto& a : h.atoms)
    if (a.value == 0.0) zero_mass += a.weight;
  const double zero_atom = std::max(zero_mass, c > 1.0 ? 1.0 - 1.0 / c : 0.0);

  const int g = std::max(grid_points, 16);
  const double step = hi / g;
  // The offset must be comparable to the cell width or point masses fall
  // between midpoints, but not much larger: the fat Cauchy tails of a big
  // offset bleed bulk mass past the support edge and drown out small
  // top-edge clusters.
  eta = std::max(eta, 0.25 * step);

  Eigen::VectorXd x(g), rho(g), cum(g);
  Eigen::MatrixXd drho, dcum;
  if (want_grad) {
    drho = Eigen::MatrixXd::Zero(g, k);
    dcum = Eigen::MatrixXd::Zero(g, k);
  }

  SolveOptions solver;
  cd warm(0.0, 0.0);
  for (int i = 0; i < g; ++i) {
    const double xi = (i + 0.5) * step;
    x(i) = xi;
    const cd z(xi, eta);
    const cd m = solve_stieltjes(h, c, z, solver, warm);
    warm = m;
    const double bleed = zero_atom * eta / (M_PI * (xi * xi + eta * eta));
    const double r = std::imag(m) / M_PI - bleed;
    rho(i) = std::max(0.0, r);
    if (want_grad && rho(i) > 0.0) {
      const cd bigw = 1.0 - c - c * z * m;
      cd d_sum = 0.0;
      for (int j = 0; j < k; ++j) {
        const cd den = t(j) * bigw - z;
        d_sum += w * t(j) * c * z / (den * den);
      }
      const cd scale = -bigw / (1.0 - d_sum);
      for (int j = 0; j < k; ++j) {
        const cd den = t(j) * bigw - z;
        drho(i, j) = std::imag(w * scale / (den * den)) / M_PI;
      }
    }
  }

  // Cumulative mass at the grid nodes (midpoint rule per cell).
  double acc = zero_atom;
  for (int i = 0; i < g; ++i) {
    cum(i) = acc + 0.5 * rho(i) * step;
    acc += rho(i) * step;
  }
  if (want_grad) {
    Eigen::VectorXd gacc = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < g; ++i) {
      dcum.row(i) = gacc.transpose() + 0.5 * step * drho.row(i);
      gacc += step * drho.row(i).transpose();
    }
  }
  // Piecewise-linear CDF through the left anchor (0, zero_atom) and the
  // midpoint nodes; constant beyond the last node.
  for (int j = 0; j < p; ++j) {
    const double xq = e(j);
    if (xq <= x(0)) {
      const double frac = x(0) > 0.0 ? std::max(0.0, xq) / x(0) : 1.0;
      out.F(j) = zero_atom + frac * (cum(0) - zero_atom);
      if (want_grad) out.dF.row(j) = frac * dcum.row(0);
    } else if (xq >= x(g - 1)) {
      out.F(j) = cum(g - 1);
      if (want_grad) out.dF.row(j) = dcum.row(g - 1);
    } else {
      const int lo = std::clamp(static_cast<int>(xq / step - 0.5), 0, g - 2);
      const double frac = std::clamp((xq - x(lo)) / step, 0.0, 1.0);
      out.F(j) = cum(lo) + frac * (cum(lo + 1) - cum(lo));
      if (want_grad)
        out.dF.row(j) = dcum.row(lo) + frac * (dcum.row(lo + 1) - dcum.row(lo));
    }
  }
  return out;
}

Eigen::VectorXd project_support(Eigen::VectorXd t) {
  for (int i = 0; i < t.size(); ++i) t(i) = std::max(0.0, t(i));
  std::sort(t.data(), t.data() + t.size());
  return t;
}

}  // namespace

Eigen::VectorXd forward_sample_spectrum(const SpectrumModel& candidate, double c,
                                        int p, const EsdOptions& opts) {
  candidate.validate();
  if (p <= 0 || !(c > 0.0)) throw std::invalid_argument("need p > 0 and c > 0");
  if (candidate.max_value() == 0.0) return Eigen::VectorXd::Zero(p);
  const MPDistribution dist = esd_grid(candidate, c, opts);
  Eigen::VectorXd q(p);
  for (int j = 0; j < p; ++j) q(j) = dist.quantile((p - j - 0.5) / p);
  return q;
}

SpectrumEstimate estimate_population_spectrum(const Eigen::VectorXd& sample_eigs,
                                              int n, int p,
                                              const QuestOptions& opts) {
  if (n <= 0 || p <= 0) throw std::invalid_argument("need n > 0 and p > 0");
  if (static_cast<int>(sample_eigs.size()) != p)
    throw std::invalid_argument("expected p sample eigenvalues");
  for (int i = 0; i < p; ++i) {
    if (!std::isfinite(sample_eigs(i)) || sample_eigs(i) < -1e-10)
      throw std::invalid_argument("sample eigenvalues must be finite and >= 0");
    if (i > 0 && sample_eigs(i) > sample_eigs(i - 1) + 1e-9)
      throw std::invalid_argument("sample eigenvalues must be sorted descending");
  }

  SpectrumEstimate out;
  out.eigenvalues = Eigen::VectorXd::Zero(p);
  const double scale = sample_eigs.mean();
  if (scale <= 0.0) {  // degenerate data: estimate is the zero spectrum
    out.converged = true;
    return out;
  }

  const double c = static_cast<double>(p) / n;
  Eigen::VectorXd e = (sample_eigs / scale).cwiseMax(0.0);  // descending
  // Snap the normalized eigenvalues to a 2^-36 grid: dividing by the mean is
  // not exact in floating point, and the optimizer's line-search branches
  // would amplify the last-ulp difference between eigs/mean(eigs) and
  // (s*eigs)/mean(s*eigs), breaking scale equivariance of the estimate.
  for (int i = 0; i < p; ++i) e(i) = std::ldexp(std::round(std::ldexp(e(i), 36)), -36);
  const int k = std::min(p, std::max(1, opts.k));

  // Initialize at the sample quantiles shrunk toward the mean: the sample
  // spectrum is a spread-out image of the population spectrum, and the
  // shrinkage factor undoes the first-order MP dilation.
  const double shrink = std::sqrt(1.0 / (1.0 + c));
  Eigen::VectorXd t(k);
  for (int i = 0; i < k; ++i) {  // ascending
    const double level = (i + 0.5) / k;
    const int idx = std::min(p - 1, static_cast<int>(level * p));
    const double v = e(p - 1 - idx);
    t(i) = std::max(0.0, 1.0 + (v - 1.0) * shrink);
  }
  // Cap the support points at the largest observed eigenvalue (the MP map
  // only dilates the top edge) and freeze the tabulation grid to the data
  // scale: a grid that rescaled with t would make the tabulated CDF jump
  // under small support moves, which the Jacobian cannot see.
  const double t_cap = e(0);
  const double hi = t_cap * std::pow(1.0 + std::sqrt(c), 2) * 1.05;
  // Support points whose MP image is narrower than a tabulation cell are
  // invisible to the forward map (their mass silently vanishes, leaving a
  // discontinuous objective), so the projection snaps them to an exact zero,
  // which the forward map handles analytically. The image of an isolated
  // atom at t has width of order 4 t sqrt(c / k).
  const double t_floor =
      (hi / std::max(opts.grid_points, 16)) / (2.0 * std::sqrt(c / k));
  auto project = [&](Eigen::VectorXd v) {
    for (int i = 0; i < v.size(); ++i)
      if (v(i) < t_floor) v(i) = 0.0;
    return project_support(std::move(v)).cwiseMin(t_cap).eval();
  };
  t = project(t);

  Eigen::VectorXd levels(p), wts(p);
  for (int j = 0; j < p; ++j) {
    levels(j) = (p - j - 0.5) / p;
    // Anderson-Darling weighting: the unweighted CDF discrepancy is nearly
    // blind to the extreme order statistics, which lets the estimated support
    // edges drift and biases any edge statistic of the implied model.
    wts(j) = 1.0 / std::sqrt(levels(j) * (1.0 - levels(j)));
  }

  auto eval = [&](const Eigen::VectorXd& tv, bool grad, ForwardEval* fout) -> double {
    ForwardEval fe;
    try {
      fe = forward_eval(tv, c, e, opts.grid_points, opts.eta, grad, hi);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
    const Eigen::VectorXd resid = fe.F - levels;
    if (fout) *fout = std::move(fe);
    return resid.dot(wts.cwiseProduct(resid));
  };

  // Projected Levenberg-Marquardt on the weighted least-squares residual.
  // Plain gradient descent stalls far from the optimum here: the Jacobian
  // columns for neighbouring support points are nearly collinear, so the
  // problem is badly conditioned but cheap to solve exactly (k x k normal
  // equations per step).
  ForwardEval fe;
  double obj = eval(t, true, &fe);
  bool converged = false;
  int iters = 0;
  double lambda = 1e-3;
  if (std::isfinite(obj)) {
    for (; iters < opts.max_iters; ++iters) {
      const Eigen::VectorXd resid = fe.F - levels;
      const Eigen::MatrixXd J = wts.cwiseSqrt().asDiagonal() * fe.dF;
      const Eigen::MatrixXd A = J.transpose() * J;
      const Eigen::VectorXd g = J.transpose() * (wts.cwiseSqrt().cwiseProduct(resid));
      const Eigen::VectorXd diag = A.diagonal().cwiseMax(1e-12);
      bool accepted = false;
      Eigen::VectorXd tn;
      ForwardEval fen;
      double objn = obj;
      for (int bt = 0; bt < 30; ++bt) {
        Eigen::MatrixXd M = A;
        M.diagonal() += lambda * diag;
        const Eigen::VectorXd delta = M.ldlt().solve(-g);
        tn = project(t + delta);
        if ((tn - t).lpNorm<Eigen::Infinity>() >= 1e-16) {
          objn = eval(tn, true, &fen);
          if (objn < obj) {
            accepted = true;
            lambda = std::max(lambda / 4.0, 1e-12);
            break;
          }
        }
        lambda *= 4.0;
        if (lambda > 1e12) break;
      }
      if (!accepted) {  // projected-stationary up to damping resolution
        converged = true;
        break;
      }
      const double improve = obj - objn;
      t = tn;
      fe = std::move(fen);
      obj = objn;
      if (improve < opts.tol * std::max(1.0, obj)) {
        ++iters;
        converged = true;
        break;
      }
    }
  }

  // Expand the k support points (equal weights) to p eigenvalues by reading
  // the discrete quantiles at levels (p-j+1/2)/p, then undo the scaling.
  for (int j = 0; j < p; ++j) {
    const double level = (p - j - 0.5) / p;
    const int idx =
        std::min(k - 1, static_cast<int>(std::ceil(level * k - 1e-12)) - 1);
    out.eigenvalues(j) = scale * t(std::max(0, idx));
  }
  out.objective_value = obj;  // CDF discrepancy: already scale invariant
  out.iterations = iters;
  out.converged = converged;
  return out;
}

SpectrumModel SpectrumEstimate::spectrum() const {
  const int p = static_cast<int>(eigenvalues.size());
  if (p == 0) throw std::logic_error("empty spectrum estimate");
  std::map<double, int> counts;
  for (int i = 0; i < p; ++i) counts[eigenvalues(i)] += 1;
  SpectrumModel h;
  for (const auto& [value, count] : counts)
    h.atoms.push_back({value, static_cast<double>(count) / p});
  return h;
}

std::string SpectrumEstimate::to_json() const {
  nlohmann::json doc;
  doc["eigenvalues"] = std::vector<double>(
      eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  doc["objective_value"] = objective_value;
  doc["iterations"] = iterations;
  doc["converged"] = converged;
  return doc.dump();
}

double kolmogorov_distance(const SpectrumModel& a, const SpectrumModel& b) {
  a.validate();
  b.validate();
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0, best = 0.0;
  while (i < a.atoms.size() || j < b.atoms.size()) {
    const double va = i < a.atoms.size() ? a.atoms[i].value
                                         : std::numeric_limits<double>::infinity();
    const double vb = j < b.atoms.size() ? b.atoms[j].value
                                         : std::numeric_limits<double>::infinity();
    const double v = std::min(va, vb);
    best = std::max(best, std::abs(fa - fb));  // value just below v
    while (i < a.atoms.size() && a.atoms[i].value == v) fa += a.atoms[i++].weight;
    while (j < b.atoms.size() && b.atoms[j].value == v) fb += b.atoms[j++].weight;
    best = std::max(best, std::abs(fa - fb));
  }
  return best;
}

double levy_distance(const SpectrumModel& a, const SpectrumModel& b) {
  a.validate();
  b.validate();
  // Feasible(eps) iff F(x) <= G(x+eps)+eps and G(x) <= F(x+eps)+eps for all
  // x; for step CDFs it suffices to check at the jump points.
  const auto feasible = [&](double eps) {
    for (const auto& atom : a.atoms)
      if (a.cdf(atom.value) > b.cdf(atom.value + eps) + eps + 1e-12) return false;
    for (const auto& atom : b.atoms)
      if (b.cdf(atom.value) > a.cdf(atom.value + eps) + eps + 1e-12) return false;
    return true;
  };
  double lo = 0.0, hi = kolmogorov_distance(a, b);
  if (feasible(lo)) return 0.0;
  for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace specboot
