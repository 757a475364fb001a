#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "brqst/hermitian.hpp"
#include "brqst/povm.hpp"

namespace brqst {

struct SolverConfig {
  std::size_t max_iterations = 200000;
  double relative_tolerance = 1e-9;
  double shrink = 0.5;   // step multiplier after a failed line-search trial
  double growth = 1.1;   // step multiplier after an accepted step
  bool restart = true;
  std::size_t patience = 10;  // consecutive calm iterations before stopping
  bool record_history = false;
};

struct SolverOutcome {
  RVector x;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective after every accepted step
};

/// Accelerated projected gradient (FISTA) with backtracking and function-value
/// restart. Accepted iterates never increase the objective.
///
/// Objective must provide value(x), value_gradient(x, g) and step_hint();
/// Projection maps a coordinate vector onto the feasible set. A projection that
/// also provides gap(x, g), an upper bound on f(x) - min f, guards the stopping
/// rule: small objective changes only count once the gap is small as well.
template <class Objective, class Projection>
SolverOutcome accelerated_projected_gradient(const Objective& obj, const Projection& project,
                                             const RVector& x0, const SolverConfig& cfg) {
  require(cfg.max_iterations >= 1, "max_iterations must be >= 1");
  require(cfg.relative_tolerance > 0.0, "relative_tolerance must be > 0");
  SolverOutcome out;
  RVector x = project(x0);
  double fx = obj.value(x);
  const double floor = 1e-16 * std::max(std::abs(fx), std::abs(obj.value(RVector::Zero(x.size()))));
  RVector y = x;
  RVector g(x.size());
  double t = 1.0;
  double step = obj.step_hint();
  std::size_t calm = 0;
  if (cfg.record_history) out.history.push_back(fx);

  std::size_t it = 0;
  while (it < cfg.max_iterations) {
    ++it;
    const double fy = obj.value_gradient(y, g);
    RVector z;
    double fz = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      z = project(y - step * g);
      fz = obj.value(z);
      const RVector dz = z - y;
      const double model = fy + g.dot(dz) + dz.squaredNorm() / (2.0 * step);
      if (fz <= model + 1e-14 * std::abs(fy)) break;
      step *= cfg.shrink;
    }
    const bool momentum = t > 1.0;
    if (fz > fx) {
      if (cfg.restart && momentum) {
        y = x;
        t = 1.0;
        continue;
      }
      // Plain step failed to decrease: rounding floor reached.
      ++calm;
      if (calm >= cfg.patience) {
        out.converged = true;
        break;
      }
      step *= cfg.growth;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    RVector y_next = z + ((t - 1.0) / t_next) * (z - x);
    const double change = fx - fz;
    x = std::move(z);
    const double f_prev = fx;
    fx = fz;
    t = t_next;
    y = std::move(y_next);
    step *= cfg.growth;
    if (cfg.record_history) out.history.push_back(fx);
    const double scale = std::max(std::abs(f_prev), floor);
    bool settled = change <= cfg.relative_tolerance * scale;
    if constexpr (requires { project.gap(x, g); }) {
      if (settled) {
        RVector gx(x.size());
        obj.value_gradient(x, gx);
        settled = project.gap(x, gx) <= std::sqrt(cfg.relative_tolerance) * scale;
      }
    }
    if (settled) {
      if (++calm >= cfg.patience) {
        out.converged = true;
        break;
      }
    } else {
      calm = 0;
    }
  }
  out.x = std::move(x);
  out.objective = fx;
  out.iterations = it;
  return out;
}

namespace detail {

/// Largest squared singular value of a real matrix by power iteration.
inline double operator_norm_squared(const RMatrix& phi) {
  RVector v = RVector::Ones(phi.cols()).normalized();
  double lambda = 0.0;
  for (int i = 0; i < 100; ++i) {
    RVector w = phi.transpose() * (phi * v);
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / n;
    if (std::abs(next - lambda) <= 1e-6 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

/// 1/2 ||Phi x - f||^2 + (optional) linear term c . x
struct LeastSquaresObjective {
  const RMatrix& phi;
  const RVector& f;
  double weight = 1.0;       // multiplies the quadratic term
  const RVector* linear = nullptr;
  double lipschitz = 1.0;

  double value(const RVector& x) const {
    double v = 0.5 * weight * (phi * x - f).squaredNorm();
    if (linear) v += linear->dot(x);
    return v;
  }
  double value_gradient(const RVector& x, RVector& g) const {
    const RVector r = phi * x - f;
    g = weight * (phi.transpose() * r);
    double v = 0.5 * weight * r.squaredNorm();
    if (linear) {
      g += *linear;
      v += linear->dot(x);
    }
    return v;
  }
  double step_hint() const { return 1.0 / std::max(weight * lipschitz, 1e-300); }
};

inline constexpr double kLogClamp = 1e-12;

/// Generalized KL divergence sum f log(f/p) - f + p between the data and the
/// model probabilities p = Phi x, plus mu/2 ||p - f||^2. On trace-one inputs it
/// equals the negative log-likelihood up to a constant, but it vanishes at an
/// exact fit, which keeps line searches accurate near the optimum.
struct LikelihoodObjective {
  const RMatrix& phi;
  const RVector& f;
  double penalty = 0.0;
  double lipschitz = 1.0;

  static double divergence_term(double fi, double pi) {
    if (fi <= 0.0) return pi;
    const double u = (pi - fi) / fi;
    return fi * (u - std::log1p(u));
  }

  double value(const RVector& x) const {
    const RVector p = phi * x;
    double v = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      v += divergence_term(f(i), std::max(p(i), kLogClamp));
    }
    if (penalty > 0.0) v += 0.5 * penalty * (p - f).squaredNorm();
    return v;
  }
  double value_gradient(const RVector& x, RVector& g) const {
    const RVector p = phi * x;
    RVector w(p.size());
    double v = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double pi = std::max(p(i), kLogClamp);
      v += divergence_term(f(i), pi);
      w(i) = 1.0 - f(i) / pi;
    }
    if (penalty > 0.0) {
      w += penalty * (p - f);
      v += 0.5 * penalty * (p - f).squaredNorm();
    }
    g = phi.transpose() * w;
    return v;
  }
  double step_hint() const { return 1.0 / std::max(lipschitz, 1e-300); }
};

/// -sum f log(p), the reported likelihood objective.
inline double negative_log_likelihood(const RMatrix& phi, const RVector& f, const RVector& x) {
  const RVector p = phi * x;
  double v = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (f(i) > 0.0) v -= f(i) * std::log(std::max(p(i), kLogClamp));
  }
  return v;
}

struct PsdProjection {
  Eigen::Index dim;
  RVector operator()(const RVector& x) const {
    return to_coordinates(project_psd(from_coordinates(x, dim)));
  }
};

struct SpectraplexProjection {
  Eigen::Index dim;
  double total;
  RVector operator()(const RVector& x) const {
    return to_coordinates(project_spectraplex(from_coordinates(x, dim), total));
  }
  // Frank-Wolfe gap: Tr(G X) - total * lambda_min(G).
  double gap(const RVector& x, const RVector& g) const {
    return g.dot(x) - total * eigenvalues(from_coordinates(g, dim))(0);
  }
};

}  // namespace detail

/// Result of a convex estimator. `estimate` is the trace-normalized state,
/// `raw` the optimizer output before normalization.
struct EstimateReport {
  HermitianMatrix estimate;
  HermitianMatrix raw;
  double objective = 0.0;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Noise scale of the multinomial distribution for the maximally mixed state:
/// sqrt(b (1 - 1/d) / N), in units of per-basis (unweighted) frequencies.
inline double default_epsilon(std::size_t bases, std::size_t dim, std::size_t shots) {
  require(bases >= 1 && dim >= 1 && shots >= 1, "epsilon heuristic needs b, d, N >= 1");
  const double b = static_cast<double>(bases);
  const double d = static_cast<double>(dim);
  return std::sqrt(b * (1.0 - 1.0 / d) / static_cast<double>(shots));
}

/// Converts a per-basis epsilon to the scale of a POVM built by
/// bases_to_povm, whose elements carry weight 1/b.
inline double epsilon_for_povm(const Povm& povm, double per_basis_epsilon) {
  const auto& groups = povm.provenance().basis_groups;
  return groups.empty() ? per_basis_epsilon
                        : per_basis_epsilon / static_cast<double>(groups.size());
}

namespace detail {

struct EstimationProblem {
  Eigen::Index dim;
  MeasurementOperator op;
  RVector f;
  double lipschitz;

  EstimationProblem(const Povm& povm, const MeasurementVector& data)
      : dim(povm.dim()), op(povm), f(data.values) {
    if (static_cast<std::size_t>(data.values.size()) != povm.size()) {
      fail(ErrorKind::dimension_mismatch,
           "measurement vector has " + std::to_string(data.values.size()) +
               " entries but the POVM has " + std::to_string(povm.size()) + " elements");
    }
    lipschitz = operator_norm_squared(op.matrix());
  }

  double residual(const RVector& x) const { return (op.apply(x) - f).norm(); }
};

inline EstimateReport make_report(const EstimationProblem& prob, const RVector& x,
                                  double objective, std::size_t iterations, bool converged) {
  EstimateReport rep;
  CMatrix raw = from_coordinates(x, prob.dim);
  rep.raw = HermitianMatrix::hermitize(raw);
  const double tr = rep.raw.trace();
  if (!(tr > 1e-12)) {
    fail(ErrorKind::degenerate_estimate,
         "estimate has trace " + std::to_string(tr) + "; cannot normalize");
  }
  rep.estimate = HermitianMatrix::hermitize(raw / tr);
  rep.objective = objective;
  rep.residual_norm = prob.residual(x);
  rep.iterations = iterations;
  rep.converged = converged;
  return rep;
}

inline SolverOutcome solve_ls(const EstimationProblem& prob, const RVector& x0,
                              const SolverConfig& cfg, std::optional<double> trace) {
  LeastSquaresObjective obj{prob.op.matrix(), prob.f, 1.0, nullptr, prob.lipschitz};
  if (trace) {
    return accelerated_projected_gradient(obj, SpectraplexProjection{prob.dim, *trace}, x0, cfg);
  }
  return accelerated_projected_gradient(obj, PsdProjection{prob.dim}, x0, cfg);
}

inline constexpr double kConstraintSlack = 1e-9;

}  // namespace detail

/// Constrained least squares: minimize ||M[X] - f||_2 subject to X >= 0.
inline EstimateReport estimate_ls(const Povm& povm, const MeasurementVector& f,
                                  const SolverConfig& cfg = {}) {
  const detail::EstimationProblem prob(povm, f);
  const RVector x0 = RVector::Zero(prob.dim * prob.dim);
  const auto sol = detail::solve_ls(prob, x0, cfg, std::nullopt);
  auto rep = detail::make_report(prob, sol.x, std::sqrt(2.0 * sol.objective), sol.iterations,
                                 sol.converged);
  return rep;
}

/// Trace minimization: minimize Tr(X) subject to ||M[X] - f||_2 <= eps, X >= 0.
///
/// The residual achievable at fixed trace t, g(t), is convex in t, so the
/// optimum is the smallest t in [0, Tr X_ls] with g(t) <= eps; it is located by
/// bisection with a trace-constrained least-squares solve per probe.
inline EstimateReport estimate_trace_min(const Povm& povm, const MeasurementVector& f, double eps,
                                         const SolverConfig& cfg = {}) {
  require(eps >= 0.0, "epsilon must be nonnegative");
  const detail::EstimationProblem prob(povm, f);
  const Eigen::Index n = prob.dim * prob.dim;
  const double slack = detail::kConstraintSlack;
  if (prob.f.norm() <= eps) {
    fail(ErrorKind::degenerate_estimate,
         "epsilon ball contains the zero matrix; trace minimum is 0");
  }
  auto ls = detail::solve_ls(prob, RVector::Zero(n), cfg, std::nullopt);
  std::size_t iterations = ls.iterations;
  const double ls_residual = prob.residual(ls.x);
  if (ls_residual > eps + slack) {
    fail(ErrorKind::infeasible, "no PSD matrix reaches residual " + std::to_string(eps) +
                                    " (least-squares residual " + std::to_string(ls_residual) +
                                    ")");
  }
  const RVector eye = identity_coordinates(prob.dim);
  double hi = eye.dot(ls.x);
  double lo = 0.0;
  RVector best = ls.x;
  double best_residual = ls_residual;
  bool converged = ls.converged;
  const double t_tol = 1e-9 * std::max(hi, 1e-300);
  while (hi - lo > t_tol) {
    const double mid = 0.5 * (lo + hi);
    const RVector warm = best * (mid / std::max(eye.dot(best), 1e-300));
    const auto probe = detail::solve_ls(prob, warm, cfg, mid);
    iterations += probe.iterations;
    const double res = prob.residual(probe.x);
    if (res <= eps + slack) {
      hi = mid;
      best = probe.x;
      best_residual = res;
      converged = converged && probe.converged;
    } else {
      lo = mid;
    }
  }
  converged = converged && best_residual <= eps + slack;
  return detail::make_report(prob, best, eye.dot(best), iterations, converged);
}

/// Maximum likelihood over density matrices with the residual constraint
/// ||M[rho] - f||_2 <= eps. The constraint is enforced through a quadratic
/// multiplier mu, raised until the residual meets eps.
inline EstimateReport estimate_mle(const Povm& povm, const MeasurementVector& f, double eps,
                                   const SolverConfig& cfg = {}) {
  require(eps >= 0.0, "epsilon must be nonnegative");
  if ((f.values.array() < 0.0).any()) {
    fail(ErrorKind::invalid_argument, "likelihood data must be nonnegative");
  }
  const detail::EstimationProblem prob(povm, f);
  const double slack = detail::kConstraintSlack;
  const RVector x0 = to_coordinates(CMatrix::Identity(prob.dim, prob.dim) /
                                    static_cast<double>(prob.dim));
  const detail::SpectraplexProjection density{prob.dim, 1.0};

  const auto solve = [&](double mu, const RVector& start) {
    detail::LikelihoodObjective obj{prob.op.matrix(), prob.f, mu,
                                    mu * prob.lipschitz + prob.lipschitz * prob.dim};
    return accelerated_projected_gradient(obj, density, start, cfg);
  };
  const auto nll = [&](const RVector& x) {
    return detail::negative_log_likelihood(prob.op.matrix(), prob.f, x);
  };

  auto sol = solve(0.0, x0);
  std::size_t iterations = sol.iterations;
  if (prob.residual(sol.x) <= eps + slack) {
    return detail::make_report(prob, sol.x, nll(sol.x), iterations, sol.converged);
  }
  // Constraint active: bracket the multiplier, then bisect on log(mu).
  double mu_lo = 0.0;
  double mu_hi = 1.0;
  RVector feasible;
  bool found = false;
  for (int k = 0; k < 60; ++k) {
    auto probe = solve(mu_hi, sol.x);
    iterations += probe.iterations;
    if (prob.residual(probe.x) <= eps + slack) {
      feasible = probe.x;
      found = true;
      sol = std::move(probe);
      break;
    }
    mu_lo = mu_hi;
    mu_hi *= 2.0;
  }
  if (!found) {
    fail(ErrorKind::infeasible, "no density matrix meets the residual bound " + std::to_string(eps));
  }
  bool converged = sol.converged;
  for (int k = 0; k < 40 && mu_hi - mu_lo > 1e-6 * mu_hi; ++k) {
    const double mid = mu_lo > 0.0 ? std::sqrt(mu_lo * mu_hi) : 0.5 * mu_hi;
    auto probe = solve(mid, feasible);
    iterations += probe.iterations;
    if (prob.residual(probe.x) <= eps + slack) {
      mu_hi = mid;
      feasible = probe.x;
      converged = probe.converged;
    } else {
      mu_lo = mid;
    }
  }
  return detail::make_report(prob, feasible, nll(feasible), iterations, converged);
}

}  // namespace brqst
