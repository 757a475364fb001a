#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "brqst/estimators.hpp"
#include "brqst/hermitian.hpp"
#include "brqst/povm.hpp"
#include "brqst/random.hpp"

namespace brqst {

enum class BasisFamily { haar_global, haar_local_qubits, goyeneche, flammia };

inline std::string to_string(BasisFamily f) {
  switch (f) {
    case BasisFamily::haar_global: return "haar_global";
    case BasisFamily::haar_local_qubits: return "haar_local_qubits";
    case BasisFamily::goyeneche: return "goyeneche";
    case BasisFamily::flammia: return "flammia";
  }
  return "unknown";
}

inline BasisFamily parse_basis_family(const std::string& s) {
  if (s == "haar_global" || s == "random") return BasisFamily::haar_global;
  if (s == "haar_local_qubits" || s == "local") return BasisFamily::haar_local_qubits;
  if (s == "goyeneche") return BasisFamily::goyeneche;
  if (s == "flammia") return BasisFamily::flammia;
  fail(ErrorKind::parse, "unknown basis family '" + s + "'");
}

struct NoiseModel {
  double q = 1e-3;                       // weight of the full-rank admixture
  std::optional<std::size_t> shots;      // per basis; default 300 d

  std::size_t shots_for(Eigen::Index d) const {
    return shots ? *shots : static_cast<std::size_t>(300 * d);
  }
};

// ---------------------------------------------------------------------------
// Data simulation.

/// One multinomial draw of `shots` trials over `probs`, by sequential
/// conditional binomials.
inline std::vector<std::uint64_t> sample_multinomial(const RVector& probs, std::uint64_t shots,
                                                     RandomStream& rng) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(probs.size()), 0);
  std::uint64_t remaining = shots;
  double mass = probs.sum();
  for (Eigen::Index k = 0; k < probs.size() && remaining > 0; ++k) {
    if (k + 1 == probs.size()) {
      counts[static_cast<std::size_t>(k)] = remaining;
      break;
    }
    const double p = mass > 0.0 ? std::clamp(probs(k) / mass, 0.0, 1.0) : 0.0;
    const std::uint64_t c = rng.binomial(remaining, p);
    counts[static_cast<std::size_t>(k)] = c;
    remaining -= c;
    mass -= probs(k);
  }
  return counts;
}

namespace detail {

inline RVector checked_probabilities(RVector p) {
  if (p.minCoeff() < -1e-10) {
    fail(ErrorKind::invalid_argument,
         "negative outcome probability " + std::to_string(p.minCoeff()));
  }
  p = p.cwiseMax(0.0);
  return p / p.sum();
}

inline void require_density(const HermitianMatrix& rho) {
  if (std::abs(rho.trace() - 1.0) > 1e-8 || min_eigenvalue(rho) < -1e-8) {
    fail(ErrorKind::invalid_argument, "state is not a density matrix");
  }
}

}  // namespace detail

/// Per-basis frequencies (each block sums to 1) from `shots` trials per basis.
inline std::vector<RVector> simulate_basis_frequencies(const BasisSet& bs,
                                                       const HermitianMatrix& rho,
                                                       std::size_t shots, RandomStream& rng) {
  require(shots >= 1, "need at least one shot per basis");
  detail::require_density(rho);
  std::vector<RVector> out;
  for (const RVector& p : basis_probabilities(bs, rho)) {
    const auto counts = sample_multinomial(detail::checked_probabilities(p), shots, rng);
    RVector f(p.size());
    for (Eigen::Index k = 0; k < f.size(); ++k) {
      f(k) = static_cast<double>(counts[static_cast<std::size_t>(k)]) / static_cast<double>(shots);
    }
    out.push_back(std::move(f));
  }
  return out;
}

/// Concatenates per-basis vectors with the 1/b weighting of bases_to_povm.
inline MeasurementVector stack_basis_frequencies(const std::vector<RVector>& blocks,
                                                 std::size_t shots_per_basis) {
  require(!blocks.empty(), "no frequency blocks to stack");
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.size();
  MeasurementVector mv;
  mv.values.resize(n);
  const double w = 1.0 / static_cast<double>(blocks.size());
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    mv.values.segment(at, b.size()) = w * b;
    at += b.size();
  }
  mv.kind = MeasurementKind::empirical_frequencies;
  mv.total_shots = static_cast<std::uint64_t>(shots_per_basis * blocks.size());
  return mv;
}

/// Multinomial record of `shots` trials in every basis, aligned with
/// bases_to_povm(bs).
inline MeasurementVector simulate_counts(const BasisSet& bs, const HermitianMatrix& rho,
                                         std::size_t shots, RandomStream& rng) {
  return stack_basis_frequencies(simulate_basis_frequencies(bs, rho, shots, rng), shots);
}

/// Multinomial record of a single POVM.
inline MeasurementVector simulate_povm_counts(const Povm& povm, const HermitianMatrix& rho,
                                              std::size_t shots, RandomStream& rng) {
  require(shots >= 1, "need at least one shot");
  detail::require_density(rho);
  const RVector p = detail::checked_probabilities(apply_measurement_map(povm, rho).values);
  const auto counts = sample_multinomial(p, shots, rng);
  MeasurementVector mv;
  mv.values.resize(p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    mv.values(k) = static_cast<double>(counts[static_cast<std::size_t>(k)]) /
                   static_cast<double>(shots);
  }
  mv.kind = MeasurementKind::empirical_frequencies;
  mv.total_shots = shots;
  return mv;
}

// ---------------------------------------------------------------------------
// Sweep plumbing.

/// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t)>& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline double infidelity(const HermitianMatrix& target, const HermitianMatrix& estimate) {
  return std::clamp(1.0 - fidelity(target, estimate), 0.0, 1.0);
}

inline double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Linear-interpolation quantile (type 7).
inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), "quantile of an empty sample");
  require(q >= 0.0 && q <= 1.0, "quantile level must be in [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace detail {

inline std::size_t qubit_count(Eigen::Index d) {
  require(is_power_of_two(d) && d >= 2, "local qubit bases need d = 2^n");
  std::size_t n = 0;
  while ((Eigen::Index{1} << n) < d) ++n;
  return n;
}

/// The first `count` bases a sweep uses for one state.
inline BasisSet sweep_bases(BasisFamily family, Eigen::Index d, std::size_t count,
                            RandomStream& rng) {
  switch (family) {
    case BasisFamily::haar_global: return build_random_bases(d, count, rng);
    case BasisFamily::haar_local_qubits:
      return build_local_random_bases(qubit_count(d), count, rng);
    case BasisFamily::goyeneche: {
      const auto r = std::max<Eigen::Index>(1, (static_cast<Eigen::Index>(count) + 2) / 4);
      require(4 * static_cast<std::size_t>(std::min(r, d / 2)) + 1 >= count,
              "goyeneche family provides at most 2d+1 bases");
      BasisSet bs = build_goyeneche_bases(d, std::min(r, d / 2));
      bs.bases.resize(count);
      return bs;
    }
    case BasisFamily::flammia: break;
  }
  fail(ErrorKind::invalid_argument, "sweeps over basis counts need a basis family, not flammia");
}

inline BasisSet prefix(const BasisSet& bs, std::size_t b) {
  BasisSet out = bs;
  out.bases.resize(b);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Noiseless strict-completeness sweep.

struct StrictnessSweepConfig {
  std::vector<Eigen::Index> dims;
  std::vector<Eigen::Index> ranks{1};
  BasisFamily family = BasisFamily::haar_global;
  std::size_t states_per_dim = 0;  // 0: 5 d
  double threshold = 1e-5;
  std::size_t min_bases = 1;
  std::size_t max_bases = 16;
  /// Stop scanning once this many consecutive basis counts pass for every
  /// state; 0 scans the whole range.
  std::size_t confirm = 2;
  std::uint64_t seed = 0;
  SolverConfig solver;
  std::size_t threads = 1;
};

struct SweepResult {
  Eigen::Index dim = 0;
  Eigen::Index rank = 0;
  BasisFamily family = BasisFamily::haar_global;
  std::vector<std::size_t> basis_counts;
  std::vector<std::vector<double>> infidelities;  // [basis count][state]
  std::optional<std::size_t> minimal_sufficient;

  bool all_below(std::size_t idx, double threshold) const {
    const auto& v = infidelities[idx];
    return std::all_of(v.begin(), v.end(), [&](double x) { return x < threshold; });
  }
};

/// Smallest scanned basis count from which every larger scanned count
/// reconstructs all states below threshold.
inline std::optional<std::size_t> minimal_sufficient(const SweepResult& res, double threshold) {
  std::optional<std::size_t> best;
  for (std::size_t i = res.basis_counts.size(); i-- > 0;) {
    if (!res.all_below(i, threshold)) break;
    best = res.basis_counts[i];
  }
  return best;
}

/// Noiseless data from nested random bases; for each basis count, constrained
/// least squares from the exact probabilities and the infidelity to the
/// rank-r target.
inline std::vector<SweepResult> run_strictness_sweep(const StrictnessSweepConfig& cfg) {
  require(!cfg.dims.empty(), "strictness sweep needs at least one dimension");
  require(!cfg.ranks.empty(), "strictness sweep needs at least one rank");
  require(cfg.threshold > 0.0, "threshold must be positive");
  require(cfg.min_bases >= 1 && cfg.min_bases <= cfg.max_bases, "need 1 <= min_bases <= max_bases");
  std::vector<SweepResult> out;
  const RandomStream master(cfg.seed, 0);
  for (Eigen::Index d : cfg.dims) {
    require(d >= 2, "sweep dimension must be >= 2");
    for (Eigen::Index r : cfg.ranks) {
      require(r >= 1 && r < d, "sweep rank must satisfy 1 <= r < d");
      const std::size_t n_states =
          cfg.states_per_dim ? cfg.states_per_dim : static_cast<std::size_t>(5 * d);
      const RandomStream cell = master.derive(static_cast<std::uint64_t>(d)).derive(
          static_cast<std::uint64_t>(r));
      std::vector<HermitianMatrix> targets(n_states);
      std::vector<BasisSet> bases(n_states);
      for (std::size_t s = 0; s < n_states; ++s) {
        RandomStream rng = cell.derive(s);
        targets[s] = random_rank_state(d, r, rng);
        bases[s] = detail::sweep_bases(cfg.family, d, cfg.max_bases, rng);
      }
      SweepResult res;
      res.dim = d;
      res.rank = r;
      res.family = cfg.family;
      std::size_t passed_in_row = 0;
      for (std::size_t b = cfg.min_bases; b <= cfg.max_bases; ++b) {
        std::vector<double> inf(n_states);
        parallel_for(n_states, cfg.threads, [&](std::size_t s) {
          const Povm povm = bases_to_povm(detail::prefix(bases[s], b));
          const auto rep = estimate_ls(povm, apply_measurement_map(povm, targets[s]), cfg.solver);
          inf[s] = infidelity(targets[s], rep.estimate);
        });
        res.basis_counts.push_back(b);
        res.infidelities.push_back(std::move(inf));
        passed_in_row = res.all_below(res.basis_counts.size() - 1, cfg.threshold) ? passed_in_row + 1 : 0;
        if (cfg.confirm > 0 && passed_in_row >= cfg.confirm) break;
      }
      res.minimal_sufficient = minimal_sufficient(res, cfg.threshold);
      out.push_back(std::move(res));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noisy robustness sweep.

enum class EstimatorKind { trace_min, ls, mle };

inline std::string to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::trace_min: return "trace";
    case EstimatorKind::ls: return "ls";
    case EstimatorKind::mle: return "mle";
  }
  return "unknown";
}

inline EstimatorKind parse_estimator(const std::string& s) {
  if (s == "trace" || s == "trace_min") return EstimatorKind::trace_min;
  if (s == "ls") return EstimatorKind::ls;
  if (s == "mle") return EstimatorKind::mle;
  fail(ErrorKind::parse, "unknown estimator '" + s + "' (expected ls, trace or mle)");
}

inline constexpr EstimatorKind kAllEstimators[] = {EstimatorKind::trace_min, EstimatorKind::ls,
                                                   EstimatorKind::mle};

/// Runs one estimator; eps is in per-basis frequency units and is rescaled to
/// the POVM's weighting.
inline EstimateReport run_estimator(EstimatorKind kind, const Povm& povm,
                                    const MeasurementVector& f, double eps,
                                    const SolverConfig& cfg) {
  switch (kind) {
    case EstimatorKind::ls: return estimate_ls(povm, f, cfg);
    case EstimatorKind::trace_min:
      return estimate_trace_min(povm, f, epsilon_for_povm(povm, eps), cfg);
    case EstimatorKind::mle: return estimate_mle(povm, f, epsilon_for_povm(povm, eps), cfg);
  }
  fail(ErrorKind::invalid_argument, "unknown estimator");
}

struct RobustnessConfig {
  Eigen::Index dim = 8;
  BasisFamily family = BasisFamily::haar_local_qubits;
  std::size_t n_states = 100;
  NoiseModel noise;
  std::size_t min_bases = 1;
  std::size_t max_bases = 9;
  std::uint64_t seed = 0;
  SolverConfig solver;
  std::size_t threads = 1;
};

struct RobustnessRecord {
  std::size_t bases = 0;
  std::size_t state = 0;
  EstimatorKind estimator = EstimatorKind::ls;
  double infidelity = 0.0;
  bool ok = true;
  std::string error;
};

struct RobustnessSummary {
  std::size_t bases = 0;
  EstimatorKind estimator = EstimatorKind::ls;
  std::size_t successes = 0;
  std::size_t failures = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct RobustnessResult {
  Eigen::Index dim = 0;
  BasisFamily family = BasisFamily::haar_local_qubits;
  std::size_t shots_per_basis = 0;
  std::vector<RobustnessRecord> records;
  std::vector<RobustnessSummary> summary;

  const RobustnessSummary& cell(std::size_t bases, EstimatorKind e) const {
    for (const auto& s : summary) {
      if (s.bases == bases && s.estimator == e) return s;
    }
    fail(ErrorKind::invalid_argument, "no summary for the requested cell");
  }
};

/// Pure targets mixed with a Hilbert-Schmidt state, multinomial data in
/// nested bases, and the three estimators at every basis count. Estimator
/// failures are recorded per cell.
inline RobustnessResult run_robustness_sweep(const RobustnessConfig& cfg) {
  require(cfg.n_states >= 1, "robustness sweep needs at least one state");
  require(cfg.min_bases >= 1 && cfg.min_bases <= cfg.max_bases, "need 1 <= min_bases <= max_bases");
  require(cfg.noise.q >= 0.0 && cfg.noise.q <= 1.0, "noise weight q must be in [0, 1]");
  const Eigen::Index d = cfg.dim;
  const std::size_t shots = cfg.noise.shots_for(d);
  require(shots >= 1, "need at least one shot per basis");
  const std::size_t n_b = cfg.max_bases - cfg.min_bases + 1;
  constexpr std::size_t n_e = std::size(kAllEstimators);
  std::vector<RobustnessRecord> slots(cfg.n_states * n_b * n_e);
  const RandomStream master(cfg.seed, 1);

  parallel_for(cfg.n_states, cfg.threads, [&](std::size_t s) {
    RandomStream rng = master.derive(s);
    const CVector psi = random_pure_state(d, rng);
    const HermitianMatrix target = HermitianMatrix::projector(psi);
    const HermitianMatrix tau = random_mixed_hs(d, rng);
    const HermitianMatrix sigma = (1.0 - cfg.noise.q) * target + cfg.noise.q * tau;
    const BasisSet all = detail::sweep_bases(cfg.family, d, cfg.max_bases, rng);
    const auto blocks = simulate_basis_frequencies(all, sigma, shots, rng);
    for (std::size_t bi = 0; bi < n_b; ++bi) {
      const std::size_t b = cfg.min_bases + bi;
      const Povm povm = bases_to_povm(detail::prefix(all, b));
      const MeasurementVector f = stack_basis_frequencies(
          std::vector<RVector>(blocks.begin(), blocks.begin() + static_cast<std::ptrdiff_t>(b)),
          shots);
      const double eps = default_epsilon(b, static_cast<std::size_t>(d), shots);
      for (std::size_t ei = 0; ei < n_e; ++ei) {
        RobustnessRecord rec;
        rec.bases = b;
        rec.state = s;
        rec.estimator = kAllEstimators[ei];
        try {
          const auto rep = run_estimator(rec.estimator, povm, f, eps, cfg.solver);
          rec.infidelity = std::clamp(1.0 - fidelity_pure(psi, rep.estimate), 0.0, 1.0);
        } catch (const Error& e) {
          rec.ok = false;
          rec.error = std::string(to_string(e.kind())) + ": " + e.what();
          rec.infidelity = std::numeric_limits<double>::quiet_NaN();
        }
        slots[(s * n_b + bi) * n_e + ei] = std::move(rec);
      }
    }
  });

  RobustnessResult res;
  res.dim = d;
  res.family = cfg.family;
  res.shots_per_basis = shots;
  res.records = std::move(slots);
  for (std::size_t bi = 0; bi < n_b; ++bi) {
    for (std::size_t ei = 0; ei < n_e; ++ei) {
      RobustnessSummary sum;
      sum.bases = cfg.min_bases + bi;
      sum.estimator = kAllEstimators[ei];
      std::vector<double> vals;
      for (std::size_t s = 0; s < cfg.n_states; ++s) {
        const auto& rec = res.records[(s * n_b + bi) * n_e + ei];
        if (rec.ok) {
          vals.push_back(rec.infidelity);
        } else {
          ++sum.failures;
        }
      }
      sum.successes = vals.size();
      if (!vals.empty()) {
        sum.median = median(vals);
        sum.q1 = quantile(vals, 0.25);
        sum.q3 = quantile(vals, 0.75);
      } else {
        sum.median = sum.q1 = sum.q3 = std::numeric_limits<double>::quiet_NaN();
      }
      res.summary.push_back(sum);
    }
  }
  return res;
}

}  // namespace brqst
