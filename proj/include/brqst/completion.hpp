#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brqst/estimators.hpp"
#include "brqst/hermitian.hpp"
#include "brqst/povm.hpp"
#include "brqst/random.hpp"

namespace brqst {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Density-matrix entries known from measurement. Unmeasured entries hold NaN.
class PartialMatrix {
 public:
  PartialMatrix() = default;
  explicit PartialMatrix(Eigen::Index dim)
      : values_(CMatrix::Constant(dim, dim, Complex(std::numeric_limits<double>::quiet_NaN(),
                                                    std::numeric_limits<double>::quiet_NaN()))),
        measured_(Mask::Constant(dim, dim, false)) {
    require(dim >= 1, "partial matrix dimension must be >= 1");
  }

  Eigen::Index dim() const { return values_.rows(); }
  const CMatrix& values() const { return values_; }
  const Mask& measured() const { return measured_; }
  bool is_measured(Eigen::Index i, Eigen::Index j) const { return measured_(i, j); }
  Complex operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

  /// Sets (i, j) and its conjugate partner (j, i).
  void set(Eigen::Index i, Eigen::Index j, Complex v) {
    require(i >= 0 && j >= 0 && i < dim() && j < dim(), "partial matrix index out of range");
    if (i == j) v = Complex(v.real(), 0.0);
    values_(i, j) = v;
    values_(j, i) = std::conj(v);
    measured_(i, j) = measured_(j, i) = true;
  }

  std::size_t measured_count() const { return static_cast<std::size_t>(measured_.count()); }
  bool is_complete() const { return measured_.all(); }

 private:
  CMatrix values_;
  Mask measured_;
};

/// One principal submatrix used for completion: `window` indexes the
/// submatrix, `a_block` (a subset of the window) its r x r pivot block.
struct PlanMember {
  std::vector<Eigen::Index> window;
  std::vector<Eigen::Index> a_block;
  bool alternate = false;
};

struct SubmatrixPlan {
  std::string kind;
  Eigen::Index dim = 0;
  Eigen::Index rank = 0;
  std::vector<PlanMember> members;

  std::size_t primary_count() const {
    std::size_t n = 0;
    for (const auto& m : members) n += m.alternate ? 0 : 1;
    return n;
  }
};

enum class PlanKind { flammia, goyeneche };

/// Flammia: one member covering the whole matrix with A the leading r x r
/// block. Goyeneche: the linear sweep of principal submatrices of sizes
/// r+2, r+3, ... (A = the r indices after the first), followed by the
/// alternate cyclic family that also uses the wrap-around diagonals.
inline SubmatrixPlan default_plan(PlanKind kind, Eigen::Index d, Eigen::Index r) {
  require(d >= 2 && r >= 1 && r < d, "plan needs d >= 2 and 1 <= r < d");
  SubmatrixPlan plan;
  plan.dim = d;
  plan.rank = r;
  if (kind == PlanKind::flammia) {
    plan.kind = "flammia";
    PlanMember m;
    for (Eigen::Index i = 0; i < d; ++i) m.window.push_back(i);
    for (Eigen::Index i = 0; i < r; ++i) m.a_block.push_back(i);
    plan.members.push_back(std::move(m));
    return plan;
  }
  require(2 * r <= d, "goyeneche plan needs r <= d/2");
  plan.kind = "goyeneche";
  for (Eigen::Index s = r + 1; s <= d - r - 1; ++s) {
    for (Eigen::Index i = 0; i + s < d; ++i) {
      PlanMember m;
      for (Eigen::Index j = i; j <= i + s; ++j) m.window.push_back(j);
      for (Eigen::Index j = i + 1; j <= i + r; ++j) m.a_block.push_back(j);
      plan.members.push_back(std::move(m));
    }
  }
  for (Eigen::Index s = r + 1; s <= d - r - 1; ++s) {
    for (Eigen::Index i = 0; i < d; ++i) {
      PlanMember m;
      m.alternate = true;
      for (Eigen::Index j = 0; j <= s; ++j) m.window.push_back((i + j) % d);
      for (Eigen::Index j = 1; j <= r; ++j) m.a_block.push_back((i + j) % d);
      plan.members.push_back(std::move(m));
    }
  }
  return plan;
}

struct CompletionResult {
  HermitianMatrix matrix;
  std::vector<std::size_t> members_used;  // in execution order
  bool used_alternate = false;
};

namespace detail {

inline bool contains(const std::vector<Eigen::Index>& v, Eigen::Index x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace detail

/// Fills the unmeasured entries of a rank-r matrix from principal submatrices
/// [[A, B^dagger], [B, C]] with C = B A^{-1} B^dagger. Members are applied in
/// plan order, repeatedly, until nothing changes; alternate members are only
/// consulted when the primary ones make no progress. A pivot block counts as
/// singular when its smallest singular value is below tol * ||A||_2.
inline CompletionResult complete_rankr_detailed(const PartialMatrix& partial, Eigen::Index r,
                                                const SubmatrixPlan& plan, double tol = 1e-8) {
  const Eigen::Index d = partial.dim();
  require(r >= 1 && r <= d, "completion rank must satisfy 1 <= r <= d");
  require(tol >= 0.0, "completion tolerance must be nonnegative");
  if (plan.dim != 0 && plan.dim != d) {
    fail(ErrorKind::dimension_mismatch, "plan and partial matrix differ in dimension");
  }
  for (const auto& m : plan.members) {
    require(static_cast<Eigen::Index>(m.a_block.size()) == r,
            "every plan member needs an A block of size r");
    for (Eigen::Index a : m.a_block) {
      require(detail::contains(m.window, a), "A block must lie inside the window");
    }
    for (Eigen::Index w : m.window) require(w >= 0 && w < d, "plan index out of range");
  }

  // Noisy inputs may be slightly non-Hermitian; average with the adjoint.
  CMatrix work = CMatrix::Zero(d, d);
  Mask known = partial.measured();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!known(i, j)) continue;
      if (!known(j, i)) fail(ErrorKind::invalid_argument, "measured mask must be symmetric");
      work(i, j) = 0.5 * (partial(i, j) + std::conj(partial(j, i)));
    }
  }

  CompletionResult result;
  std::optional<std::size_t> first_failure;
  const auto run_member = [&](std::size_t idx) {
    const PlanMember& m = plan.members[idx];
    std::vector<Eigen::Index> rest;
    for (Eigen::Index w : m.window) {
      if (!detail::contains(m.a_block, w)) rest.push_back(w);
    }
    for (Eigen::Index a : m.a_block) {
      for (Eigen::Index b : m.a_block) {
        if (!known(a, b)) return false;
      }
    }
    const auto row_known = [&](Eigen::Index x) {
      for (Eigen::Index a : m.a_block) {
        if (!known(x, a)) return false;
      }
      return true;
    };
    std::vector<std::pair<Eigen::Index, Eigen::Index>> targets;
    for (Eigen::Index x : rest) {
      if (!row_known(x)) continue;
      for (Eigen::Index y : rest) {
        if (y >= x && !known(x, y) && row_known(y)) targets.emplace_back(x, y);
      }
    }
    if (targets.empty()) return false;

    CMatrix a(r, r);
    for (Eigen::Index p = 0; p < r; ++p) {
      for (Eigen::Index q = 0; q < r; ++q) a(p, q) = work(m.a_block[p], m.a_block[q]);
    }
    Eigen::JacobiSVD<CMatrix> svd(a);
    const RVector& sv = svd.singularValues();
    if (!(sv(r - 1) > tol * sv(0)) || sv(0) == 0.0) {
      if (!first_failure) first_failure = idx;
      return false;
    }
    const auto lu = a.fullPivLu();
    for (const auto& [x, y] : targets) {
      CVector bx(r), by(r);
      for (Eigen::Index p = 0; p < r; ++p) {
        bx(p) = work(x, m.a_block[p]);
        by(p) = work(m.a_block[p], y);
      }
      const Complex v = (bx.transpose() * lu.solve(by))(0, 0);
      work(x, y) = x == y ? Complex(v.real(), 0.0) : v;
      work(y, x) = std::conj(work(x, y));
      known(x, y) = known(y, x) = true;
    }
    result.members_used.push_back(idx);
    if (m.alternate) result.used_alternate = true;
    return true;
  };

  while (!known.all()) {
    bool progress = false;
    for (std::size_t i = 0; i < plan.members.size(); ++i) {
      if (!plan.members[i].alternate && run_member(i)) progress = true;
    }
    if (!progress) {
      for (std::size_t i = 0; i < plan.members.size() && !progress; ++i) {
        if (plan.members[i].alternate && run_member(i)) progress = true;
      }
    }
    if (!progress) break;
  }
  if (!known.all()) {
    if (first_failure) {
      throw FailureSetError(*first_failure,
                            "state lies in the failure set: pivot block of plan member " +
                                std::to_string(*first_failure) + " is singular");
    }
    fail(ErrorKind::invalid_argument, "plan does not cover every unmeasured entry");
  }
  result.matrix = HermitianMatrix::hermitize(work);
  return result;
}

inline HermitianMatrix complete_rankr(const PartialMatrix& partial, Eigen::Index r,
                                      const SubmatrixPlan& plan, double tol = 1e-8) {
  return complete_rankr_detailed(partial, r, plan, tol).matrix;
}

// ---------------------------------------------------------------------------
// Reading measured entries off element-probing measurements.

/// Measured entries of a rank-r Flammia POVM: the first r rows and columns.
inline PartialMatrix extract_flammia(const Povm& povm, const MeasurementVector& p) {
  const Provenance& prov = povm.provenance();
  if (prov.construction != "flammia") {
    fail(ErrorKind::invalid_argument,
         "extract_flammia needs a flammia POVM, got '" + prov.construction + "'");
  }
  const auto d = povm.dim();
  const auto r = static_cast<Eigen::Index>(prov.rank);
  const FlammiaLayout layout{d, r};
  if (p.values.size() != static_cast<Eigen::Index>(povm.size()) || layout.size() != povm.size()) {
    fail(ErrorKind::dimension_mismatch, "measurement vector does not match the flammia layout");
  }
  const double tr = p.values.sum();
  PartialMatrix out(d);
  for (Eigen::Index k = 0; k < r; ++k) {
    const double a = prov.a[static_cast<std::size_t>(k)];
    const double b = prov.b[static_cast<std::size_t>(k)];
    out.set(k, k, p.values(static_cast<Eigen::Index>(layout.diagonal(k))) / a);
    for (Eigen::Index n = k + 1; n < d; ++n) {
      const double re =
          0.5 * (p.values(static_cast<Eigen::Index>(layout.real_probe(k, n))) / b - tr);
      const double im =
          0.5 * (p.values(static_cast<Eigen::Index>(layout.imag_probe(k, n))) / b - tr);
      out.set(n, k, Complex(re, im));
    }
  }
  return out;
}

/// Same as extract_flammia for the sequential variant: one record per POVM.
inline PartialMatrix extract_flammia_sequential(const std::vector<Povm>& povms,
                                                const std::vector<MeasurementVector>& records) {
  require(!povms.empty() && povms.size() == records.size(),
          "need one measurement record per sequential POVM");
  const auto d = povms.front().dim();
  PartialMatrix out(d);
  for (std::size_t s = 0; s < povms.size(); ++s) {
    const Povm& povm = povms[s];
    const Provenance& prov = povm.provenance();
    if (prov.construction != "flammia_sequential") {
      fail(ErrorKind::invalid_argument, "extract_flammia_sequential needs sequential flammia POVMs");
    }
    const auto k = static_cast<Eigen::Index>(prov.sequential_index);
    const auto& v = records[s].values;
    if (povm.dim() != d || v.size() != static_cast<Eigen::Index>(povm.size()) ||
        povm.size() != static_cast<std::size_t>(2 * (d - k))) {
      fail(ErrorKind::dimension_mismatch, "sequential record does not match its POVM");
    }
    const double tr = v.sum();
    const double a = prov.a.front();
    const double b = prov.b.front();
    out.set(k, k, v(0) / a);
    for (Eigen::Index n = k + 1; n < d; ++n) {
      const double re = 0.5 * (v(n - k) / b - tr);
      const double im = 0.5 * (v(d - 1 - k + n - k) / b - tr);
      out.set(n, k, Complex(re, im));
    }
  }
  return out;
}

/// Per-basis outcome vectors of a record taken with bases_to_povm, rescaled
/// so that each sums to the trace again.
inline std::vector<RVector> split_by_basis(const Povm& povm, const MeasurementVector& f) {
  const auto& groups = povm.provenance().basis_groups;
  if (groups.empty()) fail(ErrorKind::invalid_argument, "POVM carries no basis grouping");
  if (f.values.size() != static_cast<Eigen::Index>(povm.size())) {
    fail(ErrorKind::dimension_mismatch, "measurement vector length differs from POVM size");
  }
  const double b = static_cast<double>(groups.size());
  std::vector<RVector> out;
  for (const auto& [begin, end] : groups) {
    out.push_back(b * f.values.segment(static_cast<Eigen::Index>(begin),
                                       static_cast<Eigen::Index>(end - begin)));
  }
  return out;
}

/// Entries measured by the rank-r Goyeneche bases: diagonals 1..r together
/// with their wrap-around partners, plus the main diagonal when the
/// computational basis is included.
inline Mask goyeneche_measured_mask(Eigen::Index d, Eigen::Index r, bool computational = true) {
  Mask m = Mask::Constant(d, d, false);
  if (computational) m.matrix().diagonal().setConstant(true);
  for (const auto& layout : goyeneche_layout(d, r)) {
    for (const auto& p : layout.pairs) m(p.first, p.second) = m(p.second, p.first) = true;
  }
  return m;
}

inline PartialMatrix extract_goyeneche(const BasisSet& bs, const std::vector<RVector>& probs) {
  if (bs.provenance.construction != "goyeneche") {
    fail(ErrorKind::invalid_argument,
         "extract_goyeneche needs goyeneche bases, got '" + bs.provenance.construction + "'");
  }
  const auto d = bs.dim;
  const auto r = static_cast<Eigen::Index>(bs.provenance.rank);
  if (bs.size() != static_cast<std::size_t>(4 * r + 1) || probs.size() != bs.size()) {
    fail(ErrorKind::dimension_mismatch, "need 4r+1 bases and one probability vector per basis");
  }
  for (const auto& v : probs) {
    if (v.size() != d) fail(ErrorKind::dimension_mismatch, "probability vector has wrong length");
  }
  PartialMatrix out(d);
  for (Eigen::Index i = 0; i < d; ++i) out.set(i, i, probs[0](i));
  const auto layouts = goyeneche_layout(d, r);
  for (std::size_t q = 0; q < layouts.size(); ++q) {
    const auto& lay = layouts[q];
    if (lay.y_type) continue;
    // x-type basis q pairs with the y-type basis two positions later.
    const RVector& px = probs[q + 1];
    const RVector& py = probs[q + 3];
    for (std::size_t c = 0; c < lay.pairs.size(); ++c) {
      const auto col = static_cast<Eigen::Index>(2 * c);
      const double re = 0.5 * (px(col) - px(col + 1));
      const double im = -0.5 * (py(col) - py(col + 1));
      out.set(lay.pairs[c].first, lay.pairs[c].second, Complex(re, im));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Strictness checks.

/// Sufficient condition for strict completeness: a rank-complete measurement
/// that also determines every diagonal entry.
inline bool check_proposition1(const Mask& measured, bool rank_complete) {
  if (!rank_complete) return false;
  if (measured.rows() != measured.cols()) return false;
  for (Eigen::Index i = 0; i < measured.rows(); ++i) {
    if (!measured(i, i)) return false;
  }
  return true;
}

struct StrictnessWitness {
  HermitianMatrix rho;
  HermitianMatrix sigma;
};

struct StrictnessReport {
  bool falsified = false;
  std::optional<StrictnessWitness> witness;
  std::size_t kernel_dimension = 0;
  std::size_t trials_run = 0;
  /// Random kernel elements with min(n-, n+) <= r. Diagnostic only: a
  /// traceless element can have few negative eigenvalues and still never be
  /// addable to a rank-r state.
  std::size_t inertia_violations = 0;
};

struct StrictnessSearchConfig {
  double step = 0.05;             // distance pushed along the kernel direction
  double witness_residual = 1e-10;  // max measurement mismatch of a witness
  SolverConfig solver{20000, 1e-12};
};

/// Randomized search for a PSD sigma != rho with the same measurement vector
/// as a random rank-r rho. Each trial picks rho and a random kernel direction
/// U, then minimizes ||M[X] - M[rho]||^2 + (<U, X> - <U, rho> - step)^2 over
/// X >= 0. A (numerically) zero minimum yields the witness sigma = X.
inline StrictnessReport falsify_strictness(const Povm& povm, Eigen::Index r, std::size_t trials,
                                           RandomStream& rng,
                                           const StrictnessSearchConfig& cfg = {}) {
  require(trials >= 1, "falsification needs at least one trial");
  const Eigen::Index d = povm.dim();
  require(r >= 1 && r <= d, "rank must satisfy 1 <= r <= d");
  StrictnessReport rep;
  const auto kernel = kernel_basis(povm);
  rep.kernel_dimension = kernel.size();
  if (kernel.empty()) return rep;

  const MeasurementOperator op(povm);
  const Eigen::Index n = d * d;
  RMatrix kcoords(n, static_cast<Eigen::Index>(kernel.size()));
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    kcoords.col(static_cast<Eigen::Index>(i)) = to_coordinates(kernel[i].matrix());
  }
  RMatrix phi(op.outcomes() + 1, n);
  phi.topRows(op.outcomes()) = op.matrix();
  const detail::PsdProjection psd{d};

  for (std::size_t t = 0; t < trials; ++t) {
    rep.trials_run = t + 1;
    RVector c(kcoords.cols());
    for (auto& x : c) x = rng.normal();
    c.normalize();
    const RVector u = kcoords * c;

    const Inertia in = inertia(from_coordinates(u, d), 1e-8);
    if (std::min(in.n_minus, in.n_plus) <= static_cast<std::size_t>(r)) ++rep.inertia_violations;

    const HermitianMatrix rho = random_rank_state(d, r, rng);
    const RVector x0 = to_coordinates(rho.matrix());
    phi.row(op.outcomes()) = u.transpose();
    RVector f = phi * x0;
    f(op.outcomes()) += cfg.step;
    const detail::LeastSquaresObjective obj{phi, f, 1.0, nullptr,
                                            detail::operator_norm_squared(phi)};
    const auto sol = accelerated_projected_gradient(obj, psd, x0, cfg.solver);
    const RVector mismatch = op.matrix() * (sol.x - x0);
    const double shift = u.dot(sol.x - x0);
    if (mismatch.norm() <= cfg.witness_residual && shift >= 0.5 * cfg.step) {
      rep.falsified = true;
      rep.witness = StrictnessWitness{rho, HermitianMatrix::hermitize(from_coordinates(sol.x, d))};
      break;
    }
  }
  return rep;
}

}  // namespace brqst
