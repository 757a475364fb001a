#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brqst/hermitian.hpp"
#include "brqst/random.hpp"

namespace brqst {

/// Where a measurement came from. Builders fill the fields relevant to their
/// construction; everything else keeps its default.
struct Provenance {
  std::string construction = "custom";
  std::size_t rank = 0;
  std::vector<double> a;  // flammia diagonal weights a_k
  std::vector<double> b;  // flammia off-diagonal weights b_k
  std::size_t sequential_index = 0;
  /// Element index ranges [begin, end), each forming one weighted basis.
  std::vector<std::pair<std::size_t, std::size_t>> basis_groups;
  std::optional<std::uint64_t> seed;
  std::string note;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

class Povm {
 public:
  Povm() = default;
  Povm(std::vector<HermitianMatrix> elements, Provenance provenance = {})
      : elements_(std::move(elements)), provenance_(std::move(provenance)) {
    require(!elements_.empty(), "a POVM needs at least one element");
    for (const auto& e : elements_) {
      if (e.dim() != elements_.front().dim()) {
        fail(ErrorKind::dimension_mismatch, "POVM elements differ in dimension");
      }
    }
  }

  Eigen::Index dim() const { return elements_.empty() ? 0 : elements_.front().dim(); }
  std::size_t size() const { return elements_.size(); }
  const std::vector<HermitianMatrix>& elements() const { return elements_; }
  const HermitianMatrix& operator[](std::size_t i) const { return elements_[i]; }
  const Provenance& provenance() const { return provenance_; }

 private:
  std::vector<HermitianMatrix> elements_;
  Provenance provenance_;
};

enum class MeasurementKind { ideal_probabilities, empirical_frequencies };

struct MeasurementVector {
  RVector values;
  MeasurementKind kind = MeasurementKind::ideal_probabilities;
  std::optional<std::uint64_t> total_shots;
};

/// Orthonormal bases stored as unitaries whose columns are the basis states.
struct BasisSet {
  Eigen::Index dim = 0;
  std::vector<CMatrix> bases;
  Provenance provenance;

  std::size_t size() const { return bases.size(); }
};

// ---------------------------------------------------------------------------
// Real coordinates of Hermitian matrices.
//
// Orthonormal (Hilbert-Schmidt) basis: E_jj, then for each j < k the pair
// (E_jk + E_kj)/sqrt2 and i(E_jk - E_kj)/sqrt2. Tr(A B) equals the dot product
// of coordinate vectors.

inline RVector to_coordinates(const CMatrix& h) {
  const Eigen::Index d = h.rows();
  RVector x(d * d);
  const double s2 = std::sqrt(2.0);
  Eigen::Index p = 0;
  for (Eigen::Index j = 0; j < d; ++j) x(p++) = h(j, j).real();
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j + 1; k < d; ++k) {
      x(p++) = s2 * h(j, k).real();
      x(p++) = s2 * h(j, k).imag();
    }
  }
  return x;
}

inline CMatrix from_coordinates(const RVector& x, Eigen::Index d) {
  CMatrix h(d, d);
  const double s = 1.0 / std::sqrt(2.0);
  Eigen::Index p = 0;
  for (Eigen::Index j = 0; j < d; ++j) h(j, j) = x(p++);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j + 1; k < d; ++k) {
      const Complex v(s * x(p), s * x(p + 1));
      p += 2;
      h(j, k) = v;
      h(k, j) = std::conj(v);
    }
  }
  return h;
}

/// Coordinates of the identity (ones on the diagonal block).
inline RVector identity_coordinates(Eigen::Index d) {
  RVector x = RVector::Zero(d * d);
  x.head(d).setOnes();
  return x;
}

/// The linear measurement map X -> (Tr(E_mu X))_mu as a real m x d^2 matrix.
class MeasurementOperator {
 public:
  explicit MeasurementOperator(const Povm& povm)
      : dim_(povm.dim()), phi_(povm.size(), povm.dim() * povm.dim()) {
    for (std::size_t mu = 0; mu < povm.size(); ++mu) {
      phi_.row(static_cast<Eigen::Index>(mu)) = to_coordinates(povm[mu].matrix()).transpose();
    }
  }

  Eigen::Index dim() const { return dim_; }
  Eigen::Index outcomes() const { return phi_.rows(); }
  const RMatrix& matrix() const { return phi_; }

  RVector apply(const RVector& x) const { return phi_ * x; }
  RVector adjoint(const RVector& y) const { return phi_.transpose() * y; }

 private:
  Eigen::Index dim_;
  RMatrix phi_;
};

inline MeasurementVector apply_measurement_map(const Povm& povm, const HermitianMatrix& x) {
  if (povm.dim() != x.dim()) {
    fail(ErrorKind::dimension_mismatch,
         "POVM acts on dim " + std::to_string(povm.dim()) + " but matrix has dim " +
             std::to_string(x.dim()));
  }
  MeasurementVector out;
  out.values.resize(static_cast<Eigen::Index>(povm.size()));
  for (std::size_t mu = 0; mu < povm.size(); ++mu) {
    const Complex t = (povm[mu].matrix().array() * x.matrix().transpose().array()).sum();
    if (std::abs(t.imag()) > 1e-10) {
      fail(ErrorKind::invalid_argument, "measurement value has imaginary part " +
                                            std::to_string(t.imag()));
    }
    out.values(static_cast<Eigen::Index>(mu)) = t.real();
  }
  return out;
}

struct PovmReport {
  bool is_valid = false;
  double min_eigenvalue = 0.0;
  double identity_residual = 0.0;  // max |sum E - I| entrywise
};

inline PovmReport validate_povm(const Povm& povm, double tol = 1e-10) {
  PovmReport rep;
  const Eigen::Index d = povm.dim();
  CMatrix sum = CMatrix::Zero(d, d);
  double min_eig = std::numeric_limits<double>::infinity();
  for (const auto& e : povm.elements()) {
    min_eig = std::min(min_eig, min_eigenvalue(e));
    sum += e.matrix();
  }
  rep.min_eigenvalue = min_eig;
  rep.identity_residual = (sum - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff();
  rep.is_valid = min_eig >= -tol && rep.identity_residual <= tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Rank-r element-probing POVM generalizing the pure-state construction with
// one diagonal probe and 2(d-1-k) off-diagonal probes per leading row k.

struct FlammiaWeights {
  std::vector<double> a;
  std::vector<double> b;
};

namespace detail {

inline CMatrix basis_outer(Eigen::Index d, Eigen::Index i, Eigen::Index j, Complex v) {
  CMatrix m = CMatrix::Zero(d, d);
  m(i, j) = v;
  return m;
}

inline CMatrix flammia_real_probe(Eigen::Index d, Eigen::Index k, Eigen::Index n) {
  return CMatrix::Identity(d, d) + basis_outer(d, k, n, 1.0) + basis_outer(d, n, k, 1.0);
}

inline CMatrix flammia_imag_probe(Eigen::Index d, Eigen::Index k, Eigen::Index n) {
  const Complex i(0.0, 1.0);
  return CMatrix::Identity(d, d) + basis_outer(d, k, n, -i) + basis_outer(d, n, k, i);
}

/// Sum of the unit-weight probes of row k: |k><k| + sum_n (real + imag probes).
inline CMatrix flammia_row_sum(Eigen::Index d, Eigen::Index k, double a_over_b) {
  CMatrix s = a_over_b * basis_outer(d, k, k, 1.0);
  for (Eigen::Index n = k + 1; n < d; ++n) {
    s += flammia_real_probe(d, k, n) + flammia_imag_probe(d, k, n);
  }
  return s;
}

/// Largest b in (0, 1/(2d)] with I - b*S positive semidefinite.
inline double bisect_weight(const CMatrix& s, Eigen::Index d) {
  const auto feasible = [&](double b) {
    const CMatrix res = CMatrix::Identity(d, d) - b * s;
    return eigenvalues(res)(0) >= 0.0;
  };
  double hi = 1.0 / (2.0 * static_cast<double>(d));
  if (feasible(hi)) return hi;
  double lo = 0.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

inline void append_flammia_row(std::vector<HermitianMatrix>& out, Eigen::Index d,
                               Eigen::Index k, double a, double b) {
  out.push_back(HermitianMatrix::hermitize(a * basis_outer(d, k, k, 1.0)));
  for (Eigen::Index n = k + 1; n < d; ++n) {
    out.push_back(HermitianMatrix::hermitize(b * flammia_real_probe(d, k, n)));
  }
  for (Eigen::Index n = k + 1; n < d; ++n) {
    out.push_back(HermitianMatrix::hermitize(b * flammia_imag_probe(d, k, n)));
  }
}

inline HermitianMatrix residual_element(const std::vector<HermitianMatrix>& elems,
                                        Eigen::Index d) {
  CMatrix rest = CMatrix::Identity(d, d);
  for (const auto& e : elems) rest -= e.matrix();
  return HermitianMatrix::hermitize(rest);
}

}  // namespace detail

/// Element positions inside a rank-r Flammia POVM.
struct FlammiaLayout {
  Eigen::Index d;
  Eigen::Index r;

  std::size_t row_offset(Eigen::Index k) const {
    std::size_t off = 0;
    for (Eigen::Index q = 0; q < k; ++q) off += 1 + 2 * static_cast<std::size_t>(d - 1 - q);
    return off;
  }
  std::size_t diagonal(Eigen::Index k) const { return row_offset(k); }
  std::size_t real_probe(Eigen::Index k, Eigen::Index n) const {
    return row_offset(k) + 1 + static_cast<std::size_t>(n - k - 1);
  }
  std::size_t imag_probe(Eigen::Index k, Eigen::Index n) const {
    return row_offset(k) + 1 + static_cast<std::size_t>(d - 1 - k) +
           static_cast<std::size_t>(n - k - 1);
  }
  std::size_t residual() const { return row_offset(r); }
  std::size_t size() const { return residual() + 1; }
};

/// Rank-r Flammia POVM with (2d - r) r + 1 elements measuring the first r rows
/// and columns. Default weights: a_k = b_k = b, the largest b <= 1/(2d) that
/// keeps the final element positive semidefinite.
inline Povm build_flammia_rankr(Eigen::Index d, Eigen::Index r,
                                std::optional<FlammiaWeights> weights = std::nullopt) {
  require(d >= 2, "flammia construction needs d >= 2");
  require(r >= 1 && r < d, "flammia construction needs 1 <= r < d");
  FlammiaWeights w;
  if (weights) {
    w = *weights;
    require(w.a.size() == static_cast<std::size_t>(r) && w.b.size() == static_cast<std::size_t>(r),
            "flammia weights need one (a_k, b_k) pair per row");
  } else {
    CMatrix s = CMatrix::Zero(d, d);
    for (Eigen::Index k = 0; k < r; ++k) s += detail::flammia_row_sum(d, k, 1.0);
    const double b = detail::bisect_weight(s, d);
    w.a.assign(static_cast<std::size_t>(r), b);
    w.b.assign(static_cast<std::size_t>(r), b);
  }
  std::vector<HermitianMatrix> elems;
  for (Eigen::Index k = 0; k < r; ++k) {
    detail::append_flammia_row(elems, d, k, w.a[static_cast<std::size_t>(k)],
                               w.b[static_cast<std::size_t>(k)]);
  }
  elems.push_back(detail::residual_element(elems, d));
  Provenance prov;
  prov.construction = "flammia";
  prov.rank = static_cast<std::size_t>(r);
  prov.a = w.a;
  prov.b = w.b;
  prov.note = "strict via inertia argument";
  return Povm(std::move(elems), std::move(prov));
}

/// The same measurement split into r POVMs; the k-th has 2(d - k) elements.
inline std::vector<Povm> build_flammia_sequential(Eigen::Index d, Eigen::Index r) {
  require(d >= 2, "flammia construction needs d >= 2");
  require(r >= 1 && r < d, "flammia construction needs 1 <= r < d");
  std::vector<Povm> out;
  for (Eigen::Index k = 0; k < r; ++k) {
    const double b = detail::bisect_weight(detail::flammia_row_sum(d, k, 1.0), d);
    std::vector<HermitianMatrix> elems;
    detail::append_flammia_row(elems, d, k, b, b);
    elems.push_back(detail::residual_element(elems, d));
    Provenance prov;
    prov.construction = "flammia_sequential";
    prov.rank = static_cast<std::size_t>(r);
    prov.sequential_index = static_cast<std::size_t>(k);
    prov.a = {b};
    prov.b = {b};
    out.emplace_back(std::move(elems), std::move(prov));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rank-r Goyeneche bases for power-of-two dimensions.

struct IndexPair {
  Eigen::Index first;
  Eigen::Index second;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// One of the 4r non-computational bases: the union of two-dimensional x- or
/// y-type bases on disjoint index pairs.
struct GoyenecheBasisLayout {
  Eigen::Index k;      // diagonal being probed
  int group;           // 1 or 2
  bool y_type;         // false: (|m> +- |n>)/sqrt2, true: (|m> +- i|n>)/sqrt2
  std::vector<IndexPair> pairs;
};

inline bool is_power_of_two(Eigen::Index d) { return d >= 1 && (d & (d - 1)) == 0; }

/// Bases 1..4r in construction order: for each k, x-type group 1, x-type
/// group 2, y-type group 1, y-type group 2.
inline std::vector<GoyenecheBasisLayout> goyeneche_layout(Eigen::Index d, Eigen::Index r) {
  require(is_power_of_two(d) && d >= 2, "goyeneche bases need d a power of two (d >= 2)");
  require(r >= 1 && 2 * r <= d, "goyeneche bases need 1 <= r <= d/2");
  std::vector<GoyenecheBasisLayout> out;
  for (Eigen::Index k = 1; k <= r; ++k) {
    // v(k): the k-th diagonal rho_{j, j+k} followed by the wrapped (d-k)-th
    // diagonal, i.e. the pairs (j, j+k mod d) for j = 0..d-1.
    const Eigen::Index chunk = k & (-k);  // largest power of two dividing k
    std::vector<IndexPair> v1, v2;
    for (Eigen::Index j = 0; j < d; ++j) {
      const IndexPair p{j, (j + k) % d};
      ((j / chunk) % 2 == 0 ? v1 : v2).push_back(p);
    }
    out.push_back({k, 1, false, v1});
    out.push_back({k, 2, false, v2});
    out.push_back({k, 1, true, v1});
    out.push_back({k, 2, true, v2});
  }
  return out;
}

inline CMatrix goyeneche_basis(Eigen::Index d, const GoyenecheBasisLayout& layout) {
  CMatrix u = CMatrix::Zero(d, d);
  const double s = 1.0 / std::sqrt(2.0);
  const Complex phase = layout.y_type ? Complex(0.0, 1.0) : Complex(1.0, 0.0);
  Eigen::Index col = 0;
  for (const auto& p : layout.pairs) {
    u(p.first, col) = s;
    u(p.second, col) = s * phase;
    ++col;
    u(p.first, col) = s;
    u(p.second, col) = -s * phase;
    ++col;
  }
  return u;
}

/// 4r + 1 bases: the computational basis followed by the 4r pair bases.
inline BasisSet build_goyeneche_bases(Eigen::Index d, Eigen::Index r) {
  BasisSet bs;
  bs.dim = d;
  bs.bases.push_back(CMatrix::Identity(d, d));
  for (const auto& layout : goyeneche_layout(d, r)) bs.bases.push_back(goyeneche_basis(d, layout));
  bs.provenance.construction = "goyeneche";
  bs.provenance.rank = static_cast<std::size_t>(r);
  return bs;
}

inline BasisSet build_random_bases(Eigen::Index d, std::size_t count, RandomStream& rng) {
  require(d >= 1, "basis dimension must be >= 1");
  require(count >= 1, "need at least one basis");
  BasisSet bs;
  bs.dim = d;
  for (std::size_t i = 0; i < count; ++i) bs.bases.push_back(random_haar_unitary(d, rng));
  bs.provenance.construction = "haar_global";
  bs.provenance.seed = rng.seed();
  return bs;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Tensor products of independent single-qubit Haar unitaries.
inline BasisSet build_local_random_bases(std::size_t n_qubits, std::size_t count,
                                         RandomStream& rng) {
  require(n_qubits >= 1 && n_qubits <= 20, "qubit count must be in 1..20");
  require(count >= 1, "need at least one basis");
  BasisSet bs;
  bs.dim = Eigen::Index{1} << n_qubits;
  for (std::size_t i = 0; i < count; ++i) {
    CMatrix u = random_haar_unitary(2, rng);
    for (std::size_t q = 1; q < n_qubits; ++q) u = kron(u, random_haar_unitary(2, rng));
    bs.bases.push_back(std::move(u));
  }
  bs.provenance.construction = "haar_local_qubits";
  bs.provenance.seed = rng.seed();
  return bs;
}

/// Single POVM measuring one of the bases uniformly at random: element (i, k)
/// is |u_ik><u_ik| / b. Provenance keeps the per-basis index ranges.
inline Povm bases_to_povm(const BasisSet& bs) {
  require(!bs.bases.empty(), "basis set is empty");
  const double w = 1.0 / static_cast<double>(bs.size());
  std::vector<HermitianMatrix> elems;
  Provenance prov = bs.provenance;
  for (const auto& u : bs.bases) {
    if (u.rows() != bs.dim || u.cols() != bs.dim) {
      fail(ErrorKind::dimension_mismatch, "basis has the wrong dimension");
    }
    const std::size_t begin = elems.size();
    for (Eigen::Index k = 0; k < bs.dim; ++k) {
      elems.push_back(HermitianMatrix::hermitize(w * u.col(k) * u.col(k).adjoint()));
    }
    prov.basis_groups.emplace_back(begin, elems.size());
  }
  return Povm(std::move(elems), std::move(prov));
}

/// Per-basis probability vectors of a state (each sums to Tr rho).
inline std::vector<RVector> basis_probabilities(const BasisSet& bs, const HermitianMatrix& rho) {
  if (bs.dim != rho.dim()) fail(ErrorKind::dimension_mismatch, "basis set and state differ in dim");
  std::vector<RVector> out;
  for (const auto& u : bs.bases) {
    out.push_back((u.adjoint() * rho.matrix() * u).diagonal().real());
  }
  return out;
}

/// Orthonormal (Hilbert-Schmidt) basis of the Hermitian null space of the
/// measurement map. Singular values below tol * sigma_max count as zero.
inline std::vector<HermitianMatrix> kernel_basis(const Povm& povm, double tol = 1e-10) {
  const MeasurementOperator op(povm);
  const Eigen::Index n = op.matrix().cols();
  Eigen::BDCSVD<RMatrix> svd(op.matrix(), Eigen::ComputeFullV);
  const RVector& s = svd.singularValues();
  const double cut = tol * (s.size() > 0 ? s(0) : 0.0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > cut) ++rank;
  std::vector<HermitianMatrix> out;
  for (Eigen::Index c = rank; c < n; ++c) {
    out.push_back(HermitianMatrix::hermitize(from_coordinates(svd.matrixV().col(c), povm.dim())));
  }
  return out;
}

}  // namespace brqst
