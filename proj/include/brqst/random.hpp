#pragma once

#include <cstdint>
#include <random>

#include "brqst/hermitian.hpp"

namespace brqst {

/// Reproducible random source identified by (seed, stream_id). Two streams
/// with the same pair produce identical draws regardless of where or on which
/// thread they are consumed.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Independent child stream; the same (parent, child) pair always maps to
  /// the same stream.
  RandomStream derive(std::uint64_t child) const {
    return RandomStream(seed_, mix(stream_id_ ^ mix(child + 0x9e3779b97f4a7c15ULL)));
  }

  double normal() { return normal_(engine_); }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::uint64_t binomial(std::uint64_t trials, double p) {
    if (trials == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    return std::binomial_distribution<std::uint64_t>(trials, p)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Matrix of i.i.d. standard complex Gaussians (real and imaginary parts
/// N(0, 1/2)).
inline CMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, RandomStream& rng) {
  CMatrix g(rows, cols);
  const double s = std::sqrt(0.5);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      g(i, j) = Complex(s * re, s * im);
    }
  }
  return g;
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of R's
/// diagonal moved into Q.
inline CMatrix random_haar_unitary(Eigen::Index d, RandomStream& rng) {
  require(d >= 1, "unitary dimension must be >= 1");
  const CMatrix z = complex_gaussian(d, d, rng);
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ() * CMatrix::Identity(d, d);
  const CMatrix& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < d; ++j) {
    const Complex rjj = r(j, j);
    const double mag = std::abs(rjj);
    q.col(j) *= mag > 0.0 ? rjj / mag : Complex(1.0, 0.0);
  }
  return q;
}

inline CVector random_pure_state(Eigen::Index d, RandomStream& rng) {
  return random_haar_unitary(d, rng).col(0);
}

/// Full-rank state from the Hilbert-Schmidt measure: G G^dagger / Tr.
inline HermitianMatrix random_mixed_hs(Eigen::Index d, RandomStream& rng) {
  require(d >= 1, "state dimension must be >= 1");
  const CMatrix g = complex_gaussian(d, d, rng);
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return HermitianMatrix::hermitize(rho);
}

/// Rank-r state Psi Psi^dagger / Tr with Psi the first r columns of a Haar
/// unitary scaled by i.i.d. uniform(0.2, 1) weights.
inline HermitianMatrix random_rank_state(Eigen::Index d, Eigen::Index r, RandomStream& rng) {
  require(r >= 1 && r <= d, "state rank must satisfy 1 <= r <= d");
  const CMatrix u = random_haar_unitary(d, rng);
  CMatrix psi = u.leftCols(r);
  for (Eigen::Index k = 0; k < r; ++k) psi.col(k) *= rng.uniform(0.2, 1.0);
  CMatrix rho = psi * psi.adjoint();
  rho /= rho.trace().real();
  return HermitianMatrix::hermitize(rho);
}

}  // namespace brqst
