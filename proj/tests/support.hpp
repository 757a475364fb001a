#pragma once

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "brqst/hermitian.hpp"
#include "brqst/povm.hpp"
#include "brqst/random.hpp"

namespace brqst::test {

inline double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

inline CVector basis_vector(Eigen::Index d, Eigen::Index k) {
  CVector v = CVector::Zero(d);
  v(k) = 1.0;
  return v;
}

inline HermitianMatrix random_hermitian(Eigen::Index d, RandomStream& rng) {
  const CMatrix g = complex_gaussian(d, d, rng);
  return HermitianMatrix::hermitize(g + g.adjoint());
}

/// Projective measurement on the columns of `u`.
inline Povm basis_povm(const CMatrix& u) {
  std::vector<HermitianMatrix> e;
  for (Eigen::Index k = 0; k < u.cols(); ++k) e.push_back(HermitianMatrix::projector(u.col(k)));
  return Povm(std::move(e));
}

/// Pauli X, Y, Z eigenbases as a qubit basis set.
inline BasisSet pauli_bases() {
  const double s = 1.0 / std::sqrt(2.0);
  const Complex i(0.0, 1.0);
  BasisSet bs;
  bs.dim = 2;
  CMatrix x(2, 2), y(2, 2);
  x << s, s, s, -s;
  y << s, s, s * i, -s * i;
  bs.bases = {x, y, CMatrix::Identity(2, 2)};
  return bs;
}

/// Rank of the real measurement map computed independently of
/// `to_coordinates`: rows are the vectorized real and imaginary parts of each
/// element.
inline Eigen::Index measurement_rank_oracle(const Povm& povm) {
  const Eigen::Index d = povm.dim();
  RMatrix m(static_cast<Eigen::Index>(povm.size()), 2 * d * d);
  for (std::size_t i = 0; i < povm.size(); ++i) {
    const CMatrix& e = povm[i].matrix();
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = 0; b < d; ++b) {
        m(static_cast<Eigen::Index>(i), a * d + b) = e(a, b).real();
        m(static_cast<Eigen::Index>(i), d * d + a * d + b) = e(a, b).imag();
      }
    }
  }
  Eigen::JacobiSVD<RMatrix> svd(m);
  const RVector s = svd.singularValues();
  Eigen::Index rank = 0;
  for (double v : s) rank += v > 1e-10 * s(0) ? 1 : 0;
  return rank;
}

}  // namespace brqst::test
