#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include "brqst/error.hpp"

namespace brqst {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Relative zero-classification threshold used by inertia and rank when the
/// caller does not supply one.
inline constexpr double kDefaultZeroTolerance = 1e-10;

/// Dense complex Hermitian matrix. Hermiticity is checked on construction
/// (absolute tolerance) and the stored entries are then exactly Hermitian.
class HermitianMatrix {
 public:
  static constexpr double kHermiticityTolerance = 1e-12;

  HermitianMatrix() : data_(CMatrix::Zero(1, 1)) {}

  explicit HermitianMatrix(CMatrix m, double tol = kHermiticityTolerance) {
    if (m.rows() < 1 || m.rows() != m.cols()) {
      fail(ErrorKind::invalid_argument,
           "Hermitian matrix must be square with dim >= 1, got " +
               std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (!(asym <= tol)) {
      fail(ErrorKind::invalid_argument,
           "matrix is not Hermitian: max |H - H^dagger| = " +
               std::to_string(asym));
    }
    data_ = 0.5 * (m + m.adjoint());
  }

  /// Symmetrizes without checking; for values produced by Hermitian-preserving
  /// arithmetic that only carry rounding asymmetry.
  static HermitianMatrix hermitize(const CMatrix& m) {
    HermitianMatrix h;
    h.data_ = 0.5 * (m + m.adjoint());
    return h;
  }

  static HermitianMatrix identity(Eigen::Index dim) {
    return hermitize(CMatrix::Identity(dim, dim));
  }
  static HermitianMatrix zero(Eigen::Index dim) {
    return hermitize(CMatrix::Zero(dim, dim));
  }
  static HermitianMatrix diagonal(const RVector& diag) {
    return hermitize(diag.cast<Complex>().asDiagonal().toDenseMatrix());
  }
  static HermitianMatrix projector(const CVector& psi) {
    return hermitize(psi * psi.adjoint());
  }

  Eigen::Index dim() const { return data_.rows(); }
  const CMatrix& matrix() const { return data_; }
  Complex operator()(Eigen::Index i, Eigen::Index j) const { return data_(i, j); }
  double trace() const { return data_.trace().real(); }
  double frobenius_norm() const { return data_.norm(); }

  HermitianMatrix operator+(const HermitianMatrix& o) const {
    return hermitize(data_ + o.data_);
  }
  HermitianMatrix operator-(const HermitianMatrix& o) const {
    return hermitize(data_ - o.data_);
  }
  HermitianMatrix operator*(double s) const { return hermitize(data_ * s); }
  friend HermitianMatrix operator*(double s, const HermitianMatrix& h) {
    return h * s;
  }

 private:
  CMatrix data_;
};

/// Real inner product Tr(A B) of two Hermitian matrices.
inline double hs_inner(const CMatrix& a, const CMatrix& b) {
  // Tr(A B) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij) for Hermitian B.
  return (a.array() * b.array().conjugate()).sum().real();
}

struct EigenDecomposition {
  RVector values;  // ascending
  CMatrix vectors;  // columns are eigenvectors
};

inline EigenDecomposition eig_hermitian(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
  if (solver.info() != Eigen::Success) {
    fail(ErrorKind::eigen_failure,
         "Hermitian eigensolver did not converge for a " +
             std::to_string(h.rows()) + "x" + std::to_string(h.rows()) +
             " matrix");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

inline EigenDecomposition eig_hermitian(const HermitianMatrix& h) {
  return eig_hermitian(h.matrix());
}

inline RVector eigenvalues(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    fail(ErrorKind::eigen_failure,
         "Hermitian eigensolver did not converge for a " +
             std::to_string(h.rows()) + "x" + std::to_string(h.rows()) +
             " matrix");
  }
  return solver.eigenvalues();
}

struct Inertia {
  std::size_t n_minus = 0;
  std::size_t n_zero = 0;
  std::size_t n_plus = 0;

  std::size_t dim() const { return n_minus + n_zero + n_plus; }
  std::size_t rank() const { return n_minus + n_plus; }

  friend Inertia operator+(const Inertia& a, const Inertia& b) {
    return {a.n_minus + b.n_minus, a.n_zero + b.n_zero, a.n_plus + b.n_plus};
  }
  friend bool operator==(const Inertia&, const Inertia&) = default;
};

inline Inertia inertia_of_spectrum(const RVector& values,
                                   double tol = kDefaultZeroTolerance) {
  require(tol >= 0.0, "inertia tolerance must be nonnegative");
  const double scale =
      values.size() == 0 ? 1.0 : std::max(1.0, values.cwiseAbs().maxCoeff());
  const double cut = tol * scale;
  Inertia in;
  for (double v : values) {
    if (std::abs(v) <= cut) {
      ++in.n_zero;
    } else if (v < 0) {
      ++in.n_minus;
    } else {
      ++in.n_plus;
    }
  }
  return in;
}

inline Inertia inertia(const CMatrix& h, double tol = kDefaultZeroTolerance) {
  return inertia_of_spectrum(eigenvalues(h), tol);
}

inline Inertia inertia(const HermitianMatrix& h,
                       double tol = kDefaultZeroTolerance) {
  return inertia(h.matrix(), tol);
}

inline std::size_t numerical_rank(const HermitianMatrix& h,
                                  double tol = kDefaultZeroTolerance) {
  return inertia(h, tol).rank();
}

/// Schur complement of M with respect to its leading r x r block A:
/// M / A = C - B A^{-1} B^dagger for M = [[A, B^dagger], [B, C]].
inline HermitianMatrix schur_complement(const HermitianMatrix& m, Eigen::Index r,
                                        double tol = kDefaultZeroTolerance) {
  const Eigen::Index d = m.dim();
  require(r >= 1 && r < d, "Schur complement block size must satisfy 1 <= r < dim");
  const CMatrix a = m.matrix().topLeftCorner(r, r);
  if (inertia(a, tol).rank() != static_cast<std::size_t>(r)) {
    throw FailureSetError(0, "Schur complement is not defined: leading " +
                                 std::to_string(r) + "x" + std::to_string(r) +
                                 " block is singular");
  }
  const CMatrix b = m.matrix().bottomLeftCorner(d - r, r);
  const CMatrix c = m.matrix().bottomRightCorner(d - r, d - r);
  const CMatrix a_inv_bh = a.fullPivLu().solve(b.adjoint());
  return HermitianMatrix::hermitize(c - b * a_inv_bh);
}

/// Euclidean projection of v onto {w >= 0, sum w = total}.
inline RVector project_simplex(const RVector& v, double total = 1.0) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double running = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    running += u[j];
    const double candidate = (running - total) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).max(0.0);
}

inline CMatrix reconstruct(const CMatrix& vectors, const RVector& values) {
  return vectors * values.asDiagonal() * vectors.adjoint();
}

inline CMatrix project_psd(const CMatrix& h) {
  const auto e = eig_hermitian(h);
  const CMatrix out = reconstruct(e.vectors, e.values.cwiseMax(0.0));
  return 0.5 * (out + out.adjoint());
}

inline HermitianMatrix project_psd(const HermitianMatrix& h) {
  return HermitianMatrix::hermitize(project_psd(h.matrix()));
}

/// Nearest (Frobenius) PSD matrix with the given trace.
inline CMatrix project_spectraplex(const CMatrix& h, double total) {
  const auto e = eig_hermitian(h);
  const CMatrix out = reconstruct(e.vectors, project_simplex(e.values, total));
  return 0.5 * (out + out.adjoint());
}

inline HermitianMatrix project_density(const HermitianMatrix& h) {
  return HermitianMatrix::hermitize(project_spectraplex(h.matrix(), 1.0));
}

/// <psi|rho|psi> for a normalized pure target and a density matrix.
inline double fidelity_pure(const CVector& psi, const HermitianMatrix& rho) {
  if (psi.size() != rho.dim()) {
    fail(ErrorKind::dimension_mismatch, "state and density matrix dimensions differ");
  }
  if (std::abs(psi.norm() - 1.0) > 1e-12) {
    fail(ErrorKind::invalid_argument, "pure state is not normalized");
  }
  if (std::abs(rho.trace() - 1.0) > 1e-8 ||
      eigenvalues(rho.matrix()).minCoeff() < -1e-8) {
    fail(ErrorKind::invalid_argument, "rho is not a density matrix");
  }
  const double f = (psi.adjoint() * rho.matrix() * psi)(0, 0).real();
  return std::clamp(f, 0.0, 1.0);
}

/// Uhlmann fidelity [Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2.
inline double fidelity(const HermitianMatrix& rho, const HermitianMatrix& sigma) {
  if (rho.dim() != sigma.dim()) {
    fail(ErrorKind::dimension_mismatch, "fidelity arguments differ in dimension");
  }
  const auto e = eig_hermitian(rho);
  const CMatrix sqrt_rho =
      reconstruct(e.vectors, e.values.cwiseMax(0.0).cwiseSqrt());
  CMatrix inner = sqrt_rho * sigma.matrix() * sqrt_rho;
  inner = 0.5 * (inner + inner.adjoint());
  // Round-off eigenvalues near zero would otherwise contribute ~sqrt(1e-16).
  RVector lam = eigenvalues(inner);
  const double floor = 1e-13 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  lam = (lam.array() > floor).select(lam, 0.0);
  const double root_sum = lam.cwiseSqrt().sum();
  return std::clamp(root_sum * root_sum, 0.0, 1.0);
}

inline double frobenius_distance(const HermitianMatrix& a, const HermitianMatrix& b) {
  return (a.matrix() - b.matrix()).norm();
}

inline double min_eigenvalue(const HermitianMatrix& h) {
  return eigenvalues(h.matrix())(0);
}

}  // namespace brqst
