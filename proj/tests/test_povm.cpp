#include <gtest/gtest.h>

#include "brqst/povm.hpp"
#include "support.hpp"

namespace brqst {
namespace {

using test::max_abs;

TEST(Coordinates, RoundTripAndInnerProduct) {
  RandomStream rng(1);
  for (Eigen::Index d = 1; d <= 6; ++d) {
    const HermitianMatrix a = test::random_hermitian(d, rng);
    const HermitianMatrix b = test::random_hermitian(d, rng);
    const RVector xa = to_coordinates(a.matrix());
    EXPECT_EQ(xa.size(), d * d);
    EXPECT_LE(max_abs(from_coordinates(xa, d) - a.matrix()), 1e-14);
    EXPECT_NEAR(xa.dot(to_coordinates(b.matrix())), (a.matrix() * b.matrix()).trace().real(), 1e-12);
  }
}

TEST(MeasurementMap, Examples) {
  RandomStream rng(2);
  const HermitianMatrix rho = random_mixed_hs(3, rng);
  const auto one = apply_measurement_map(Povm({HermitianMatrix::identity(3)}), rho);
  ASSERT_EQ(one.values.size(), 1);
  EXPECT_NEAR(one.values(0), 1.0, 1e-14);

  const auto comp = apply_measurement_map(test::basis_povm(CMatrix::Identity(5, 5)),
                                          HermitianMatrix::hermitize(CMatrix::Identity(5, 5) / 5.0));
  for (double v : comp.values) EXPECT_NEAR(v, 0.2, 1e-15);

  const Povm f = build_flammia_rankr(4, 1);
  const double a = f.provenance().a.at(0);
  const auto p = apply_measurement_map(f, HermitianMatrix::projector(test::basis_vector(4, 0)));
  EXPECT_NEAR(p.values(0), a, 1e-15);
  EXPECT_NEAR(f[0](0, 0).real(), a, 1e-15);
}

TEST(MeasurementMap, DimensionMismatch) {
  EXPECT_THROW(apply_measurement_map(build_flammia_rankr(4, 1), HermitianMatrix::identity(3)), Error);
}

TEST(MeasurementMap, LinearityAndSumRule) {
  RandomStream rng(3);
  const Povm povm = build_flammia_rankr(6, 2);
  for (int t = 0; t < 20; ++t) {
    const HermitianMatrix x = test::random_hermitian(6, rng);
    const HermitianMatrix y = test::random_hermitian(6, rng);
    const double alpha = rng.normal(), beta = rng.normal();
    const RVector lhs = apply_measurement_map(povm, alpha * x + beta * y).values;
    const RVector rhs = alpha * apply_measurement_map(povm, x).values +
                        beta * apply_measurement_map(povm, y).values;
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(apply_measurement_map(povm, x).values.sum(), x.trace(), 1e-10);
  }
}

TEST(MeasurementOperator, AdjointIdentity) {
  RandomStream rng(4);
  const Povm povm = build_flammia_rankr(5, 2);
  const MeasurementOperator op(povm);
  const RVector x = to_coordinates(test::random_hermitian(5, rng).matrix());
  RVector y(static_cast<Eigen::Index>(povm.size()));
  for (auto& v : y) v = rng.normal();
  EXPECT_NEAR(op.apply(x).dot(y), x.dot(op.adjoint(y)), 1e-11);
}

TEST(ValidatePovm, Examples) {
  EXPECT_TRUE(validate_povm(test::basis_povm(CMatrix::Identity(3, 3))).is_valid);
  const auto bad = validate_povm(Povm({HermitianMatrix::identity(2), HermitianMatrix::identity(2)}));
  EXPECT_FALSE(bad.is_valid);
  EXPECT_NEAR(bad.identity_residual, 1.0, 1e-15);
  const auto f = validate_povm(build_flammia_rankr(8, 2), 1e-8);
  EXPECT_TRUE(f.is_valid);
}

TEST(Flammia, ElementCounts) {
  EXPECT_EQ(build_flammia_rankr(4, 1).size(), 8u);
  EXPECT_EQ(build_flammia_rankr(8, 2).size(), 29u);
  const Povm q = build_flammia_rankr(2, 1);
  EXPECT_EQ(q.size(), 4u);
  EXPECT_TRUE(validate_povm(q, 1e-10).is_valid);
  EXPECT_THROW(build_flammia_rankr(4, 4), Error);
  EXPECT_THROW(build_flammia_rankr(4, 0), Error);
}

TEST(Flammia, AllValidAcrossSizes) {
  for (Eigen::Index d = 2; d <= 9; ++d) {
    for (Eigen::Index r = 1; r < d; ++r) {
      const Povm p = build_flammia_rankr(d, r);
      EXPECT_EQ(p.size(), static_cast<std::size_t>((2 * d - r) * r + 1));
      EXPECT_TRUE(validate_povm(p, 1e-8).is_valid) << d << "," << r;
      EXPECT_EQ(p.provenance().construction, "flammia");
    }
  }
}

// The final element is PSD with weight b and stops being PSD a little above
// it: b is the bisected maximum.
TEST(Flammia, WeightIsMaximal) {
  const Povm p = build_flammia_rankr(5, 2);
  const double b = p.provenance().b.at(0);
  EXPECT_LE(b, 1.0 / 10.0 + 1e-15);
  EXPECT_GE(min_eigenvalue(p.elements().back()), -1e-10);
  FlammiaWeights w;
  w.a = std::vector<double>(2, b * 1.01);
  w.b = std::vector<double>(2, b * 1.01);
  if (b < 0.1 / 1.01) EXPECT_FALSE(validate_povm(build_flammia_rankr(5, 2, w), 1e-10).is_valid);
}

TEST(Flammia, Sequential) {
  const auto one = build_flammia_sequential(8, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].size(), 16u);
  const auto three = build_flammia_sequential(8, 3);
  ASSERT_EQ(three.size(), 3u);
  EXPECT_EQ(three[0].size(), 16u);
  EXPECT_EQ(three[1].size(), 14u);
  EXPECT_EQ(three[2].size(), 12u);
  for (const auto& p : three) EXPECT_TRUE(validate_povm(p, 1e-8).is_valid);
}

TEST(Goyeneche, BasisCountsAndUnitarity) {
  EXPECT_EQ(build_goyeneche_bases(4, 1).size(), 5u);
  EXPECT_EQ(build_goyeneche_bases(8, 2).size(), 9u);
  for (Eigen::Index d : {2, 4, 8, 16}) {
    for (Eigen::Index r = 1; 2 * r <= d; ++r) {
      const BasisSet bs = build_goyeneche_bases(d, r);
      ASSERT_EQ(bs.size(), static_cast<std::size_t>(4 * r + 1));
      for (const auto& u : bs.bases) {
        EXPECT_LE(max_abs(u.adjoint() * u - CMatrix::Identity(d, d)), 1e-12);
      }
      EXPECT_TRUE(validate_povm(bases_to_povm(bs), 1e-8).is_valid);
    }
  }
  EXPECT_THROW(build_goyeneche_bases(6, 1), Error);
  EXPECT_THROW(build_goyeneche_bases(8, 5), Error);
}

// The four pair bases at d = 4, r = 1 written out by hand.
TEST(Goyeneche, FourBasesMatchHandWrittenVectors) {
  const BasisSet bs = build_goyeneche_bases(4, 1);
  const double s = 1.0 / std::sqrt(2.0);
  const Complex i(0.0, 1.0);
  const auto ket = [](Eigen::Index k) { return test::basis_vector(4, k); };
  const auto pair_basis = [&](std::vector<std::pair<int, int>> pairs, Complex phase) {
    CMatrix u(4, 4);
    Eigen::Index c = 0;
    for (auto [m, n] : pairs) {
      u.col(c++) = s * (ket(m) + phase * ket(n));
      u.col(c++) = s * (ket(m) - phase * ket(n));
    }
    return u;
  };
  const std::vector<CMatrix> expect = {
      pair_basis({{0, 1}, {2, 3}}, 1.0),
      pair_basis({{1, 2}, {3, 0}}, 1.0),
      pair_basis({{0, 1}, {2, 3}}, i),
      pair_basis({{1, 2}, {3, 0}}, i),
  };
  EXPECT_LE(max_abs(bs.bases[0] - CMatrix::Identity(4, 4)), 0.0);
  for (std::size_t q = 0; q < 4; ++q) EXPECT_LE(max_abs(bs.bases[q + 1] - expect[q]), 1e-15) << q;
}

TEST(Goyeneche, LayoutCoversEachPairOncePerType) {
  for (Eigen::Index d : {4, 8, 16}) {
    for (Eigen::Index r = 1; 2 * r <= d; ++r) {
      const auto layouts = goyeneche_layout(d, r);
      for (Eigen::Index k = 1; k <= r; ++k) {
        for (bool y : {false, true}) {
          Eigen::ArrayXi hits = Eigen::ArrayXi::Zero(d);
          for (const auto& l : layouts) {
            if (l.k != k || l.y_type != y) continue;
            for (const auto& p : l.pairs) {
              EXPECT_EQ((p.first + k) % d, p.second);
              ++hits(p.first);
            }
          }
          EXPECT_TRUE((hits == 1).all()) << "d=" << d << " k=" << k;
        }
      }
    }
  }
}

TEST(RandomBases, Shapes) {
  RandomStream rng(5);
  const BasisSet g = build_random_bases(5, 1, rng);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g.bases[0].rows(), 5);

  const BasisSet l = build_local_random_bases(3, 2, rng);
  ASSERT_EQ(l.size(), 2u);
  for (const auto& u : l.bases) {
    EXPECT_EQ(u.rows(), 8);
    EXPECT_LE(max_abs(u.adjoint() * u - CMatrix::Identity(8, 8)), 1e-12);
    // A 3-fold tensor product has operator-Schmidt rank 1 across the first
    // qubit: the reshaped 4 x 16 matrix has rank 1.
    CMatrix re(4, 16);
    for (Eigen::Index a = 0; a < 2; ++a)
      for (Eigen::Index b = 0; b < 2; ++b)
        for (Eigen::Index c = 0; c < 4; ++c)
          for (Eigen::Index e = 0; e < 4; ++e) re(2 * a + b, 4 * c + e) = u(4 * a + c, 4 * b + e);
    Eigen::JacobiSVD<CMatrix> svd(re);
    EXPECT_LE(svd.singularValues()(1), 1e-12 * svd.singularValues()(0));
  }
}

TEST(RandomBases, SeededDeterminism) {
  RandomStream a(9, 1), b(9, 1);
  const BasisSet x = build_random_bases(4, 3, a);
  const BasisSet y = build_random_bases(4, 3, b);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(x.bases[i], y.bases[i]);
}

TEST(BasesToPovm, Weights) {
  BasisSet one;
  one.dim = 3;
  one.bases = {CMatrix::Identity(3, 3)};
  const Povm p1 = bases_to_povm(one);
  ASSERT_EQ(p1.size(), 3u);
  EXPECT_NEAR(p1[1](1, 1).real(), 1.0, 1e-15);

  BasisSet two = test::pauli_bases();
  two.bases.pop_back();
  const Povm p2 = bases_to_povm(two);
  ASSERT_EQ(p2.size(), 4u);
  for (const auto& e : p2.elements()) EXPECT_NEAR(e.trace(), 0.5, 1e-15);
  EXPECT_TRUE(validate_povm(p2).is_valid);
  ASSERT_EQ(p2.provenance().basis_groups.size(), 2u);
  EXPECT_EQ(p2.provenance().basis_groups[1], (std::pair<std::size_t, std::size_t>{2, 4}));
}

TEST(Kernel, Examples) {
  EXPECT_EQ(kernel_basis(bases_to_povm(test::pauli_bases())).size(), 0u);
  EXPECT_EQ(kernel_basis(Povm({HermitianMatrix::identity(2)})).size(), 3u);
  EXPECT_EQ(kernel_basis(build_flammia_rankr(4, 1)).size(), 8u);
}

TEST(Kernel, DimensionMatchesIndependentRank) {
  RandomStream rng(6);
  std::vector<Povm> povms = {build_flammia_rankr(4, 1), build_flammia_rankr(6, 2),
                             bases_to_povm(build_goyeneche_bases(8, 1)),
                             bases_to_povm(build_random_bases(5, 3, rng))};
  for (const auto& p : povms) {
    const auto ker = kernel_basis(p);
    const Eigen::Index d = p.dim();
    EXPECT_EQ(static_cast<Eigen::Index>(ker.size()), d * d - test::measurement_rank_oracle(p));
    for (std::size_t i = 0; i < ker.size(); ++i) {
      EXPECT_NEAR(ker[i].trace(), 0.0, 1e-10);
      EXPECT_LE(apply_measurement_map(p, ker[i]).values.cwiseAbs().maxCoeff(), 1e-10);
      for (std::size_t j = 0; j <= i; ++j) {
        EXPECT_NEAR(hs_inner(ker[i].matrix(), ker[j].matrix()), i == j ? 1.0 : 0.0, 1e-10);
      }
    }
  }
}

}  // namespace
}  // namespace brqst
