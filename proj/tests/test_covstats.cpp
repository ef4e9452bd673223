#include <gtest/gtest.h>

#include "deschash/covstats.hpp"
#include "deschash/error.hpp"
#include "test_util.hpp"

namespace deschash {
namespace {

Matrix naive_covariance(const DescriptorSet& set, const std::vector<IndexPair>& pairs) {
  const Index n = set.dim();
  Matrix c = Matrix::Zero(n, n);
  for (const auto& p : pairs) {
    for (Index a = 0; a < n; ++a) {
      for (Index b = 0; b < n; ++b) {
        const double da = set.data()(static_cast<Index>(p.i), a) - set.data()(static_cast<Index>(p.j), a);
        const double db = set.data()(static_cast<Index>(p.i), b) - set.data()(static_cast<Index>(p.j), b);
        c(a, b) += da * db;
      }
    }
  }
  return c / static_cast<double>(pairs.size());
}

double trace_objective(const Matrix& p, const Matrix& a) { return (p * a * p.transpose()).trace(); }

TEST(DifferenceCovariance, HandExamples) {
  Matrix m(4, 2);
  m << 1, 0, 0, 0, 0, 1, 0, 0;
  const DescriptorSet set(m);
  const std::vector<IndexPair> one{{0, 1}};
  Matrix expect(2, 2);
  expect << 1, 0, 0, 0;
  EXPECT_EQ(difference_covariance(set, one), expect);

  const std::vector<IndexPair> two{{0, 1}, {2, 3}};
  expect << 0.5, 0, 0, 0.5;
  EXPECT_EQ(difference_covariance(set, two), expect);

  const std::vector<IndexPair> same{{1, 3}};
  EXPECT_TRUE(difference_covariance(set, same).isZero(0.0));
  EXPECT_THROW(difference_covariance(set, std::vector<IndexPair>{}), Error);
  EXPECT_THROW(difference_covariance(set, std::vector<IndexPair>{{0, 4}}), Error);
}

TEST(DifferenceCovariance, MatchesNaiveLoop) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const DescriptorSet set(testing::gaussian(25, 6, rng));
    std::uniform_int_distribution<std::size_t> pick(0, 24);
    std::vector<IndexPair> pairs;
    for (int k = 0; k < 40; ++k) pairs.push_back({pick(rng), pick(rng)});
    const Matrix fast = difference_covariance(set, pairs);
    const Matrix slow = naive_covariance(set, pairs);
    EXPECT_LE((fast - slow).norm(), 1e-12 * slow.norm());
    EXPECT_LE((fast - fast.transpose()).norm(), 1e-10);
    const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(fast).eigenvalues().minCoeff();
    EXPECT_GE(lmin, -1e-8 * fast.trace());
  }
}

TEST(SymmetricEigen, DiagonalCase) {
  const Matrix a = Vector{{3.0, 1.0, 2.0}}.asDiagonal();
  const auto eig = smallest_eigenvectors_symmetric(a, 2);
  Matrix expect(2, 3);
  expect << 0, 1, 0, 0, 0, 1;
  EXPECT_LE((eig.vectors - expect).norm(), 1e-14);
  EXPECT_NEAR(eig.values(0), 1.0, 1e-14);
  EXPECT_NEAR(eig.values(1), 2.0, 1e-14);
}

TEST(SymmetricEigen, DegenerateSpectrumPassesResidualCheck) {
  const Matrix a = Matrix::Identity(4, 4);
  const auto eig = smallest_eigenvectors_symmetric(a, 1);
  const Vector v = eig.vectors.row(0).transpose();
  EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  EXPECT_LE((a * v - v).norm(), 1e-12);
}

TEST(SymmetricEigen, RejectsBadRank) {
  const Matrix a = Matrix::Identity(3, 3);
  EXPECT_THROW(smallest_eigenvectors_symmetric(a, 4), Error);
  EXPECT_THROW(smallest_eigenvectors_symmetric(a, 0), Error);
  EXPECT_THROW(smallest_eigenvectors_symmetric(Matrix::Zero(2, 3), 1), Error);
}

TEST(SymmetricEigen, OrthonormalSortedSignedAndMinimal) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = testing::random_symmetric(5, rng);
    const auto eig = smallest_eigenvectors_symmetric(a, 3);
    const Matrix& p = eig.vectors;
    EXPECT_LE((p * p.transpose() - Matrix::Identity(3, 3)).norm(), 1e-12);
    for (Index k = 0; k < 3; ++k) {
      const Vector v = p.row(k).transpose();
      EXPECT_LE((a * v - eig.values(k) * v).norm(), 1e-8 * a.norm());
      if (k > 0) {
        EXPECT_LE(eig.values(k - 1), eig.values(k));
      }
      Index first = 0;
      while (std::abs(v(first)) <= 1e-12) ++first;
      EXPECT_GT(v(first), 0.0);
    }
    const double best = trace_objective(p, a);
    for (int q = 0; q < 1000; ++q) {
      EXPECT_LE(best, trace_objective(testing::random_orthonormal_rows(3, 5, rng), a) + 1e-10);
    }
  }
}

TEST(GeneralizedEigen, DiagonalCase) {
  const Matrix cp = Vector{{1.0, 4.0}}.asDiagonal();
  const auto eig = smallest_generalized_eigenvectors(cp, Matrix::Identity(2, 2), 1, 0.0);
  EXPECT_NEAR(eig.values(0), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(eig.vectors(0, 0)), 1.0, 1e-14);
  EXPECT_NEAR(eig.vectors(0, 1), 0.0, 1e-14);

  const Matrix cp2 = Vector{{0.1, 1.0}}.asDiagonal();
  const auto eig2 = smallest_generalized_eigenvectors(cp2, Matrix::Identity(2, 2), 1, 0.0);
  EXPECT_NEAR(eig2.vectors(0, 0), 1.0, 1e-14);
}

TEST(GeneralizedEigen, DegenerateSpectrumPassesResidualCheck) {
  const Matrix i3 = Matrix::Identity(3, 3);
  const auto eig = smallest_generalized_eigenvectors(i3, i3, 2, 0.0);
  for (Index k = 0; k < 2; ++k) {
    const Vector v = eig.vectors.row(k).transpose();
    EXPECT_LE((i3 * v - eig.values(k) * i3 * v).norm(), 1e-8);
    EXPECT_NEAR(v.squaredNorm(), 1.0, 1e-12);
  }
}

TEST(GeneralizedEigen, MatchesWhiteningOracle) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix cp = testing::random_spd(4, rng);
    const Matrix cm = testing::random_spd(4, rng);
    const auto eig = smallest_generalized_eigenvectors(cp, cm, 2, 0.0);

    // symmetric inverse square root of C-
    Eigen::SelfAdjointEigenSolver<Matrix> es(cm);
    const Matrix inv_sqrt =
        es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose();
    const Vector oracle = Eigen::SelfAdjointEigenSolver<Matrix>(inv_sqrt * cp * inv_sqrt).eigenvalues();
    for (Index k = 0; k < 2; ++k) {
      EXPECT_NEAR(eig.values(k), oracle(k), 1e-10 * oracle.cwiseAbs().maxCoeff());
      const Vector v = eig.vectors.row(k).transpose();
      EXPECT_LE((cp * v - eig.values(k) * cm * v).norm(), 1e-8 * cp.norm());
      EXPECT_NEAR(v.dot(cm * v), 1.0, 1e-10);
    }
  }
}

TEST(GeneralizedEigen, RidgeEntersTheMetric) {
  const Matrix cp = Vector{{1.0, 2.0}}.asDiagonal();
  const Matrix cm = Vector{{1.0, 0.0}}.asDiagonal();
  EXPECT_THROW(smallest_generalized_eigenvectors(cp, cm, 1, 0.0), Error);
  const double ridge = 0.5;
  const auto eig = smallest_generalized_eigenvectors(cp, cm, 2, ridge);
  const Matrix b = cm + ridge * Matrix::Identity(2, 2);
  for (Index k = 0; k < 2; ++k) {
    const Vector v = eig.vectors.row(k).transpose();
    EXPECT_LE((cp * v - eig.values(k) * b * v).norm(), 1e-12);
    EXPECT_NEAR(v.dot(b * v), 1.0, 1e-12);
  }
  EXPECT_THROW(smallest_generalized_eigenvectors(cp, cm, 1, -1.0), Error);
}

TEST(DefaultRidge, ScalesWithTrace) {
  const Matrix cm = Vector{{2.0, 4.0}}.asDiagonal();
  EXPECT_DOUBLE_EQ(default_ridge(cm), 1e-6 * 3.0);
}

}  // namespace
}  // namespace deschash
