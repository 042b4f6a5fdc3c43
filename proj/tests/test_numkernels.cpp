#include "recon/numkernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using recon::linalg::EigPair;
using recon::linalg::eig_general;
using recon::linalg::lanczos_min_eig;
using recon::linalg::svd_pinv;
using recon::linalg::sym_eig;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd random_symmetric(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = gauss(rng);
  }
  return 0.5 * (m + m.transpose());
}

MatrixXd random_matrix(int rows, int cols, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  }
  return m;
}

// ==== sym_eig ====

TEST(SymEig, IdentityHasUnitSpectrum) {
  const auto pairs = sym_eig(MatrixXd::Identity(3, 3));
  ASSERT_EQ(pairs.size(), 3u);
  for (const auto& p : pairs) EXPECT_DOUBLE_EQ(p.value, 1.0);
}

TEST(SymEig, DiagonalSpectrumAscendingWithCoordinateVectors) {
  MatrixXd m = MatrixXd::Zero(3, 3);
  m.diagonal() << -2.0, 0.0, 5.0;
  const auto pairs = sym_eig(m);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_NEAR(pairs[0].value, -2.0, 1e-14);
  EXPECT_NEAR(pairs[1].value, 0.0, 1e-14);
  EXPECT_NEAR(pairs[2].value, 5.0, 1e-14);
  EXPECT_NEAR(std::abs(pairs[0].vector(0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(pairs[2].vector(2)), 1.0, 1e-12);
}

TEST(SymEig, ReconstructionAndOrthonormality) {
  for (unsigned seed = 0; seed < 8; ++seed) {
    const MatrixXd m = random_symmetric(6, 100 + seed);
    const auto pairs = sym_eig(m);
    MatrixXd v(6, 6);
    VectorXd d(6);
    for (int i = 0; i < 6; ++i) {
      v.col(i) = pairs[static_cast<std::size_t>(i)].vector;
      d(i) = pairs[static_cast<std::size_t>(i)].value;
    }
    const double recon = (v * d.asDiagonal() * v.transpose() - m).norm();
    EXPECT_LE(recon, 1e-8 * std::max(1.0, m.norm()));
    EXPECT_LE((v.transpose() * v - MatrixXd::Identity(6, 6)).norm(), 1e-10);
    for (int i = 0; i + 1 < 6; ++i) EXPECT_LE(d(i), d(i + 1));
  }
}

TEST(SymEig, RejectsAsymmetricInput) {
  MatrixXd m(2, 2);
  m << 0.0, 1.0, 0.0, 0.0;
  EXPECT_THROW(sym_eig(m), recon::NotSymmetric);
}

TEST(SymEig, RejectsNonSquareAndNonFinite) {
  EXPECT_THROW(sym_eig(MatrixXd::Zero(2, 3)), recon::DimensionMismatch);
  MatrixXd m = MatrixXd::Identity(2, 2);
  m(0, 0) = std::nan("");
  EXPECT_THROW(sym_eig(m), recon::NonFiniteInput);
}

// ==== svd_pinv ====

TEST(SvdPinv, DiagonalRankOne) {
  MatrixXd m = MatrixXd::Zero(2, 2);
  m(0, 0) = 3.0;
  const auto out = svd_pinv(m, 1e-10);
  EXPECT_EQ(out.rank, 1);
  EXPECT_NEAR(out.pinv(0, 0), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(out.pinv(1, 1), 0.0, 1e-14);
}

TEST(SvdPinv, ZeroMatrixHasRankZero) {
  const auto out = svd_pinv(MatrixXd::Zero(3, 4), 1e-10);
  EXPECT_EQ(out.rank, 0);
  EXPECT_EQ(out.pinv.rows(), 4);
  EXPECT_EQ(out.pinv.cols(), 3);
  EXPECT_EQ(out.pinv.norm(), 0.0);
}

TEST(SvdPinv, PenroseIdentities) {
  for (unsigned seed = 0; seed < 6; ++seed) {
    const MatrixXd m = random_matrix(8, 5, 200 + seed);
    const auto out = svd_pinv(m, 1e-10);
    EXPECT_EQ(out.rank, 5);
    const MatrixXd& p = out.pinv;
    const double scale = std::max(1.0, m.norm());
    EXPECT_LE((m * p * m - m).norm(), 1e-8 * scale);
    EXPECT_LE((p * m * p - p).norm(), 1e-8 * scale);
    EXPECT_LE(((m * p).transpose() - m * p).norm(), 1e-8 * scale);
    EXPECT_LE(((p * m).transpose() - p * m).norm(), 1e-8 * scale);
  }
}

TEST(SvdPinv, RankCutoffDropsSmallSingularValues) {
  // Rank-1 plus a 1e-14 perturbation: default cutoff keeps rank 1.
  const VectorXd u = VectorXd::Ones(4).normalized();
  MatrixXd m = 2.0 * u * u.transpose();
  m(3, 0) += 1e-14;
  const auto out = svd_pinv(m, 1e-10);
  EXPECT_EQ(out.rank, 1);
}

TEST(SvdPinv, SingularValuesDescending) {
  const auto out = svd_pinv(random_matrix(6, 6, 37), 1e-10);
  for (long i = 0; i + 1 < out.singulars.size(); ++i) {
    EXPECT_GE(out.singulars(i), out.singulars(i + 1));
  }
}

// ==== eig_general ====

TEST(EigGeneral, DiagonalMatrix) {
  MatrixXd m = MatrixXd::Zero(3, 3);
  m.diagonal() << 3.0, 1.0, 2.0;
  const auto pairs = eig_general(m);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_NEAR(pairs[0].value, 1.0, 1e-12);
  EXPECT_NEAR(pairs[1].value, 2.0, 1e-12);
  EXPECT_NEAR(pairs[2].value, 3.0, 1e-12);
}

TEST(EigGeneral, RotationHasComplexSpectrum) {
  MatrixXd rot(2, 2);
  rot << 0.0, -1.0, 1.0, 0.0;
  EXPECT_THROW(eig_general(rot), recon::ComplexSpectrum);
}

TEST(EigGeneral, SimilarityTransformRecovery) {
  std::mt19937 rng(77);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 5;
    MatrixXd g(n, n);
    do {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) g(i, j) = gauss(rng);
      }
    } while (std::abs(g.determinant()) < 1e-2);
    VectorXd d(n);
    for (int i = 0; i < n; ++i) d(i) = i + 1 + 0.1 * gauss(rng);
    const MatrixXd c = g * d.asDiagonal() * g.inverse();

    const auto pairs = eig_general(c);
    std::sort(d.data(), d.data() + n);
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(pairs[static_cast<std::size_t>(i)].value, d(i), 1e-7);
      // Right-eigenvector residual
      const VectorXd& v = pairs[static_cast<std::size_t>(i)].vector;
      EXPECT_LE((c * v - pairs[static_cast<std::size_t>(i)].value * v).norm(),
                1e-7 * std::max(1.0, c.norm()));
    }
  }
}

// ==== lanczos_min_eig ====

TEST(Lanczos, IdentityOperator) {
  auto hvp = [](const VectorXd& v) { return v; };
  const EigPair out = lanczos_min_eig(hvp, 4, 10, 3);
  EXPECT_NEAR(out.value, 1.0, 1e-12);
  EXPECT_NEAR(out.vector.norm(), 1.0, 1e-12);
}

TEST(Lanczos, DiagonalOperatorFindsBottomPair) {
  VectorXd d(4);
  d << -7.0, 1.0, 1.0, 1.0;
  auto hvp = [&](const VectorXd& v) { return VectorXd(d.asDiagonal() * v); };
  const EigPair out = lanczos_min_eig(hvp, 4, 4, 11);
  EXPECT_NEAR(out.value, -7.0, 1e-10);
  EXPECT_NEAR(std::abs(out.vector(0)), 1.0, 1e-8);
}

TEST(Lanczos, MatchesDenseSolverAtTwentyIterations) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const int n = 30;
    const MatrixXd m = random_symmetric(n, 300 + seed);
    auto hvp = [&](const VectorXd& v) { return VectorXd(m * v); };
    const EigPair out = lanczos_min_eig(hvp, n, 20, seed);
    const double truth = sym_eig(m).front().value;
    EXPECT_LE(std::abs(out.value - truth), 1e-5 * m.norm()) << "seed " << seed;
    EXPECT_GE(out.value, truth - 1e-9 * m.norm());  // Ritz values interlace
  }
}

TEST(Lanczos, KrylovCompletenessAtFullDimension) {
  for (int n : {3, 7, 12}) {
    const MatrixXd m = random_symmetric(n, static_cast<unsigned>(400 + n));
    auto hvp = [&](const VectorXd& v) { return VectorXd(m * v); };
    const EigPair out = lanczos_min_eig(hvp, n, n, 5);
    const auto dense = sym_eig(m);
    EXPECT_LE(std::abs(out.value - dense.front().value), 1e-9 * std::max(1.0, m.norm()));
    // Residual check on the returned vector.
    EXPECT_LE((m * out.vector - out.value * out.vector).norm(),
              1e-7 * std::max(1.0, m.norm()));
  }
}

TEST(Lanczos, DeterministicForFixedSeed) {
  const MatrixXd m = random_symmetric(16, 99);
  auto hvp = [&](const VectorXd& v) { return VectorXd(m * v); };
  const EigPair a = lanczos_min_eig(hvp, 16, 12, 1234);
  const EigPair b = lanczos_min_eig(hvp, 16, 12, 1234);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ((a.vector - b.vector).norm(), 0.0);
}

TEST(Lanczos, RepeatedEigenvaluesViaRestart) {
  // Operator with a 3-fold degenerate minimum: breakdown handling must still
  // report the right value.
  VectorXd d(5);
  d << -2.0, -2.0, -2.0, 4.0, 9.0;
  auto hvp = [&](const VectorXd& v) { return VectorXd(d.asDiagonal() * v); };
  const EigPair out = lanczos_min_eig(hvp, 5, 5, 21);
  EXPECT_NEAR(out.value, -2.0, 1e-10);
}

TEST(Lanczos, RejectsNonFiniteOperator) {
  auto hvp = [](const VectorXd& v) {
    VectorXd out = v;
    out(0) = std::nan("");
    return out;
  };
  EXPECT_THROW(lanczos_min_eig(hvp, 3, 3, 0), recon::NonFiniteInput);
}

}  // namespace
