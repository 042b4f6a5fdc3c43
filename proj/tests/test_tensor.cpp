#include "recon/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using recon::tensors::Component;
using recon::tensors::FeatureIndexing;
using recon::tensors::SymmetricTensor;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd random_unit(int d, std::mt19937& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = gauss(rng);
  return v.normalized();
}

std::vector<Component> random_components(int r, int d, std::mt19937& rng) {
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::vector<Component> out;
  for (int i = 0; i < r; ++i) {
    const double sign = (rng() & 1u) ? 1.0 : -1.0;
    out.push_back({random_unit(d, rng), sign * mag(rng)});
  }
  return out;
}

// ==== construction ====

TEST(FromComponents, CoordinateDirectionsOrderThree) {
  std::vector<Component> comps;
  comps.push_back({VectorXd::Unit(2, 0), 2.0});
  comps.push_back({VectorXd::Unit(2, 1), -1.0});
  const SymmetricTensor t = recon::tensors::from_components(comps, 3);

  EXPECT_DOUBLE_EQ(t.at({0, 0, 0}), 2.0);
  EXPECT_DOUBLE_EQ(t.at({1, 1, 1}), -1.0);
  EXPECT_DOUBLE_EQ(t.at({0, 0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(t.at({0, 1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(t.at({1, 0, 1}), 0.0);
}

TEST(FromComponents, MatchesDirectProductFormula) {
  std::mt19937 rng(11);
  const int d = 4;
  const auto comps = random_components(3, d, rng);
  const SymmetricTensor t = recon::tensors::from_components(comps, 3);

  // Independent oracle: explicit triple loop.
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        double expected = 0.0;
        for (const auto& c : comps) {
          expected += c.coefficient * c.direction(i) * c.direction(j) * c.direction(k);
        }
        EXPECT_NEAR(t.at({i, j, k}), expected, 1e-14);
      }
    }
  }
}

TEST(FromComponents, OutputIsSymmetric) {
  std::mt19937 rng(5);
  const auto comps = random_components(4, 5, rng);
  for (int order : {2, 3, 4}) {
    const SymmetricTensor t = recon::tensors::from_components(comps, order);
    EXPECT_LE(t.symmetry_defect(), 1e-14);
  }
}

TEST(FromComponents, RejectsInvalidComponents) {
  std::vector<Component> bad_norm;
  bad_norm.push_back({2.0 * VectorXd::Unit(3, 0), 1.0});
  EXPECT_THROW(recon::tensors::from_components(bad_norm, 3), recon::ConfigError);

  std::vector<Component> zero_coeff;
  zero_coeff.push_back({VectorXd::Unit(3, 0), 0.0});
  EXPECT_THROW(recon::tensors::from_components(zero_coeff, 3), recon::ConfigError);

  std::vector<Component> mixed;
  mixed.push_back({VectorXd::Unit(3, 0), 1.0});
  mixed.push_back({VectorXd::Unit(4, 0), 1.0});
  EXPECT_THROW(recon::tensors::from_components(mixed, 3), recon::DimensionMismatch);
}

// ==== contractions ====

TEST(ContractVector, SingleCoordinateComponent) {
  std::vector<Component> comps;
  comps.push_back({VectorXd::Unit(3, 0), 1.0});
  const SymmetricTensor t = recon::tensors::from_components(comps, 3);
  VectorXd w(3);
  w << 1.0, 1.0, 1.0;
  // f(w) = (x^T w)^2 x = e1
  const VectorXd f = recon::tensors::contract_vector(t, w);
  EXPECT_NEAR(f(0), 1.0, 1e-14);
  EXPECT_NEAR(f(1), 0.0, 1e-14);
  EXPECT_NEAR(f(2), 0.0, 1e-14);
}

TEST(ContractVector, MatchesComponentFormula) {
  std::mt19937 rng(21);
  for (int order : {2, 3, 4}) {
    const int d = 5;
    const auto comps = random_components(3, d, rng);
    const SymmetricTensor t = recon::tensors::from_components(comps, order);
    for (int trial = 0; trial < 4; ++trial) {
      const VectorXd w = random_unit(d, rng) * 1.7;
      VectorXd expected = VectorXd::Zero(d);
      for (const auto& c : comps) {
        expected += c.coefficient *
                    std::pow(c.direction.dot(w), order - 1) * c.direction;
      }
      const VectorXd got = recon::tensors::contract_vector(t, w);
      EXPECT_LE((got - expected).norm(), 1e-12 * std::max(1.0, expected.norm()));
    }
  }
}

TEST(ContractMatrixSlice, MatchesComponentFormula) {
  std::mt19937 rng(31);
  for (int order : {3, 4}) {
    const int d = 4;
    const auto comps = random_components(3, d, rng);
    const SymmetricTensor t = recon::tensors::from_components(comps, order);
    const VectorXd v = random_unit(d, rng);
    MatrixXd expected = MatrixXd::Zero(d, d);
    for (const auto& c : comps) {
      expected += c.coefficient * std::pow(c.direction.dot(v), order - 2) *
                  c.direction * c.direction.transpose();
    }
    const MatrixXd got = recon::tensors::contract_matrix_slice(t, v);
    EXPECT_LE((got - expected).norm(), 1e-12 * std::max(1.0, expected.norm()));
    EXPECT_LE((got - got.transpose()).norm(), 1e-13);
  }
}

TEST(DiagonalPoly, ConsistentWithContractVector) {
  std::mt19937 rng(41);
  for (int order : {2, 3, 4}) {
    const int d = 6;
    const auto comps = random_components(4, d, rng);
    const SymmetricTensor t = recon::tensors::from_components(comps, order);
    for (int trial = 0; trial < 6; ++trial) {
      const VectorXd w = random_unit(d, rng) * 1.3;
      const double via_contract = w.dot(recon::tensors::contract_vector(t, w));
      const double direct = recon::tensors::diagonal_poly(t, w);
      EXPECT_NEAR(direct, via_contract,
                  1e-12 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST(Contractions, RejectDimensionMismatch) {
  std::vector<Component> comps;
  comps.push_back({VectorXd::Unit(3, 0), 1.0});
  const SymmetricTensor t = recon::tensors::from_components(comps, 3);
  EXPECT_THROW(recon::tensors::contract_vector(t, VectorXd::Zero(4)),
               recon::DimensionMismatch);
  EXPECT_THROW(recon::tensors::diagonal_poly(t, VectorXd::Zero(2)),
               recon::DimensionMismatch);
}

// ==== polarization ====

TEST(Polarize, BilinearCrossTerm) {
  // p(w) = w1 w2 is the diagonal of T = 1/2 (e1 (x) e2 + e2 (x) e1);
  // the polarized entry T(e1, e2) is 1/2.
  auto p = [](const VectorXd& w) { return w(0) * w(1); };
  std::vector<VectorXd> us = {VectorXd::Unit(2, 0), VectorXd::Unit(2, 1)};
  EXPECT_NEAR(recon::tensors::polarize(p, 2, us), 0.5, 1e-14);
}

TEST(Polarize, RecoversTensorEntries) {
  std::mt19937 rng(51);
  for (int order : {2, 3, 4}) {
    const int d = 3;
    const auto comps = random_components(3, d, rng);
    const SymmetricTensor t = recon::tensors::from_components(comps, order);
    auto p = [&](const VectorXd& w) { return recon::tensors::diagonal_poly(t, w); };

    std::vector<int> idx = {0, 1, 2, 1};
    idx.resize(static_cast<std::size_t>(order));
    std::vector<VectorXd> us;
    for (int j : idx) us.push_back(VectorXd::Unit(d, j));
    EXPECT_NEAR(recon::tensors::polarize(p, order, us), t.at(idx),
                1e-10 * std::max(1.0, t.entries().cwiseAbs().maxCoeff()));
  }
}

TEST(Polarize, MultilinearInEachSlot) {
  std::mt19937 rng(61);
  const int d = 3;
  const auto comps = random_components(2, d, rng);
  const SymmetricTensor t = recon::tensors::from_components(comps, 3);
  auto p = [&](const VectorXd& w) { return recon::tensors::diagonal_poly(t, w); };

  const VectorXd u = random_unit(d, rng), v = random_unit(d, rng),
                 w1 = random_unit(d, rng), w2 = random_unit(d, rng);
  const double lhs = recon::tensors::polarize(p, 3, {u, v, 2.0 * w1 + 3.0 * w2});
  const double rhs = 2.0 * recon::tensors::polarize(p, 3, {u, v, w1}) +
                     3.0 * recon::tensors::polarize(p, 3, {u, v, w2});
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Polarize, RejectsUnsupportedOrder) {
  auto p = [](const VectorXd&) { return 0.0; };
  std::vector<VectorXd> us(7, VectorXd::Zero(2));
  EXPECT_THROW(recon::tensors::polarize(p, 7, us), recon::UnsupportedOrder);
}

// ==== monomial features ====

TEST(FeatureIndexing, GradedLexOrderDimTwo) {
  const FeatureIndexing idx = FeatureIndexing::create(2, 2);
  ASSERT_EQ(idx.size(), 3);
  EXPECT_EQ(idx.exponents()[0], (std::vector<int>{2, 0}));
  EXPECT_EQ(idx.exponents()[1], (std::vector<int>{1, 1}));
  EXPECT_EQ(idx.exponents()[2], (std::vector<int>{0, 2}));

  VectorXd w(2);
  w << 3.0, 5.0;
  const VectorXd phi = recon::tensors::monomial_features(w, idx);
  EXPECT_DOUBLE_EQ(phi(0), 9.0);
  EXPECT_DOUBLE_EQ(phi(1), 15.0);
  EXPECT_DOUBLE_EQ(phi(2), 25.0);
}

TEST(FeatureIndexing, CountsMatchClosedForm) {
  EXPECT_EQ(recon::tensors::monomial_count(2, 2), 3);
  EXPECT_EQ(recon::tensors::monomial_count(3, 2), 6);
  EXPECT_EQ(recon::tensors::monomial_count(8, 2), 36);
  EXPECT_EQ(recon::tensors::monomial_count(6, 2), 21);
  EXPECT_EQ(recon::tensors::monomial_count(3, 3), 10);
  EXPECT_EQ(recon::tensors::monomial_count(6, 3), 56);
  for (int d : {2, 3, 5, 8}) {
    for (int deg : {1, 2, 3, 4}) {
      EXPECT_EQ(FeatureIndexing::create(d, deg).size(),
                recon::tensors::monomial_count(d, deg));
    }
  }
}

TEST(FeatureIndexing, GramIdentityWithMultinomialWeights) {
  // The weighted feature map phi~_m = sqrt(multinomial) w^m satisfies
  // <phi~(u), phi~(v)> = (u^T v)^degree.
  std::mt19937 rng(71);
  for (int deg : {2, 3}) {
    const int d = 4;
    const FeatureIndexing idx = FeatureIndexing::create(d, deg);
    const VectorXd u = random_unit(d, rng) * 1.4;
    const VectorXd v = random_unit(d, rng) * 0.8;
    const VectorXd pu = recon::tensors::monomial_features(u, idx);
    const VectorXd pv = recon::tensors::monomial_features(v, idx);
    double gram = 0.0;
    for (long m = 0; m < idx.size(); ++m) {
      const double weight = recon::tensors::multinomial_coefficient(
          deg, idx.exponents()[static_cast<std::size_t>(m)]);
      gram += weight * pu(m) * pv(m);
    }
    EXPECT_NEAR(gram, std::pow(u.dot(v), deg), 1e-10);
  }
}

TEST(FeatureIndexing, PositionLookup) {
  const FeatureIndexing idx = FeatureIndexing::create(3, 2);
  EXPECT_EQ(idx.position({2, 0, 0}), 0);
  EXPECT_EQ(idx.position({0, 0, 2}), idx.size() - 1);
  EXPECT_EQ(idx.position({1, 1, 1}), -1);
}

TEST(MultinomialCoefficient, SmallCases) {
  EXPECT_DOUBLE_EQ(recon::tensors::multinomial_coefficient(2, {1, 1}), 2.0);
  EXPECT_DOUBLE_EQ(recon::tensors::multinomial_coefficient(3, {2, 1}), 3.0);
  EXPECT_DOUBLE_EQ(recon::tensors::multinomial_coefficient(3, {1, 1, 1}), 6.0);
  EXPECT_DOUBLE_EQ(recon::tensors::multinomial_coefficient(4, {2, 2}), 6.0);
}

TEST(SymmetricTensorStorage, RowMajorFlatIndex) {
  SymmetricTensor t(3, 4);
  EXPECT_EQ(t.flat_index({0, 0, 0}), 0);
  EXPECT_EQ(t.flat_index({0, 0, 1}), 1);
  EXPECT_EQ(t.flat_index({0, 1, 0}), 4);
  EXPECT_EQ(t.flat_index({1, 0, 0}), 16);
  EXPECT_EQ(t.flat_index({3, 3, 3}), 63);
}

}  // namespace
