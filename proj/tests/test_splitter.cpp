#include "recon/splitter.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "recon/network.hpp"
#include "recon/numkernels.hpp"
#include "recon/objective.hpp"

namespace {

using recon::network::ActivationPoly;
using recon::network::ModelParams;
using recon::objective::CandidateSet;
using recon::objective::LossWeights;
using recon::objective::ReconMap;
using recon::splitter::LineSearchResult;
using recon::splitter::ScanResult;
using recon::splitter::SplitConfig;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd random_unit(long d, std::mt19937& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXd v(d);
  for (long i = 0; i < d; ++i) v(i) = gauss(rng);
  return v.normalized();
}

ModelParams random_model(long m, long d, int alpha, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ModelParams params;
  params.activation = ActivationPoly::power(alpha);
  params.a.resize(m);
  params.w.resize(m, d);
  for (long j = 0; j < m; ++j) {
    params.a(j) = gauss(rng) / std::sqrt(static_cast<double>(d));
    for (long c = 0; c < d; ++c) {
      params.w(j, c) = gauss(rng) / std::sqrt(static_cast<double>(d));
    }
  }
  return params;
}

struct Instance {
  ReconMap map;
  CandidateSet set;
};

Instance random_instance(long k, long d, long m, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  Instance inst;
  inst.map = recon::objective::make_kkt_binary(random_model(m, d, 3, seed));
  inst.set.target = inst.map.model.flatten();
  for (long i = 0; i < k; ++i) {
    inst.set.add(random_unit(d, rng), mag(rng), (i % 2 == 0) ? 1 : -1);
  }
  return inst;
}

MatrixXd dense_splitting_matrix(const CandidateSet& set, const ReconMap& map,
                                long i, double alpha1 = 1.0) {
  const long d = set.candidates.front().x.size();
  MatrixXd s(d, d);
  for (long c = 0; c < d; ++c) {
    s.col(c) = recon::objective::splitting_hvp(set, map, i,
                                               VectorXd::Unit(d, c), alpha1);
  }
  return 0.5 * (s + s.transpose());
}

// Two close-by true samples, one candidate started between them, descended to
// first-order stationarity: the canonical escape fixture.
struct MergedFixture {
  Instance inst;
  VectorXd x1, x2;
  double merged_loss = 0.0;
};

MergedFixture build_merged_fixture(unsigned seed) {
  std::mt19937 rng(seed);
  const long d = 4, m = 6;
  MergedFixture fx;
  fx.inst.map = recon::objective::make_kkt_binary(random_model(m, d, 3, seed));

  fx.x1 = random_unit(d, rng);
  VectorXd u = random_unit(d, rng);
  u = (u - u.dot(fx.x1) * fx.x1).normalized();
  const double phi = 0.5;
  fx.x2 = std::cos(phi) * fx.x1 + std::sin(phi) * u;

  fx.inst.set.target =
      recon::objective::map_eval(fx.inst.map, fx.x1, 1) +
      recon::objective::map_eval(fx.inst.map, fx.x2, 1);
  fx.inst.set.add((fx.x1 + fx.x2).normalized(), 1.0, 1);
  fx.inst.set.candidates[0].lambda =
      recon::objective::lambda_refit(fx.inst.set, fx.inst.map)(0);

  // Descend to the merged stationary point without splitting.
  SplitConfig config;
  config.eps = 1e-9;
  config.max_iters = 300000;
  config.split_period = 300000;
  config.enable_splitting = false;
  LossWeights weights;
  auto result = recon::splitter::run(std::move(fx.inst.set), fx.inst.map,
                                     weights, config);
  fx.inst.set = std::move(result.state);
  fx.merged_loss = recon::objective::loss(fx.inst.set, fx.inst.map, weights);
  return fx;
}

// ==== config ====

TEST(Config, ValidationRejectsBadFields) {
  SplitConfig ok;
  EXPECT_NO_THROW(recon::splitter::validate_config(ok));
  SplitConfig bad = ok;
  bad.eps = 0.0;
  EXPECT_THROW(recon::splitter::validate_config(bad), recon::ConfigError);
  bad = ok;
  bad.lambda_star = 0.0;
  EXPECT_THROW(recon::splitter::validate_config(bad), recon::ConfigError);
  bad = ok;
  bad.cap_fraction = 0.0;
  EXPECT_THROW(recon::splitter::validate_config(bad), recon::ConfigError);
  bad = ok;
  bad.cap_fraction = 1.5;
  EXPECT_THROW(recon::splitter::validate_config(bad), recon::ConfigError);
  bad = ok;
  bad.eta_max = 0.0;
  EXPECT_THROW(recon::splitter::validate_config(bad), recon::ConfigError);
}

TEST(Config, EffectiveThresholdsDeriveFromHints) {
  SplitConfig config;  // eps 1e-6, rho_hint 10, lambda_star -0.1
  EXPECT_NEAR(recon::splitter::effective_eps_h(config), std::sqrt(1e-5),
              1e-12);
  // Trigger is the laxer (closer to zero) of lambda_star and -eps_h.
  EXPECT_NEAR(recon::splitter::effective_trigger(config), -std::sqrt(1e-5),
              1e-12);
  config.lambda_star = -1e-4;
  EXPECT_NEAR(recon::splitter::effective_trigger(config), -1e-4, 1e-15);
  config.eps_h = 0.5;
  EXPECT_NEAR(recon::splitter::effective_eps_h(config), 0.5, 1e-15);
}

// ==== phase I ====

TEST(Phase1, ExactSolutionExitsWithZeroIterations) {
  Instance inst = random_instance(2, 4, 4, 7);
  inst.set.target -= recon::objective::residual(inst.set, inst.map);
  SplitConfig config;
  LossWeights weights;
  const auto result = recon::splitter::phase1_descent(
      inst.set, inst.map, weights, config, config.max_iters);
  EXPECT_EQ(result.iterations, 0);
  EXPECT_TRUE(result.reached_tol);
}

TEST(Phase1, ConvergesFromNearSolutionStart) {
  std::mt19937 rng(11);
  Instance inst = random_instance(2, 4, 5, 13);
  inst.set.target -= recon::objective::residual(inst.set, inst.map);
  for (auto& cand : inst.set.candidates) {
    cand.x += 0.02 * random_unit(4, rng);
    cand.lambda += 0.02;
  }
  SplitConfig config;
  config.eps = 1e-7;
  config.split_period = 60000;
  LossWeights weights;
  const auto result = recon::splitter::phase1_descent(
      inst.set, inst.map, weights, config, config.max_iters);
  EXPECT_TRUE(result.reached_tol) << "grad " << result.grad_norm;
  EXPECT_LE(recon::objective::loss(inst.set, inst.map, weights), 1e-10);
}

TEST(Phase1, LoggedTrajectorySatisfiesDescentInequality) {
  std::mt19937 rng(17);
  Instance inst = random_instance(2, 4, 4, 19);
  inst.set.target -= recon::objective::residual(inst.set, inst.map);
  for (auto& cand : inst.set.candidates) cand.x += 0.05 * random_unit(4, rng);

  SplitConfig config;
  config.eta_g = 5e-3;  // deliberately below 1/l for this instance scale
  config.log_period = 1;
  config.split_period = 500;
  config.eps = 1e-12;
  LossWeights weights;
  recon::RunLog log;
  recon::splitter::phase1_descent(inst.set, inst.map, weights, config, 500,
                                  &log, 0);
  ASSERT_GE(log.iters.size(), 50u);
  for (std::size_t t = 0; t + 1 < log.iters.size(); ++t) {
    const auto& cur = log.iters[t];
    const auto& nxt = log.iters[t + 1];
    if (nxt.iter != cur.iter + 1) continue;
    const double bound =
        cur.loss - 0.5 * nxt.step * cur.grad_norm * cur.grad_norm;
    EXPECT_LE(nxt.loss, bound + 1e-12 * std::max(1.0, std::abs(bound)))
        << "iteration " << cur.iter;
  }
}

TEST(Phase1, DivergesOnNonFiniteState) {
  Instance inst = random_instance(1, 3, 3, 23);
  inst.set.candidates[0].x(0) = std::numeric_limits<double>::quiet_NaN();
  SplitConfig config;
  LossWeights weights;
  EXPECT_THROW(recon::splitter::phase1_descent(inst.set, inst.map, weights,
                                               config, 10),
               recon::Error);
}

// ==== curvature scan ====

TEST(Scan, ZeroResidualYieldsNoWorkAndZeroCurvature) {
  Instance inst = random_instance(3, 4, 4, 29);
  inst.set.target -= recon::objective::residual(inst.set, inst.map);
  SplitConfig config;
  LossWeights weights;
  const ScanResult scan =
      recon::splitter::scan_candidates(inst.set, inst.map, weights, config);
  EXPECT_TRUE(scan.below_trigger.empty());
  EXPECT_NEAR(scan.min_lambda_min, 0.0, 1e-9);
}

TEST(Scan, MatchesDenseEigendecomposition) {
  const Instance inst = random_instance(3, 6, 5, 31);
  SplitConfig config;
  config.lanczos_iters = 20;  // >= d: Krylov space is complete
  LossWeights weights;
  const ScanResult scan =
      recon::splitter::scan_candidates(inst.set, inst.map, weights, config);

  double dense_min = 0.0;
  for (long i = 0; i < inst.set.size(); ++i) {
    const MatrixXd s = dense_splitting_matrix(inst.set, inst.map, i);
    dense_min =
        std::min(dense_min, recon::linalg::sym_eig(s).front().value);
  }
  EXPECT_NEAR(scan.min_lambda_min, dense_min,
              1e-5 * std::max(1.0, std::abs(dense_min)));

  for (std::size_t e = 0; e + 1 < scan.below_trigger.size(); ++e) {
    EXPECT_LE(scan.below_trigger[e].lambda_min,
              scan.below_trigger[e + 1].lambda_min);
  }
}

TEST(Scan, CapLimitsEntriesButKeepsAtLeastOne) {
  Instance inst = random_instance(4, 5, 5, 37);
  SplitConfig config;
  config.cap_fraction = 0.5;
  LossWeights weights;
  const ScanResult four =
      recon::splitter::scan_candidates(inst.set, inst.map, weights, config);
  EXPECT_LE(four.below_trigger.size(), 2u);

  Instance single = random_instance(1, 5, 5, 41);
  const ScanResult one = recon::splitter::scan_candidates(
      single.set, single.map, weights, config);
  EXPECT_LE(one.below_trigger.size(), 1u);  // floor(0.5*1)=0 rounds up to 1
}

TEST(Scan, DeterministicForFixedSeed) {
  const Instance inst = random_instance(3, 5, 5, 43);
  SplitConfig config;
  LossWeights weights;
  const ScanResult a =
      recon::splitter::scan_candidates(inst.set, inst.map, weights, config);
  const ScanResult b =
      recon::splitter::scan_candidates(inst.set, inst.map, weights, config);
  ASSERT_EQ(a.below_trigger.size(), b.below_trigger.size());
  for (std::size_t e = 0; e < a.below_trigger.size(); ++e) {
    EXPECT_EQ(a.below_trigger[e].lambda_min, b.below_trigger[e].lambda_min);
    EXPECT_EQ(
        (a.below_trigger[e].v_min - b.below_trigger[e].v_min).norm(), 0.0);
  }
}

TEST(Scan, ZeroMultiplierCandidatesAreNeverSplit) {
  Instance inst = random_instance(2, 4, 4, 47);
  inst.set.candidates[0].lambda = 0.0;
  SplitConfig config;
  LossWeights weights;
  const ScanResult scan =
      recon::splitter::scan_candidates(inst.set, inst.map, weights, config);
  for (const auto& entry : scan.below_trigger) {
    EXPECT_NE(entry.id, inst.set.candidates[0].id);
  }
}

// ==== split bookkeeping ====

TEST(Split, ConservesWeightAndRecordsLineage) {
  Instance inst = random_instance(2, 4, 4, 53);
  const double parent_lambda = inst.set.candidates[0].lambda;
  const long parent_id = inst.set.candidates[0].id;
  std::mt19937 rng(59);
  const VectorXd v = random_unit(4, rng);
  SplitConfig config;
  const auto ids = recon::splitter::split(inst.set, parent_id, v, 0.005,
                                          config);
  ASSERT_EQ(inst.set.size(), 3);
  double sum = 0.0;
  int found = 0;
  for (const auto& cand : inst.set.candidates) {
    if (cand.id == ids.first || cand.id == ids.second) {
      sum += cand.lambda;
      EXPECT_EQ(cand.parent, parent_id);
      EXPECT_EQ(cand.depth, 1);
      ++found;
    }
    EXPECT_NE(cand.id, parent_id);  // parent replaced
  }
  EXPECT_EQ(found, 2);
  EXPECT_EQ(sum, parent_lambda);  // lambda/2 + lambda/2 is exact
}

TEST(Split, CoincidentOffspringKeepLossUnchanged) {
  Instance inst = random_instance(2, 4, 4, 61);
  LossWeights weights;
  const double before = recon::objective::loss(inst.set, inst.map, weights);
  std::mt19937 rng(67);
  SplitConfig config;
  recon::splitter::split(inst.set, inst.set.candidates[0].id,
                         random_unit(4, rng), 0.0, config);
  const double after = recon::objective::loss(inst.set, inst.map, weights);
  EXPECT_NEAR(after, before, 1e-14 * std::max(1.0, std::abs(before)));
}

TEST(Split, ValidatesArguments) {
  Instance inst = random_instance(2, 4, 4, 71);
  std::mt19937 rng(73);
  const VectorXd v = random_unit(4, rng);
  SplitConfig config;
  EXPECT_THROW(recon::splitter::split(inst.set, 999, v, 0.005, config),
               recon::ConfigError);
  EXPECT_THROW(
      recon::splitter::split(inst.set, inst.set.candidates[0].id, 2.0 * v,
                             0.005, config),
      recon::ConfigError);
  EXPECT_THROW(
      recon::splitter::split(inst.set, inst.set.candidates[0].id, v,
                             config.eta_max * 2.0, config),
      recon::ConfigError);
  config.max_candidates = 2;
  EXPECT_THROW(
      recon::splitter::split(inst.set, inst.set.candidates[0].id, v, 0.005,
                             config),
      recon::CandidateCapExceeded);
}

TEST(Split, LossChangeMatchesSecondOrderExpansion) {
  // dL(eta) = (eta^2/2) v'Sv + O(eta^3): the cubic remainder must shrink by
  // ~8x per eta halving (fitted exponent >= 2.7).
  const Instance inst = random_instance(2, 5, 5, 79);
  LossWeights weights;
  const long id = inst.set.candidates[0].id;
  const MatrixXd s = dense_splitting_matrix(inst.set, inst.map, 0);
  const auto eig = recon::linalg::sym_eig(s);
  const VectorXd v = eig.front().vector;
  const double curvature = eig.front().value;
  const double base = recon::objective::loss(inst.set, inst.map, weights);

  SplitConfig config;
  config.eta_max = 0.02;
  const auto remainder = [&](double eta) {
    CandidateSet trial = inst.set;
    recon::splitter::split(trial, id, v, eta, config);
    const double delta =
        recon::objective::loss(trial, inst.map, weights) - base;
    return std::abs(delta - 0.5 * eta * eta * curvature);
  };
  const double r1 = remainder(0.02);
  const double r2 = remainder(0.01);
  const double r3 = remainder(0.005);
  EXPECT_GE(std::log2(r1 / r2), 2.7);
  EXPECT_GE(std::log2(r2 / r3), 2.7);
}

// ==== line search ====

TEST(LineSearch, NegativeCurvatureMeetsSecondOrderMargin) {
  const Instance inst = random_instance(2, 5, 5, 83);
  LossWeights weights;
  const MatrixXd s = dense_splitting_matrix(inst.set, inst.map, 0);
  const auto eig = recon::linalg::sym_eig(s);
  ASSERT_LT(eig.front().value, 0.0) << "fixture must have negative curvature";

  SplitConfig config;
  const double before = recon::objective::loss(inst.set, inst.map, weights);
  const LineSearchResult ls = recon::splitter::line_search_eta(
      inst.set, inst.map, weights, inst.set.candidates[0].id,
      eig.front().vector, eig.front().value, config);
  EXPECT_TRUE(ls.met_margin);
  EXPECT_LE(ls.loss_after,
            before + eig.front().value * ls.eta * ls.eta / 4.0);
}

TEST(LineSearch, TinyEtaMaxReturnsTheCapItself) {
  const Instance inst = random_instance(2, 5, 5, 89);
  LossWeights weights;
  const MatrixXd s = dense_splitting_matrix(inst.set, inst.map, 0);
  const auto eig = recon::linalg::sym_eig(s);
  ASSERT_LT(eig.front().value, 0.0);
  SplitConfig config;
  config.eta_max = 1e-12;
  const LineSearchResult ls = recon::splitter::line_search_eta(
      inst.set, inst.map, weights, inst.set.candidates[0].id,
      eig.front().vector, eig.front().value, config);
  EXPECT_TRUE(ls.met_margin);
  EXPECT_DOUBLE_EQ(ls.eta, 1e-12);
}

TEST(LineSearch, FlatDirectionSetsWarningFlag) {
  // Residual engineered so S = 4 lambda sum_j s_j w_j w_j' is PSD (quadratic
  // activation, r_a < 0, r_W = 0): no split can decrease the loss.
  std::mt19937 rng(97);
  const long d = 4, m = 3;
  ModelParams model = random_model(m, d, 2, 101);
  const ReconMap map = recon::objective::make_kkt_binary(model);
  const VectorXd x = random_unit(d, rng);
  const double lam = 0.8;

  VectorXd r_star = VectorXd::Zero(m * (1 + d));
  r_star.head(m) = -VectorXd::Ones(m);  // negative r_a block, zero r_W
  CandidateSet set;
  set.target = r_star + lam * recon::objective::map_eval(map, x, 1);
  set.add(x, lam, 1);

  const MatrixXd s = dense_splitting_matrix(set, map, 0);
  ASSERT_GE(recon::linalg::sym_eig(s).front().value, -1e-12);

  SplitConfig config;
  LossWeights weights;
  const LineSearchResult ls = recon::splitter::line_search_eta(
      set, map, weights, set.candidates[0].id, random_unit(d, rng), 0.0,
      config);
  EXPECT_FALSE(ls.met_margin);
}

// ==== full runs ====

TEST(Run, StartAtSolutionConvergesWithZeroSplits) {
  Instance inst = random_instance(2, 4, 4, 103);
  inst.set.target -= recon::objective::residual(inst.set, inst.map);
  SplitConfig config;
  LossWeights weights;
  const auto result =
      recon::splitter::run(inst.set, inst.map, weights, config);
  EXPECT_EQ(result.log.termination, "converged");
  EXPECT_TRUE(result.log.splits.empty());
  EXPECT_TRUE(result.log.certificate.satisfied);
  EXPECT_EQ(result.log.total_iterations, 0);
}

TEST(Run, EscapesMergedStationaryPointViaSplitting) {
  const MergedFixture fx = build_merged_fixture(107);
  LossWeights weights;

  // The merged point is first-order stationary yet has escape curvature.
  SplitConfig config;
  config.eps = 1e-6;
  const auto grads =
      recon::objective::grad(fx.inst.set, fx.inst.map, weights);
  double gnorm = 0.0;
  for (const auto& gx : grads.x) gnorm += gx.squaredNorm();
  gnorm = std::sqrt(gnorm);
  ASSERT_LE(gnorm, config.eps);
  const MatrixXd s = dense_splitting_matrix(fx.inst.set, fx.inst.map, 0);
  const double lambda_min = recon::linalg::sym_eig(s).front().value;
  ASSERT_LT(lambda_min, -recon::splitter::effective_eps_h(config));
  ASSERT_GT(fx.merged_loss, 1e-3);

  // Baseline without splitting stays at the plateau.
  SplitConfig baseline = config;
  baseline.enable_splitting = false;
  baseline.max_iters = 100000;
  const auto stuck =
      recon::splitter::run(fx.inst.set, fx.inst.map, weights, baseline);
  EXPECT_GE(recon::objective::loss(stuck.state, fx.inst.map, weights), 1e-3);

  // Splitting escapes and recovers the pair.
  SplitConfig with_split = config;
  with_split.max_iters = 200000;
  with_split.split_period = 20000;
  const auto escaped =
      recon::splitter::run(fx.inst.set, fx.inst.map, weights, with_split);
  EXPECT_FALSE(escaped.log.splits.empty());
  EXPECT_LE(recon::objective::loss(escaped.state, fx.inst.map, weights),
            1e-6);

  // Executed splits with the margin flag honored the proof's decrease rate.
  const double eps_h = recon::splitter::effective_eps_h(with_split);
  for (const auto& ev : escaped.log.splits) {
    EXPECT_LT(ev.loss_after, ev.loss_before);
    if (ev.met_margin) {
      EXPECT_LE(ev.loss_after,
                ev.loss_before - eps_h * ev.eta * ev.eta / 4.0 +
                    1e-12 * std::max(1.0, ev.loss_before));
    }
  }
}

TEST(Run, CertificateRecheckedWithDenseEigensolves) {
  const MergedFixture fx = build_merged_fixture(109);
  LossWeights weights;
  SplitConfig config;
  config.max_iters = 200000;
  config.split_period = 20000;
  const auto result =
      recon::splitter::run(fx.inst.set, fx.inst.map, weights, config);
  ASSERT_EQ(result.log.termination, "converged");
  const auto& cert = result.log.certificate;
  EXPECT_TRUE(cert.satisfied);
  EXPECT_LE(cert.grad_norm, config.eps);

  // Independent re-verification of the curvature side (Lanczos used 20
  // iterations >= d = 4, so dense eigensolves must agree).
  for (long i = 0; i < result.state.size(); ++i) {
    if (result.state.candidates[static_cast<std::size_t>(i)].lambda == 0.0) {
      continue;
    }
    const MatrixXd s = dense_splitting_matrix(result.state, fx.inst.map, i);
    EXPECT_GE(recon::linalg::sym_eig(s).front().value,
              -cert.eps_h - 1e-8);
  }
}

TEST(Run, SymmetricMinimumEigenvectorSplitBeatsRandomSplits) {
  std::mt19937 rng(113);
  for (unsigned seed : {127u, 131u, 137u}) {
    const Instance inst = random_instance(2, 5, 5, seed);
    LossWeights weights;
    const MatrixXd s = dense_splitting_matrix(inst.set, inst.map, 0);
    const auto eig = recon::linalg::sym_eig(s);
    if (eig.front().value >= 0.0) continue;
    const long id = inst.set.candidates[0].id;
    SplitConfig config;
    const double eta = 1e-3;

    const auto post_split_loss = [&](const VectorXd& v) {
      CandidateSet trial = inst.set;
      recon::splitter::split(trial, id, v, eta, config);
      return recon::objective::loss(trial, inst.map, weights);
    };
    const double best = post_split_loss(eig.front().vector);
    const double scale = std::max(1.0, std::abs(best));
    for (int alt = 0; alt < 50; ++alt) {
      EXPECT_GE(post_split_loss(random_unit(5, rng)), best - 1e-10 * scale);
    }
  }
}

TEST(Run, StableCandidateGainsNothingFromInfinitesimalSplits) {
  // PSD splitting matrix (quadratic activation, engineered residual): any
  // infinitesimal split increases the loss.
  std::mt19937 rng(139);
  const long d = 4, m = 3;
  const ModelParams model = random_model(m, d, 2, 149);
  const ReconMap map = recon::objective::make_kkt_binary(model);
  const VectorXd x = random_unit(d, rng);
  const double lam = 0.8;
  VectorXd r_star = VectorXd::Zero(m * (1 + d));
  r_star.head(m) = -VectorXd::Ones(m);
  CandidateSet set;
  set.target = r_star + lam * recon::objective::map_eval(map, x, 1);
  set.add(x, lam, 1);
  LossWeights weights;
  const double base = recon::objective::loss(set, map, weights);
  SplitConfig config;

  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd v = random_unit(d, rng);
    for (double eta : {1e-4, 5e-5, 2.5e-5}) {
      CandidateSet probe = set;
      recon::splitter::split(probe, probe.candidates[0].id, v, eta, config);
      EXPECT_GE(recon::objective::loss(probe, map, weights),
                base - 1e-12 * std::max(1.0, base));
    }
  }
}

TEST(Run, BudgetExhaustionReportsPartialResults) {
  std::mt19937 rng(151);
  Instance inst = random_instance(2, 4, 4, 157);
  for (auto& cand : inst.set.candidates) cand.x += 0.5 * random_unit(4, rng);
  SplitConfig config;
  config.max_iters = 25;
  config.split_period = 10;
  config.eps = 1e-14;  // unreachable in 25 iterations
  LossWeights weights;
  const auto result =
      recon::splitter::run(inst.set, inst.map, weights, config);
  EXPECT_EQ(result.log.termination, "budget_exhausted");
  EXPECT_EQ(result.log.total_iterations, 25);
  EXPECT_FALSE(result.log.certificate.satisfied);
}

TEST(Run, LoggedLossNonIncreasingAcrossAcceptedStepsAndSplits) {
  const MergedFixture fx = build_merged_fixture(163);
  LossWeights weights;
  SplitConfig config;
  config.max_iters = 60000;
  config.split_period = 5000;
  config.log_period = 50;
  const auto result =
      recon::splitter::run(fx.inst.set, fx.inst.map, weights, config);
  for (std::size_t t = 0; t + 1 < result.log.iters.size(); ++t) {
    EXPECT_LE(result.log.iters[t + 1].loss,
              result.log.iters[t].loss +
                  1e-12 * std::max(1.0, result.log.iters[t].loss));
  }
  for (const auto& ev : result.log.splits) {
    EXPECT_LE(ev.loss_after,
              ev.loss_before + 1e-12 * std::max(1.0, ev.loss_before));
  }
}

}  // namespace
