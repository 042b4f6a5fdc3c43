#pragma once

/**
 * Two-phase reconstruction optimizer:
 *
 *   Phase I  - joint gradient descent on candidate positions and multipliers
 *              until the position gradient is small or a scan is due;
 *   Phase II - per-candidate minimum eigenpairs of the splitting matrix
 *              S(x_i); candidates whose lambda_min falls below the trigger
 *              are replaced by two offspring x_i +- eta v_min with halved
 *              multipliers, eta chosen by a line search on the true
 *              post-split loss.
 *
 * The loop repeats until the termination certificate holds (position gradient
 * <= eps and every lambda_min(S(x_i)) >= the curvature threshold) or the
 * iteration budget runs out. Negative curvature of S certifies a profitable
 * split: the post-split loss drops by ~ (eta^2/2) lambda_min while coincident
 * offspring leave the loss unchanged, so accepted splits never increase it.
 */

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

#include "recon/objective.hpp"
#include "recon/runlog.hpp"

namespace recon::splitter {

using Eigen::VectorXd;

struct SplitConfig {
  double eps = 1e-6;         // first-order exit tolerance on ||grad_x L||
  double eps_h = 0.0;        // curvature threshold; 0 derives sqrt(rho_hint*eps)
  double lambda_star = -0.1; // splitting trigger (must be < 0)
  double eta_max = 0.01;     // largest split displacement probed
  double eta_g = 0.0;        // descent step; 0 estimates 1/l at init
  long split_period = 20000; // Phase I iterations between curvature scans
  double cap_fraction = 0.5; // max fraction of candidates split per scan
  long max_candidates = 4096;
  int lanczos_iters = 20;
  long max_iters = 200000;   // total Phase I iteration budget
  double rho_hint = 10.0;    // Hessian-Lipschitz guess for eps_h derivation
  double l_hint = 0.0;       // smoothness guess for the step; 0 estimates it
  long refit_period = 0;     // closed-form multiplier refit cadence; 0 = off
  bool refit_nonneg = false; // constrain refits to lambda >= 0
  bool one_split_per_scan = false;  // split only the worst candidate per scan
  bool enable_splitting = true;     // false: pure descent baseline
  long log_period = 100;
  std::uint64_t seed = 0;    // drives the per-candidate Lanczos probes
};

void validate_config(const SplitConfig& config);

// Curvature threshold actually enforced: eps_h when set, else sqrt(rho*eps).
double effective_eps_h(const SplitConfig& config);
// Splitting trigger actually enforced: max(lambda_star, -eps_h). Splitting
// everything below this threshold guarantees the certificate's curvature
// condition is reachable whatever the relative magnitudes of the two knobs.
double effective_trigger(const SplitConfig& config);

struct Phase1Result {
  long iterations = 0;     // accepted steps taken in this call
  double grad_norm = 0.0;  // final ||grad_x L||
  double loss = 0.0;
  bool reached_tol = false;
  double step = 0.0;       // step size in effect at exit
};

// Gradient descent on (x, lambda) with persistent halving backoff (accepted
// steps never increase the loss). Exits when ||grad_x L|| <= eps or
// config.split_period iterations elapse, whichever is first; `budget` further
// caps the iterations this call may take. Appends one IterRecord every
// log_period accepted steps (offset by iter_offset). Throws Diverged on a
// non-finite loss or a step underflow.
Phase1Result phase1_descent(objective::CandidateSet& state,
                            const objective::ReconMap& map,
                            const objective::LossWeights& weights,
                            const SplitConfig& config, long budget,
                            RunLog* log = nullptr, long iter_offset = 0,
                            double step_in = 0.0);

struct ScanEntry {
  long index = -1;       // position in state.candidates at scan time
  long id = -1;          // stable candidate id
  double lambda_min = 0.0;
  VectorXd v_min;
};

struct ScanResult {
  std::vector<ScanEntry> below_trigger;  // ascending lambda_min, capped
  double min_lambda_min = 0.0;           // over all scanned candidates
  long skipped = 0;                      // per-candidate eigensolve failures
};

// Minimum eigenpair of S(x_i) for every candidate (zero-multiplier candidates
// contribute lambda_min = 0 and are never split). below_trigger keeps entries
// with lambda_min < effective_trigger(config), most negative first, at most
// max(1, floor(cap_fraction * k)) of them. Per-candidate determinism: Lanczos
// seed = config.seed + candidate id.
ScanResult scan_candidates(const objective::CandidateSet& state,
                           const objective::ReconMap& map,
                           const objective::LossWeights& weights,
                           const SplitConfig& config);

// Replaces candidate `id` by offspring at x +- eta*v with lambda/2 each
// (weight conservation is exact; eta = 0 yields coincident offspring and an
// unchanged loss). Returns the two new ids. Throws CandidateCapExceeded when
// the result would exceed config.max_candidates, ConfigError on a missing id,
// non-unit v, or eta outside [0, eta_max].
std::pair<long, long> split(objective::CandidateSet& state, long id,
                            const VectorXd& v, double eta,
                            const SplitConfig& config);

struct LineSearchResult {
  double eta = 0.0;
  double loss_after = 0.0;
  bool met_margin = false;  // achieved loss_before + lambda_min*eta^2/4
};

// Geometric scan over (0, eta_max]: evaluates the true post-split loss and
// returns the probe with the lowest loss among those meeting the
// second-order sufficient decrease dL <= lambda_min * eta^2 / 4. When no
// probe qualifies, returns the smallest probe with met_margin = false.
LineSearchResult line_search_eta(const objective::CandidateSet& state,
                                 const objective::ReconMap& map,
                                 const objective::LossWeights& weights,
                                 long id, const VectorXd& v, double lambda_min,
                                 const SplitConfig& config);

struct RunResult {
  objective::CandidateSet state;
  RunLog log;
};

// Full alternation. Termination string: "converged" (certificate satisfied)
// or "budget_exhausted" (partial results; certificate reports the final
// measurements either way). Splits that fail to decrease the loss are
// skipped, so the logged loss is non-increasing across accepted steps and
// executed splits.
RunResult run(objective::CandidateSet state, const objective::ReconMap& map,
              const objective::LossWeights& weights,
              const SplitConfig& config);

}  // namespace recon::splitter
