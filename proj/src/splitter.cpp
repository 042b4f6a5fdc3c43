#include "recon/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "recon/numkernels.hpp"

namespace recon::splitter {
namespace {

double stacked_x_norm(const objective::Gradients& g) {
  double total = 0.0;
  for (const auto& gx : g.x) total += gx.squaredNorm();
  return std::sqrt(total);
}

void apply_step(objective::CandidateSet& state, const objective::Gradients& g,
                double step) {
  for (long i = 0; i < state.size(); ++i) {
    auto& cand = state.candidates[static_cast<std::size_t>(i)];
    cand.x -= step * g.x[static_cast<std::size_t>(i)];
    cand.lambda -= step * g.lambda(i);
  }
}

long find_by_id(const objective::CandidateSet& state, long id) {
  for (long i = 0; i < state.size(); ++i) {
    if (state.candidates[static_cast<std::size_t>(i)].id == id) return i;
  }
  return -1;
}

// Offspring insertion without validation: first replaces the parent slot,
// second appended. Shared by split() and the line-search trials.
std::pair<long, long> do_split(objective::CandidateSet& state, long index,
                               const VectorXd& v, double eta) {
  const objective::Candidate parent =
      state.candidates[static_cast<std::size_t>(index)];
  objective::Candidate a = parent, b = parent;
  a.x = parent.x + eta * v;
  b.x = parent.x - eta * v;
  a.lambda = parent.lambda / 2.0;
  b.lambda = parent.lambda / 2.0;
  a.parent = b.parent = parent.id;
  a.depth = b.depth = parent.depth + 1;
  a.id = state.next_id++;
  b.id = state.next_id++;
  state.candidates[static_cast<std::size_t>(index)] = std::move(a);
  state.candidates.push_back(std::move(b));
  return {state.next_id - 2, state.next_id - 1};
}

// Largest joint-Hessian eigenvalue estimate by power iteration on the
// finite-difference gradient map; used to pick the default descent step.
double estimate_smoothness(const objective::CandidateSet& state,
                           const objective::ReconMap& map,
                           const objective::LossWeights& weights,
                           std::uint64_t seed) {
  const long k = state.size();
  if (k == 0) return 1.0;
  const long d = state.candidates.front().x.size();
  const long dim = k * (d + 1);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXd v(dim);
  for (long i = 0; i < dim; ++i) v(i) = gauss(rng);
  v.normalize();

  const auto grad_at = [&](const objective::CandidateSet& s) {
    const objective::Gradients g = objective::grad(s, map, weights);
    VectorXd flat(dim);
    for (long i = 0; i < k; ++i) {
      flat.segment(i * (d + 1), d) = g.x[static_cast<std::size_t>(i)];
      flat(i * (d + 1) + d) = g.lambda(i);
    }
    return flat;
  };
  const auto perturb = [&](const VectorXd& dir, double h) {
    objective::CandidateSet s = state;
    for (long i = 0; i < k; ++i) {
      auto& cand = s.candidates[static_cast<std::size_t>(i)];
      cand.x += h * dir.segment(i * (d + 1), d);
      cand.lambda += h * dir(i * (d + 1) + d);
    }
    return s;
  };

  const double h = 1e-5;
  double ell = 1.0;
  for (int iter = 0; iter < 12; ++iter) {
    const VectorXd hv =
        (grad_at(perturb(v, h)) - grad_at(perturb(v, -h))) / (2.0 * h);
    const double norm = hv.norm();
    if (!std::isfinite(norm) || norm < 1e-12) break;
    ell = norm;
    v = hv / norm;
  }
  return std::max(ell, 1e-8);
}

}  // namespace

void validate_config(const SplitConfig& config) {
  if (!(config.eps > 0.0)) throw ConfigError("split config: eps must be > 0");
  if (config.eps_h < 0.0) throw ConfigError("split config: eps_h must be >= 0");
  if (!(config.lambda_star < 0.0)) {
    throw ConfigError("split config: lambda_star must be < 0");
  }
  if (!(config.eta_max > 0.0)) {
    throw ConfigError("split config: eta_max must be > 0");
  }
  if (config.eta_g < 0.0) throw ConfigError("split config: eta_g must be >= 0");
  if (!(config.cap_fraction > 0.0 && config.cap_fraction <= 1.0)) {
    throw ConfigError("split config: cap_fraction must be in (0, 1]");
  }
  if (config.split_period < 1) {
    throw ConfigError("split config: split_period must be >= 1");
  }
  if (config.max_candidates < 1) {
    throw ConfigError("split config: max_candidates must be >= 1");
  }
  if (config.lanczos_iters < 1) {
    throw ConfigError("split config: lanczos_iters must be >= 1");
  }
  if (config.max_iters < 0) {
    throw ConfigError("split config: max_iters must be >= 0");
  }
  if (!(config.rho_hint > 0.0)) {
    throw ConfigError("split config: rho_hint must be > 0");
  }
  if (config.l_hint < 0.0) {
    throw ConfigError("split config: l_hint must be >= 0");
  }
  if (config.refit_period < 0) {
    throw ConfigError("split config: refit_period must be >= 0");
  }
  if (config.log_period < 1) {
    throw ConfigError("split config: log_period must be >= 1");
  }
}

double effective_eps_h(const SplitConfig& config) {
  return config.eps_h > 0.0 ? config.eps_h
                            : std::sqrt(config.rho_hint * config.eps);
}

double effective_trigger(const SplitConfig& config) {
  return std::max(config.lambda_star, -effective_eps_h(config));
}

Phase1Result phase1_descent(objective::CandidateSet& state,
                            const objective::ReconMap& map,
                            const objective::LossWeights& weights,
                            const SplitConfig& config, long budget,
                            RunLog* log, long iter_offset, double step_in) {
  validate_config(config);
  double step = step_in;
  if (step <= 0.0) {
    if (config.eta_g > 0.0) {
      step = config.eta_g;
    } else {
      const double ell = config.l_hint > 0.0
                             ? config.l_hint
                             : estimate_smoothness(state, map, weights,
                                                   config.seed);
      step = std::min(1.0, 1.0 / ell);
    }
  }
  const double step0 = step;

  double current = objective::loss(state, map, weights);
  if (!std::isfinite(current)) {
    throw Diverged("phase1_descent: non-finite loss at entry");
  }

  Phase1Result result;
  const long limit = std::min(config.split_period, std::max<long>(budget, 0));
  while (result.iterations < limit) {
    const objective::Gradients g = objective::grad(state, map, weights);
    const double gnorm = stacked_x_norm(g);
    result.grad_norm = gnorm;
    if (log && (iter_offset + result.iterations) % config.log_period == 0) {
      log->iters.push_back(
          {iter_offset + result.iterations, current, gnorm, step});
    }
    if (gnorm <= config.eps) {
      result.reached_tol = true;
      break;
    }

    // Persistent halving: shrink until the step does not increase the loss.
    objective::CandidateSet trial;
    double trial_loss;
    while (true) {
      trial = state;
      apply_step(trial, g, step);
      trial_loss = objective::loss(trial, map, weights);
      if (std::isfinite(trial_loss) && trial_loss <= current) break;
      step /= 2.0;
      if (step < 1e-18 * step0) {
        throw Diverged("phase1_descent: step underflow during backoff");
      }
    }
    state = std::move(trial);
    current = trial_loss;
    ++result.iterations;

    if (config.refit_period > 0 &&
        result.iterations % config.refit_period == 0) {
      const VectorXd refit =
          objective::lambda_refit(state, map, config.refit_nonneg);
      objective::CandidateSet refit_state = state;
      for (long i = 0; i < refit_state.size(); ++i) {
        refit_state.candidates[static_cast<std::size_t>(i)].lambda = refit(i);
      }
      const double refit_loss = objective::loss(refit_state, map, weights);
      if (std::isfinite(refit_loss) && refit_loss <= current) {
        state = std::move(refit_state);
        current = refit_loss;
      }
    }
  }

  if (!result.reached_tol) {
    result.grad_norm = stacked_x_norm(objective::grad(state, map, weights));
    result.reached_tol = result.grad_norm <= config.eps;
  }
  result.loss = current;
  result.step = step;
  return result;
}

ScanResult scan_candidates(const objective::CandidateSet& state,
                           const objective::ReconMap& map,
                           const objective::LossWeights& weights,
                           const SplitConfig& config) {
  validate_config(config);
  const double trigger = effective_trigger(config);

  ScanResult result;
  result.min_lambda_min = 0.0;
  std::vector<ScanEntry> entries;
  for (long i = 0; i < state.size(); ++i) {
    const auto& cand = state.candidates[static_cast<std::size_t>(i)];
    if (cand.lambda == 0.0) continue;  // S is identically zero
    const long d = cand.x.size();
    const linalg::LinearOp op = [&](const VectorXd& v) {
      return objective::splitting_hvp(state, map, i, v, weights.alpha1);
    };
    linalg::EigPair pair;
    try {
      pair = linalg::lanczos_min_eig(
          op, static_cast<int>(d), config.lanczos_iters,
          config.seed + static_cast<std::uint64_t>(cand.id));
    } catch (const NumericalBreakdown&) {
      ++result.skipped;
      continue;
    }
    result.min_lambda_min = std::min(result.min_lambda_min, pair.value);
    if (pair.value < trigger) {
      entries.push_back({i, cand.id, pair.value, std::move(pair.vector)});
    }
  }

  std::sort(entries.begin(), entries.end(),
            [](const ScanEntry& a, const ScanEntry& b) {
              if (a.lambda_min != b.lambda_min) {
                return a.lambda_min < b.lambda_min;
              }
              return a.id < b.id;
            });
  const long cap = std::max<long>(
      1, static_cast<long>(std::floor(config.cap_fraction *
                                      static_cast<double>(state.size()))));
  if (static_cast<long>(entries.size()) > cap) entries.resize(cap);
  result.below_trigger = std::move(entries);
  return result;
}

std::pair<long, long> split(objective::CandidateSet& state, long id,
                            const VectorXd& v, double eta,
                            const SplitConfig& config) {
  const long index = find_by_id(state, id);
  if (index < 0) throw ConfigError("split: no candidate with the given id");
  if (std::abs(v.norm() - 1.0) > 1e-10) {
    throw ConfigError("split: direction must be unit norm");
  }
  if (!(eta >= 0.0) || eta > config.eta_max) {
    throw ConfigError("split: eta must lie in [0, eta_max]");
  }
  if (state.size() + 1 > config.max_candidates) {
    throw CandidateCapExceeded("split: candidate budget exhausted");
  }
  return do_split(state, index, v, eta);
}

LineSearchResult line_search_eta(const objective::CandidateSet& state,
                                 const objective::ReconMap& map,
                                 const objective::LossWeights& weights,
                                 long id, const VectorXd& v, double lambda_min,
                                 const SplitConfig& config) {
  validate_config(config);
  const long index = find_by_id(state, id);
  if (index < 0) {
    throw ConfigError("line_search_eta: no candidate with the given id");
  }
  const double loss_before = objective::loss(state, map, weights);

  // Backtracking from the cap: the first (largest) step satisfying the
  // second-order sufficient-decrease margin is returned, so the accepted
  // step carries the Theorem-style guarantee at the largest usable scale.
  // A nonnegative lambda_min makes the margin vacuous: no step can claim it.
  const double slack = 1e-15 * std::max(1.0, std::abs(loss_before));
  LineSearchResult smallest;
  double eta = config.eta_max;
  constexpr int kProbes = 24;
  for (int probe = 0; probe < kProbes; ++probe, eta /= 2.0) {
    objective::CandidateSet trial = state;
    do_split(trial, index, v, eta);
    const double after = objective::loss(trial, map, weights);
    smallest = {eta, after, false};
    const double required = loss_before + lambda_min * eta * eta / 4.0;
    if (lambda_min < 0.0 && after <= required + slack) {
      return {eta, after, true};
    }
  }
  return smallest;  // no probe met the margin: flagged via met_margin = false
}

RunResult run(objective::CandidateSet state, const objective::ReconMap& map,
              const objective::LossWeights& weights,
              const SplitConfig& config) {
  validate_config(config);
  const double eps_h = effective_eps_h(config);
  const double trigger = effective_trigger(config);

  RunResult result;
  RunLog& log = result.log;
  long iterations = 0;
  double step_carry = 0.0;
  bool capped = false;
  std::string termination;

  while (true) {
    const long budget = std::max<long>(0, config.max_iters - iterations);
    const Phase1Result p1 = phase1_descent(state, map, weights, config, budget,
                                           &log, iterations, step_carry);
    iterations += p1.iterations;
    step_carry = p1.step;

    if (!config.enable_splitting) {
      if (p1.reached_tol) {
        termination = "converged";
        break;
      }
      if (iterations >= config.max_iters) {
        termination = "budget_exhausted";
        break;
      }
      continue;
    }

    const ScanResult scan = scan_candidates(state, map, weights, config);
    if (p1.reached_tol && scan.below_trigger.empty()) {
      termination = "converged";
      break;
    }
    if (iterations >= config.max_iters) {
      termination = "budget_exhausted";
      break;
    }

    long executed = 0;
    if (!capped) {
      for (const ScanEntry& entry : scan.below_trigger) {
        const long index = find_by_id(state, entry.id);
        if (index < 0) continue;
        const LineSearchResult ls = line_search_eta(
            state, map, weights, entry.id, entry.v_min, entry.lambda_min,
            config);
        const double loss_before = objective::loss(state, map, weights);
        if (!(ls.loss_after <= loss_before)) continue;  // unprofitable: skip
        std::pair<long, long> offspring;
        try {
          offspring = split(state, entry.id, entry.v_min, ls.eta, config);
        } catch (const CandidateCapExceeded&) {
          capped = true;
          break;
        }
        log.splits.push_back({iterations, entry.id, entry.lambda_min, ls.eta,
                              loss_before, ls.loss_after, offspring.first,
                              offspring.second, ls.met_margin});
        ++executed;
        if (config.one_split_per_scan) break;
      }
    }

    // A scan that found work but could execute none cannot make progress.
    if (p1.reached_tol && executed == 0) {
      termination = "stalled";
      break;
    }
  }

  // Certificate recheck on the final state with fresh measurements.
  const objective::Gradients g = objective::grad(state, map, weights);
  const ScanResult final_scan = scan_candidates(state, map, weights, config);
  TerminationCertificate cert;
  cert.grad_norm = stacked_x_norm(g);
  cert.min_lambda_min = final_scan.min_lambda_min;
  cert.eps = config.eps;
  cert.eps_h = eps_h;
  cert.trigger = trigger;
  cert.satisfied =
      cert.grad_norm <= config.eps && cert.min_lambda_min >= -eps_h;

  log.termination = termination;
  log.certificate = cert;
  log.total_iterations = iterations;
  result.state = std::move(state);
  return result;
}

}  // namespace recon::splitter
