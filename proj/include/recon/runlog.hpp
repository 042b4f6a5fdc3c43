#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace recon {

// One logged optimizer iteration. `metric` is producer-specific: normalized
// margin for the margin trainer, most negative splitting eigenvalue for the
// splitting optimizer; NaN when not computed at that iteration.
struct IterRecord {
  long iter = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  double metric = std::nan("");
};

struct SplitEventRecord {
  long iteration = 0;
  long candidate = -1;
  double lambda_min = 0.0;
  double eta = 0.0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  long offspring_a = -1;
  long offspring_b = -1;
  bool met_margin = false;  // achieved the second-order decrease margin
};

// First-and-second-order exit conditions at termination. `satisfied` means
// grad_norm <= eps and min_lambda_min >= the effective curvature threshold.
struct TerminationCertificate {
  double grad_norm = std::nan("");
  double min_lambda_min = std::nan("");
  double eps = 0.0;
  double eps_h = 0.0;
  double trigger = 0.0;  // effective splitting threshold actually enforced
  bool satisfied = false;
};

struct RunLog {
  std::vector<IterRecord> iters;
  std::vector<SplitEventRecord> splits;
  std::string termination;  // converged | budget_exhausted | margin_stable | max_iters
  TerminationCertificate certificate{};
  long total_iterations = 0;
};

}  // namespace recon
