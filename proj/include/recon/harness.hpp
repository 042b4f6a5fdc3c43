#pragma once

// Experiment shell: synthetic dataset generation and reconstruction-quality
// metrics (sign-invariant matching of recovered directions against the true
// samples).

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "recon/network.hpp"
#include "recon/objective.hpp"
#include "recon/tensor.hpp"

namespace recon::harness {

// Rows drawn i.i.d. Gaussian, normalized to the unit sphere when `unit_norm`
// is set, with balanced alternating +/-1 labels. With `independent`, rows are
// redrawn (bounded number of attempts) until X has full row rank; requires
// n <= d. With `orthonormal`, rows are the Q factor of a Gaussian draw
// (mutually orthogonal unit rows; implies the other two flags); requires
// n <= d. Orthogonal samples are the geometry under which parameter-space
// identification recovers every sample direction, so this is the right mode
// for end-to-end recovery demos.
network::LabeledDataset gen_synthetic(long n, long d, std::uint64_t seed,
                                      bool unit_norm = true,
                                      bool independent = false,
                                      bool orthonormal = false);

struct MatchPair {
  long recovered = -1;  // index into the recovered list
  long truth = -1;      // row index into the reference matrix
  double l2 = 0.0;      // min(||r - t||, ||r + t||)
  double cosine = 0.0;  // |<r, t>| / (||r|| ||t||)
};

struct MatchReport {
  std::vector<MatchPair> pairs;  // injective on both sides
  bool optimal = true;           // exact assignment (greedy fallback if not)
  double mean_l2 = 0.0;
  double median_l2 = 0.0;
  double mean_cosine = 0.0;

  double fraction_cosine_above(double threshold) const;
};

// Minimum-cost assignment between recovered directions and reference rows
// under the sign-invariant L2 distance. Exact (dynamic program over subsets
// of the smaller side) when min(#recovered, #rows) <= 12; greedy otherwise,
// flagged via `optimal = false`. Matches min(#recovered, #rows) pairs.
MatchReport match_components(const Eigen::MatrixXd& recovered_rows,
                             const Eigen::MatrixXd& truth_rows);
MatchReport match_components(const std::vector<tensors::Component>& recovered,
                             const network::LabeledDataset& truth);
MatchReport match_components(const objective::CandidateSet& recovered,
                             const network::LabeledDataset& truth);

// Common run context shared by all CLI subcommands: where outputs go and the
// mandatory seed. `resolve_out_dir` applies the RECON_OUT_DIR environment
// override and creates the directory.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

std::string resolve_out_dir(const std::string& requested);

}  // namespace recon::harness
