#include "recon/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>

#include "recon/errors.hpp"
#include "recon/numkernels.hpp"

namespace recon::harness {

namespace {

constexpr int kRedrawBudget = 100;

Eigen::MatrixXd draw_rows(long n, long d, std::mt19937_64& rng,
                          bool unit_norm) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (long i = 0; i < n; ++i) {
    for (long c = 0; c < d; ++c) x(i, c) = gauss(rng);
    if (unit_norm) {
      const double norm = x.row(i).norm();
      if (norm == 0.0) {
        x(i, 0) = 1.0;  // measure-zero fallback keeps the row on the sphere
      } else {
        x.row(i) /= norm;
      }
    }
  }
  return x;
}

bool full_row_rank(const Eigen::MatrixXd& x) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return false;
  return sv(sv.size() - 1) > 1e-8 * sv(0);
}

double sign_invariant_l2(const Eigen::VectorXd& r, const Eigen::VectorXd& t) {
  return std::min((r - t).norm(), (r + t).norm());
}

double cosine_up_to_sign(const Eigen::VectorXd& r, const Eigen::VectorXd& t) {
  const double denom = r.norm() * t.norm();
  if (denom == 0.0) return 0.0;
  return std::abs(r.dot(t)) / denom;
}

// Exact min-cost matching of all rows (rows <= 12) against distinct columns:
// sweep columns, dynamic program over the subset of rows already matched.
// dp[j][mask] is the cheapest way to match exactly the rows in `mask` using
// distinct columns from the first j; one table per column keeps the
// back-walk consistent (a rolling table mixes decisions made at different
// columns and can silently reuse one).
std::vector<long> assign_exact_tracked(const Eigen::MatrixXd& cost) {
  const long rows = cost.rows();
  const long cols = cost.cols();
  const std::size_t masks = std::size_t{1} << rows;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dp(
      static_cast<std::size_t>(cols) + 1, std::vector<double>(masks, inf));
  dp[0][0] = 0.0;
  for (long j = 0; j < cols; ++j) {
    const auto& prev = dp[static_cast<std::size_t>(j)];
    auto& next = dp[static_cast<std::size_t>(j) + 1];
    next = prev;  // column j may be skipped
    for (std::size_t mask = 0; mask < masks; ++mask) {
      if (prev[mask] == inf) continue;
      for (long i = 0; i < rows; ++i) {
        if (mask & (std::size_t{1} << i)) continue;
        const std::size_t to = mask | (std::size_t{1} << i);
        const double c = prev[mask] + cost(i, j);
        if (c < next[to]) next[to] = c;
      }
    }
  }

  std::vector<long> row_to_col(static_cast<std::size_t>(rows), -1);
  std::size_t mask = masks - 1;
  for (long j = cols; j > 0 && mask != 0; --j) {
    const auto& cur = dp[static_cast<std::size_t>(j)];
    const auto& prev = dp[static_cast<std::size_t>(j) - 1];
    if (cur[mask] == prev[mask]) continue;  // column j-1 unused on this path
    for (long i = 0; i < rows; ++i) {
      if (!(mask & (std::size_t{1} << i))) continue;
      const std::size_t without = mask ^ (std::size_t{1} << i);
      if (cur[mask] == prev[without] + cost(i, j - 1)) {
        row_to_col[static_cast<std::size_t>(i)] = j - 1;
        mask = without;
        break;
      }
    }
  }
  return row_to_col;
}

std::vector<long> assign_greedy(const Eigen::MatrixXd& cost) {
  const long rows = cost.rows();
  const long cols = cost.cols();
  std::vector<long> row_to_col(static_cast<std::size_t>(rows), -1);
  std::vector<bool> row_used(static_cast<std::size_t>(rows), false);
  std::vector<bool> col_used(static_cast<std::size_t>(cols), false);
  for (long step = 0; step < rows; ++step) {
    double best = std::numeric_limits<double>::infinity();
    long bi = -1, bj = -1;
    for (long i = 0; i < rows; ++i) {
      if (row_used[static_cast<std::size_t>(i)]) continue;
      for (long j = 0; j < cols; ++j) {
        if (col_used[static_cast<std::size_t>(j)]) continue;
        if (cost(i, j) < best) {
          best = cost(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0) break;
    row_used[static_cast<std::size_t>(bi)] = true;
    col_used[static_cast<std::size_t>(bj)] = true;
    row_to_col[static_cast<std::size_t>(bi)] = bj;
  }
  return row_to_col;
}

}  // namespace

network::LabeledDataset gen_synthetic(long n, long d, std::uint64_t seed,
                                      bool unit_norm, bool independent,
                                      bool orthonormal) {
  if (n < 1 || d < 1) {
    throw ConfigError("gen_synthetic: n and d must be positive");
  }
  if ((independent || orthonormal) && n > d) {
    throw ConfigError(
        "gen_synthetic: independent or orthonormal rows require n <= d "
        "(cannot exceed the ambient dimension)");
  }
  std::mt19937_64 rng(seed);
  network::LabeledDataset data;
  if (orthonormal) {
    // Q factor of a Gaussian draw: Haar-distributed orthonormal frame.
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd g(d, n);
    for (long i = 0; i < g.size(); ++i) g.data()[i] = gauss(rng);
    data.x = (Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() *
              Eigen::MatrixXd::Identity(d, n))
                 .transpose();
    data.y.resize(n);
    for (long i = 0; i < n; ++i) data.y(i) = (i % 2 == 0) ? 1 : -1;
    return data;
  }
  for (int attempt = 0; attempt < kRedrawBudget; ++attempt) {
    data.x = draw_rows(n, d, rng, unit_norm);
    if (!independent || full_row_rank(data.x)) {
      data.y.resize(n);
      for (long i = 0; i < n; ++i) data.y(i) = (i % 2 == 0) ? 1 : -1;
      return data;
    }
  }
  throw GenerationFailed(
      "gen_synthetic: could not draw a full-row-rank sample matrix within "
      "the redraw budget");
}

double MatchReport::fraction_cosine_above(double threshold) const {
  if (pairs.empty()) return 0.0;
  long count = 0;
  for (const auto& p : pairs) {
    if (p.cosine >= threshold) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(pairs.size());
}

MatchReport match_components(const Eigen::MatrixXd& recovered_rows,
                             const Eigen::MatrixXd& truth_rows) {
  MatchReport report;
  const long k = recovered_rows.rows();
  const long n = truth_rows.rows();
  if (k == 0 || n == 0) return report;
  if (recovered_rows.cols() != truth_rows.cols()) {
    throw DimensionMismatch(
        "match_components: recovered and reference rows have different "
        "dimensions");
  }

  // The DP runs over subsets of the smaller side.
  const bool transpose = k > n;
  const Eigen::MatrixXd& small = transpose ? truth_rows : recovered_rows;
  const Eigen::MatrixXd& large = transpose ? recovered_rows : truth_rows;
  Eigen::MatrixXd cost(small.rows(), large.rows());
  for (long i = 0; i < small.rows(); ++i) {
    for (long j = 0; j < large.rows(); ++j) {
      cost(i, j) = sign_invariant_l2(small.row(i), large.row(j));
    }
  }

  std::vector<long> row_to_col;
  if (small.rows() <= 12) {
    row_to_col = assign_exact_tracked(cost);
    report.optimal = true;
  } else {
    row_to_col = assign_greedy(cost);
    report.optimal = false;
  }

  for (long i = 0; i < small.rows(); ++i) {
    const long j = row_to_col[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    MatchPair pair;
    pair.recovered = transpose ? j : i;
    pair.truth = transpose ? i : j;
    pair.l2 = cost(i, j);
    pair.cosine = cosine_up_to_sign(
        recovered_rows.row(pair.recovered), truth_rows.row(pair.truth));
    report.pairs.push_back(pair);
  }
  std::sort(report.pairs.begin(), report.pairs.end(),
            [](const MatchPair& a, const MatchPair& b) {
              return a.recovered < b.recovered;
            });

  if (!report.pairs.empty()) {
    std::vector<double> l2s;
    for (const auto& p : report.pairs) {
      report.mean_l2 += p.l2;
      report.mean_cosine += p.cosine;
      l2s.push_back(p.l2);
    }
    report.mean_l2 /= static_cast<double>(report.pairs.size());
    report.mean_cosine /= static_cast<double>(report.pairs.size());
    std::sort(l2s.begin(), l2s.end());
    const std::size_t mid = l2s.size() / 2;
    report.median_l2 = (l2s.size() % 2 == 1)
                           ? l2s[mid]
                           : 0.5 * (l2s[mid - 1] + l2s[mid]);
  }
  return report;
}

MatchReport match_components(const std::vector<tensors::Component>& recovered,
                             const network::LabeledDataset& truth) {
  if (recovered.empty()) return {};
  Eigen::MatrixXd rows(static_cast<long>(recovered.size()),
                       recovered.front().direction.size());
  for (std::size_t i = 0; i < recovered.size(); ++i) {
    rows.row(static_cast<long>(i)) = recovered[i].direction.transpose();
  }
  return match_components(rows, truth.x);
}

MatchReport match_components(const objective::CandidateSet& recovered,
                             const network::LabeledDataset& truth) {
  if (recovered.candidates.empty()) return {};
  Eigen::MatrixXd rows(recovered.size(),
                       recovered.candidates.front().x.size());
  for (long i = 0; i < recovered.size(); ++i) {
    rows.row(i) =
        recovered.candidates[static_cast<std::size_t>(i)].x.transpose();
  }
  return match_components(rows, truth.x);
}

std::string resolve_out_dir(const std::string& requested) {
  std::string dir = requested;
  if (const char* env = std::getenv("RECON_OUT_DIR")) {
    if (env[0] != '\0') dir = env;
  }
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace recon::harness
