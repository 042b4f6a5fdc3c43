#pragma once

/**
 * Two-layer polynomial-activation networks
 *
 *   Phi(theta; x) = sum_j a_j sigma(w_j^T x),   sigma a degree-alpha polynomial,
 *
 * with the stationarity tooling around them: exponential-loss margin training,
 * exact construction of stationary points for homogeneous sigma(t) = t^alpha,
 * and certification (multiplier recovery + residual diagnostics) of
 * stationarity for a labeled dataset.
 *
 * Parameter vectors are flattened as [a; row-major W] throughout.
 */

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "recon/errors.hpp"
#include "recon/runlog.hpp"

namespace recon::network {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Polynomial activation sum_k coeffs[k] t^k. The leading coefficient is
// nonzero; degree() == coeffs.size() - 1.
struct ActivationPoly {
  std::vector<double> coeffs;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  double leading() const { return coeffs.empty() ? 0.0 : coeffs.back(); }

  double eval(double t) const;
  double d1(double t) const;
  double d2(double t) const;
  double d3(double t) const;

  // True when every coefficient below the leading one is ~0 (relative tol).
  bool is_homogeneous(double tol = 1e-12) const;

  // scale * t^alpha
  static ActivationPoly power(int alpha, double scale = 1.0);
};

void validate_activation(const ActivationPoly& activation);

struct ModelParams {
  VectorXd a;  // m outer weights
  MatrixXd w;  // m x d inner weights, one neuron per row
  ActivationPoly activation;

  long width() const { return a.size(); }
  long dim() const { return w.cols(); }

  VectorXd flatten() const;
  static ModelParams unflatten(const VectorXd& theta, long m, long d,
                               ActivationPoly activation);
};

void validate_model(const ModelParams& params);

struct LabeledDataset {
  MatrixXd x;  // n x d sample rows
  VectorXi y;  // +1 / -1

  long size() const { return x.rows(); }
  long dim() const { return x.cols(); }
};

void validate_dataset(const LabeledDataset& data);

// Phi(theta; x)
double forward(const ModelParams& params, const VectorXd& x);

// d Phi / d theta, length m * (d + 1), flattened as [a; row-major W].
VectorXd grad_theta(const ModelParams& params, const VectorXd& x);

// Drops every coefficient below the leading one: sigma_H(t) = c_alpha t^alpha.
ActivationPoly homogenize(const ActivationPoly& activation);
ModelParams homogenize(const ModelParams& params);

struct TrainConfig {
  double step = 1e-2;        // per-iteration displacement along -grad
  long max_iters = 100000;
  long margin_period = 1000;  // margin-stabilization check cadence
  double margin_rtol = 1e-6;  // relative margin change below which we stop
  long log_period = 100;      // iteration-record cadence (1 = every step)
  // Per-iteration cap on the multiplicative radius growth while margins are
  // positive (1.0 freezes the radius). Aggressive growth sharpens the
  // soft-min quickly, which trains the worst-margin direction fast but
  // starves every other neuron of gradient; gentler schedules keep more
  // neurons in play longer.
  double anneal_growth = 1.02;
};

struct TrainResult {
  ModelParams params;
  RunLog log;
};

// Full-batch gradient descent on the log of the exponential loss,
//   log L(theta), L(theta) = (1/n) sum_i exp(-y_i Phi(theta; x_i)),
// evaluated in log-sum-exp form (a literal fixed step on L advances the
// margin only logarithmically on the exponential tail, and L itself
// underflows once margins reach the hundreds). Each iteration takes an
// angular step of `step` radians (scaled by an adaptive backoff) along the
// negative gradient component tangent to the sphere ||theta|| = rho, and
// the radius rho grows geometrically while the smallest raw margin is
// positive and below an internal cap — descending the tangential component
// is what turns the direction toward the maximum-margin ray, while radial
// growth only sharpens the soft-min over margins. Steps are accepted under
// a sufficient-decrease condition (backoff halves on rejection, doubles
// capped at 1 on clean acceptance).
// Logs the log-loss, the tangential gradient norm and the normalized
// margin min_i y_i Phi(theta/||theta||; x_i) (degree-(deg+1) rescaling).
// Stops on max_iters or when the normalized margin is positive and its
// relative change over one margin_period falls below margin_rtol.
// Throws Diverged if the loss is non-finite at the current iterate or the
// backoff underflows.
TrainResult train_to_margin(const LabeledDataset& data,
                            const ModelParams& init, const TrainConfig& config);

// Constructs params of width m that satisfy BOTH per-neuron stationarity
// equations of the homogeneous model sigma(t) = t^alpha exactly:
//   a_j = sum_i lambda_i y_i (W_j^T x_i)^alpha
//   W_j = alpha a_j sum_i lambda_i y_i (W_j^T x_i)^{alpha-1} x_i
// Stationarity forces each nonzero W_j onto a direction u with f(u) = mu u
// (f the moment-tensor contraction); such fixed-point directions are located
// by Newton iteration from seeded starts, and neurons are assigned to them
// with closed-form scales c = (alpha mu^2)^{-1/(2 alpha - 2)}, a = c^alpha mu.
// Directions with u^T f(u) ~ 0 are discarded and resampled. All multipliers
// zero yields zero parameters. Throws SynthesisFailed if no usable direction
// is found within the start budget (degenerate f).
ModelParams kkt_synthesize(const LabeledDataset& data,
                           const VectorXd& multipliers, long width, int alpha,
                           std::uint64_t seed);

struct CertifyOpts {
  double margin_tol = 1e-3;      // relative width of the active-margin band
  double support_tol = 1e-8;     // relative multiplier-support cutoff
  bool require_feasible = false; // throw InfeasibleMargins when min margin <= 0
};

struct KktCertificate {
  VectorXd multipliers;           // at the ORIGINAL theta scale, >= 0
  std::vector<long> active_set;   // indices with nonzero multipliers
  double stationarity_residual = 0.0;  // ||theta - G lambda|| / ||theta||
  double margin_violation = 0.0;  // max_{i in S} |margin_i - 1| after rescaling
  double slackness_violation = 0.0;  // sum_i lambda_i |margin_i - 1| (rescaled)
  double margin_min = 0.0;        // min_i y_i Phi at the original scale
  double rescale = 1.0;           // s with min margin of s*theta equal to 1 (1 if infeasible)
};

// Recovers nonnegative multipliers explaining theta = sum_i lambda_i y_i
// grad Phi(theta; x_i) and reports stationarity/margin/slackness residuals.
// When the minimum margin is positive, the margin-band active set is tried
// first (and kept if it explains theta as well as the unrestricted fit);
// otherwise the support of the unrestricted nonnegative fit is reported.
// Requires a homogeneous activation. With opts.require_feasible, a
// nonpositive minimum margin throws InfeasibleMargins.
KktCertificate kkt_certify(const ModelParams& params,
                           const LabeledDataset& data,
                           const CertifyOpts& opts = {});

// Nonnegative least squares min ||G lambda - t||, lambda >= 0, by projected
// gradient with a support-polishing step. Shared by certification and the
// reconstruction harness.
VectorXd nnls(const MatrixXd& g, const VectorXd& t, double tol = 1e-12,
              long max_iters = 200000);

}  // namespace recon::network
