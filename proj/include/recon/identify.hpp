#pragma once

/**
 * Recovery of the rank-one components of the sample moment tensor
 * T = sum_i b_i x_i^{(x)alpha} from the parameters of a stationary
 * alpha-power network, in four stages:
 *
 *   1. extract_f_evaluations: each neuron (a_j, W_j) of a stationary model
 *      yields an exact evaluation f(W_j) = W_j / (alpha c a_j) of the
 *      gradient field f(w) = T(., w, ..., w).
 *   2. interpolate_f: least-squares fit of the degree-(alpha-1) homogeneous
 *      polynomial map f from those evaluations, via the monomial feature map.
 *   3. tensor_from_f: reassembles the full symmetric tensor from the fitted
 *      coefficients through polarization of p(w) = <w, f(w)>.
 *   4. jennrich_decompose: simultaneous diagonalization of two random matrix
 *      slices recovers the rank-one components up to permutation and sign.
 *
 * recover_from_params runs the full pipeline, reducing to the span of the
 * neuron weights first (stationary weights live in the span of the active
 * samples, so the ambient feature rank is unreachable when that span is a
 * proper subspace).
 */

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "recon/network.hpp"
#include "recon/tensor.hpp"

namespace recon::identify {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// K_pq = (W_p . W_q)^(alpha-1) for the rows of W. Equals V V^T for the
// multinomial-weighted degree-(alpha-1) feature map V.
MatrixXd gram_matrix(const MatrixXd& w, int alpha);

// Evaluations of the gradient field f at the neuron weight vectors.
struct FEvaluations {
  MatrixXd points;   // rows: W_j (neurons kept)
  MatrixXd values;   // rows: f(W_j)
  int degree = 0;    // alpha - 1: f is homogeneous of this degree
  long dropped = 0;  // neurons with a_j = 0, W_j = 0 (carry no information)
};

// Reads one f-evaluation off every neuron of a stationary model:
// f(W_j) = W_j / (alpha c a_j) with c the activation's leading coefficient.
// Neurons with |a_j| <= a_tol*scale and ||W_j|| <= w_tol*scale are dropped;
// |a_j| tiny with ||W_j|| large violates stationarity -> InconsistentNeuron.
// Requires a homogeneous activation of degree >= 2.
FEvaluations extract_f_evaluations(const network::ModelParams& params,
                                   double a_tol = 1e-9, double w_tol = 1e-9);

// Least-squares fit f(w) ~= A phi(w) with raw monomial features phi.
struct Interpolation {
  MatrixXd a;         // d x N coefficient matrix
  long rank = 0;      // numerical rank of the feature matrix
  double residual = 0.0;  // ||values - fit|| over all evaluations
};

// Fits A from evals via the pseudo-inverse of the feature matrix
// V (m x N), V_km = phi_m(point_k). Throws InterpolationRankDeficient when
// the numerical rank of V (at rank_tol, relative) is below N = indexing.size.
Interpolation interpolate_f(const FEvaluations& evals,
                            const tensors::FeatureIndexing& indexing,
                            double rank_tol = 1e-10);

// Evaluates the fitted field at one point: A phi(w).
VectorXd evaluate_interpolation(const MatrixXd& a,
                                const tensors::FeatureIndexing& indexing,
                                const VectorXd& w);

// Rebuilds the symmetric order-(degree+1) tensor whose gradient field is
// w -> A phi(w), by polarizing p(w) = <w, A phi(w)>. Any asymmetry in A is
// averaged out; the result is symmetric by construction.
tensors::SymmetricTensor tensor_from_f(const MatrixXd& a,
                                       const tensors::FeatureIndexing& indexing);

struct JennrichOpts {
  double rank_tol = 1e-8;   // relative singular-value cutoff for rank detection
  double gap_tol = 1e-6;    // minimum relative eigenvalue gap of the pencil
  int max_retries = 8;      // fresh probe redraws on degenerate spectra
  long expected_rank = -1;  // overrides rank detection when >= 0
};

struct JennrichResult {
  std::vector<tensors::Component> components;
  long rank = 0;          // rank used (detected or expected_rank)
  double eigen_gap = 0.0;  // min relative pairwise gap of accepted spectrum
  int retries = 0;         // probe redraws consumed
  VectorXd pencil_eigenvalues;  // ascending; ratios (x_i.v2 / x_i.v1)^(a-2)
  VectorXd v1, v2;              // accepted probe directions
};

// Two-slice simultaneous diagonalization: draws unit probes v1, v2, forms
// M(v1), M(v2), restricts to the top-r singular subspace of M(v1), and reads
// the components off the eigenvectors of pinv(M1) M2 there. Retries with
// fresh probes on complex or clustered spectra; DecompositionFailed when all
// retries are exhausted, RankAmbiguous when the singular-value gap at the
// detected rank is within a factor 10 of the cutoff. Requires order >= 3
// (order 2 slices are probe-independent, so the pencil is uninformative).
JennrichResult jennrich_decompose(const tensors::SymmetricTensor& t,
                                  std::uint64_t seed,
                                  const JennrichOpts& opts = {});

struct IdentifyOpts {
  double a_tol = 1e-9;       // neuron-dropping thresholds (relative)
  double w_tol = 1e-9;
  double span_tol = 1e-8;    // relative cutoff for the weight-span dimension
  double interp_rank_tol = 1e-10;  // feature-matrix rank cutoff
  JennrichOpts jennrich{};
  std::uint64_t seed = 0;
};

struct IdentifyReport {
  std::vector<tensors::Component> components;
  long rank = 0;            // detected component count
  long feature_count = 0;   // interpolation unknowns N in the working span
  long gram_rank = 0;       // numerical rank of the feature matrix
  long subspace_dim = 0;    // dimension of the detected weight span
  double interpolation_residual = 0.0;
  double pencil_eigen_gap = 0.0;
  int probe_retries = 0;
};

// Full pipeline from model parameters to recovered components. Works inside
// the detected span of the neuron weights: points and values are rotated into
// an orthonormal basis of that span, the tensor is recovered there, and the
// component directions are rotated back (coefficients are basis-invariant).
IdentifyReport recover_from_params(const network::ModelParams& params,
                                   const IdentifyOpts& opts = {});

}  // namespace recon::identify
