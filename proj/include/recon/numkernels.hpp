#pragma once

/**
 * Dense linear-algebra kernels shared by the recovery and splitting pipelines:
 * symmetric eigendecomposition, SVD-based pseudoinverse, nonsymmetric
 * eigendecomposition for matrix pencils, and a matrix-free Lanczos minimum
 * eigenvalue estimator with full reorthogonalization.
 *
 * All operations validate shapes and reject non-finite input. Results are
 * deterministic: fixed seeds drive every randomized path.
 */

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "recon/errors.hpp"

namespace recon::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct EigPair {
  double value = 0.0;
  VectorXd vector;  // unit 2-norm
};

// Eigendecomposition of a symmetric matrix. Pairs are returned in ascending
// order of eigenvalue; eigenvectors are orthonormal. Throws NotSymmetric if
// max|M - M^T| exceeds sym_tol relative to the largest entry magnitude.
std::vector<EigPair> sym_eig(const MatrixXd& m, double sym_tol = 1e-10);

struct SvdPinv {
  MatrixXd u;          // left singular vectors, thin
  VectorXd singulars;  // descending
  MatrixXd vt;         // right singular vectors, transposed, thin
  MatrixXd pinv;       // Moore-Penrose pseudoinverse at the given cutoff
  long rank = 0;       // number of singular values above rank_tol * s_max
};

// Thin SVD plus pseudoinverse. Singular values s_i <= rank_tol * s_1 are
// treated as zero. A zero matrix reports rank 0 and a zero pseudoinverse.
SvdPinv svd_pinv(const MatrixXd& m, double rank_tol = 1e-10);

// Eigendecomposition of a general square real matrix that is expected to have
// a real spectrum (diagonalizable matrix pencils). Pairs are returned in
// ascending order of eigenvalue with unit real eigenvectors. Throws
// ComplexSpectrum if any eigenvalue has |imag| > imag_tol * ||C||_F.
std::vector<EigPair> eig_general(const MatrixXd& c, double imag_tol = 1e-7);

using LinearOp = std::function<VectorXd(const VectorXd&)>;

// Minimum eigenpair of a symmetric operator given only matrix-vector
// products. Runs `iters` Lanczos steps (capped at dim) with full
// reorthogonalization; the start vector and any breakdown restarts are drawn
// from a generator seeded with `seed`, so results are reproducible. On an
// invariant-subspace breakdown the basis is extended with a fresh orthogonal
// direction (zero off-diagonal block in the tridiagonal matrix); after three
// consecutive failed extensions NumericalBreakdown is thrown. With
// iters >= dim the estimate equals the dense minimum up to roundoff.
EigPair lanczos_min_eig(const LinearOp& hvp, int dim, int iters,
                        std::uint64_t seed);

// Shared validation helper: throws NonFiniteInput if any entry is NaN/Inf.
void require_finite(const Eigen::Ref<const MatrixXd>& m, const char* what);

}  // namespace recon::linalg
