#include "recon/numkernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace recon::linalg {

namespace {

// Largest entry magnitude, used as the relative scale for tolerances.
double max_abs(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

void require_square(const MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch(std::string(what) + ": matrix must be square, got " +
                            std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
  }
}

}  // namespace

void require_finite(const Eigen::Ref<const MatrixXd>& m, const char* what) {
  if (!m.allFinite()) {
    throw NonFiniteInput(std::string(what) + ": non-finite entry in input");
  }
}

std::vector<EigPair> sym_eig(const MatrixXd& m, double sym_tol) {
  require_square(m, "sym_eig");
  require_finite(m, "sym_eig");
  const double scale = std::max(max_abs(m), 1.0);
  const double asym = m.size() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > sym_tol * scale) {
    throw NotSymmetric("sym_eig: asymmetry " + std::to_string(asym) +
                       " exceeds tolerance " + std::to_string(sym_tol * scale));
  }

  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw NumericalBreakdown("sym_eig: eigensolver did not converge");
  }
  std::vector<EigPair> pairs(static_cast<std::size_t>(m.rows()));
  for (long i = 0; i < m.rows(); ++i) {
    pairs[static_cast<std::size_t>(i)].value = solver.eigenvalues()(i);
    pairs[static_cast<std::size_t>(i)].vector = solver.eigenvectors().col(i);
  }
  return pairs;  // SelfAdjointEigenSolver already sorts ascending
}

SvdPinv svd_pinv(const MatrixXd& m, double rank_tol) {
  require_finite(m, "svd_pinv");
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);

  SvdPinv out;
  out.u = svd.matrixU();
  out.singulars = svd.singularValues();
  out.vt = svd.matrixV().transpose();

  const double cutoff =
      out.singulars.size() == 0 ? 0.0 : rank_tol * out.singulars(0);
  long rank = 0;
  for (long i = 0; i < out.singulars.size(); ++i) {
    if (out.singulars(i) > cutoff && out.singulars(i) > 0.0) ++rank;
  }
  out.rank = rank;

  VectorXd inv = VectorXd::Zero(out.singulars.size());
  for (long i = 0; i < rank; ++i) inv(i) = 1.0 / out.singulars(i);
  out.pinv = svd.matrixV() * inv.asDiagonal() * out.u.transpose();
  return out;
}

std::vector<EigPair> eig_general(const MatrixXd& c, double imag_tol) {
  require_square(c, "eig_general");
  require_finite(c, "eig_general");

  Eigen::EigenSolver<MatrixXd> solver(c);
  if (solver.info() != Eigen::Success) {
    throw NumericalBreakdown("eig_general: eigensolver did not converge");
  }

  const double scale = std::max(c.norm(), 1e-300);
  const auto& values = solver.eigenvalues();
  for (long i = 0; i < values.size(); ++i) {
    if (std::abs(values(i).imag()) > imag_tol * scale) {
      throw ComplexSpectrum("eig_general: eigenvalue " + std::to_string(i) +
                            " has imaginary part " +
                            std::to_string(values(i).imag()));
    }
  }

  // With a real spectrum each eigenvector is real up to a complex phase.
  // Rotate the phase of the largest entry onto the real axis and drop the
  // imaginary residue.
  const auto& vectors = solver.eigenvectors();
  std::vector<EigPair> pairs(static_cast<std::size_t>(c.rows()));
  for (long i = 0; i < c.rows(); ++i) {
    Eigen::VectorXcd col = vectors.col(i);
    long k = 0;
    col.cwiseAbs().maxCoeff(&k);
    std::complex<double> phase = col(k) / std::abs(col(k));
    VectorXd real_vec = (col / phase).real();
    const double nrm = real_vec.norm();
    if (!(nrm > 0.0)) {
      throw NumericalBreakdown("eig_general: degenerate eigenvector");
    }
    pairs[static_cast<std::size_t>(i)].value = values(i).real();
    pairs[static_cast<std::size_t>(i)].vector = real_vec / nrm;
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const EigPair& a, const EigPair& b) { return a.value < b.value; });
  return pairs;
}

EigPair lanczos_min_eig(const LinearOp& hvp, int dim, int iters,
                        std::uint64_t seed) {
  if (dim < 1) throw DimensionMismatch("lanczos_min_eig: dim must be >= 1");
  if (iters < 1) throw ConfigError("lanczos_min_eig: iters must be >= 1");
  const int steps = std::min(iters, dim);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_unit = [&]() {
    VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = gauss(rng);
    return VectorXd(v / v.norm());
  };

  std::vector<VectorXd> basis;
  basis.reserve(static_cast<std::size_t>(steps));
  std::vector<double> alpha;
  std::vector<double> beta;  // beta[j] couples basis[j] and basis[j+1]

  // Orthogonalize v against the accumulated basis (twice, for stability).
  auto orthogonalize = [&](VectorXd& v) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const VectorXd& q : basis) v -= q.dot(v) * q;
    }
  };

  VectorXd q = random_unit();
  double norm_scale = 1.0;

  while (static_cast<int>(basis.size()) < steps) {
    basis.push_back(q);
    VectorXd w = hvp(q);
    if (!w.allFinite()) {
      throw NonFiniteInput("lanczos_min_eig: operator returned non-finite");
    }
    if (w.size() != dim) {
      throw DimensionMismatch("lanczos_min_eig: operator output size " +
                              std::to_string(w.size()) + " != dim " +
                              std::to_string(dim));
    }
    const double a = q.dot(w);
    alpha.push_back(a);
    norm_scale = std::max(norm_scale, w.norm());
    if (static_cast<int>(basis.size()) == steps) break;

    orthogonalize(w);
    const double b = w.norm();
    if (b > 1e-12 * norm_scale) {
      beta.push_back(b);
      q = w / b;
      continue;
    }

    // Invariant subspace reached: extend with a fresh orthogonal direction
    // and decouple the blocks with a zero off-diagonal.
    bool extended = false;
    for (int attempt = 0; attempt < 3 && !extended; ++attempt) {
      VectorXd fresh = random_unit();
      orthogonalize(fresh);
      const double fn = fresh.norm();
      if (fn > 1e-8) {
        beta.push_back(0.0);
        q = fresh / fn;
        extended = true;
      }
    }
    if (!extended) {
      throw NumericalBreakdown(
          "lanczos_min_eig: no orthogonal direction after 3 restarts");
    }
  }

  const long k = static_cast<long>(basis.size());
  MatrixXd tri = MatrixXd::Zero(k, k);
  for (long j = 0; j < k; ++j) {
    tri(j, j) = alpha[static_cast<std::size_t>(j)];
    if (j + 1 < k) {
      tri(j, j + 1) = beta[static_cast<std::size_t>(j)];
      tri(j + 1, j) = beta[static_cast<std::size_t>(j)];
    }
  }
  const std::vector<EigPair> ritz = sym_eig(tri);
  const EigPair& bottom = ritz.front();

  VectorXd v = VectorXd::Zero(dim);
  for (long j = 0; j < k; ++j) {
    v += bottom.vector(j) * basis[static_cast<std::size_t>(j)];
  }
  EigPair out;
  out.value = bottom.value;
  out.vector = v / v.norm();
  return out;
}

}  // namespace recon::linalg
