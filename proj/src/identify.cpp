#include "recon/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include "recon/numkernels.hpp"

namespace recon::identify {
namespace {

bool lex_less(const VectorXd& a, const VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                      b.data() + b.size());
}

// Deterministic output order: dominant components first, lexicographic on the
// direction among (near-)ties.
void sort_components(std::vector<tensors::Component>& comps) {
  std::sort(comps.begin(), comps.end(),
            [](const tensors::Component& l, const tensors::Component& r) {
              const double la = std::abs(l.coefficient);
              const double ra = std::abs(r.coefficient);
              if (la != ra) return la > ra;
              return lex_less(l.direction, r.direction);
            });
}

// Flips x so its first non-negligible coordinate is positive. Returns true
// when a flip happened.
bool canonicalize_first_nonzero(VectorXd& x) {
  const double tol = 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff());
  for (long c = 0; c < x.size(); ++c) {
    if (std::abs(x(c)) > tol) {
      if (x(c) < 0.0) {
        x = -x;
        return true;
      }
      return false;
    }
  }
  return false;
}

VectorXd unit_sphere_draw(std::mt19937_64& rng, long dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXd v(dim);
  double norm = 0.0;
  do {
    for (long i = 0; i < dim; ++i) v(i) = gauss(rng);
    norm = v.norm();
  } while (norm < 1e-12);
  return v / norm;
}

}  // namespace

MatrixXd gram_matrix(const MatrixXd& w, int alpha) {
  if (alpha < 2) throw ConfigError("gram_matrix: alpha must be >= 2");
  linalg::require_finite(w, "gram_matrix: W");
  const MatrixXd inner = w * w.transpose();
  return inner.array().pow(alpha - 1).matrix();
}

FEvaluations extract_f_evaluations(const network::ModelParams& params,
                                   double a_tol, double w_tol) {
  const auto& act = params.activation;
  if (!act.is_homogeneous() || act.degree() < 2) {
    throw ConfigError(
        "extract_f_evaluations: requires a homogeneous activation of degree "
        ">= 2 (homogenize the model first)");
  }
  const int alpha = act.degree();
  const double c = act.leading();
  linalg::require_finite(params.a, "extract_f_evaluations: a");
  linalg::require_finite(params.w, "extract_f_evaluations: W");

  double scale = params.a.size() > 0 ? params.a.cwiseAbs().maxCoeff() : 0.0;
  for (long j = 0; j < params.width(); ++j) {
    scale = std::max(scale, params.w.row(j).norm());
  }
  const double a_thresh = a_tol * scale;
  const double w_thresh = w_tol * scale;

  FEvaluations evals;
  evals.degree = alpha - 1;
  std::vector<long> kept;
  for (long j = 0; j < params.width(); ++j) {
    if (std::abs(params.a(j)) > a_thresh) {
      kept.push_back(j);
    } else if (params.w.row(j).norm() <= w_thresh) {
      ++evals.dropped;  // a_j = 0 forces W_j = 0: carries no information
    } else {
      throw InconsistentNeuron(
          j, "output weight is (numerically) zero but the input weight vector "
             "is not; stationarity forces both to vanish together");
    }
  }

  evals.points.resize(static_cast<long>(kept.size()), params.dim());
  evals.values.resize(static_cast<long>(kept.size()), params.dim());
  for (long k = 0; k < static_cast<long>(kept.size()); ++k) {
    const long j = kept[k];
    evals.points.row(k) = params.w.row(j);
    evals.values.row(k) = params.w.row(j) / (alpha * c * params.a(j));
  }
  return evals;
}

Interpolation interpolate_f(const FEvaluations& evals,
                            const tensors::FeatureIndexing& indexing,
                            double rank_tol) {
  const long m = evals.points.rows();
  const long d = evals.points.cols();
  if (m < 1) {
    throw InterpolationRankDeficient(0, indexing.size());
  }
  if (d != indexing.dim() || evals.values.rows() != m ||
      evals.values.cols() != d) {
    throw DimensionMismatch("interpolate_f: evaluation/indexing shapes");
  }
  if (evals.degree != indexing.degree()) {
    throw ConfigError("interpolate_f: indexing degree != evaluation degree");
  }
  linalg::require_finite(evals.points, "interpolate_f: points");
  linalg::require_finite(evals.values, "interpolate_f: values");

  const long n = indexing.size();
  MatrixXd v(m, n);
  for (long k = 0; k < m; ++k) {
    v.row(k) = tensors::monomial_features(evals.points.row(k).transpose(),
                                          indexing);
  }

  const auto svd = linalg::svd_pinv(v, rank_tol);
  if (svd.rank < n) throw InterpolationRankDeficient(svd.rank, n);

  Interpolation out;
  out.a = (svd.pinv * evals.values).transpose();  // d x N
  out.rank = svd.rank;
  out.residual = (evals.values - v * out.a.transpose()).norm();
  return out;
}

VectorXd evaluate_interpolation(const MatrixXd& a,
                                const tensors::FeatureIndexing& indexing,
                                const VectorXd& w) {
  if (a.cols() != indexing.size() || a.rows() != indexing.dim() ||
      w.size() != indexing.dim()) {
    throw DimensionMismatch("evaluate_interpolation: shapes");
  }
  return a * tensors::monomial_features(w, indexing);
}

tensors::SymmetricTensor tensor_from_f(
    const MatrixXd& a, const tensors::FeatureIndexing& indexing) {
  const int d = indexing.dim();
  const int order = indexing.degree() + 1;
  if (a.rows() != d || a.cols() != indexing.size()) {
    throw DimensionMismatch("tensor_from_f: coefficient matrix shape");
  }
  if (order > 6) {
    throw UnsupportedOrder("tensor_from_f: order above 6 not supported");
  }
  linalg::require_finite(a, "tensor_from_f: A");

  const auto p = [&](const VectorXd& w) {
    return w.dot(a * tensors::monomial_features(w, indexing));
  };

  tensors::SymmetricTensor t(order, d);
  std::vector<VectorXd> basis(static_cast<std::size_t>(d));
  for (int c = 0; c < d; ++c) {
    basis[static_cast<std::size_t>(c)] = VectorXd::Unit(d, c);
  }

  // One polarization per sorted index tuple; copy to all permutations.
  std::vector<int> idx(static_cast<std::size_t>(order), 0);
  while (true) {
    std::vector<VectorXd> us;
    us.reserve(idx.size());
    for (int j : idx) us.push_back(basis[static_cast<std::size_t>(j)]);
    const double value = tensors::polarize(p, order, us);

    std::vector<int> perm = idx;
    do {
      t.at(perm) = value;
    } while (std::next_permutation(perm.begin(), perm.end()));

    // Next non-decreasing tuple.
    int pos = order - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == d - 1) --pos;
    if (pos < 0) break;
    const int bumped = ++idx[static_cast<std::size_t>(pos)];
    for (int q = pos + 1; q < order; ++q) {
      idx[static_cast<std::size_t>(q)] = bumped;
    }
  }
  return t;
}

JennrichResult jennrich_decompose(const tensors::SymmetricTensor& t,
                                  std::uint64_t seed,
                                  const JennrichOpts& opts) {
  if (t.order() < 3) {
    throw ConfigError(
        "jennrich_decompose: needs order >= 3 (order-2 slices do not depend "
        "on the probe)");
  }
  const long d = t.dim();
  linalg::require_finite(t.entries(), "jennrich_decompose: tensor");

  JennrichResult result;
  if (t.entries().cwiseAbs().maxCoeff() == 0.0) return result;  // zero tensor

  std::mt19937_64 rng(seed);
  int ambiguous_attempts = 0;
  const int attempts = opts.max_retries + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    const VectorXd v1 = unit_sphere_draw(rng, d);
    const VectorXd v2 = unit_sphere_draw(rng, d);
    const MatrixXd m1 = tensors::contract_matrix_slice(t, v1);
    const MatrixXd m2 = tensors::contract_matrix_slice(t, v2);

    Eigen::JacobiSVD<MatrixXd> svd(m1, Eigen::ComputeThinU);
    const VectorXd& sing = svd.singularValues();
    const double top = sing(0);
    if (top <= 0.0) continue;  // probe annihilated every component

    long r;
    if (opts.expected_rank >= 0) {
      r = std::min<long>(opts.expected_rank, d);
    } else {
      r = 0;
      while (r < sing.size() && sing(r) > opts.rank_tol * top) ++r;
      const double next = r < sing.size() ? sing(r) : 0.0;
      if (r > 0 && (sing(r - 1) - next) / top < 10.0 * opts.rank_tol) {
        ++ambiguous_attempts;
        continue;
      }
    }
    if (r == 0) return result;

    const MatrixXd u = svd.matrixU().leftCols(r);
    const MatrixXd a_bar = u.transpose() * m1 * u;
    const MatrixXd b_bar = u.transpose() * m2 * u;
    Eigen::FullPivLU<MatrixXd> lu(a_bar);
    if (!lu.isInvertible()) continue;
    const MatrixXd c = lu.solve(b_bar);

    std::vector<linalg::EigPair> pairs;
    try {
      pairs = linalg::eig_general(c);
    } catch (const ComplexSpectrum&) {
      continue;
    }

    VectorXd mu(r);
    for (long k = 0; k < r; ++k) mu(k) = pairs[static_cast<std::size_t>(k)].value;
    const double mu_scale = mu.cwiseAbs().maxCoeff();
    if (mu_scale <= 0.0) continue;
    double gap = 1.0;  // a single eigenvalue has nothing to collide with
    for (long k = 0; k + 1 < r; ++k) {
      gap = std::min(gap, (mu(k + 1) - mu(k)) / mu_scale);
    }
    if (r > 1 && gap < opts.gap_tol) continue;

    MatrixXd vecs(r, r);
    for (long k = 0; k < r; ++k) {
      vecs.col(k) = pairs[static_cast<std::size_t>(k)].vector;
    }
    Eigen::FullPivLU<MatrixXd> luv(vecs.transpose());
    if (!luv.isInvertible()) continue;
    const MatrixXd xhat = u * luv.solve(MatrixXd::Identity(r, r));

    std::vector<VectorXd> dirs;
    dirs.reserve(static_cast<std::size_t>(r));
    bool ok = true;
    for (long k = 0; k < r; ++k) {
      VectorXd x = xhat.col(k);
      const double norm = x.norm();
      if (!(norm > 0.0) || !std::isfinite(norm)) {
        ok = false;
        break;
      }
      x /= norm;
      canonicalize_first_nonzero(x);
      dirs.push_back(std::move(x));
    }
    if (!ok) continue;

    // Coefficients by least squares against the recovered directions: the
    // diagonal contraction T(x_k,...,x_k) equals b_k only when the
    // components are orthogonal; in general the cross-terms (x_i^T x_k)^alpha
    // contaminate it. The normal equations use the Hadamard-power Gram
    // (x_i^T x_j)^alpha, which is positive definite for independent
    // directions, and the projections <T, x_k^(tensor alpha)>.
    MatrixXd gram(r, r);
    VectorXd proj(r);
    for (long k = 0; k < r; ++k) {
      for (long l = 0; l < r; ++l) {
        gram(k, l) = std::pow(dirs[static_cast<std::size_t>(k)]
                                  .dot(dirs[static_cast<std::size_t>(l)]),
                              t.order());
      }
      proj(k) = tensors::diagonal_poly(t, dirs[static_cast<std::size_t>(k)]);
    }
    Eigen::LDLT<MatrixXd> gram_ldlt(gram);
    if (gram_ldlt.info() != Eigen::Success) continue;
    const VectorXd b = gram_ldlt.solve(proj);
    if (!b.allFinite()) continue;

    std::vector<tensors::Component> comps;
    comps.reserve(static_cast<std::size_t>(r));
    for (long k = 0; k < r; ++k) {
      comps.push_back({std::move(dirs[static_cast<std::size_t>(k)]), b(k)});
    }

    sort_components(comps);
    result.components = std::move(comps);
    result.rank = r;
    result.eigen_gap = gap;
    result.retries = attempt;
    result.pencil_eigenvalues = mu;
    result.v1 = v1;
    result.v2 = v2;
    return result;
  }

  if (2 * ambiguous_attempts > attempts) {
    throw RankAmbiguous(
        "jennrich_decompose: singular-value gap at the detected rank stayed "
        "within 10x rank_tol across probe redraws");
  }
  throw DecompositionFailed(
      "jennrich_decompose: no probe pair produced a real, well-separated "
      "pencil spectrum");
}

IdentifyReport recover_from_params(const network::ModelParams& params,
                                   const IdentifyOpts& opts) {
  const int alpha = params.activation.degree();
  if (alpha < 3) {
    throw ConfigError("recover_from_params: needs activation degree >= 3");
  }
  const auto evals = extract_f_evaluations(params, opts.a_tol, opts.w_tol);
  if (evals.points.rows() == 0) {
    throw InterpolationRankDeficient(
        0, tensors::monomial_count(static_cast<int>(params.dim()), alpha - 1));
  }

  // Stationary weights live in the span of the active samples; interpolation
  // is only well-posed inside that span, so rotate into an orthonormal basis
  // of the detected span first.
  Eigen::JacobiSVD<MatrixXd> span_svd(evals.points, Eigen::ComputeThinV);
  const VectorXd& sing = span_svd.singularValues();
  long s = 0;
  while (s < sing.size() && sing(s) > opts.span_tol * sing(0)) ++s;
  const MatrixXd q = span_svd.matrixV().leftCols(s);

  FEvaluations reduced;
  reduced.degree = evals.degree;
  reduced.dropped = evals.dropped;
  reduced.points = evals.points * q;
  reduced.values = evals.values * q;

  const auto indexing =
      tensors::FeatureIndexing::create(static_cast<int>(s), alpha - 1);
  const auto interp = interpolate_f(reduced, indexing, opts.interp_rank_tol);
  const auto tensor = tensor_from_f(interp.a, indexing);
  const auto jr = jennrich_decompose(tensor, opts.seed, opts.jennrich);

  IdentifyReport report;
  report.components.reserve(jr.components.size());
  for (const auto& comp : jr.components) {
    VectorXd dir = q * comp.direction;
    double coeff = comp.coefficient;
    if (canonicalize_first_nonzero(dir) && alpha % 2 == 1) coeff = -coeff;
    report.components.push_back({std::move(dir), coeff});
  }
  sort_components(report.components);
  report.rank = jr.rank;
  report.feature_count = indexing.size();
  report.gram_rank = interp.rank;
  report.subspace_dim = s;
  report.interpolation_residual = interp.residual;
  report.pencil_eigen_gap = jr.eigen_gap;
  report.probe_retries = jr.retries;
  return report;
}

}  // namespace recon::identify
