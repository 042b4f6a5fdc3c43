#include "recon/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "recon/numkernels.hpp"

namespace recon::tensors {

namespace {

long checked_pow(int base, int exp) {
  long out = 1;
  for (int i = 0; i < exp; ++i) {
    out *= base;
    if (out > (1L << 40)) {
      throw UnsupportedOrder("tensor storage too large: " +
                             std::to_string(base) + "^" + std::to_string(exp));
    }
  }
  return out;
}

// Advances a row-major multi-index; returns false after the last one.
bool next_index(std::vector<int>& idx, int dim) {
  for (int pos = static_cast<int>(idx.size()) - 1; pos >= 0; --pos) {
    if (++idx[static_cast<std::size_t>(pos)] < dim) return true;
    idx[static_cast<std::size_t>(pos)] = 0;
  }
  return false;
}

}  // namespace

void validate_component(const Component& c, double norm_tol) {
  linalg::require_finite(c.direction, "component direction");
  if (!std::isfinite(c.coefficient) || c.coefficient == 0.0) {
    throw ConfigError("component coefficient must be finite and nonzero");
  }
  const double nrm = c.direction.norm();
  if (std::abs(nrm - 1.0) > norm_tol) {
    throw ConfigError("component direction norm " + std::to_string(nrm) +
                      " deviates from 1 beyond tolerance");
  }
}

SymmetricTensor::SymmetricTensor(int order, int dim)
    : order_(order), dim_(dim) {
  if (order < 1) throw UnsupportedOrder("tensor order must be >= 1");
  if (dim < 1) throw DimensionMismatch("tensor dim must be >= 1");
  entries_ = VectorXd::Zero(checked_pow(dim, order));
}

long SymmetricTensor::flat_index(const std::vector<int>& idx) const {
  if (static_cast<int>(idx.size()) != order_) {
    throw DimensionMismatch("tensor index arity " + std::to_string(idx.size()) +
                            " != order " + std::to_string(order_));
  }
  long flat = 0;
  for (int j : idx) {
    if (j < 0 || j >= dim_) {
      throw DimensionMismatch("tensor index out of range");
    }
    flat = flat * dim_ + j;
  }
  return flat;
}

double SymmetricTensor::at(const std::vector<int>& idx) const {
  return entries_(flat_index(idx));
}

double& SymmetricTensor::at(const std::vector<int>& idx) {
  return entries_(flat_index(idx));
}

double SymmetricTensor::symmetry_defect() const {
  const double scale = std::max(entries_.cwiseAbs().maxCoeff(), 1e-300);
  double worst = 0.0;
  std::vector<int> idx(static_cast<std::size_t>(order_), 0);
  do {
    std::vector<int> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    const double diff = std::abs(entries_(flat_index(idx)) -
                                 entries_(flat_index(sorted)));
    worst = std::max(worst, diff);
  } while (next_index(idx, dim_));
  return worst / scale;
}

SymmetricTensor from_components(const std::vector<Component>& components,
                                int order) {
  if (components.empty()) {
    throw ConfigError("from_components: at least one component required");
  }
  const int dim = static_cast<int>(components.front().direction.size());
  for (const Component& c : components) {
    validate_component(c);
    if (c.direction.size() != dim) {
      throw DimensionMismatch("from_components: mixed component dimensions");
    }
  }

  SymmetricTensor t(order, dim);
  std::vector<int> idx(static_cast<std::size_t>(order), 0);
  long flat = 0;
  do {
    double sum = 0.0;
    for (const Component& c : components) {
      double prod = c.coefficient;
      for (int j : idx) prod *= c.direction(j);
      sum += prod;
    }
    t.entries()(flat++) = sum;
  } while (next_index(idx, dim));
  return t;
}

VectorXd contract_vector(const SymmetricTensor& t, const VectorXd& w) {
  if (w.size() != t.dim()) {
    throw DimensionMismatch("contract_vector: vector dim " +
                            std::to_string(w.size()) + " != tensor dim " +
                            std::to_string(t.dim()));
  }
  linalg::require_finite(w, "contract_vector");
  if (t.order() == 1) return t.entries();

  // Fold the trailing slots one at a time: each fold contracts the last index
  // with w, shrinking the flat array by a factor of dim.
  const int d = t.dim();
  VectorXd cur = t.entries();
  for (int fold = 0; fold < t.order() - 1; ++fold) {
    const long blocks = cur.size() / d;
    VectorXd next(blocks);
    for (long b = 0; b < blocks; ++b) {
      next(b) = cur.segment(b * d, d).dot(w);
    }
    cur.swap(next);
  }
  return cur;
}

MatrixXd contract_matrix_slice(const SymmetricTensor& t, const VectorXd& v) {
  if (t.order() < 2) {
    throw UnsupportedOrder("contract_matrix_slice: order must be >= 2");
  }
  if (v.size() != t.dim()) {
    throw DimensionMismatch("contract_matrix_slice: vector dim mismatch");
  }
  linalg::require_finite(v, "contract_matrix_slice");

  const int d = t.dim();
  VectorXd cur = t.entries();
  for (int fold = 0; fold < t.order() - 2; ++fold) {
    const long blocks = cur.size() / d;
    VectorXd next(blocks);
    for (long b = 0; b < blocks; ++b) {
      next(b) = cur.segment(b * d, d).dot(v);
    }
    cur.swap(next);
  }
  MatrixXd m(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) m(r, c) = cur(static_cast<long>(r) * d + c);
  }
  return m;
}

double diagonal_poly(const SymmetricTensor& t, const VectorXd& w) {
  if (w.size() != t.dim()) {
    throw DimensionMismatch("diagonal_poly: vector dim mismatch");
  }
  linalg::require_finite(w, "diagonal_poly");

  // Direct entry-wise accumulation, independent of contract_vector.
  double sum = 0.0;
  std::vector<int> idx(static_cast<std::size_t>(t.order()), 0);
  long flat = 0;
  do {
    double prod = t.entries()(flat++);
    if (prod != 0.0) {
      for (int j : idx) prod *= w(j);
      sum += prod;
    }
  } while (next_index(idx, t.dim()));
  return sum;
}

double polarize(const std::function<double(const VectorXd&)>& p, int order,
                const std::vector<VectorXd>& us) {
  if (order < 1 || order > 6) {
    throw UnsupportedOrder("polarize: order " + std::to_string(order) +
                           " outside supported range [1, 6]");
  }
  if (static_cast<int>(us.size()) != order) {
    throw DimensionMismatch("polarize: expected " + std::to_string(order) +
                            " argument vectors, got " +
                            std::to_string(us.size()));
  }
  const long dim = us.front().size();
  for (const VectorXd& u : us) {
    if (u.size() != dim) {
      throw DimensionMismatch("polarize: mixed argument dimensions");
    }
    linalg::require_finite(u, "polarize");
  }

  double factorial = 1.0;
  for (int i = 2; i <= order; ++i) factorial *= i;

  double sum = 0.0;
  for (unsigned mask = 0; mask < (1u << order); ++mask) {
    VectorXd arg = VectorXd::Zero(dim);
    double sign = 1.0;
    for (int t = 0; t < order; ++t) {
      if (mask & (1u << t)) {
        arg += us[static_cast<std::size_t>(t)];
      } else {
        arg -= us[static_cast<std::size_t>(t)];
        sign = -sign;
      }
    }
    sum += sign * p(arg);
  }
  return sum / (factorial * std::pow(2.0, order));
}

FeatureIndexing FeatureIndexing::create(int dim, int degree) {
  if (dim < 1) throw DimensionMismatch("feature indexing: dim must be >= 1");
  if (degree < 0) throw ConfigError("feature indexing: degree must be >= 0");

  FeatureIndexing out;
  out.dim_ = dim;
  out.degree_ = degree;

  // Graded-lex within the single grade: enumerate the first variable's
  // exponent from high to low, recurse on the remainder.
  std::vector<int> current(static_cast<std::size_t>(dim), 0);
  std::function<void(int, int)> emit = [&](int pos, int remaining) {
    if (pos == dim - 1) {
      current[static_cast<std::size_t>(pos)] = remaining;
      out.exponents_.push_back(current);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      current[static_cast<std::size_t>(pos)] = e;
      emit(pos + 1, remaining - e);
    }
    current[static_cast<std::size_t>(pos)] = 0;
  };
  emit(0, degree);
  return out;
}

long FeatureIndexing::position(const std::vector<int>& exponent) const {
  for (std::size_t i = 0; i < exponents_.size(); ++i) {
    if (exponents_[i] == exponent) return static_cast<long>(i);
  }
  return -1;
}

VectorXd monomial_features(const VectorXd& w, const FeatureIndexing& indexing) {
  if (w.size() != indexing.dim()) {
    throw DimensionMismatch("monomial_features: vector dim " +
                            std::to_string(w.size()) + " != indexing dim " +
                            std::to_string(indexing.dim()));
  }
  linalg::require_finite(w, "monomial_features");

  VectorXd phi(indexing.size());
  long row = 0;
  for (const std::vector<int>& exponent : indexing.exponents()) {
    double prod = 1.0;
    for (int c = 0; c < indexing.dim(); ++c) {
      for (int e = 0; e < exponent[static_cast<std::size_t>(c)]; ++e) {
        prod *= w(c);
      }
    }
    phi(row++) = prod;
  }
  return phi;
}

double multinomial_coefficient(int degree, const std::vector<int>& exponent) {
  double out = 1.0;
  int used = 0;
  for (int e : exponent) {
    for (int i = 1; i <= e; ++i) {
      ++used;
      out *= static_cast<double>(used) / static_cast<double>(i);
    }
  }
  if (used != degree) {
    throw DimensionMismatch("multinomial_coefficient: exponents sum to " +
                            std::to_string(used) + " != degree " +
                            std::to_string(degree));
  }
  return std::round(out);
}

long monomial_count(int dim, int degree) {
  // C(dim + degree - 1, degree)
  long out = 1;
  for (int i = 1; i <= degree; ++i) {
    out = out * (dim - 1 + i) / i;  // exact: product of i consecutive ints divisible by i!
  }
  return out;
}

}  // namespace recon::tensors
