#pragma once

/**
 * Symmetric tensor algebra for moment tensors of the form
 *   T = sum_i b_i x_i^{(x)order}
 * stored densely (row-major, all order-way index tuples). Supports the
 * contractions used by the recovery pipeline:
 *
 *   contract_vector(T, w)[j]    = T(e_j, w, ..., w)
 *   contract_matrix_slice(T, v) = T(., ., v, ..., v)
 *   diagonal_poly(T, w)         = T(w, ..., w)
 *
 * plus polarization (recovering T entries from the diagonal polynomial) and
 * the monomial feature map used for kernel interpolation.
 */

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "recon/errors.hpp"

namespace recon::tensors {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One rank-one term of a symmetric decomposition. Directions are unit norm;
// coefficients are nonzero.
struct Component {
  VectorXd direction;
  double coefficient = 0.0;
};

// Throws if the component violates its invariants (unit direction within
// norm_tol, nonzero coefficient, finite entries).
void validate_component(const Component& c, double norm_tol = 1e-9);

class SymmetricTensor {
 public:
  SymmetricTensor() = default;
  // Zero tensor of the given shape. order >= 1, dim >= 1.
  SymmetricTensor(int order, int dim);

  int order() const { return order_; }
  int dim() const { return dim_; }

  // Flat row-major entry storage of length dim^order.
  const VectorXd& entries() const { return entries_; }
  VectorXd& entries() { return entries_; }

  double at(const std::vector<int>& idx) const;
  double& at(const std::vector<int>& idx);

  long flat_index(const std::vector<int>& idx) const;

  // Maximum deviation between entries related by an index permutation,
  // relative to the largest entry magnitude. Zero for exactly symmetric.
  double symmetry_defect() const;

 private:
  int order_ = 0;
  int dim_ = 0;
  VectorXd entries_;
};

// T = sum_i b_i x_i^{(x)order}. All directions must share one dimension and
// satisfy the Component invariants.
SymmetricTensor from_components(const std::vector<Component>& components,
                                int order);

// f(w) = T(., w, ..., w): contraction over the trailing order-1 slots.
// For order 1 this returns the tensor itself.
VectorXd contract_vector(const SymmetricTensor& t, const VectorXd& w);

// M(v) = T(., ., v, ..., v): contraction over the trailing order-2 slots.
// Requires order >= 2; the result is symmetric.
MatrixXd contract_matrix_slice(const SymmetricTensor& t, const VectorXd& v);

// p(w) = T(w, ..., w): full contraction, computed independently of
// contract_vector (entry-wise), so the two routes cross-check each other.
double diagonal_poly(const SymmetricTensor& t, const VectorXd& w);

// Recovers a single multilinear entry T(u_1, ..., u_order) from the diagonal
// polynomial p via the polarization identity
//   T(u_1..u_k) = 1/(k! 2^k) sum_{eps in {-1,1}^k} (prod eps) p(sum eps_t u_t).
// The 2^k evaluations make this exponential in the order; orders above 6 are
// rejected with UnsupportedOrder.
double polarize(const std::function<double(const VectorXd&)>& p, int order,
                const std::vector<VectorXd>& us);

// Canonical ordering of all exponent multi-indices of total degree `degree`
// over `dim` variables (graded-lexicographic; within the single grade this is
// lex with earlier variables ranked higher, e.g. dim=2, degree=2 ->
// w1^2, w1 w2, w2^2).
class FeatureIndexing {
 public:
  static FeatureIndexing create(int dim, int degree);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  long size() const { return static_cast<long>(exponents_.size()); }
  const std::vector<std::vector<int>>& exponents() const { return exponents_; }

  // Position of an exponent vector in the canonical order; -1 if absent.
  long position(const std::vector<int>& exponent) const;

 private:
  int dim_ = 0;
  int degree_ = 0;
  std::vector<std::vector<int>> exponents_;
};

// Raw (unweighted) monomial feature vector phi(w): phi_m = prod_c w_c^{m_c}
// in the indexing's canonical order.
VectorXd monomial_features(const VectorXd& w, const FeatureIndexing& indexing);

// Multinomial coefficient degree! / prod(exponent_c!). Used for the weighted
// feature map whose Gram identity is (u^T v)^degree.
double multinomial_coefficient(int degree, const std::vector<int>& exponent);

// Number of monomials of total degree `degree` in `dim` variables,
// C(dim + degree - 1, degree).
long monomial_count(int dim, int degree);

}  // namespace recon::tensors
