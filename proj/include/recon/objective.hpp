#pragma once

/**
 * The reconstruction objective over candidate samples and multipliers:
 *
 *   L(x, lambda) = alpha1 ||theta - sum_i lambda_i f(theta; x_i)||^2
 *                + alpha2 sum_i max(-lambda_i, 0)
 *                + alpha3 sum_i box_hinge(x_i)
 *
 * where f is a pluggable reconstruction map (binary stationarity map,
 * multiclass-margin map, or a linearized map anchored at fixed reference
 * parameters). Provides the residual, analytic gradients, the closed-form
 * least-squares refit of lambda, and Hessian-vector products with the
 * candidate-splitting matrix
 *
 *   S(x_i) = -2 lambda_i alpha1 sum_p r_p grad^2_x f_p(theta; x_i)
 *
 * (the residual r is held fixed inside S; the omitted Gauss-Newton part is
 * positive semidefinite, so lambda_min of the full Hessian is bounded below
 * by min_i lambda_min(S(x_i))).
 */

#include <Eigen/Dense>

#include <vector>

#include "recon/network.hpp"

namespace recon::objective {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class MapKind { KktBinary, MulticlassMargin, Ntk };

// The pluggable map f(theta; x). KktBinary evaluates y * grad_theta Phi at
// `model`; MulticlassMargin evaluates grad_theta of the margin
// Phi_y - max_{j != y} Phi_j over stacked per-class models (ties at the
// argmax resolved to the lowest class index); Ntk evaluates grad_theta Phi at
// the fixed reference parameters `reference` and ignores labels.
struct ReconMap {
  MapKind kind = MapKind::KktBinary;
  network::ModelParams model;                       // KktBinary
  std::vector<network::ModelParams> class_models;   // MulticlassMargin
  network::ModelParams reference;                   // Ntk
};

ReconMap make_kkt_binary(network::ModelParams model);
ReconMap make_multiclass(std::vector<network::ModelParams> class_models);
ReconMap make_ntk(network::ModelParams reference);

// Output dimension P of the map (and required size of CandidateSet::target).
long map_dim(const ReconMap& map);
// Input dimension d the map expects.
long map_input_dim(const ReconMap& map);

struct Candidate {
  VectorXd x;
  double lambda = 0.0;
  int label = 1;     // sign for KktBinary, class index for MulticlassMargin
  long id = 0;
  long parent = -1;  // id of the candidate this one was split from
  int depth = 0;     // number of splits along the lineage
};

struct CandidateSet {
  std::vector<Candidate> candidates;
  VectorXd target;   // theta in R^P
  long next_id = 0;

  long size() const { return static_cast<long>(candidates.size()); }
  // Appends a candidate, assigning the next free id.
  Candidate& add(VectorXd x, double lambda, int label);
};

struct LossWeights {
  double alpha1 = 1.0;
  double alpha2 = 0.0;
  double alpha3 = 0.0;
  double box_lo = -1.0;  // prior box, applied per coordinate when alpha3 > 0
  double box_hi = 1.0;
};

// f(theta; x) for one candidate location/label. Throws DimensionMismatch on
// shape violations and ConfigError on invalid labels.
VectorXd map_eval(const ReconMap& map, const VectorXd& x, int label);

// r = target - sum_i lambda_i f(theta; x_i).
VectorXd residual(const CandidateSet& set, const ReconMap& map);

double loss(const CandidateSet& set, const ReconMap& map,
            const LossWeights& weights);

struct Gradients {
  std::vector<VectorXd> x;  // d L / d x_i
  VectorXd lambda;          // d L / d lambda_i
};

// Analytic gradients. Subgradient 0 is chosen at the hinge kinks (lambda = 0
// and exactly on the box boundary); the multiclass argmax is held fixed at
// its value in the current state.
Gradients grad(const CandidateSet& set, const ReconMap& map,
               const LossWeights& weights);

// S(x_i) v with closed-form second directional derivatives of the map.
VectorXd splitting_hvp(const CandidateSet& set, const ReconMap& map, long i,
                       const VectorXd& v, double alpha1 = 1.0);

// Same product by central finite differences of grad_x <r, f> at step
// h = 1e-4 (1 + ||x_i||); cross-checks the analytic route.
VectorXd splitting_hvp_fd(const CandidateSet& set, const ReconMap& map, long i,
                          const VectorXd& v, double alpha1 = 1.0);

// Closed-form least-squares minimizer of ||target - F lambda||^2 where F
// stacks the candidate map evaluations column-wise; with nonneg set, the
// minimizer over lambda >= 0 instead. Never increases the alpha1 term.
VectorXd lambda_refit(const CandidateSet& set, const ReconMap& map,
                      bool nonneg = false);

}  // namespace recon::objective
