#include "recon/objective.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "recon/numkernels.hpp"

namespace recon::objective {
namespace {

long params_dim(const network::ModelParams& p) {
  return p.width() * (1 + p.dim());
}

// One (sign, parameter-block) contribution of the map for a given label.
struct Block {
  const network::ModelParams* model;
  long offset;
  double sign;
};

std::vector<Block> map_blocks(const ReconMap& map, const VectorXd& x,
                              int label) {
  switch (map.kind) {
    case MapKind::KktBinary: {
      if (label != 1 && label != -1) {
        throw ConfigError("map_eval: binary labels must be +1 or -1");
      }
      return {{&map.model, 0, static_cast<double>(label)}};
    }
    case MapKind::Ntk:
      return {{&map.reference, 0, 1.0}};
    case MapKind::MulticlassMargin: {
      const long classes = static_cast<long>(map.class_models.size());
      if (label < 0 || label >= classes) {
        throw ConfigError("map_eval: class label out of range");
      }
      // Margin against the best competing class; ties to the lowest index.
      long best = -1;
      double best_score = 0.0;
      for (long j = 0; j < classes; ++j) {
        if (j == label) continue;
        const double score =
            network::forward(map.class_models[static_cast<std::size_t>(j)], x);
        if (best < 0 || score > best_score) {
          best = j;
          best_score = score;
        }
      }
      long off_label = 0, off_best = 0, off = 0;
      for (long j = 0; j < classes; ++j) {
        if (j == label) off_label = off;
        if (j == best) off_best = off;
        off += params_dim(map.class_models[static_cast<std::size_t>(j)]);
      }
      return {{&map.class_models[static_cast<std::size_t>(label)], off_label,
               1.0},
              {&map.class_models[static_cast<std::size_t>(best)], off_best,
               -1.0}};
    }
  }
  throw ConfigError("map_eval: unknown map kind");
}

// grad_x of <r_block, grad_theta Phi(model; x)> for one parameter block.
VectorXd block_grad_x(const network::ModelParams& p, const VectorXd& x,
                      const Eigen::Ref<const VectorXd>& r_block) {
  const long m = p.width();
  const long d = p.dim();
  const VectorXd r_a = r_block.head(m);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>
      r_w(r_block.data() + m, m, d);
  const VectorXd z = p.w * x;
  VectorXd coef(m), outer(m);
  for (long j = 0; j < m; ++j) {
    const double rwx = r_w.row(j) * x;
    coef(j) = r_a(j) * p.activation.d1(z(j)) +
              p.a(j) * p.activation.d2(z(j)) * rwx;
    outer(j) = p.a(j) * p.activation.d1(z(j));
  }
  return p.w.transpose() * coef + r_w.transpose() * outer;
}

// Directional second derivative: d/dt [block_grad_x](x + t v) at t = 0.
VectorXd block_hvp(const network::ModelParams& p, const VectorXd& x,
                   const Eigen::Ref<const VectorXd>& r_block,
                   const VectorXd& v) {
  const long m = p.width();
  const long d = p.dim();
  const VectorXd r_a = r_block.head(m);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>
      r_w(r_block.data() + m, m, d);
  const VectorXd z = p.w * x;
  const VectorXd wv = p.w * v;
  VectorXd coef(m), outer(m);
  for (long j = 0; j < m; ++j) {
    const double rwx = r_w.row(j) * x;
    const double rwv = r_w.row(j) * v;
    coef(j) = r_a(j) * p.activation.d2(z(j)) * wv(j) +
              p.a(j) * (p.activation.d3(z(j)) * rwx * wv(j) +
                        p.activation.d2(z(j)) * rwv);
    outer(j) = p.a(j) * p.activation.d2(z(j)) * wv(j);
  }
  return p.w.transpose() * coef + r_w.transpose() * outer;
}

void check_candidate(const ReconMap& map, const Candidate& cand) {
  if (cand.x.size() != map_input_dim(map)) {
    throw DimensionMismatch("candidate dimension does not match the map");
  }
  linalg::require_finite(cand.x, "candidate x");
  if (!std::isfinite(cand.lambda)) throw NonFiniteInput("candidate lambda");
}

void check_set(const CandidateSet& set, const ReconMap& map) {
  if (set.target.size() != map_dim(map)) {
    throw DimensionMismatch("target size does not match the map dimension");
  }
  linalg::require_finite(set.target, "target");
  for (const auto& cand : set.candidates) check_candidate(map, cand);
}

double box_hinge(const VectorXd& x, double lo, double hi) {
  double total = 0.0;
  for (long c = 0; c < x.size(); ++c) {
    total += std::max(lo - x(c), 0.0) + std::max(x(c) - hi, 0.0);
  }
  return total;
}

}  // namespace

ReconMap make_kkt_binary(network::ModelParams model) {
  network::validate_model(model);
  ReconMap map;
  map.kind = MapKind::KktBinary;
  map.model = std::move(model);
  return map;
}

ReconMap make_multiclass(std::vector<network::ModelParams> class_models) {
  if (class_models.size() < 2) {
    throw ConfigError("multiclass map needs at least two class models");
  }
  const long d = class_models.front().dim();
  for (const auto& m : class_models) {
    network::validate_model(m);
    if (m.dim() != d) {
      throw DimensionMismatch("class models must share the input dimension");
    }
  }
  ReconMap map;
  map.kind = MapKind::MulticlassMargin;
  map.class_models = std::move(class_models);
  return map;
}

ReconMap make_ntk(network::ModelParams reference) {
  network::validate_model(reference);
  ReconMap map;
  map.kind = MapKind::Ntk;
  map.reference = std::move(reference);
  return map;
}

long map_dim(const ReconMap& map) {
  switch (map.kind) {
    case MapKind::KktBinary:
      return params_dim(map.model);
    case MapKind::Ntk:
      return params_dim(map.reference);
    case MapKind::MulticlassMargin: {
      long total = 0;
      for (const auto& m : map.class_models) total += params_dim(m);
      return total;
    }
  }
  return 0;
}

long map_input_dim(const ReconMap& map) {
  switch (map.kind) {
    case MapKind::KktBinary:
      return map.model.dim();
    case MapKind::Ntk:
      return map.reference.dim();
    case MapKind::MulticlassMargin:
      return map.class_models.front().dim();
  }
  return 0;
}

Candidate& CandidateSet::add(VectorXd x, double lambda, int label) {
  Candidate cand;
  cand.x = std::move(x);
  cand.lambda = lambda;
  cand.label = label;
  cand.id = next_id++;
  candidates.push_back(std::move(cand));
  return candidates.back();
}

VectorXd map_eval(const ReconMap& map, const VectorXd& x, int label) {
  if (x.size() != map_input_dim(map)) {
    throw DimensionMismatch("map_eval: input dimension");
  }
  linalg::require_finite(x, "map_eval: x");
  VectorXd out = VectorXd::Zero(map_dim(map));
  for (const auto& block : map_blocks(map, x, label)) {
    out.segment(block.offset, params_dim(*block.model)) +=
        block.sign * network::grad_theta(*block.model, x);
  }
  return out;
}

VectorXd residual(const CandidateSet& set, const ReconMap& map) {
  check_set(set, map);
  VectorXd r = set.target;
  for (const auto& cand : set.candidates) {
    if (cand.lambda == 0.0) continue;
    r -= cand.lambda * map_eval(map, cand.x, cand.label);
  }
  return r;
}

double loss(const CandidateSet& set, const ReconMap& map,
            const LossWeights& weights) {
  const VectorXd r = residual(set, map);
  double value = weights.alpha1 * r.squaredNorm();
  for (const auto& cand : set.candidates) {
    value += weights.alpha2 * std::max(-cand.lambda, 0.0);
    if (weights.alpha3 != 0.0) {
      value +=
          weights.alpha3 * box_hinge(cand.x, weights.box_lo, weights.box_hi);
    }
  }
  return value;
}

Gradients grad(const CandidateSet& set, const ReconMap& map,
               const LossWeights& weights) {
  const VectorXd r = residual(set, map);
  Gradients out;
  out.lambda.resize(set.size());
  out.x.reserve(set.candidates.size());
  for (long i = 0; i < set.size(); ++i) {
    const auto& cand = set.candidates[static_cast<std::size_t>(i)];

    // d/dlambda_i [a1 ||r||^2] = -2 a1 <f_i, r>; hinge subgradient 0 at 0.
    const VectorXd f_i = map_eval(map, cand.x, cand.label);
    out.lambda(i) = -2.0 * weights.alpha1 * f_i.dot(r) +
                    (cand.lambda < 0.0 ? -weights.alpha2 : 0.0);

    // d/dx_i [a1 ||r||^2] = -2 a1 lambda_i J_i^T r.
    VectorXd gx = VectorXd::Zero(cand.x.size());
    if (cand.lambda != 0.0) {
      for (const auto& block : map_blocks(map, cand.x, cand.label)) {
        gx += block.sign *
              block_grad_x(*block.model, cand.x,
                           r.segment(block.offset, params_dim(*block.model)));
      }
      gx *= -2.0 * weights.alpha1 * cand.lambda;
    }
    if (weights.alpha3 != 0.0) {
      for (long c = 0; c < cand.x.size(); ++c) {
        if (cand.x(c) > weights.box_hi) {
          gx(c) += weights.alpha3;
        } else if (cand.x(c) < weights.box_lo) {
          gx(c) -= weights.alpha3;
        }
      }
    }
    out.x.push_back(std::move(gx));
  }
  return out;
}

VectorXd splitting_hvp(const CandidateSet& set, const ReconMap& map, long i,
                       const VectorXd& v, double alpha1) {
  if (i < 0 || i >= set.size()) throw ConfigError("splitting_hvp: bad index");
  const auto& cand = set.candidates[static_cast<std::size_t>(i)];
  if (v.size() != cand.x.size()) {
    throw DimensionMismatch("splitting_hvp: direction dimension");
  }
  const VectorXd r = residual(set, map);
  VectorXd out = VectorXd::Zero(v.size());
  if (cand.lambda == 0.0) return out;
  for (const auto& block : map_blocks(map, cand.x, cand.label)) {
    out += block.sign *
           block_hvp(*block.model, cand.x,
                     r.segment(block.offset, params_dim(*block.model)), v);
  }
  return -2.0 * alpha1 * cand.lambda * out;
}

VectorXd splitting_hvp_fd(const CandidateSet& set, const ReconMap& map, long i,
                          const VectorXd& v, double alpha1) {
  if (i < 0 || i >= set.size()) throw ConfigError("splitting_hvp: bad index");
  const auto& cand = set.candidates[static_cast<std::size_t>(i)];
  if (v.size() != cand.x.size()) {
    throw DimensionMismatch("splitting_hvp: direction dimension");
  }
  const VectorXd r = residual(set, map);
  VectorXd out = VectorXd::Zero(v.size());
  if (cand.lambda == 0.0) return out;

  const double h = 1e-4 * (1.0 + cand.x.norm());
  const auto grad_inner = [&](const VectorXd& x) {
    VectorXd g = VectorXd::Zero(v.size());
    for (const auto& block : map_blocks(map, x, cand.label)) {
      g += block.sign *
           block_grad_x(*block.model, x,
                        r.segment(block.offset, params_dim(*block.model)));
    }
    return g;
  };
  out = (grad_inner(cand.x + h * v) - grad_inner(cand.x - h * v)) / (2.0 * h);
  return -2.0 * alpha1 * cand.lambda * out;
}

VectorXd lambda_refit(const CandidateSet& set, const ReconMap& map,
                      bool nonneg) {
  check_set(set, map);
  const long k = set.size();
  MatrixXd f(map_dim(map), k);
  for (long i = 0; i < k; ++i) {
    const auto& cand = set.candidates[static_cast<std::size_t>(i)];
    f.col(i) = map_eval(map, cand.x, cand.label);
  }
  if (nonneg) return network::nnls(f, set.target);
  return linalg::svd_pinv(f).pinv * set.target;
}

}  // namespace recon::objective
