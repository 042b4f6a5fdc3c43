#include "recon/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "recon/numkernels.hpp"
#include "recon/tensor.hpp"

namespace recon::network {

namespace {

using tensors::Component;
using tensors::SymmetricTensor;

constexpr double kTiny = 1e-300;

}  // namespace

// ---- activation ----

double ActivationPoly::eval(double t) const {
  double out = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) out = out * t + *it;
  return out;
}

double ActivationPoly::d1(double t) const {
  const int deg = degree();
  double out = 0.0;
  for (int k = deg; k >= 1; --k) out = out * t + k * coeffs[static_cast<std::size_t>(k)];
  return out;
}

double ActivationPoly::d2(double t) const {
  const int deg = degree();
  double out = 0.0;
  for (int k = deg; k >= 2; --k) {
    out = out * t + static_cast<double>(k) * (k - 1) * coeffs[static_cast<std::size_t>(k)];
  }
  return out;
}

double ActivationPoly::d3(double t) const {
  const int deg = degree();
  double out = 0.0;
  for (int k = deg; k >= 3; --k) {
    out = out * t +
          static_cast<double>(k) * (k - 1) * (k - 2) * coeffs[static_cast<std::size_t>(k)];
  }
  return out;
}

bool ActivationPoly::is_homogeneous(double tol) const {
  if (coeffs.empty()) return false;
  const double scale = std::abs(leading());
  for (std::size_t k = 0; k + 1 < coeffs.size(); ++k) {
    if (std::abs(coeffs[k]) > tol * scale) return false;
  }
  return true;
}

ActivationPoly ActivationPoly::power(int alpha, double scale) {
  if (alpha < 1) throw ConfigError("activation degree must be >= 1");
  ActivationPoly out;
  out.coeffs.assign(static_cast<std::size_t>(alpha) + 1, 0.0);
  out.coeffs.back() = scale;
  return out;
}

void validate_activation(const ActivationPoly& activation) {
  if (activation.coeffs.size() < 2) {
    throw ConfigError("activation must have degree >= 1");
  }
  for (double c : activation.coeffs) {
    if (!std::isfinite(c)) throw NonFiniteInput("activation coefficient");
  }
  if (activation.leading() == 0.0) {
    throw ConfigError("activation leading coefficient must be nonzero");
  }
}

// ---- model ----

VectorXd ModelParams::flatten() const {
  const long m = width();
  const long d = dim();
  VectorXd theta(m * (d + 1));
  theta.head(m) = a;
  for (long j = 0; j < m; ++j) theta.segment(m + j * d, d) = w.row(j);
  return theta;
}

ModelParams ModelParams::unflatten(const VectorXd& theta, long m, long d,
                                   ActivationPoly activation) {
  if (theta.size() != m * (d + 1)) {
    throw DimensionMismatch("unflatten: parameter vector length " +
                            std::to_string(theta.size()) + " != m(d+1) = " +
                            std::to_string(m * (d + 1)));
  }
  ModelParams out;
  out.a = theta.head(m);
  out.w.resize(m, d);
  for (long j = 0; j < m; ++j) out.w.row(j) = theta.segment(m + j * d, d);
  out.activation = std::move(activation);
  return out;
}

void validate_model(const ModelParams& params) {
  validate_activation(params.activation);
  if (params.a.size() != params.w.rows()) {
    throw DimensionMismatch("model: outer weight count " +
                            std::to_string(params.a.size()) +
                            " != neuron count " + std::to_string(params.w.rows()));
  }
  linalg::require_finite(params.a, "model outer weights");
  linalg::require_finite(params.w, "model inner weights");
}

void validate_dataset(const LabeledDataset& data) {
  if (data.x.rows() != data.y.size()) {
    throw DimensionMismatch("dataset: sample count " +
                            std::to_string(data.x.rows()) + " != label count " +
                            std::to_string(data.y.size()));
  }
  if (data.x.rows() == 0) throw ConfigError("dataset is empty");
  linalg::require_finite(data.x, "dataset samples");
  for (long i = 0; i < data.y.size(); ++i) {
    if (data.y(i) != 1 && data.y(i) != -1) {
      throw ConfigError("dataset labels must be +1/-1, got " +
                        std::to_string(data.y(i)) + " at row " +
                        std::to_string(i));
    }
  }
}

double forward(const ModelParams& params, const VectorXd& x) {
  if (x.size() != params.dim()) {
    throw DimensionMismatch("forward: input dim mismatch");
  }
  const VectorXd z = params.w * x;
  double out = 0.0;
  for (long j = 0; j < params.width(); ++j) {
    out += params.a(j) * params.activation.eval(z(j));
  }
  return out;
}

VectorXd grad_theta(const ModelParams& params, const VectorXd& x) {
  if (x.size() != params.dim()) {
    throw DimensionMismatch("grad_theta: input dim mismatch");
  }
  const long m = params.width();
  const long d = params.dim();
  const VectorXd z = params.w * x;
  VectorXd g(m * (d + 1));
  for (long j = 0; j < m; ++j) {
    g(j) = params.activation.eval(z(j));
    g.segment(m + j * d, d) = params.a(j) * params.activation.d1(z(j)) * x;
  }
  return g;
}

ActivationPoly homogenize(const ActivationPoly& activation) {
  validate_activation(activation);
  return ActivationPoly::power(activation.degree(), activation.leading());
}

ModelParams homogenize(const ModelParams& params) {
  ModelParams out = params;
  out.activation = homogenize(params.activation);
  return out;
}

// ---- exponential-loss training ----

namespace {

struct LossEval {
  double loss = 0.0;   // log((1/n) sum_i exp(-y_i Phi(x_i))), log-sum-exp form
  VectorXd grad;       // gradient of `loss` w.r.t. [a; row-major W]
  double margin_min = 0.0;  // min_i y_i Phi(theta; x_i), unnormalized
  double margin_abs_max = 0.0;  // max_i |y_i Phi(theta; x_i)|
};

// Evaluates the log of the mean exponential loss. Working in the log domain
// keeps both the value and the gradient representable even when margins grow
// into the hundreds (where the raw mean-exp underflows to zero), and the
// gradient is the softmax-weighted combination of per-sample gradients, so
// fixed-step descent on this objective advances the margin at a uniform pace
// instead of stalling on the exponential tail.
LossEval exp_loss(const ModelParams& params, const LabeledDataset& data,
                  bool with_grad) {
  const long n = data.size();
  const long m = params.width();
  const long d = params.dim();
  const MatrixXd z = data.x * params.w.transpose();  // n x m preactivations

  MatrixXd sig(n, m), sig1(with_grad ? n : 0, with_grad ? m : 0);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < m; ++j) {
      sig(i, j) = params.activation.eval(z(i, j));
      if (with_grad) sig1(i, j) = params.activation.d1(z(i, j));
    }
  }

  const VectorXd phi = sig * params.a;
  LossEval out;
  out.margin_min = std::numeric_limits<double>::infinity();
  for (long i = 0; i < n; ++i) {
    const double margin = data.y(i) * phi(i);
    out.margin_min = std::min(out.margin_min, margin);
    out.margin_abs_max = std::max(out.margin_abs_max, std::abs(margin));
  }
  const double shift = -out.margin_min;  // max_i of the exponents
  VectorXd c(n);
  double sum = 0.0;
  for (long i = 0; i < n; ++i) {
    const double e = std::exp(-data.y(i) * phi(i) - shift);
    sum += e;
    c(i) = -static_cast<double>(data.y(i)) * e;
  }
  c /= sum;  // softmax weights times -y_i
  out.loss = shift + std::log(sum) - std::log(static_cast<double>(n));

  if (with_grad) {
    VectorXd grad(m * (d + 1));
    grad.head(m) = sig.transpose() * c;
    const MatrixXd weighted = sig1.array().colwise() * c.array();  // n x m
    const MatrixXd gw = weighted.transpose() * data.x;             // m x d
    for (long j = 0; j < m; ++j) {
      grad.segment(m + j * d, d) = params.a(j) * gw.row(j);
    }
    out.grad = std::move(grad);
  }
  return out;
}

double normalized_margin(const ModelParams& params, const LabeledDataset& data) {
  VectorXd theta = params.flatten();
  const double nrm = theta.norm();
  if (!(nrm > 0.0)) return 0.0;
  ModelParams unit = ModelParams::unflatten(theta / nrm, params.width(),
                                            params.dim(), params.activation);
  return exp_loss(unit, data, false).margin_min;
}

}  // namespace

TrainResult train_to_margin(const LabeledDataset& data, const ModelParams& init,
                            const TrainConfig& config) {
  validate_model(init);
  validate_dataset(data);
  if (init.dim() != data.dim()) {
    throw DimensionMismatch("train_to_margin: model/data dim mismatch");
  }
  if (config.step <= 0.0) throw ConfigError("train step must be positive");
  if (!(config.anneal_growth >= 1.0)) {
    throw ConfigError("train anneal_growth must be >= 1.0");
  }

  TrainResult result;
  result.params = init;
  RunLog& log = result.log;

  ModelParams cur = init;
  LossEval eval = exp_loss(cur, data, true);
  if (!std::isfinite(eval.loss)) {
    throw Diverged("train_to_margin: non-finite loss at initialization");
  }

  double backoff = 1.0;
  double margin_prev = std::nan("");
  log.termination = "max_iters";

  const long m = cur.width();
  const long d = cur.dim();

  // Radial growth is separated from the descent: a plain gradient step on
  // this objective spends almost all of its motion inflating the parameter
  // norm (which only sharpens the soft-min over margins) while the direction
  // turns at a crawl. Instead each iteration descends the component of the
  // gradient tangent to the current sphere ||theta|| = rho, and rho is grown
  // geometrically while the smallest raw margin is below kMarginCap. A
  // tangentially stationary direction with positive margins is an exact
  // conic combination of the per-sample gradients (the softmax weights are
  // the multipliers), so the stationarity residual vanishes at any radius;
  // the cap just pushes the soft-min close enough to the hard min that
  // off-support weights are negligible, while exp(-margin) stays far from
  // the underflow threshold.
  constexpr double kMarginCap = 400.0;
  const double growth = config.anneal_growth;

  double rho = cur.flatten().norm();
  if (!(rho > 0.0)) {
    throw ConfigError("train_to_margin: initial parameters are all zero");
  }
  if (config.max_iters > 0 && eval.margin_abs_max > 0.0) {
    // Temper the starting radius so the largest raw margin is ~1: a sharp
    // soft-min at the initial (usually poor) direction makes every tangential
    // step fight a near-kinked surface.
    const double hom_degree = cur.activation.degree() + 1;
    rho *= std::pow(1.0 / eval.margin_abs_max, 1.0 / hom_degree);
    VectorXd scaled = cur.flatten();
    scaled *= rho / scaled.norm();
    cur = ModelParams::unflatten(scaled, m, d, cur.activation);
    eval = exp_loss(cur, data, true);
  }

  for (long iter = 1; iter <= config.max_iters; ++iter) {
    VectorXd theta = cur.flatten();
    const VectorXd unit = theta / rho;
    const VectorXd tangent = eval.grad - eval.grad.dot(unit) * unit;
    const double grad_norm = tangent.norm();
    if (!(grad_norm > 1e-15 * (1.0 + eval.grad.norm()))) {
      log.termination = "margin_stable";
      break;  // direction is stationary on the sphere
    }
    // `step` is the angular displacement per accepted step, in radians.
    const double eta_base = config.step * rho / grad_norm;
    double eta = eta_base * backoff;
    ModelParams next = cur;
    LossEval next_eval;
    bool halved = false;
    while (true) {
      VectorXd cand = theta - eta * tangent;
      cand *= rho / cand.norm();
      next = ModelParams::unflatten(cand, m, d, cur.activation);
      next_eval = exp_loss(next, data, true);
      const double want = eval.loss - 0.25 * eta * grad_norm * grad_norm;
      const double slack = 1e-12 * std::max(1.0, std::abs(want));
      if (std::isfinite(next_eval.loss) && next_eval.loss <= want + slack) break;
      backoff *= 0.5;
      halved = true;
      eta = eta_base * backoff;
      if (backoff < 1e-18) {
        throw Diverged("train_to_margin: step backoff underflow");
      }
    }
    if (!halved) backoff = std::min(1.0, backoff * 2.0);
    cur = std::move(next);
    eval = std::move(next_eval);
    if (eval.margin_min > 0.0 && eval.margin_min < kMarginCap) {
      const double hom_degree = cur.activation.degree() + 1;
      rho *= std::min(growth,
                      std::pow(kMarginCap / eval.margin_min, 1.0 / hom_degree));
      VectorXd scaled = cur.flatten();
      scaled *= rho / scaled.norm();
      cur = ModelParams::unflatten(scaled, m, d, cur.activation);
      eval = exp_loss(cur, data, true);
      if (!std::isfinite(eval.loss)) {
        throw Diverged("train_to_margin: non-finite loss after rescale");
      }
    }
    log.total_iterations = iter;

    const bool margin_check = (iter % config.margin_period == 0);
    const bool log_now = (iter % config.log_period == 0) || margin_check ||
                         iter == config.max_iters;
    double margin = std::nan("");
    if (log_now) margin = normalized_margin(cur, data);
    if (log_now) {
      VectorXd cur_theta = cur.flatten();
      const VectorXd cur_unit = cur_theta / cur_theta.norm();
      const double tangent_norm =
          (eval.grad - eval.grad.dot(cur_unit) * cur_unit).norm();
      log.iters.push_back({iter, eval.loss, tangent_norm, eta, margin});
    }

    if (margin_check) {
      if (margin > 0.0 && std::isfinite(margin_prev)) {
        const double change = std::abs(margin - margin_prev);
        if (change <= config.margin_rtol * std::max(std::abs(margin), kTiny)) {
          log.termination = "margin_stable";
          break;
        }
      }
      margin_prev = margin;
    }
  }

  result.params = cur;
  return result;
}

// ---- exact stationary-point synthesis ----

namespace {

// Flips u so its largest-magnitude coordinate is positive.
void canonicalize_sign(VectorXd& u) {
  long k = 0;
  u.cwiseAbs().maxCoeff(&k);
  if (u(k) < 0.0) u = -u;
}

struct EigenDirection {
  VectorXd u;   // unit
  double mu;    // f(u) = mu u
};

// Damped Newton iteration on F(u, mu) = [f(u) - mu u; (||u||^2 - 1)/2] for
// the moment tensor's fixed-point directions. Undamped steps oscillate from
// all but the closest starts, funnelling every start into one attractor;
// backtracking on the residual norm keeps each start inside its own basin.
bool newton_eigenpair(const SymmetricTensor& t, VectorXd u, double f_scale,
                      EigenDirection* out) {
  const long d = u.size();
  const double nrm = u.norm();
  if (!(nrm > 0.0)) return false;
  u /= nrm;
  double mu = tensors::diagonal_poly(t, u);

  const int order = t.order();
  auto residual_at = [&](const VectorXd& v, double m_val) {
    VectorXd r(d + 1);
    r.head(d) = tensors::contract_vector(t, v) - m_val * v;
    r(d) = 0.5 * (v.squaredNorm() - 1.0);
    return r;
  };

  VectorXd residual = residual_at(u, mu);
  for (int it = 0; it < 200; ++it) {
    if (residual.norm() <= 1e-14 * f_scale) break;

    MatrixXd jac(d + 1, d + 1);
    jac.topLeftCorner(d, d) =
        (order - 1) * tensors::contract_matrix_slice(t, u) -
        mu * MatrixXd::Identity(d, d);
    jac.topRightCorner(d, 1) = -u;
    jac.bottomLeftCorner(1, d) = u.transpose();
    jac(d, d) = 0.0;

    Eigen::FullPivLU<MatrixXd> lu(jac);
    if (!lu.isInvertible()) return false;
    const VectorXd delta = lu.solve(-residual);
    if (!delta.allFinite()) return false;

    bool accepted = false;
    double scale = 1.0;
    for (int back = 0; back < 14; ++back, scale *= 0.5) {
      const VectorXd u_try = u + scale * delta.head(d);
      const double mu_try = mu + scale * delta(d);
      if (!u_try.allFinite() || !std::isfinite(mu_try) || u_try.norm() > 1e6) {
        continue;
      }
      const VectorXd r_try = residual_at(u_try, mu_try);
      if (r_try.norm() <= (1.0 - 0.25 * scale) * residual.norm()) {
        u = u_try;
        mu = mu_try;
        residual = r_try;
        accepted = true;
        break;
      }
    }
    if (!accepted) return false;
  }

  const double unm = u.norm();
  if (!(unm > 0.0)) return false;
  u /= unm;
  mu = tensors::diagonal_poly(t, u);
  const VectorXd check = tensors::contract_vector(t, u) - mu * u;
  if (check.norm() > 1e-11 * f_scale) return false;

  canonicalize_sign(u);
  out->u = u;
  out->mu = tensors::diagonal_poly(t, u);
  return true;
}

}  // namespace

ModelParams kkt_synthesize(const LabeledDataset& data,
                           const VectorXd& multipliers, long width, int alpha,
                           std::uint64_t seed) {
  validate_dataset(data);
  if (alpha < 2) {
    throw ConfigError("kkt_synthesize: activation degree must be >= 2");
  }
  if (width < 1) throw ConfigError("kkt_synthesize: width must be >= 1");
  if (multipliers.size() != data.size()) {
    throw DimensionMismatch("kkt_synthesize: multiplier count mismatch");
  }
  linalg::require_finite(multipliers, "multipliers");
  for (long i = 0; i < multipliers.size(); ++i) {
    if (multipliers(i) < 0.0) {
      throw ConfigError("kkt_synthesize: multipliers must be nonnegative");
    }
  }

  const long d = data.dim();
  ModelParams out;
  out.activation = ActivationPoly::power(alpha);
  out.a = VectorXd::Zero(width);
  out.w = MatrixXd::Zero(width, d);

  std::vector<Component> active;
  for (long i = 0; i < multipliers.size(); ++i) {
    if (multipliers(i) > 0.0) {
      active.push_back({data.x.row(i).transpose(),
                        multipliers(i) * static_cast<double>(data.y(i))});
    }
  }
  if (active.empty()) return out;  // all-zero multipliers: zero parameters

  const SymmetricTensor t = tensors::from_components(active, alpha);
  double b_max = 0.0;
  for (const Component& c : active) b_max = std::max(b_max, std::abs(c.coefficient));
  const double f_scale = std::max(1.0, static_cast<double>(active.size()) * b_max);
  const double mu_tol = 1e-8 * b_max;

  // Start points: the active directions themselves, small subset
  // combinations (weighted by 1/b to mirror the orthonormal-case fixed
  // points), and random draws from the active span.
  const long r = static_cast<long>(active.size());
  std::vector<VectorXd> starts;
  for (const Component& c : active) starts.push_back(c.direction);
  for (long i = 0; i < r; ++i) {
    for (long j = i + 1; j < r; ++j) {
      starts.push_back(active[i].direction / active[i].coefficient +
                       active[j].direction / active[j].coefficient);
      starts.push_back(active[i].direction + active[j].direction);
      for (long k = j + 1; k < r && starts.size() < 400; ++k) {
        starts.push_back(active[i].direction / active[i].coefficient +
                         active[j].direction / active[j].coefficient +
                         active[k].direction / active[k].coefficient);
      }
    }
  }
  VectorXd all = VectorXd::Zero(d);
  for (const Component& c : active) all += c.direction / c.coefficient;
  starts.push_back(all);

  // Orthonormal basis of the active span for the random starts.
  MatrixXd xt(d, r);
  for (long i = 0; i < r; ++i) xt.col(i) = active[static_cast<std::size_t>(i)].direction;
  Eigen::HouseholderQR<MatrixXd> qr(xt);
  const MatrixXd span_q =
      qr.householderQ() * MatrixXd::Identity(d, std::min(d, r));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int extra = 0; extra < 64; ++extra) {
    VectorXd coeff(span_q.cols());
    for (long i = 0; i < coeff.size(); ++i) coeff(i) = gauss(rng);
    starts.push_back(span_q * coeff);
  }

  std::vector<EigenDirection> found;
  for (const VectorXd& start : starts) {
    EigenDirection dir;
    if (!newton_eigenpair(t, start, f_scale, &dir)) continue;
    if (std::abs(dir.mu) <= mu_tol) continue;  // u^T f(u) ~ 0: unusable
    bool duplicate = false;
    for (const EigenDirection& seen : found) {
      if ((seen.u - dir.u).norm() < 1e-8 || (seen.u + dir.u).norm() < 1e-8) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) found.push_back(dir);
  }
  if (found.empty()) {
    throw SynthesisFailed(
        "kkt_synthesize: no fixed-point direction with nonzero u^T f(u) found");
  }

  // Assign neurons round-robin over the found directions in a seeded shuffled
  // order, with random sign flips for texture. Scale is closed-form from the
  // stationarity equations.
  std::vector<std::size_t> order(found.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const double exponent = -1.0 / (2.0 * alpha - 2.0);
  for (long j = 0; j < width; ++j) {
    const EigenDirection& dir = found[order[static_cast<std::size_t>(j) % order.size()]];
    const bool flip = (rng() & 1u) != 0;
    VectorXd u = flip ? VectorXd(-dir.u) : dir.u;
    const double mu = tensors::diagonal_poly(t, u);
    const double c = std::pow(alpha * mu * mu, exponent);
    out.w.row(j) = c * u;
    out.a(j) = std::pow(c, alpha) * mu;
  }

  // Exactness audit: every neuron must satisfy both stationarity blocks.
  for (long j = 0; j < width; ++j) {
    const VectorXd wj = out.w.row(j).transpose();
    const VectorXd fw = tensors::contract_vector(t, wj);
    const double a_expected = tensors::diagonal_poly(t, wj);
    const double w_res = (wj - alpha * out.a(j) * fw).norm() / wj.norm();
    const double a_res =
        std::abs(out.a(j) - a_expected) / std::max(std::abs(out.a(j)), kTiny);
    if (w_res > 1e-9 || a_res > 1e-9) {
      throw SynthesisFailed("kkt_synthesize: neuron " + std::to_string(j) +
                            " failed the stationarity audit (w " +
                            std::to_string(w_res) + ", a " +
                            std::to_string(a_res) + ")");
    }
  }
  return out;
}

// ---- nonnegative least squares ----

VectorXd nnls(const MatrixXd& g, const VectorXd& t, double tol, long max_iters) {
  if (g.rows() != t.size()) {
    throw DimensionMismatch("nnls: matrix/vector row mismatch");
  }
  linalg::require_finite(g, "nnls matrix");
  linalg::require_finite(t, "nnls target");

  const long n = g.cols();
  const MatrixXd a = g.transpose() * g;
  const VectorXd b = g.transpose() * t;
  VectorXd lambda = VectorXd::Zero(n);
  if (n == 0) return lambda;

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  const double lipschitz = std::max(es.eigenvalues().maxCoeff(), kTiny);
  const double pg_tol = tol * std::max(b.cwiseAbs().maxCoeff(), 1.0);

  for (long it = 0; it < max_iters; ++it) {
    const VectorXd grad = a * lambda - b;
    double pg_norm = 0.0;
    for (long i = 0; i < n; ++i) {
      const double pg = lambda(i) > 0.0 ? grad(i) : std::min(grad(i), 0.0);
      pg_norm = std::max(pg_norm, std::abs(pg));
    }
    if (pg_norm <= pg_tol) break;
    lambda = (lambda - grad / lipschitz).cwiseMax(0.0);
  }

  // Polish: solve the unconstrained problem on the current support; accept
  // when it stays (numerically) feasible and does not increase the objective.
  auto objective = [&](const VectorXd& l) {
    return 0.5 * l.dot(a * l) - b.dot(l);
  };
  for (int round = 0; round < 3; ++round) {
    std::vector<long> support;
    const double support_cut = 1e-14 * std::max(lambda.maxCoeff(), 1.0);
    for (long i = 0; i < n; ++i) {
      if (lambda(i) > support_cut) support.push_back(i);
    }
    if (support.empty()) break;
    MatrixXd as(static_cast<long>(support.size()), static_cast<long>(support.size()));
    VectorXd bs(static_cast<long>(support.size()));
    for (std::size_t p = 0; p < support.size(); ++p) {
      bs(static_cast<long>(p)) = b(support[p]);
      for (std::size_t q = 0; q < support.size(); ++q) {
        as(static_cast<long>(p), static_cast<long>(q)) = a(support[p], support[q]);
      }
    }
    const VectorXd zs = as.ldlt().solve(bs);
    if (!zs.allFinite()) break;
    VectorXd candidate = VectorXd::Zero(n);
    for (std::size_t p = 0; p < support.size(); ++p) {
      candidate(support[p]) = std::max(zs(static_cast<long>(p)), 0.0);
    }
    if (objective(candidate) <= objective(lambda) + 1e-15 * std::abs(objective(lambda))) {
      if ((candidate - lambda).cwiseAbs().maxCoeff() <
          1e-15 * std::max(lambda.maxCoeff(), 1.0)) {
        lambda = candidate;
        break;
      }
      lambda = candidate;
    } else {
      break;
    }
  }
  return lambda;
}

// ---- certification ----

KktCertificate kkt_certify(const ModelParams& params, const LabeledDataset& data,
                           const CertifyOpts& opts) {
  validate_model(params);
  validate_dataset(data);
  if (params.dim() != data.dim()) {
    throw DimensionMismatch("kkt_certify: model/data dim mismatch");
  }
  if (!params.activation.is_homogeneous(1e-10)) {
    throw ConfigError("kkt_certify requires a homogeneous activation");
  }

  const long n = data.size();
  const VectorXd theta = params.flatten();
  const double theta_norm = theta.norm();

  KktCertificate cert;
  cert.multipliers = VectorXd::Zero(n);
  if (!(theta_norm > 0.0)) return cert;  // zero model: trivially stationary

  MatrixXd g(theta.size(), n);
  VectorXd margins(n);
  for (long i = 0; i < n; ++i) {
    const VectorXd xi = data.x.row(i).transpose();
    g.col(i) = static_cast<double>(data.y(i)) * grad_theta(params, xi);
    margins(i) = static_cast<double>(data.y(i)) * forward(params, xi);
  }
  cert.margin_min = margins.minCoeff();

  const int hom_degree = params.activation.degree() + 1;
  const bool feasible = cert.margin_min > 0.0;
  if (!feasible && opts.require_feasible) {
    throw InfeasibleMargins("kkt_certify: minimum margin " +
                            std::to_string(cert.margin_min) + " is not positive");
  }

  const VectorXd lambda_full = nnls(g, theta);
  const double res_full = (theta - g * lambda_full).norm();

  VectorXd lambda = lambda_full;
  VectorXd rescaled_margins = margins;
  if (feasible) {
    cert.rescale = std::pow(cert.margin_min, -1.0 / hom_degree);
    rescaled_margins = margins / cert.margin_min;

    std::vector<long> band;
    for (long i = 0; i < n; ++i) {
      if (std::abs(rescaled_margins(i) - 1.0) <= opts.margin_tol) band.push_back(i);
    }
    if (!band.empty() && static_cast<long>(band.size()) < n) {
      MatrixXd gs(theta.size(), static_cast<long>(band.size()));
      for (std::size_t p = 0; p < band.size(); ++p) gs.col(static_cast<long>(p)) = g.col(band[p]);
      const VectorXd ls = nnls(gs, theta);
      const double res_band = (theta - gs * ls).norm();
      if (res_band <= 2.0 * res_full + 1e-12 * theta_norm) {
        lambda = VectorXd::Zero(n);
        for (std::size_t p = 0; p < band.size(); ++p) lambda(band[p]) = ls(static_cast<long>(p));
      }
    }
  }

  // Support thresholding, then one clean refit on the support.
  const double support_cut = opts.support_tol * std::max(lambda.maxCoeff(), kTiny);
  std::vector<long> support;
  for (long i = 0; i < n; ++i) {
    if (lambda(i) > support_cut) support.push_back(i);
  }
  if (!support.empty()) {
    MatrixXd gs(theta.size(), static_cast<long>(support.size()));
    for (std::size_t p = 0; p < support.size(); ++p) {
      gs.col(static_cast<long>(p)) = g.col(support[p]);
    }
    const VectorXd ls = nnls(gs, theta);
    lambda = VectorXd::Zero(n);
    for (std::size_t p = 0; p < support.size(); ++p) {
      lambda(support[p]) = ls(static_cast<long>(p));
    }
    support.clear();
    const double cut2 = opts.support_tol * std::max(lambda.maxCoeff(), kTiny);
    for (long i = 0; i < n; ++i) {
      if (lambda(i) > cut2) {
        support.push_back(i);
      } else {
        lambda(i) = 0.0;
      }
    }
  }

  cert.multipliers = lambda;
  cert.active_set = support;
  cert.stationarity_residual = (theta - g * lambda).norm() / theta_norm;
  double margin_violation = 0.0;
  double slackness = 0.0;
  for (long i = 0; i < n; ++i) {
    const double dev = std::abs(rescaled_margins(i) - 1.0);
    if (lambda(i) > 0.0) margin_violation = std::max(margin_violation, dev);
    slackness += lambda(i) * dev;
  }
  cert.margin_violation = margin_violation;
  cert.slackness_violation = slackness;
  return cert;
}

}  // namespace recon::network
