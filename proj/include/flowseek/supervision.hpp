// Two-component Laplace mixture likelihood over flow and the weighted
// sequence loss across refinement iterations.
//
// Per flow coordinate with residual d = x - mu:
//   p(x) = alpha * exp(-|d|) / 2 + (1 - alpha) * exp(-|d| / e^b2) / (2 e^b2)
// The first component has fixed unit scale (log-scale 0). Each coordinate
// carries its own (mu, alpha, b2).

#ifndef FLOWSEEK_SUPERVISION_HPP
#define FLOWSEEK_SUPERVISION_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "flowseek/types.hpp"

namespace flowseek {

template <typename Scalar>
struct MixtureChannel {
  Plane<Scalar> mu;
  Plane<Scalar> alpha;
  Plane<Scalar> beta2;
};

template <typename Scalar>
struct LaplaceMixtureParams {
  MixtureChannel<Scalar> u;
  MixtureChannel<Scalar> v;

  int height() const { return static_cast<int>(u.mu.rows()); }
  int width() const { return static_cast<int>(u.mu.cols()); }

  static LaplaceMixtureParams Constant(int h, int w, Scalar mu, Scalar alpha, Scalar beta2) {
    MixtureChannel<Scalar> c{Plane<Scalar>::Constant(h, w, mu), Plane<Scalar>::Constant(h, w, alpha),
                             Plane<Scalar>::Constant(h, w, beta2)};
    return {c, c};
  }

  void validate() const {
    for (const auto* c : {&u, &v}) {
      if (c->mu.rows() != height() || c->mu.cols() != width() || c->alpha.rows() != height() ||
          c->alpha.cols() != width() || c->beta2.rows() != height() || c->beta2.cols() != width())
        throw DimensionError("mixture parameter planes have inconsistent shapes");
      if (!c->mu.allFinite() || !c->beta2.allFinite()) throw ParameterError("mixture mu/beta2 must be finite");
      if (!((c->alpha >= Scalar(0)) && (c->alpha <= Scalar(1))).all())
        throw ParameterError("mixture weight alpha must lie in [0, 1]");
    }
  }
};

template <typename Scalar>
struct LossConfig {
  Scalar gamma{0.85};
  int n_iters = 4;

  void validate() const {
    if (!(gamma > Scalar(0) && gamma <= Scalar(1))) throw ParameterError("gamma must lie in (0, 1]");
    if (n_iters < 1) throw ParameterError("n_iters must be at least 1");
  }
};

template <typename Scalar>
struct NllResult {
  Plane<Scalar> per_pixel;
  Scalar mean{0};
};

/// Gradients of the per-pixel NLL, one set of planes per flow coordinate.
template <typename Scalar>
struct MixtureGradient {
  MixtureChannel<Scalar> u;
  MixtureChannel<Scalar> v;
};

/// Scalar kernels for a single coordinate.
namespace laplace {

template <typename Scalar>
Scalar log_sum_exp(Scalar a, Scalar b) {
  const Scalar m = std::max(a, b);
  if (m == -std::numeric_limits<Scalar>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

template <typename Scalar>
struct ComponentLogs {
  Scalar first;   // log of alpha * unit-scale Laplace density
  Scalar second;  // log of (1 - alpha) * e^b2-scale Laplace density
  Scalar total;
};

template <typename Scalar>
ComponentLogs<Scalar> component_logs(Scalar x, Scalar mu, Scalar alpha, Scalar beta2) {
  constexpr Scalar ln2 = std::numbers::ln2_v<Scalar>;
  const Scalar ad = std::abs(x - mu);
  const Scalar ninf = -std::numeric_limits<Scalar>::infinity();
  ComponentLogs<Scalar> c;
  c.first = alpha > Scalar(0) ? std::log(alpha) - ad - ln2 : ninf;
  c.second = alpha < Scalar(1) ? std::log1p(-alpha) - ad * std::exp(-beta2) - beta2 - ln2 : ninf;
  c.total = log_sum_exp(c.first, c.second);
  return c;
}

template <typename Scalar>
Scalar nll(Scalar x, Scalar mu, Scalar alpha, Scalar beta2) {
  return -component_logs(x, mu, alpha, beta2).total;
}

template <typename Scalar>
struct Gradient {
  Scalar mu;
  Scalar alpha;
  Scalar beta2;
};

/// d(NLL)/d(mu, alpha, beta2). At x == mu the mu-derivative is the
/// subgradient 0.
template <typename Scalar>
Gradient<Scalar> nll_grad(Scalar x, Scalar mu, Scalar alpha, Scalar beta2) {
  constexpr Scalar ln2 = std::numbers::ln2_v<Scalar>;
  const auto c = component_logs(x, mu, alpha, beta2);
  const Scalar d = x - mu;
  const Scalar ad = std::abs(d);
  const Scalar inv_scale = std::exp(-beta2);
  const Scalar w1 = std::exp(c.first - c.total);
  const Scalar w2 = std::exp(c.second - c.total);
  const Scalar sgn = d > Scalar(0) ? Scalar(1) : (d < Scalar(0) ? Scalar(-1) : Scalar(0));

  Gradient<Scalar> g;
  g.mu = -sgn * (w1 + w2 * inv_scale);
  // d log p / d alpha = (L1 - L2) / p with L1, L2 the unweighted densities.
  const Scalar log_l1 = -ad - ln2;
  const Scalar log_l2 = -ad * inv_scale - beta2 - ln2;
  g.alpha = -(std::exp(log_l1 - c.total) - std::exp(log_l2 - c.total));
  g.beta2 = -w2 * (ad * inv_scale - Scalar(1));
  return g;
}

/// Largest value the density can take: alpha / 2 + (1 - alpha) / (2 e^b2).
template <typename Scalar>
Scalar density_upper_bound(Scalar alpha, Scalar beta2) {
  return alpha / Scalar(2) + (Scalar(1) - alpha) / (Scalar(2) * std::exp(beta2));
}

}  // namespace laplace

namespace detail {

template <typename Scalar>
void check_gt(const LaplaceMixtureParams<Scalar>& params, const FlowField<Scalar>& gt) {
  params.validate();
  if (!gt.same_shape(params.height(), params.width()))
    throw DimensionError("mixture parameters and ground truth differ in shape");
}

}  // namespace detail

/// Per-pixel -log p(gt_u) - log p(gt_v); the mean runs over valid pixels in
/// row-major order. Invalid pixels get loss 0.
template <typename Scalar>
NllResult<Scalar> mixture_nll(const LaplaceMixtureParams<Scalar>& params, const FlowField<Scalar>& gt) {
  detail::check_gt(params, gt);
  NllResult<Scalar> out;
  out.per_pixel = Plane<Scalar>::Zero(gt.height(), gt.width());
  Scalar sum{0};
  Eigen::Index count = 0;
  for (int i = 0; i < gt.height(); ++i) {
    for (int j = 0; j < gt.width(); ++j) {
      if (!gt.valid(i, j)) continue;
      const Scalar l = laplace::nll(gt.u(i, j), params.u.mu(i, j), params.u.alpha(i, j), params.u.beta2(i, j)) +
                       laplace::nll(gt.v(i, j), params.v.mu(i, j), params.v.alpha(i, j), params.v.beta2(i, j));
      out.per_pixel(i, j) = l;
      sum += l;
      ++count;
    }
  }
  if (count == 0) throw EmptyProblemError("ground truth has no valid pixels");
  out.mean = sum / Scalar(count);
  return out;
}

/// Analytic gradients of the per-pixel NLL (not of the mean). Invalid pixels
/// get zero gradient.
template <typename Scalar>
MixtureGradient<Scalar> mixture_nll_grad(const LaplaceMixtureParams<Scalar>& params, const FlowField<Scalar>& gt) {
  detail::check_gt(params, gt);
  const int h = gt.height();
  const int w = gt.width();
  MixtureGradient<Scalar> g;
  for (auto* c : {&g.u, &g.v}) {
    c->mu = Plane<Scalar>::Zero(h, w);
    c->alpha = Plane<Scalar>::Zero(h, w);
    c->beta2 = Plane<Scalar>::Zero(h, w);
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!gt.valid(i, j)) continue;
      const auto gu = laplace::nll_grad(gt.u(i, j), params.u.mu(i, j), params.u.alpha(i, j), params.u.beta2(i, j));
      const auto gv = laplace::nll_grad(gt.v(i, j), params.v.mu(i, j), params.v.alpha(i, j), params.v.beta2(i, j));
      g.u.mu(i, j) = gu.mu;
      g.u.alpha(i, j) = gu.alpha;
      g.u.beta2(i, j) = gu.beta2;
      g.v.mu(i, j) = gv.mu;
      g.v.alpha(i, j) = gv.alpha;
      g.v.beta2(i, j) = gv.beta2;
    }
  }
  return g;
}

/// Weight of iteration k (0-based) out of n: gamma^(n - 1 - k), so the last
/// iteration has weight 1.
template <typename Scalar>
Scalar sequence_weight(Scalar gamma, int n, int k) {
  return std::pow(gamma, Scalar(n - 1 - k));
}

template <typename Scalar>
Scalar sequence_loss(const std::vector<LaplaceMixtureParams<Scalar>>& per_iteration, const FlowField<Scalar>& gt,
                     const LossConfig<Scalar>& cfg) {
  cfg.validate();
  if (per_iteration.empty()) throw EmptyProblemError("sequence loss needs at least one iteration");
  if (static_cast<int>(per_iteration.size()) != cfg.n_iters)
    throw DimensionError("iteration count differs from LossConfig::n_iters");
  Scalar total{0};
  for (int k = 0; k < cfg.n_iters; ++k)
    total += sequence_weight(cfg.gamma, cfg.n_iters, k) * mixture_nll(per_iteration[k], gt).mean;
  return total;
}

struct GradCheckReport {
  int draws = 0;
  double step = 0;
  double max_rel_err = 0;
  double max_rel_err_mu = 0;
  double max_rel_err_alpha = 0;
  double max_rel_err_beta2 = 0;
  double mode_nll_error = 0;  // |NLL at the mode of a unit Laplace - log 2|
};

/// Relative error used by the gradient checker. The denominator is floored
/// at 1 so near-zero derivatives are compared absolutely.
inline double gradient_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

/// Central finite-difference check of laplace::nll_grad on random draws,
/// skipping residuals closer than `kink` to the non-differentiable point.
template <typename Rng>
GradCheckReport gradient_check(Rng& rng, int draws, double step = 1e-5, double kink = 1e-4) {
  std::uniform_real_distribution<double> mu_dist(-5.0, 5.0);
  std::uniform_real_distribution<double> gap_dist(kink, 5.0);
  std::uniform_real_distribution<double> alpha_dist(0.01, 0.99);
  std::uniform_real_distribution<double> beta_dist(-2.0, 2.0);
  std::bernoulli_distribution sign_dist(0.5);

  GradCheckReport rep;
  rep.draws = draws;
  rep.step = step;
  for (int n = 0; n < draws; ++n) {
    const double mu = mu_dist(rng);
    const double gap = gap_dist(rng);
    const double x = sign_dist(rng) ? mu + gap : mu - gap;
    const double alpha = alpha_dist(rng);
    const double beta2 = beta_dist(rng);
    const auto g = laplace::nll_grad(x, mu, alpha, beta2);
    const double d_mu =
        (laplace::nll(x, mu + step, alpha, beta2) - laplace::nll(x, mu - step, alpha, beta2)) / (2 * step);
    const double d_alpha =
        (laplace::nll(x, mu, alpha + step, beta2) - laplace::nll(x, mu, alpha - step, beta2)) / (2 * step);
    const double d_beta =
        (laplace::nll(x, mu, alpha, beta2 + step) - laplace::nll(x, mu, alpha, beta2 - step)) / (2 * step);
    rep.max_rel_err_mu = std::max(rep.max_rel_err_mu, gradient_rel_error(g.mu, d_mu));
    rep.max_rel_err_alpha = std::max(rep.max_rel_err_alpha, gradient_rel_error(g.alpha, d_alpha));
    rep.max_rel_err_beta2 = std::max(rep.max_rel_err_beta2, gradient_rel_error(g.beta2, d_beta));
  }
  rep.max_rel_err = std::max({rep.max_rel_err_mu, rep.max_rel_err_alpha, rep.max_rel_err_beta2});
  rep.mode_nll_error = std::abs(laplace::nll(0.0, 0.0, 1.0, 0.0) - std::numbers::ln2);
  return rep;
}

}  // namespace flowseek

#endif  // FLOWSEEK_SUPERVISION_HPP
