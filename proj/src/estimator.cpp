#include "flowseek/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "flowseek/parallel.hpp"

namespace flowseek {
namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Linearization {
  Matrix normal;   // sum of J^T W J
  Vector gradient;  // sum of J^T r (or model gradient)
  double cost = 0;
};

/// Sums per-row partials in row order so the result is independent of the
/// thread count.
Linearization reduce_rows(std::vector<Linearization>& rows, int n) {
  Linearization total{Matrix::Zero(n, n), Vector::Zero(n), 0.0};
  for (auto& r : rows) {
    total.normal += r.normal;
    total.gradient += r.gradient;
    total.cost += r.cost;
  }
  return total;
}

struct BilinearSample {
  double value;
  double dx;
  double dy;
};

/// Bilinear sample with derivatives; positions are clamped to the image and
/// the derivative along a clamped axis is zero.
BilinearSample sample_clamped(const Imaged& img, double x, double y) {
  const int w = static_cast<int>(img.cols());
  const int h = static_cast<int>(img.rows());
  bool clamp_x = false, clamp_y = false;
  if (!(x >= 0)) x = 0, clamp_x = true;
  if (!(y >= 0)) y = 0, clamp_y = true;
  if (x > w - 1) x = w - 1, clamp_x = true;
  if (y > h - 1) y = h - 1, clamp_y = true;
  const int x0 = std::min(static_cast<int>(std::floor(x)), std::max(w - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(y)), std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double i00 = img(y0, x0), i01 = img(y0, x1), i10 = img(y1, x0), i11 = img(y1, x1);
  BilinearSample s;
  s.value = (1 - ay) * ((1 - ax) * i00 + ax * i01) + ay * ((1 - ax) * i10 + ax * i11);
  s.dx = clamp_x ? 0.0 : (1 - ay) * (i01 - i00) + ay * (i11 - i10);
  s.dy = clamp_y ? 0.0 : (1 - ax) * (i10 - i00) + ax * (i11 - i01);
  return s;
}

Linearization linearize_photometric(const Imaged& img0, const Imaged& img1, const MotionBasisSet<double>& bases,
                                    const FlowFieldd& flow) {
  const int h = static_cast<int>(img0.rows());
  const int w = static_cast<int>(img0.cols());
  const int n = bases.size();
  std::vector<Linearization> rows(h);
  parallel_rows(h, [&](int i) {
    Linearization acc{Matrix::Zero(n, n), Vector::Zero(n), 0.0};
    Vector jac(n);
    for (int j = 0; j < w; ++j) {
      const auto s = sample_clamped(img1, j + flow.u(i, j), i + flow.v(i, j));
      const double r = s.value - img0(i, j);
      for (int k = 0; k < n; ++k) jac(k) = s.dx * bases[k].u(i, j) + s.dy * bases[k].v(i, j);
      acc.normal.selfadjointView<Eigen::Lower>().rankUpdate(jac);
      acc.gradient += r * jac;
      acc.cost += r * r;
    }
    acc.normal = acc.normal.selfadjointView<Eigen::Lower>();
    rows[i] = std::move(acc);
  });
  auto total = reduce_rows(rows, n);
  total.cost /= double(h) * w;
  return total;
}

Linearization linearize_correlation(const CorrelationPyramid<double>& pyr, const MotionBasisSet<double>& bases,
                                    const FlowFieldd& flow, int radius) {
  const int r = std::max(radius, 1);
  const LookupPatch<double> patch = lookup(pyr, flow, r);
  const int h = flow.height();
  const int w = flow.width();
  const int n = bases.size();
  const double norm = 1.0 / pyr.size();
  std::vector<Linearization> rows(h);
  parallel_rows(h, [&](int i) {
    Linearization acc{Matrix::Zero(n, n), Vector::Zero(n), 0.0};
    Eigen::Matrix<double, 2, Eigen::Dynamic> jac(2, n);
    for (int j = 0; j < w; ++j) {
      Eigen::Vector2d g = Eigen::Vector2d::Zero();
      Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
      double centre = 0;
      for (int l = 0; l < patch.levels; ++l) {
        const double s = pyr.strides[l];
        auto at = [&](int dy, int dx) { return patch.at(i, j, l, dy, dx); };
        centre += at(0, 0);
        g(0) += (at(0, 1) - at(0, -1)) / (2 * s);
        g(1) += (at(1, 0) - at(-1, 0)) / (2 * s);
        hess(0, 0) += (at(0, 1) - 2 * at(0, 0) + at(0, -1)) / (s * s);
        hess(1, 1) += (at(1, 0) - 2 * at(0, 0) + at(-1, 0)) / (s * s);
        const double hxy = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * s * s);
        hess(0, 1) += hxy;
        hess(1, 0) += hxy;
      }
      // Local model of the cost (negated correlation) with its curvature made
      // positive definite.
      const Eigen::Vector2d grad = -norm * g;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(-norm * hess);
      Eigen::Vector2d lam = eig.eigenvalues().cwiseAbs();
      const double floor = std::max(1e-6 * lam.maxCoeff(), 1e-12);
      lam = lam.cwiseMax(floor);
      const Eigen::Matrix2d curv = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
      for (int k = 0; k < n; ++k) {
        jac(0, k) = bases[k].u(i, j);
        jac(1, k) = bases[k].v(i, j);
      }
      acc.normal.noalias() += jac.transpose() * curv * jac;
      acc.gradient.noalias() += jac.transpose() * grad;
      acc.cost -= norm * centre;
    }
    rows[i] = std::move(acc);
  });
  auto total = reduce_rows(rows, n);
  total.cost /= double(h) * w;
  return total;
}

/// Solves (A + lambda * diag(A)) x = -g; zero diagonal entries are floored so
/// rank-deficient systems stay solvable.
Vector damped_step(const Matrix& normal, const Vector& gradient, double lambda) {
  Vector d = normal.diagonal();
  const double dmax = d.maxCoeff();
  d = d.cwiseMax(std::max(dmax * 1e-12, 1e-300));
  Matrix m = normal;
  m.diagonal() += lambda * d;
  return m.ldlt().solve(-gradient);
}

int numerical_rank(const Matrix& normal) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(normal);
  const Vector ev = eig.eigenvalues().cwiseAbs();
  const double emax = ev.maxCoeff();
  if (!(emax > 0)) return 0;
  // Eigenvalues of J^T J are squared singular values of J.
  return static_cast<int>((ev.array() > kRankTolerance * kRankTolerance * emax).count());
}

struct Problem {
  std::function<double(const FlowFieldd&)> cost;
  std::function<Linearization(const FlowFieldd&)> linearize;
};

struct SolveState {
  Vector coeffs;
  std::vector<double> trace;
  std::vector<IterationInfo> iterations;
  Matrix last_normal;
};

void check_cost(double c, const char* where) {
  if (!std::isfinite(c)) throw NumericalError(std::string("non-finite cost during ") + where);
}

SolveState run_levenberg_marquardt(const Problem& problem, const MotionBasisSet<double>& bases, Vector coeffs,
                                   const EstimatorConfig& cfg) {
  SolveState st;
  double lambda = cfg.lambda;
  FlowFieldd flow = reconstruct(bases, coeffs);
  double cost = problem.cost(flow);
  check_cost(cost, "initialisation");
  st.trace.push_back(cost);
  for (int it = 0; it < cfg.n_iters; ++it) {
    const Linearization lin = problem.linearize(flow);
    st.last_normal = lin.normal;
    IterationInfo info;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      const Vector step = damped_step(lin.normal, lin.gradient, lambda);
      if (!step.allFinite()) {
        lambda *= cfg.lambda_factor;
        ++info.rejected_steps;
        continue;
      }
      const Vector trial = coeffs + step;
      FlowFieldd trial_flow = reconstruct(bases, trial);
      const double trial_cost = problem.cost(trial_flow);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        coeffs = trial;
        flow = std::move(trial_flow);
        cost = trial_cost;
        info.accepted = true;
        info.step_norm = step.norm();
        info.lambda = lambda;
        lambda = std::max(lambda / cfg.lambda_factor, 1e-12);
        break;
      }
      ++info.rejected_steps;
      lambda *= cfg.lambda_factor;
    }
    if (!info.accepted) info.lambda = lambda;
    info.cost = cost;
    check_cost(cost, "refinement");
    st.trace.push_back(cost);
    st.iterations.push_back(info);
  }
  st.coeffs = std::move(coeffs);
  return st;
}

/// Averages each basis over stride x stride blocks and expresses it in
/// coarse-pixel units, so coefficients carry over between levels unchanged.
MotionBasisSet<double> coarsen_bases(const MotionBasisSet<double>& bases, int stride) {
  MotionBasisSet<double> out = bases;
  for (int k = 0; k < bases.size(); ++k) {
    FeatureMapd f(bases.height(), bases.width(), 2);
    f.data.col(0) = Eigen::Map<const Vector>(bases[k].u.data(), bases[k].u.size());
    f.data.col(1) = Eigen::Map<const Vector>(bases[k].v.data(), bases[k].v.size());
    const FeatureMapd pooled = avg_pool(f, stride);
    out[k].u = pooled.channel(0) / double(stride);
    out[k].v = pooled.channel(1) / double(stride);
  }
  return out;
}

Imaged coarsen_image(const Imaged& img, int stride) {
  return avg_pool(FeatureMapd::FromPlane(img), stride).channel(0);
}

Problem photometric_problem(const Imaged& img0, const Imaged& img1, const MotionBasisSet<double>& bases) {
  return {[&img0, &img1](const FlowFieldd& f) { return photometric_cost(img0, img1, f); },
          [&img0, &img1, &bases](const FlowFieldd& f) { return linearize_photometric(img0, img1, bases, f); }};
}

}  // namespace

void EstimatorConfig::validate() const {
  if (n_iters < 1) throw ParameterError("n_iters must be at least 1");
  if (radius < 0) throw ParameterError("lookup radius must be nonnegative");
  if (!(lambda > 0)) throw ParameterError("damping lambda must be positive");
  if (!(lambda_factor > 1)) throw ParameterError("lambda factor must exceed 1");
  if (max_backtracks < 0) throw ParameterError("max_backtracks must be nonnegative");
  if (warm_start_levels < 1) throw ParameterError("warm_start_levels must be at least 1");
  if (strides.empty() || strides.front() != 1) throw ParameterError("strides must start at 1");
}

FeatureMapd image_features(const Imaged& img) {
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  FeatureMapd f(h, w, 3);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int jl = std::max(j - 1, 0), jr = std::min(j + 1, w - 1);
      const int iu = std::max(i - 1, 0), id = std::min(i + 1, h - 1);
      f(i, j, 0) = img(i, j);
      f(i, j, 1) = (img(i, jr) - img(i, jl)) / std::max(jr - jl, 1);
      f(i, j, 2) = (img(id, j) - img(iu, j)) / std::max(id - iu, 1);
    }
  }
  for (int k = 0; k < 3; ++k) f.data.col(k).array() -= f.data.col(k).mean();
  return f;
}

double photometric_cost(const Imaged& img0, const Imaged& img1, const FlowFieldd& flow) {
  const int h = static_cast<int>(img0.rows());
  const int w = static_cast<int>(img0.cols());
  std::vector<double> rows(h, 0.0);
  parallel_rows(h, [&](int i) {
    double acc = 0;
    for (int j = 0; j < w; ++j) {
      const double r = sample_clamped(img1, j + flow.u(i, j), i + flow.v(i, j)).value - img0(i, j);
      acc += r * r;
    }
    rows[i] = acc;
  });
  double total = 0;
  for (const double r : rows) total += r;
  return total / (double(h) * w);
}

double correlation_cost(const CorrelationPyramid<double>& pyr, const FlowFieldd& flow) {
  const LookupPatch<double> patch = lookup(pyr, flow, 0);
  double total = 0;
  for (int i = 0; i < patch.height; ++i) {
    double row = 0;
    for (int j = 0; j < patch.width; ++j)
      for (int l = 0; l < patch.levels; ++l) row += patch.at(i, j, l, 0, 0);
    total += row;
  }
  return -total / (double(pyr.size()) * patch.height * patch.width);
}

EstimateResult estimate_rigid_flow(const Imaged& img0, const Imaged& img1, const InverseDepthMapd& depth,
                                   const std::optional<Intrinsicsd>& intr, const EstimatorConfig& cfg) {
  if (depth.height() != img0.rows() || depth.width() != img0.cols())
    throw DimensionError("inverse depth dimensions differ from the images");
  const auto bases = intr ? build_six_bases(depth, *intr)
                          : build_eight_bases(depth, (depth.width() - 1) / 2.0, (depth.height() - 1) / 2.0);
  return estimate_rigid_flow(img0, img1, bases, cfg);
}

EstimateResult estimate_rigid_flow(const Imaged& img0, const Imaged& img1, const MotionBasisSet<double>& bases,
                                   const EstimatorConfig& cfg) {
  cfg.validate();
  if (img0.rows() != img1.rows() || img0.cols() != img1.cols()) throw DimensionError("images differ in size");
  if (img0.size() == 0) throw DimensionError("images are empty");
  if (!img0.allFinite() || !img1.allFinite()) throw ParameterError("images contain non-finite values");
  if (bases.height() != img0.rows() || bases.width() != img0.cols())
    throw DimensionError("basis dimensions differ from the images");

  const int n = bases.size();
  EstimateResult res;
  res.bases = bases;

  std::optional<CorrelationPyramid<double>> pyr;
  if (img0.size() <= kMaxCorrelationPixels) {
    pyr = build_pyramid(image_features(img0), image_features(img1), cfg.strides);
    res.pyramid_built = true;
  } else if (cfg.cost == CostKind::correlation) {
    throw DimensionError("correlation cost needs images of at most 64x64 pixels");
  }

  Vector init = Vector::Zero(n);
  if (cfg.warm_start != WarmStart::off && cfg.warm_start_levels > 1) {
    Vector c = Vector::Zero(n);
    for (int level = cfg.warm_start_levels - 1; level >= 1; --level) {
      const int stride = 1 << level;
      if (img0.rows() < 2 * stride || img0.cols() < 2 * stride) continue;
      const Imaged c0 = coarsen_image(img0, stride);
      const Imaged c1 = coarsen_image(img1, stride);
      const auto cb = coarsen_bases(bases, stride);
      c = run_levenberg_marquardt(photometric_problem(c0, c1, cb), cb, c, cfg).coeffs;
    }
    const FlowFieldd guess = reconstruct(bases, c);
    const double max_flow = (guess.u.square() + guess.v.square()).sqrt().maxCoeff();
    if (cfg.warm_start == WarmStart::on || max_flow > cfg.warm_start_threshold) {
      init = c;
      res.warm_started = true;
    }
  }

  Problem problem;
  if (cfg.cost == CostKind::photometric) {
    problem = photometric_problem(img0, img1, bases);
  } else {
    const auto& p = *pyr;
    const int radius = cfg.radius;
    problem = {[&p](const FlowFieldd& f) { return correlation_cost(p, f); },
               [&p, &bases, radius](const FlowFieldd& f) { return linearize_correlation(p, bases, f, radius); }};
  }
  SolveState st = run_levenberg_marquardt(problem, bases, init, cfg);

  res.flow = reconstruct(bases, st.coeffs);
  res.cost_trace = std::move(st.trace);
  res.iterations = std::move(st.iterations);
  res.normal_rank = numerical_rank(problem.linearize(res.flow).normal);
  res.coefficients.values = st.coeffs;
  res.coefficients.effective_rank = res.normal_rank;
  res.coefficients.used_pixels = img0.size();
  res.coefficients.residual_rms = std::sqrt(photometric_cost(img0, img1, res.flow));
  if (pyr) res.final_correlation = -correlation_cost(*pyr, res.flow);
  return res;
}

std::string to_string(CostKind kind) { return kind == CostKind::photometric ? "photometric" : "correlation"; }

CostKind cost_kind_from_string(const std::string& s) {
  if (s == "photometric") return CostKind::photometric;
  if (s == "correlation") return CostKind::correlation;
  throw ParameterError("unknown cost kind: " + s);
}

}  // namespace flowseek
