// Classical rigid-flow estimator: iterative damped Gauss-Newton over motion
// basis coefficients, driven by a photometric or correlation-volume cost.

#ifndef FLOWSEEK_ESTIMATOR_HPP
#define FLOWSEEK_ESTIMATOR_HPP

#include <optional>
#include <string>
#include <vector>

#include "flowseek/bases.hpp"
#include "flowseek/correlation.hpp"
#include "flowseek/subspace.hpp"

namespace flowseek {

enum class CostKind { photometric, correlation };
enum class WarmStart { automatic, off, on };

struct EstimatorConfig {
  int n_iters = 4;
  int radius = 4;
  std::vector<int> strides = default_strides();
  CostKind cost = CostKind::photometric;
  double lambda = 1e-3;         // initial Levenberg-Marquardt damping
  double lambda_factor = 10.0;  // multiply on reject, divide on accept
  int max_backtracks = 10;
  WarmStart warm_start = WarmStart::automatic;
  int warm_start_levels = 3;
  double warm_start_threshold = 4.0;  // px; automatic mode keeps the coarse guess above this

  void validate() const;
};

struct IterationInfo {
  double cost = 0;
  double lambda = 0;
  double step_norm = 0;
  int rejected_steps = 0;
  bool accepted = false;
};

struct EstimateResult {
  FlowFieldd flow;
  BasisCoefficients<double> coefficients;
  MotionBasisSet<double> bases;
  /// cost_trace[0] is the cost at the initial guess, then one entry per iteration.
  std::vector<double> cost_trace;
  std::vector<IterationInfo> iterations;
  int normal_rank = 0;  // numerical rank of the final Gauss-Newton matrix
  bool warm_started = false;
  bool pyramid_built = false;
  /// Mean centre correlation over all pyramid levels at the final flow (when built).
  double final_correlation = 0;
};

/// Largest source image for which the dense correlation pyramid is built.
inline constexpr int kMaxCorrelationPixels = 64 * 64;

/// Zero-mean intensity and central-difference gradient channels (K = 3).
FeatureMapd image_features(const Imaged& img);

/// Photometric cost: mean over pixels of (img1(p + F(p)) - img0(p))^2 with
/// sample positions clamped to the image.
double photometric_cost(const Imaged& img0, const Imaged& img1, const FlowFieldd& flow);

/// Correlation cost: minus the mean over pixels and levels of the bilinear
/// centre lookup.
double correlation_cost(const CorrelationPyramid<double>& pyr, const FlowFieldd& flow);

/// With intrinsics the six-basis set is used; without, the focal-free
/// eight-basis set with the principal point at the image centre.
EstimateResult estimate_rigid_flow(const Imaged& img0, const Imaged& img1, const InverseDepthMapd& depth,
                                   const std::optional<Intrinsicsd>& intr, const EstimatorConfig& cfg = {});

/// Same, with an explicit basis set.
EstimateResult estimate_rigid_flow(const Imaged& img0, const Imaged& img1, const MotionBasisSet<double>& bases,
                                   const EstimatorConfig& cfg = {});

std::string to_string(CostKind kind);
CostKind cost_kind_from_string(const std::string& s);

}  // namespace flowseek

#endif  // FLOWSEEK_ESTIMATOR_HPP
