// Least-squares fitting of flow fields onto a motion basis span.

#ifndef FLOWSEEK_SUBSPACE_HPP
#define FLOWSEEK_SUBSPACE_HPP

#include <optional>
#include <vector>

#include "flowseek/bases.hpp"

namespace flowseek {

/// Relative singular value cutoff used to decide the effective rank.
inline constexpr double kRankTolerance = 1e-10;

template <typename Scalar>
struct BasisCoefficients {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector values;
  int effective_rank = 0;
  Scalar residual_rms{0};
  Vector singular_values;
  Eigen::Index used_pixels = 0;
  bool rank_zero = false;
};

template <typename Scalar>
struct SubspaceResidual {
  FlowField<Scalar> residual;
  Scalar rms{0};
  BasisCoefficients<Scalar> coefficients;
};

namespace detail {

template <typename Scalar>
void check_shapes(const FlowField<Scalar>& flow, const MotionBasisSet<Scalar>& bases,
                  const Plane<Scalar>* weights) {
  if (bases.size() == 0) throw DimensionError("basis set is empty");
  if (!flow.same_shape(bases.height(), bases.width()))
    throw DimensionError("flow and basis dimensions differ");
  if (weights && (weights->rows() != flow.height() || weights->cols() != flow.width()))
    throw DimensionError("weight map dimensions differ from flow");
  if (weights && ((*weights < Scalar(0)).any() || !weights->allFinite()))
    throw ParameterError("weights must be finite and nonnegative");
}

}  // namespace detail

/// Minimum-norm least-squares coefficients of `flow` in the span of `bases`,
/// over valid pixels with positive weight. u and v equations are stacked per
/// pixel in row-major pixel order. Weights default to the validity mask.
template <typename Scalar>
BasisCoefficients<Scalar> fit_coefficients(const FlowField<Scalar>& flow,
                                           const MotionBasisSet<Scalar>& bases,
                                           const Plane<Scalar>* weights = nullptr) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  detail::check_shapes(flow, bases, weights);

  const int h = flow.height();
  const int w = flow.width();
  const int n = bases.size();

  std::vector<Eigen::Index> used;
  used.reserve(flow.pixels());
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (flow.valid(i, j) && (!weights || (*weights)(i, j) > Scalar(0)))
        used.push_back(Eigen::Index(i) * w + j);
  if (used.empty()) throw EmptyProblemError("no valid pixels to fit");

  const Eigen::Index m = 2 * Eigen::Index(used.size());
  Matrix A(m, n);
  Vector b(m);
  for (std::size_t r = 0; r < used.size(); ++r) {
    const Eigen::Index p = used[r];
    const Scalar sw = weights ? std::sqrt(weights->data()[p]) : Scalar(1);
    for (int k = 0; k < n; ++k) {
      A(2 * r, k) = sw * bases[k].u.data()[p];
      A(2 * r + 1, k) = sw * bases[k].v.data()[p];
    }
    b(2 * r) = sw * flow.u.data()[p];
    b(2 * r + 1) = sw * flow.v.data()[p];
  }

  // Reduce to a square triangular system first; its singular values equal
  // those of A.
  Matrix core;
  Vector rhs;
  if (m >= n) {
    Eigen::HouseholderQR<Matrix> qr(A);
    core = qr.matrixQR().topRows(n).template triangularView<Eigen::Upper>();
    rhs = (qr.householderQ().transpose() * b).head(n);
  } else {
    core = A;
    rhs = b;
  }
  Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();

  BasisCoefficients<Scalar> out;
  out.values = Vector::Zero(n);
  out.singular_values = sigma;
  out.used_pixels = Eigen::Index(used.size());
  const Scalar smax = sigma.size() ? sigma(0) : Scalar(0);
  if (smax > Scalar(0)) {
    const Vector proj = svd.matrixU().transpose() * rhs;
    for (Eigen::Index k = 0; k < sigma.size(); ++k) {
      if (sigma(k) > Scalar(kRankTolerance) * smax) {
        out.values += svd.matrixV().col(k) * (proj(k) / sigma(k));
        ++out.effective_rank;
      }
    }
  } else {
    out.rank_zero = true;
  }

  Scalar ss{0};
  for (const Eigen::Index p : used) {
    Scalar ru = flow.u.data()[p];
    Scalar rv = flow.v.data()[p];
    for (int k = 0; k < n; ++k) {
      ru -= out.values(k) * bases[k].u.data()[p];
      rv -= out.values(k) * bases[k].v.data()[p];
    }
    ss += ru * ru + rv * rv;
  }
  out.residual_rms = std::sqrt(ss / Scalar(used.size()));
  return out;
}

template <typename Scalar, typename Derived>
FlowField<Scalar> reconstruct(const MotionBasisSet<Scalar>& bases, const Eigen::MatrixBase<Derived>& values) {
  if (values.size() != bases.size()) throw DimensionError("coefficient count differs from basis count");
  FlowField<Scalar> flow(bases.height(), bases.width());
  for (int k = 0; k < bases.size(); ++k) {
    flow.u += values(k) * bases[k].u;
    flow.v += values(k) * bases[k].v;
  }
  return flow;
}

template <typename Scalar>
FlowField<Scalar> reconstruct(const MotionBasisSet<Scalar>& bases, const BasisCoefficients<Scalar>& c) {
  return reconstruct(bases, c.values);
}

/// flow - reconstruct(fit(flow)), with RMS over the pixels used by the fit.
template <typename Scalar>
SubspaceResidual<Scalar> subspace_residual(const FlowField<Scalar>& flow, const MotionBasisSet<Scalar>& bases,
                                           const Plane<Scalar>* weights = nullptr) {
  SubspaceResidual<Scalar> out;
  out.coefficients = fit_coefficients(flow, bases, weights);
  const auto fitted = reconstruct(bases, out.coefficients);
  out.residual.u = flow.u - fitted.u;
  out.residual.v = flow.v - fitted.v;
  out.residual.valid = flow.valid;
  if (weights) out.residual.valid = out.residual.valid && (*weights > Scalar(0));
  out.rms = out.coefficients.residual_rms;
  return out;
}

}  // namespace flowseek

#endif  // FLOWSEEK_SUBSPACE_HPP
