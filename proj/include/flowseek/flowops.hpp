// Convex upsampling, bilinear warping and flow evaluation metrics.

#ifndef FLOWSEEK_FLOWOPS_HPP
#define FLOWSEEK_FLOWOPS_HPP

#include <algorithm>
#include <cmath>
#include <map>

#include "flowseek/parallel.hpp"
#include "flowseek/types.hpp"

namespace flowseek {

/// Nine logits per fine pixel over the clamped 3x3 coarse neighbourhood,
/// ordered (dy, dx) from -1 to 1 with dx fastest.
template <typename Scalar>
struct ConvexWeights {
  int height = 0;  // fine rows
  int width = 0;   // fine columns
  Eigen::Matrix<Scalar, Eigen::Dynamic, 9, Eigen::RowMajor> logits;

  static ConvexWeights Zero(int h, int w) {
    ConvexWeights cw;
    cw.height = h;
    cw.width = w;
    cw.logits.setZero(Eigen::Index(h) * w, 9);
    return cw;
  }

  /// Softmax of the logits at fine pixel (i, j).
  Eigen::Matrix<Scalar, 9, 1> weights(int i, int j) const {
    const Eigen::Matrix<Scalar, 9, 1> l = logits.row(Eigen::Index(i) * width + j).transpose();
    const Eigen::Matrix<Scalar, 9, 1> e = (l.array() - l.maxCoeff()).exp().matrix();
    return e / e.sum();
  }
};

/// Fine flow = factor * convex combination of the clamped 3x3 coarse
/// neighbourhood. Input is in coarse-pixel units, output in fine-pixel units.
template <typename Scalar>
FlowField<Scalar> convex_upsample(const FlowField<Scalar>& coarse, const ConvexWeights<Scalar>& w, int factor = 8) {
  if (factor < 1) throw ParameterError("upsampling factor must be at least 1");
  const int ch = coarse.height();
  const int cw = coarse.width();
  if (w.height != ch * factor || w.width != cw * factor || w.logits.rows() != Eigen::Index(w.height) * w.width)
    throw DimensionError("convex weights must have factor x coarse dimensions");
  if (!w.logits.allFinite()) throw ParameterError("convex logits must be finite");

  FlowField<Scalar> fine(w.height, w.width);
  parallel_rows(w.height, [&](int i) {
    const int ci = i / factor;
    for (int j = 0; j < w.width; ++j) {
      const int cj = j / factor;
      const auto wt = w.weights(i, j);
      // Accumulate offsets from the centre value so a constant neighbourhood
      // reproduces its value exactly even though the weights only sum to 1
      // up to rounding.
      const Scalar u0 = coarse.u(ci, cj), v0 = coarse.v(ci, cj);
      Scalar su{0}, sv{0};
      int k = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(ci + dy, 0, ch - 1);
        for (int dx = -1; dx <= 1; ++dx, ++k) {
          const int xx = std::clamp(cj + dx, 0, cw - 1);
          su += wt[k] * (coarse.u(yy, xx) - u0);
          sv += wt[k] * (coarse.v(yy, xx) - v0);
        }
      }
      fine.u(i, j) = Scalar(factor) * (u0 + su);
      fine.v(i, j) = Scalar(factor) * (v0 + sv);
      fine.valid(i, j) = coarse.valid(ci, cj);
    }
  });
  return fine;
}

template <typename Scalar>
struct WarpResult {
  FeatureMap<Scalar> image;
  Mask valid;
};

/// Bilinear value of one channel at continuous (x, y) assumed inside
/// [0, W-1] x [0, H-1].
template <typename Scalar>
Scalar bilinear_at(const FeatureMap<Scalar>& img, int k, Scalar x, Scalar y) {
  const int x0 = std::min(static_cast<int>(std::floor(x)), img.width - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const Scalar ax = x - Scalar(x0);
  const Scalar ay = y - Scalar(y0);
  return (Scalar(1) - ay) * ((Scalar(1) - ax) * img(y0, x0, k) + ax * img(y0, x1, k)) +
         ay * ((Scalar(1) - ax) * img(y1, x0, k) + ax * img(y1, x1, k));
}

/// out(p) = img(p + flow(p)). Samples whose position leaves the image (or
/// whose flow is invalid) are zero and marked invalid.
template <typename Scalar>
WarpResult<Scalar> bilinear_warp(const FeatureMap<Scalar>& img, const FlowField<Scalar>& flow) {
  if (!flow.same_shape(img.height, img.width)) throw DimensionError("image and flow dimensions differ");
  WarpResult<Scalar> out{FeatureMap<Scalar>(img.height, img.width, img.channels()),
                         Mask::Constant(img.height, img.width, false)};
  parallel_rows(img.height, [&](int i) {
    for (int j = 0; j < img.width; ++j) {
      if (!flow.valid(i, j)) continue;
      const Scalar x = Scalar(j) + flow.u(i, j);
      const Scalar y = Scalar(i) + flow.v(i, j);
      if (!(x >= Scalar(0) && y >= Scalar(0) && x <= Scalar(img.width - 1) && y <= Scalar(img.height - 1)))
        continue;
      out.valid(i, j) = true;
      for (int k = 0; k < img.channels(); ++k) out.image(i, j, k) = bilinear_at(img, k, x, y);
    }
  });
  return out;
}

enum class FlMode { and_mode, or_mode };

struct FlowMetrics {
  double epe = 0;
  std::map<int, double> npx;  // threshold (px) -> % of valid pixels above it
  double fl_all = 0;          // %
  FlMode fl_mode = FlMode::and_mode;
  long long valid_pixels = 0;
};

/// True when the endpoint error counts as a Fl outlier: error above 3 px and
/// above 5% of the ground-truth magnitude (AND mode), or either (OR mode).
inline bool fl_outlier(double err, double gt_mag, FlMode mode) {
  const bool abs_bad = err > 3.0;
  const bool rel_bad = err > 0.05 * gt_mag;
  return mode == FlMode::and_mode ? (abs_bad && rel_bad) : (abs_bad || rel_bad);
}

template <typename Scalar>
FlowMetrics compute_metrics(const FlowField<Scalar>& est, const FlowField<Scalar>& gt, const Mask& valid,
                            FlMode mode = FlMode::and_mode) {
  if (!est.same_shape(gt.height(), gt.width()) || valid.rows() != gt.height() || valid.cols() != gt.width())
    throw DimensionError("metric inputs differ in shape");
  FlowMetrics m;
  m.fl_mode = mode;
  long long n1 = 0, n3 = 0, n5 = 0, nfl = 0, count = 0;
  double sum = 0;
  for (int i = 0; i < gt.height(); ++i) {
    for (int j = 0; j < gt.width(); ++j) {
      if (!valid(i, j)) continue;
      const double du = double(est.u(i, j)) - double(gt.u(i, j));
      const double dv = double(est.v(i, j)) - double(gt.v(i, j));
      const double err = std::hypot(du, dv);
      const double mag = std::hypot(double(gt.u(i, j)), double(gt.v(i, j)));
      sum += err;
      n1 += err > 1.0;
      n3 += err > 3.0;
      n5 += err > 5.0;
      nfl += fl_outlier(err, mag, mode);
      ++count;
    }
  }
  if (count == 0) throw EmptyProblemError("no valid pixels to evaluate");
  m.valid_pixels = count;
  m.epe = sum / double(count);
  m.npx = {{1, 100.0 * double(n1) / double(count)},
           {3, 100.0 * double(n3) / double(count)},
           {5, 100.0 * double(n5) / double(count)}};
  m.fl_all = 100.0 * double(nfl) / double(count);
  return m;
}

template <typename Scalar>
FlowMetrics compute_metrics(const FlowField<Scalar>& est, const FlowField<Scalar>& gt,
                            FlMode mode = FlMode::and_mode) {
  return compute_metrics(est, gt, gt.valid, mode);
}

}  // namespace flowseek

#endif  // FLOWSEEK_FLOWOPS_HPP
