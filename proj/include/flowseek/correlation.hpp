// All-pairs correlation volumes, strided average pooling and the radius-r
// pyramid lookup used by iterative refinement.

#ifndef FLOWSEEK_CORRELATION_HPP
#define FLOWSEEK_CORRELATION_HPP

#include <cmath>
#include <vector>

#include "flowseek/parallel.hpp"
#include "flowseek/types.hpp"

namespace flowseek {

/// 4D volume V(i, j, u, v) stored as a (src_h*src_w) x (tgt_h*tgt_w) matrix.
template <typename Scalar>
struct CorrelationVolume {
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  int src_height = 0;
  int src_width = 0;
  int tgt_height = 0;
  int tgt_width = 0;
  Storage data;

  Scalar operator()(int i, int j, int u, int v) const {
    return data(Eigen::Index(i) * src_width + j, Eigen::Index(u) * tgt_width + v);
  }
};

template <typename Scalar>
struct CorrelationPyramid {
  std::vector<int> strides;
  std::vector<CorrelationVolume<Scalar>> levels;

  int size() const { return static_cast<int>(levels.size()); }
};

/// Per-pixel lookup samples, one row per source pixel. Columns are grouped by
/// level, and within a level ordered by (dy, dx) from -r to r, dx fastest.
template <typename Scalar>
struct LookupPatch {
  int radius = 0;
  int levels = 0;
  int height = 0;
  int width = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> samples;

  int per_level() const { return (2 * radius + 1) * (2 * radius + 1); }
  Scalar at(int i, int j, int level, int dy, int dx) const {
    const int side = 2 * radius + 1;
    return samples(Eigen::Index(i) * width + j, level * per_level() + (dy + radius) * side + (dx + radius));
  }
};

inline const std::vector<int>& default_strides() {
  static const std::vector<int> s{1, 2, 4, 8};
  return s;
}

/// V(ijuv) = sum_k f0(i,j,k) f1(u,v,k), accumulated in channel order.
/// With `scale_by_sqrt_channels` the result is divided by sqrt(K).
template <typename Scalar>
CorrelationVolume<Scalar> correlate_all_pairs(const FeatureMap<Scalar>& f0, const FeatureMap<Scalar>& f1,
                                              bool scale_by_sqrt_channels = false) {
  if (f0.channels() != f1.channels()) throw DimensionError("feature channel counts differ");
  CorrelationVolume<Scalar> vol;
  vol.src_height = f0.height;
  vol.src_width = f0.width;
  vol.tgt_height = f1.height;
  vol.tgt_width = f1.width;
  vol.data.resize(f0.pixels(), f1.pixels());
  const int channels = f0.channels();
  const Scalar norm = scale_by_sqrt_channels ? Scalar(1) / std::sqrt(Scalar(channels)) : Scalar(1);

  parallel_rows(static_cast<int>(f0.pixels()), [&](int p) {
    auto row = vol.data.row(p);
    row.setZero();
    for (int k = 0; k < channels; ++k) row.array() += f0.data(p, k) * f1.data.col(k).transpose().array();
    if (scale_by_sqrt_channels) row *= norm;
  });
  return vol;
}

/// Non-overlapping s x s means; partial windows at the border average only
/// their in-bounds pixels. Output is ceil(H/s) x ceil(W/s).
template <typename Scalar>
FeatureMap<Scalar> avg_pool(const FeatureMap<Scalar>& f, int stride) {
  if (stride < 1) throw ParameterError("pooling stride must be at least 1");
  if (stride == 1) return f;
  const int oh = (f.height + stride - 1) / stride;
  const int ow = (f.width + stride - 1) / stride;
  FeatureMap<Scalar> out(oh, ow, f.channels());
  parallel_rows(oh, [&](int oi) {
    for (int oj = 0; oj < ow; ++oj) {
      const int i0 = oi * stride, i1 = std::min(f.height, i0 + stride);
      const int j0 = oj * stride, j1 = std::min(f.width, j0 + stride);
      auto dst = out.data.row(Eigen::Index(oi) * ow + oj);
      for (int i = i0; i < i1; ++i)
        for (int j = j0; j < j1; ++j) dst += f.data.row(Eigen::Index(i) * f.width + j);
      dst /= Scalar((i1 - i0) * (j1 - j0));
    }
  });
  return out;
}

/// Level s correlates f0 against avg_pool(f1, s).
template <typename Scalar>
CorrelationPyramid<Scalar> build_pyramid(const FeatureMap<Scalar>& f0, const FeatureMap<Scalar>& f1,
                                         const std::vector<int>& strides = default_strides(),
                                         bool scale_by_sqrt_channels = false) {
  if (strides.empty()) throw ParameterError("pyramid needs at least one stride");
  if (strides.front() != 1) throw ParameterError("first pyramid stride must be 1");
  for (std::size_t k = 1; k < strides.size(); ++k)
    if (strides[k] <= strides[k - 1]) throw ParameterError("pyramid strides must be strictly ascending");
  CorrelationPyramid<Scalar> pyr;
  pyr.strides = strides;
  for (const int s : strides) pyr.levels.push_back(correlate_all_pairs(f0, avg_pool(f1, s), scale_by_sqrt_channels));
  return pyr;
}

/// Bilinear sample of V(i, j, ., .) at target position (x, y); taps outside
/// the target grid contribute zero.
template <typename Scalar>
Scalar sample_volume(const CorrelationVolume<Scalar>& vol, int i, int j, Scalar x, Scalar y) {
  const Scalar fx = std::floor(x);
  const Scalar fy = std::floor(y);
  // Far outside: avoid integer overflow in the casts below.
  if (!(fx > Scalar(-2)) || !(fy > Scalar(-2)) || fx > Scalar(vol.tgt_width) || fy > Scalar(vol.tgt_height))
    return Scalar(0);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const Scalar ax = x - fx;
  const Scalar ay = y - fy;
  const auto row = vol.data.row(Eigen::Index(i) * vol.src_width + j);
  auto tap = [&](int yy, int xx) -> Scalar {
    if (xx < 0 || yy < 0 || xx >= vol.tgt_width || yy >= vol.tgt_height) return Scalar(0);
    return row(Eigen::Index(yy) * vol.tgt_width + xx);
  };
  return (Scalar(1) - ay) * ((Scalar(1) - ax) * tap(y0, x0) + ax * tap(y0, x0 + 1)) +
         ay * ((Scalar(1) - ax) * tap(y0 + 1, x0) + ax * tap(y0 + 1, x0 + 1));
}

/// For source pixel (i, j) and level stride s, the lookup centre is
/// ((j + u) / s, (i + v) / s); samples are taken at integer offsets in
/// [-r, r]^2 around it.
template <typename Scalar>
LookupPatch<Scalar> lookup(const CorrelationPyramid<Scalar>& pyr, const FlowField<Scalar>& flow, int radius) {
  if (radius < 0) throw ParameterError("lookup radius must be nonnegative");
  if (pyr.levels.empty()) throw ParameterError("empty correlation pyramid");
  const auto& base = pyr.levels.front();
  if (!flow.same_shape(base.src_height, base.src_width))
    throw DimensionError("flow dimensions differ from the pyramid source");

  LookupPatch<Scalar> out;
  out.radius = radius;
  out.levels = pyr.size();
  out.height = flow.height();
  out.width = flow.width();
  const int side = 2 * radius + 1;
  out.samples.resize(flow.pixels(), Eigen::Index(out.levels) * side * side);

  parallel_rows(out.height, [&](int i) {
    for (int j = 0; j < out.width; ++j) {
      const Eigen::Index p = Eigen::Index(i) * out.width + j;
      Eigen::Index col = 0;
      for (int l = 0; l < out.levels; ++l) {
        const Scalar s = Scalar(pyr.strides[l]);
        const Scalar cx = (Scalar(j) + flow.u(i, j)) / s;
        const Scalar cy = (Scalar(i) + flow.v(i, j)) / s;
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx)
            out.samples(p, col++) = sample_volume(pyr.levels[l], i, j, cx + Scalar(dx), cy + Scalar(dy));
      }
    }
  });
  return out;
}

}  // namespace flowseek

#endif  // FLOWSEEK_CORRELATION_HPP
