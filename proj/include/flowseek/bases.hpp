// Rigid-motion flow bases built from an inverse-depth map.
//
// Six-basis set (ordering Tx, Ty, Tz, Rx, Ry, Rz):
//   Tx = [fx D0; 0]                Rx = [UV/fy; fy + V^2/fy]
//   Ty = [0; fy D0]                Ry = [fx + U^2/fx; UV/fx]
//   Tz = [-U D0; -V D0]            Rz = [fx V/fy; -fy U/fx]
//
// Focal-free eight-basis set (ordering Tx, Ty, Tz, R1x, R2x, R1y, R2y, Rz),
// valid when fx == fy. Focal factors are absorbed into the coefficients:
//   Tx = [D0; 0]   Ty = [0; D0]   Tz = [-U D0; -V D0]
//   R1x = [0; 1]   R2x = [UV; V^2]   R1y = [1; 0]   R2y = [U^2; UV]
//   Rz = [V; -U]
// where U, V are pixel offsets from the principal point.

#ifndef FLOWSEEK_BASES_HPP
#define FLOWSEEK_BASES_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "flowseek/grid.hpp"

namespace flowseek {

enum class BasisKind { six, eight };

template <typename Scalar>
struct BasisField {
  Plane<Scalar> u;
  Plane<Scalar> v;

  Scalar squared_norm() const { return u.square().sum() + v.square().sum(); }
};

template <typename Scalar>
struct MotionBasisSet {
  BasisKind kind = BasisKind::six;
  std::vector<BasisField<Scalar>> fields;
  /// Set for the six-basis set; empty means focal-free.
  std::optional<CameraIntrinsics<Scalar>> intrinsics;
  Scalar cx{0};
  Scalar cy{0};
  /// Per-field factor applied by normalize_bases (1 for raw bases).
  std::vector<Scalar> scales;
  /// Fields that have zero norm and were left unscaled by normalize_bases.
  std::vector<bool> degenerate;

  int size() const { return static_cast<int>(fields.size()); }
  int height() const { return fields.empty() ? 0 : static_cast<int>(fields.front().u.rows()); }
  int width() const { return fields.empty() ? 0 : static_cast<int>(fields.front().u.cols()); }
  bool focal_free() const { return !intrinsics.has_value(); }

  const BasisField<Scalar>& operator[](int k) const { return fields[k]; }
  BasisField<Scalar>& operator[](int k) { return fields[k]; }
};

inline const std::vector<std::string>& basis_names(BasisKind kind) {
  static const std::vector<std::string> six{"Tx", "Ty", "Tz", "Rx", "Ry", "Rz"};
  static const std::vector<std::string> eight{"Tx", "Ty", "Tz", "R1x", "R2x", "R1y", "R2y", "Rz"};
  return kind == BasisKind::six ? six : eight;
}

template <typename Scalar>
MotionBasisSet<Scalar> build_six_bases(const InverseDepthMap<Scalar>& depth,
                                       const CameraIntrinsics<Scalar>& intr) {
  intr.validate();
  depth.validate();
  const auto g = make_normalized_grid(intr, depth.width(), depth.height());
  const auto& d = depth.d0;
  const auto& U = g.u_bar;
  const auto& V = g.v_bar;
  const Scalar fx = intr.fx;
  const Scalar fy = intr.fy;
  const Plane<Scalar> zero = Plane<Scalar>::Zero(d.rows(), d.cols());

  MotionBasisSet<Scalar> set;
  set.kind = BasisKind::six;
  set.intrinsics = intr;
  set.cx = intr.cx;
  set.cy = intr.cy;
  set.fields = {
      {fx * d, zero},
      {zero, fy * d},
      {-U * d, -V * d},
      {(U * V) / fy, fy + V.square() / fy},
      {fx + U.square() / fx, (U * V) / fx},
      {(fx / fy) * V, -(fy / fx) * U},
  };
  set.scales.assign(6, Scalar(1));
  set.degenerate.assign(6, false);
  return set;
}

template <typename Scalar>
MotionBasisSet<Scalar> build_eight_bases(const InverseDepthMap<Scalar>& depth, Scalar cx, Scalar cy) {
  depth.validate();
  const auto g = make_normalized_grid(cx, cy, depth.width(), depth.height());
  const auto& d = depth.d0;
  const auto& U = g.u_bar;
  const auto& V = g.v_bar;
  const Plane<Scalar> zero = Plane<Scalar>::Zero(d.rows(), d.cols());
  const Plane<Scalar> one = Plane<Scalar>::Ones(d.rows(), d.cols());

  MotionBasisSet<Scalar> set;
  set.kind = BasisKind::eight;
  set.cx = cx;
  set.cy = cy;
  set.fields = {
      {d, zero},
      {zero, d},
      {-U * d, -V * d},
      {zero, one},
      {U * V, V.square()},
      {one, zero},
      {U.square(), U * V},
      {V, -U},
  };
  set.scales.assign(8, Scalar(1));
  set.degenerate.assign(8, false);
  return set;
}

/// Scales every field to unit Frobenius norm. Zero fields are returned as-is
/// and flagged in `degenerate`.
template <typename Scalar>
MotionBasisSet<Scalar> normalize_bases(MotionBasisSet<Scalar> set) {
  set.scales.resize(set.fields.size(), Scalar(1));
  set.degenerate.resize(set.fields.size(), false);
  for (std::size_t k = 0; k < set.fields.size(); ++k) {
    const Scalar n = std::sqrt(set.fields[k].squared_norm());
    if (!(n > Scalar(0))) {
      set.degenerate[k] = true;
      continue;
    }
    set.fields[k].u /= n;
    set.fields[k].v /= n;
    set.scales[k] /= n;
  }
  return set;
}

}  // namespace flowseek

#endif  // FLOWSEEK_BASES_HPP
