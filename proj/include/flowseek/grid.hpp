#ifndef FLOWSEEK_GRID_HPP
#define FLOWSEEK_GRID_HPP

#include "flowseek/types.hpp"

namespace flowseek {

/// Pixel coordinates relative to the principal point, in pixels (not divided
/// by focal length): u_bar(i, j) = j - cx, v_bar(i, j) = i - cy.
template <typename Scalar>
struct NormalizedGrid {
  Plane<Scalar> u_bar;
  Plane<Scalar> v_bar;

  int height() const { return static_cast<int>(u_bar.rows()); }
  int width() const { return static_cast<int>(u_bar.cols()); }
};

template <typename Scalar>
NormalizedGrid<Scalar> make_normalized_grid(Scalar cx, Scalar cy, int width, int height) {
  if (width < 1 || height < 1) throw DimensionError("grid dimensions must be at least 1x1");
  NormalizedGrid<Scalar> g;
  g.u_bar.resize(height, width);
  g.v_bar.resize(height, width);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      g.u_bar(i, j) = Scalar(j) - cx;
      g.v_bar(i, j) = Scalar(i) - cy;
    }
  }
  return g;
}

template <typename Scalar>
NormalizedGrid<Scalar> make_normalized_grid(const CameraIntrinsics<Scalar>& intr, int width, int height) {
  return make_normalized_grid(intr.cx, intr.cy, width, height);
}

}  // namespace flowseek

#endif  // FLOWSEEK_GRID_HPP
