// Shared helpers for the test binaries: seeded random generators for the
// domain types and independent scalar re-implementations used as oracles.

#ifndef FLOWSEEK_TESTS_SUPPORT_HPP
#define FLOWSEEK_TESTS_SUPPORT_HPP

#include <array>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "flowseek/types.hpp"

namespace flowseek::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline InverseDepthMapd random_depth(Rng& rng, int h, int w, double lo = 0.1, double hi = 1.0) {
  Plane<double> d(h, w);
  for (Eigen::Index n = 0; n < d.size(); ++n) d.data()[n] = uniform(rng, lo, hi);
  return InverseDepthMapd(d);
}

inline Intrinsicsd random_intrinsics(Rng& rng, int h, int w) {
  return {uniform(rng, 30, 120), uniform(rng, 30, 120), uniform(rng, 0.3, 0.7) * (w - 1),
          uniform(rng, 0.3, 0.7) * (h - 1)};
}

inline Eigen::Vector3d random_vec3(Rng& rng, double scale) {
  return {uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale)};
}

inline VelocityMotiond random_velocity(Rng& rng, double lin = 0.5, double ang = 0.05) {
  return VelocityMotiond(random_vec3(rng, lin), random_vec3(rng, ang));
}

inline FlowFieldd random_flow(Rng& rng, int h, int w, double lo, double hi) {
  FlowFieldd f(h, w);
  for (Eigen::Index n = 0; n < f.u.size(); ++n) {
    f.u.data()[n] = uniform(rng, lo, hi);
    f.v.data()[n] = uniform(rng, lo, hi);
  }
  return f;
}

/// Rodrigues' formula written out by hand, independent of Eigen::AngleAxis.
inline std::array<std::array<double, 3>, 3> rodrigues(double ax, double ay, double az) {
  const double th = std::sqrt(ax * ax + ay * ay + az * az);
  std::array<std::array<double, 3>, 3> r{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  if (th == 0) return r;
  const double kx = ax / th, ky = ay / th, kz = az / th;
  const double c = std::cos(th), s = std::sin(th), C = 1 - c;
  r = {{{c + kx * kx * C, kx * ky * C - kz * s, kx * kz * C + ky * s},
        {ky * kx * C + kz * s, c + ky * ky * C, ky * kz * C - kx * s},
        {kz * kx * C - ky * s, kz * ky * C + kx * s, c + kz * kz * C}}};
  return r;
}

/// Per-pixel project(transform(back-project(p))) using the depth Z = 1/d.
/// Returns false when the point does not land in front of the camera.
inline bool reproject_pixel(double d, double fx, double fy, double cx, double cy, const double R[3][3],
                            const double t[3], double x, double y, double& u, double& v) {
  const double Z = 1.0 / d;
  const double X = (x - cx) / fx * Z, Y = (y - cy) / fy * Z;
  const double Xp = R[0][0] * X + R[0][1] * Y + R[0][2] * Z + t[0];
  const double Yp = R[1][0] * X + R[1][1] * Y + R[1][2] * Z + t[1];
  const double Zp = R[2][0] * X + R[2][1] * Y + R[2][2] * Z + t[2];
  if (!(Zp > 0)) return false;
  u = fx * Xp / Zp + cx - x;
  v = fy * Yp / Zp + cy - y;
  return true;
}

/// The six basis formulas evaluated at one pixel, (u, v) per basis.
inline std::array<std::array<double, 2>, 6> six_bases_at(double d, double ub, double vb, double fx, double fy) {
  return {{{fx * d, 0.0},
           {0.0, fy * d},
           {-ub * d, -vb * d},
           {ub * vb / fy, fy + vb * vb / fy},
           {fx + ub * ub / fx, ub * vb / fx},
           {fx / fy * vb, -fy / fx * ub}}};
}

inline std::array<std::array<double, 2>, 8> eight_bases_at(double d, double ub, double vb) {
  return {{{d, 0.0},
           {0.0, d},
           {-ub * d, -vb * d},
           {0.0, 1.0},
           {ub * vb, vb * vb},
           {1.0, 0.0},
           {ub * ub, ub * vb},
           {vb, -ub}}};
}

/// Fresh empty directory under the system temp directory.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("flowseek_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace flowseek::test

#endif  // FLOWSEEK_TESTS_SUPPORT_HPP
