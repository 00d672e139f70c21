// Core dense types shared by every flowseek module.
//
// All per-pixel planes are row-major Eigen arrays indexed (row i, column j),
// i.e. (y, x). Scalar-templated types default to double through the aliases
// at the bottom of this file.

#ifndef FLOWSEEK_TYPES_HPP
#define FLOWSEEK_TYPES_HPP

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace flowseek {

// Error taxonomy. Every domain failure thrown by the library derives from
// flowseek::Error so callers (the CLI in particular) can separate them from
// usage mistakes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DimensionError : public Error {
 public:
  using Error::Error;
};
class ParameterError : public Error {
 public:
  using Error::Error;
};
class EmptyProblemError : public Error {
 public:
  using Error::Error;
};
class FormatError : public Error {
 public:
  using Error::Error;
};
class RangeError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};
class NumericalError : public Error {
 public:
  using Error::Error;
};

template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct CameraIntrinsics {
  Scalar fx{1};
  Scalar fy{1};
  Scalar cx{0};
  Scalar cy{0};

  void validate() const {
    if (!(fx > Scalar(0)) || !(fy > Scalar(0)) || !std::isfinite(double(fx)) ||
        !std::isfinite(double(fy))) {
      throw ParameterError("focal lengths must be finite and positive");
    }
    if (!std::isfinite(double(cx)) || !std::isfinite(double(cy))) {
      throw ParameterError("principal point must be finite");
    }
  }

  /// Principal point at the centre of a width x height image.
  static CameraIntrinsics centered(Scalar f, int width, int height) {
    return {f, f, Scalar(width - 1) / Scalar(2), Scalar(height - 1) / Scalar(2)};
  }
};

/// Dense 2-channel displacement field (u, v) in pixels with a validity mask.
template <typename Scalar>
struct FlowField {
  Plane<Scalar> u;
  Plane<Scalar> v;
  Mask valid;

  FlowField() = default;
  FlowField(int height, int width)
      : u(Plane<Scalar>::Zero(height, width)),
        v(Plane<Scalar>::Zero(height, width)),
        valid(Mask::Constant(height, width, true)) {}

  static FlowField Zero(int height, int width) { return FlowField(height, width); }

  int height() const { return static_cast<int>(u.rows()); }
  int width() const { return static_cast<int>(u.cols()); }
  Eigen::Index pixels() const { return u.size(); }
  Eigen::Index valid_count() const { return valid.count(); }

  bool same_shape(int height, int width) const {
    return this->height() == height && this->width() == width;
  }

  template <typename Other>
  FlowField<Other> cast() const {
    FlowField<Other> out;
    out.u = u.template cast<Other>();
    out.v = v.template cast<Other>();
    out.valid = valid;
    return out;
  }
};

template <typename Scalar>
struct InverseDepthMap {
  Plane<Scalar> d0;

  InverseDepthMap() = default;
  explicit InverseDepthMap(Plane<Scalar> values) : d0(std::move(values)) {}

  static InverseDepthMap Constant(int height, int width, Scalar value) {
    return InverseDepthMap(Plane<Scalar>::Constant(height, width, value));
  }

  int height() const { return static_cast<int>(d0.rows()); }
  int width() const { return static_cast<int>(d0.cols()); }

  void validate() const {
    if (d0.size() == 0) throw DimensionError("inverse depth map is empty");
    if (!d0.allFinite()) throw ParameterError("inverse depth contains non-finite values");
    if ((d0 < Scalar(0)).any()) throw ParameterError("inverse depth contains negative values");
  }
};

/// Rigid transform applied to scene points expressed in the first camera's
/// frame: X' = rotation * X + translation.
template <typename Scalar>
struct RigidMotion {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  RigidMotion() = default;
  RigidMotion(const Matrix3& r, const Vector3& t) : rotation(r), translation(t) { validate(); }

  static RigidMotion Identity() { return RigidMotion(); }

  /// Rotation given as an axis-angle vector (direction = axis, norm = angle).
  static RigidMotion FromAxisAngle(const Vector3& axis_angle, const Vector3& t) {
    const Scalar angle = axis_angle.norm();
    Matrix3 r = Matrix3::Identity();
    if (angle > Scalar(0)) r = Eigen::AngleAxis<Scalar>(angle, axis_angle / angle).toRotationMatrix();
    return RigidMotion(r, t);
  }

  void validate() const {
    if (!rotation.allFinite() || !translation.allFinite())
      throw ParameterError("rigid motion has non-finite entries");
    const Scalar orth = (rotation.transpose() * rotation - Matrix3::Identity()).cwiseAbs().maxCoeff();
    if (orth > Scalar(1e-10) || std::abs(rotation.determinant() - Scalar(1)) > Scalar(1e-10))
      throw ParameterError("rotation is not orthonormal with determinant +1");
  }
};

/// Instantaneous camera-frame velocity. Its six components are exactly the
/// coefficients of the six motion bases (Tx, Ty, Tz, Rx, Ry, Rz).
template <typename Scalar>
struct VelocityMotion {
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  using Vector6 = Eigen::Matrix<Scalar, 6, 1>;

  Vector3 linear = Vector3::Zero();
  Vector3 angular = Vector3::Zero();

  VelocityMotion() = default;
  VelocityMotion(const Vector3& lin, const Vector3& ang) : linear(lin), angular(ang) {
    if (!linear.allFinite() || !angular.allFinite())
      throw ParameterError("velocity has non-finite entries");
  }

  static VelocityMotion FromCoefficients(const Vector6& c) {
    return VelocityMotion(c.template head<3>(), c.template tail<3>());
  }

  Vector6 coefficients() const {
    Vector6 c;
    c << linear, angular;
    return c;
  }

  VelocityMotion scaled(Scalar s) const { return VelocityMotion(s * linear, s * angular); }
};

/// H x W x K feature map stored as an (H*W) x K row-major matrix, one row per pixel.
template <typename Scalar>
struct FeatureMap {
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  int height = 0;
  int width = 0;
  Storage data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int channels) : height(h), width(w), data(Storage::Zero(Eigen::Index(h) * w, channels)) {
    if (h < 1 || w < 1 || channels < 1) throw DimensionError("feature map dimensions must be positive");
  }

  static FeatureMap FromPlane(const Plane<Scalar>& p) {
    FeatureMap f(static_cast<int>(p.rows()), static_cast<int>(p.cols()), 1);
    f.data.col(0) = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(p.data(), p.size());
    return f;
  }

  int channels() const { return static_cast<int>(data.cols()); }
  Eigen::Index pixels() const { return data.rows(); }
  Scalar& operator()(int i, int j, int k) { return data(Eigen::Index(i) * width + j, k); }
  Scalar operator()(int i, int j, int k) const { return data(Eigen::Index(i) * width + j, k); }

  Plane<Scalar> channel(int k) const {
    Plane<Scalar> p(height, width);
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(p.data(), p.size()) = data.col(k);
    return p;
  }
};

using Intrinsicsd = CameraIntrinsics<double>;
using FlowFieldd = FlowField<double>;
using InverseDepthMapd = InverseDepthMap<double>;
using RigidMotiond = RigidMotion<double>;
using VelocityMotiond = VelocityMotion<double>;
using FeatureMapd = FeatureMap<double>;
using Imaged = Plane<double>;

}  // namespace flowseek

#endif  // FLOWSEEK_TYPES_HPP
