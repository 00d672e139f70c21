// Deterministic synthetic rigid scenes with analytic inverse depth, ground-truth
// flow with its validity mask, and a procedurally textured image pair.

#ifndef FLOWSEEK_SYNTH_HPP
#define FLOWSEEK_SYNTH_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "flowseek/types.hpp"

namespace flowseek {

/// Largest inverse depth a generated scene may contain.
inline constexpr double kMaxInverseDepth = 100.0;
/// 16-bit PNG inverse depth stores round(d0 * scale).
inline constexpr double kInverseDepthPngScale = 600.0;

enum class DepthKind { fronto_plane, tilted_plane, sphere, smooth_noise };

struct DepthParams {
  double depth = 4.0;  // plane / background depth along the optical axis
  // tilted_plane: d0 = (1 + tilt_x * x/fx + tilt_y * y/fy) / depth, offsets from the principal point
  double tilt_x = 0.0;
  double tilt_y = 0.0;
  // sphere in front of the background plane
  double sphere_x = 0.0;
  double sphere_y = 0.0;
  double sphere_z = 2.5;
  double sphere_radius = 0.8;
  // smooth_noise: depth * (1 + amplitude * (2 n - 1)), n value noise in [0, 1]
  double noise_amplitude = 0.3;
  double noise_scale = 16.0;
};

using SceneMotion = std::variant<RigidMotiond, VelocityMotiond>;

struct SceneSpec {
  DepthKind depth_kind = DepthKind::fronto_plane;
  DepthParams depth;
  Intrinsicsd intrinsics{64, 64, 31.5, 31.5};
  SceneMotion motion = RigidMotiond::Identity();
  std::uint64_t texture_seed = 1;
  int width = 64;
  int height = 64;
};

struct Scene {
  InverseDepthMapd depth;
  FlowFieldd gt;  // gt.valid is the scene validity mask
  Imaged image0;
  Imaged image1;
};

/// Two-octave value noise in [0, 1] (lattice spacings 8 and 4 px, weights 2/3
/// and 1/3) with C1 smoothstep interpolation.
Imaged value_noise_texture(int height, int width, std::uint64_t seed);

/// Single-octave value noise in [0, 1] at the given lattice spacing.
double value_noise(double x, double y, double spacing, std::uint64_t seed);

InverseDepthMapd scene_inverse_depth(const SceneSpec& spec);

/// image1 is the texture; image0(p) = image1(p + gt(p)) by bilinear backward
/// warping, so brightness constancy holds exactly on valid pixels. Pixels
/// whose correspondence leaves the image keep the texture value and are
/// masked out.
Scene generate_scene(const SceneSpec& spec);

/// Writes image0/1 (8-bit PNG), gt (.flo and KITTI PNG) and inverse depth
/// (16-bit PNG) per scene plus manifest.json; returns the manifest.
nlohmann::json emit_dataset(const std::vector<SceneSpec>& specs, const std::string& out_dir);

/// Ten 64x64 velocity scenes with max flow <= 2 px, fx == fy and centred
/// principal point.
std::vector<SceneSpec> standard_suite();

nlohmann::json to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const nlohmann::json& j);
std::vector<SceneSpec> scene_list_from_json(const nlohmann::json& j);

std::string to_string(DepthKind kind);
DepthKind depth_kind_from_string(const std::string& s);

/// 8-bit quantisation used when images are written to PNG.
std::vector<std::uint16_t> quantize_image8(const Imaged& img);
Imaged image_from_png(const std::string& path);
InverseDepthMapd inverse_depth_from_png(const std::string& path, double scale = kInverseDepthPngScale);

}  // namespace flowseek

#endif  // FLOWSEEK_SYNTH_HPP
