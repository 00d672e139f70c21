#include "flowseek/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "flowseek/flow_io.hpp"
#include "flowseek/flowops.hpp"
#include "flowseek/geometry.hpp"
#include "flowseek/png.hpp"

namespace flowseek {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(iy) * 0x9E3779B97F4A7C15ull));
  return double(h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterError("degenerate scene: " + what);
}

Eigen::Vector3d vec3(const nlohmann::json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw ParameterError(std::string("expected 3-vector for ") + key);
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

nlohmann::json vec_json(const Eigen::Vector3d& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

std::string scene_prefix(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%03zu", index);
  return buf;
}

}  // namespace

double value_noise(double x, double y, double spacing, std::uint64_t seed) {
  const double gx = x / spacing;
  const double gy = y / spacing;
  const double fx = std::floor(gx);
  const double fy = std::floor(gy);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = smoothstep(gx - fx);
  const double ty = smoothstep(gy - fy);
  const double v00 = lattice_value(ix, iy, seed);
  const double v10 = lattice_value(ix + 1, iy, seed);
  const double v01 = lattice_value(ix, iy + 1, seed);
  const double v11 = lattice_value(ix + 1, iy + 1, seed);
  return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
}

Imaged value_noise_texture(int height, int width, std::uint64_t seed) {
  Imaged img(height, width);
  const std::uint64_t seed_fine = splitmix64(seed ^ 0xA5A5A5A5u);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j)
      img(i, j) = (2.0 / 3.0) * value_noise(j, i, 8.0, seed) + (1.0 / 3.0) * value_noise(j, i, 4.0, seed_fine);
  return img;
}

InverseDepthMapd scene_inverse_depth(const SceneSpec& spec) {
  const auto& p = spec.depth;
  const auto& K = spec.intrinsics;
  K.validate();
  if (spec.width < 8 || spec.height < 8) throw DimensionError("scenes must be at least 8x8");
  require(p.depth > 0 && std::isfinite(p.depth), "plane depth must be positive");

  Plane<double> d(spec.height, spec.width);
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      const double xn = (j - K.cx) / K.fx;
      const double yn = (i - K.cy) / K.fy;
      switch (spec.depth_kind) {
        case DepthKind::fronto_plane:
          d(i, j) = 1.0 / p.depth;
          break;
        case DepthKind::tilted_plane:
          d(i, j) = (1.0 + p.tilt_x * xn + p.tilt_y * yn) / p.depth;
          break;
        case DepthKind::sphere: {
          const Eigen::Vector3d ray(xn, yn, 1.0);
          const Eigen::Vector3d c(p.sphere_x, p.sphere_y, p.sphere_z);
          const double a = ray.squaredNorm();
          const double b = ray.dot(c);
          const double disc = b * b - a * (c.squaredNorm() - p.sphere_radius * p.sphere_radius);
          double z = p.depth;
          if (disc >= 0) {
            const double t = (b - std::sqrt(disc)) / a;
            if (t > 0 && t < z) z = t;
          }
          d(i, j) = 1.0 / z;
          break;
        }
        case DepthKind::smooth_noise: {
          const double n = value_noise(j, i, p.noise_scale, spec.texture_seed ^ 0x5EEDull);
          d(i, j) = 1.0 / (p.depth * (1.0 + p.noise_amplitude * (2.0 * n - 1.0)));
          break;
        }
      }
    }
  }
  if (spec.depth_kind == DepthKind::sphere)
    require(p.sphere_radius > 0 && p.sphere_z - p.sphere_radius > 0, "sphere must lie in front of the camera");
  if (spec.depth_kind == DepthKind::smooth_noise)
    require(p.noise_amplitude >= 0 && p.noise_amplitude < 1 && p.noise_scale > 0, "noise amplitude must be in [0, 1)");
  require(d.allFinite() && (d > 0.0).all(), "inverse depth must be positive everywhere");
  require((d <= kMaxInverseDepth).all(), "inverse depth exceeds the maximum of 100");
  return InverseDepthMapd(std::move(d));
}

Scene generate_scene(const SceneSpec& spec) {
  Scene s;
  s.depth = scene_inverse_depth(spec);
  s.gt = std::visit(
      [&](const auto& m) -> FlowFieldd {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, RigidMotiond>)
          return reprojection_flow(s.depth, spec.intrinsics, m);
        else
          return instantaneous_flow(s.depth, spec.intrinsics, m);
      },
      spec.motion);

  s.image1 = value_noise_texture(spec.height, spec.width, spec.texture_seed);
  const auto warped = bilinear_warp(FeatureMapd::FromPlane(s.image1), s.gt);
  s.image0 = s.image1;
  for (int i = 0; i < spec.height; ++i)
    for (int j = 0; j < spec.width; ++j)
      if (warped.valid(i, j)) s.image0(i, j) = warped.image(i, j, 0);
  s.gt.valid = s.gt.valid && warped.valid;
  for (int i = 0; i < spec.height; ++i)
    for (int j = 0; j < spec.width; ++j)
      if (!s.gt.valid(i, j)) s.gt.u(i, j) = s.gt.v(i, j) = 0.0;
  return s;
}

std::vector<std::uint16_t> quantize_image8(const Imaged& img) {
  std::vector<std::uint16_t> out(img.size());
  for (Eigen::Index n = 0; n < img.size(); ++n)
    out[n] = static_cast<std::uint16_t>(std::lround(std::clamp(img.data()[n], 0.0, 1.0) * 255.0));
  return out;
}

Imaged image_from_png(const std::string& path) {
  const RawImage raw = read_png(path);
  const double maxv = raw.bit_depth == 16 ? 65535.0 : 255.0;
  Imaged img(raw.height, raw.width);
  for (int i = 0; i < raw.height; ++i) {
    for (int j = 0; j < raw.width; ++j) {
      if (raw.channels == 1) {
        img(i, j) = raw.at(i, j, 0) / maxv;
      } else {
        img(i, j) = (0.299 * raw.at(i, j, 0) + 0.587 * raw.at(i, j, 1) + 0.114 * raw.at(i, j, 2)) / maxv;
      }
    }
  }
  return img;
}

InverseDepthMapd inverse_depth_from_png(const std::string& path, double scale) {
  if (!(scale > 0)) throw ParameterError("inverse depth scale must be positive");
  const RawImage raw = read_png(path);
  if (raw.channels != 1) throw FormatError(path + ": inverse depth PNG must be single-channel");
  Plane<double> d(raw.height, raw.width);
  for (int i = 0; i < raw.height; ++i)
    for (int j = 0; j < raw.width; ++j) d(i, j) = raw.at(i, j, 0) / scale;
  return InverseDepthMapd(std::move(d));
}

nlohmann::json emit_dataset(const std::vector<SceneSpec>& specs, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());

  nlohmann::json manifest;
  manifest["count"] = specs.size();
  manifest["inverse_depth_scale"] = kInverseDepthPngScale;
  manifest["scenes"] = nlohmann::json::array();
  for (std::size_t n = 0; n < specs.size(); ++n) {
    const Scene s = generate_scene(specs[n]);
    const std::string prefix = scene_prefix(n);
    const nlohmann::json files = {{"image0", prefix + "_image0.png"},
                                  {"image1", prefix + "_image1.png"},
                                  {"flow_flo", prefix + "_flow.flo"},
                                  {"flow_kitti", prefix + "_flow_kitti.png"},
                                  {"inverse_depth", prefix + "_invdepth.png"}};
    auto path = [&](const char* key) { return (fs::path(out_dir) / files[key].get<std::string>()).string(); };

    RawImage gray{specs[n].width, specs[n].height, 1, 8, {}};
    gray.samples = quantize_image8(s.image0);
    write_png(path("image0"), gray);
    gray.samples = quantize_image8(s.image1);
    write_png(path("image1"), gray);
    write_flo(path("flow_flo"), s.gt);
    write_kitti_png(path("flow_kitti"), s.gt);

    RawImage depth{specs[n].width, specs[n].height, 1, 16, {}};
    depth.samples.resize(s.depth.d0.size());
    for (Eigen::Index k = 0; k < s.depth.d0.size(); ++k)
      depth.samples[k] = static_cast<std::uint16_t>(
          std::clamp(std::lround(s.depth.d0.data()[k] * kInverseDepthPngScale), 0L, 65535L));
    write_png(path("inverse_depth"), depth);

    manifest["scenes"].push_back({{"index", n},
                                  {"spec", to_json(specs[n])},
                                  {"texture_seed", specs[n].texture_seed},
                                  {"valid_pixels", s.gt.valid_count()},
                                  {"files", files}});
  }
  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot open for writing: " + manifest_path);
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("failed writing: " + manifest_path);
  return manifest;
}

std::vector<SceneSpec> standard_suite() {
  std::mt19937_64 rng(20240607);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const DepthKind kinds[] = {DepthKind::fronto_plane, DepthKind::tilted_plane, DepthKind::sphere,
                             DepthKind::smooth_noise};
  std::vector<SceneSpec> suite;
  for (int n = 0; n < 10; ++n) {
    SceneSpec s;
    s.width = s.height = 64;
    s.intrinsics = Intrinsicsd::centered(64.0, 64, 64);
    s.depth_kind = kinds[n % 4];
    s.depth.depth = 3.0 + 0.25 * n;
    s.depth.tilt_x = 0.4 * unit(rng);
    s.depth.tilt_y = 0.4 * unit(rng);
    s.depth.sphere_x = 0.3 * unit(rng);
    s.depth.sphere_y = 0.3 * unit(rng);
    s.texture_seed = 1000 + 17 * n;

    VelocityMotiond vel(Eigen::Vector3d(unit(rng), unit(rng), unit(rng)),
                        Eigen::Vector3d(0.02 * unit(rng), 0.02 * unit(rng), 0.02 * unit(rng)));
    const auto depth = scene_inverse_depth(s);
    const auto flow = instantaneous_flow(depth, s.intrinsics, vel);
    const double max_flow = (flow.u.square() + flow.v.square()).sqrt().maxCoeff();
    const double target = 1.0 + 0.1 * n;  // <= 1.9 px
    s.motion = vel.scaled(target / max_flow);
    suite.push_back(s);
  }
  return suite;
}

std::string to_string(DepthKind kind) {
  switch (kind) {
    case DepthKind::fronto_plane:
      return "fronto_plane";
    case DepthKind::tilted_plane:
      return "tilted_plane";
    case DepthKind::sphere:
      return "sphere";
    case DepthKind::smooth_noise:
      return "smooth_noise";
  }
  return "unknown";
}

DepthKind depth_kind_from_string(const std::string& s) {
  for (const auto k : {DepthKind::fronto_plane, DepthKind::tilted_plane, DepthKind::sphere, DepthKind::smooth_noise})
    if (to_string(k) == s) return k;
  throw ParameterError("unknown depth_kind: " + s);
}

nlohmann::json to_json(const SceneSpec& spec) {
  const auto& p = spec.depth;
  nlohmann::json j;
  j["depth_kind"] = to_string(spec.depth_kind);
  j["depth_params"] = {{"depth", p.depth},
                       {"tilt_x", p.tilt_x},
                       {"tilt_y", p.tilt_y},
                       {"sphere_x", p.sphere_x},
                       {"sphere_y", p.sphere_y},
                       {"sphere_z", p.sphere_z},
                       {"sphere_radius", p.sphere_radius},
                       {"noise_amplitude", p.noise_amplitude},
                       {"noise_scale", p.noise_scale}};
  j["intrinsics"] = {
      {"fx", spec.intrinsics.fx}, {"fy", spec.intrinsics.fy}, {"cx", spec.intrinsics.cx}, {"cy", spec.intrinsics.cy}};
  if (const auto* r = std::get_if<RigidMotiond>(&spec.motion)) {
    const Eigen::AngleAxisd aa(r->rotation);
    j["motion"] = {{"type", "rigid"}, {"axis_angle", vec_json(aa.angle() * aa.axis())},
                   {"translation", vec_json(r->translation)}};
  } else {
    const auto& v = std::get<VelocityMotiond>(spec.motion);
    j["motion"] = {{"type", "velocity"}, {"linear", vec_json(v.linear)}, {"angular", vec_json(v.angular)}};
  }
  j["texture_seed"] = spec.texture_seed;
  j["width"] = spec.width;
  j["height"] = spec.height;
  return j;
}

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  try {
    SceneSpec s;
    s.depth_kind = depth_kind_from_string(j.value("depth_kind", std::string("fronto_plane")));
    if (j.contains("depth_params")) {
      const auto& p = j.at("depth_params");
      s.depth.depth = p.value("depth", s.depth.depth);
      s.depth.tilt_x = p.value("tilt_x", s.depth.tilt_x);
      s.depth.tilt_y = p.value("tilt_y", s.depth.tilt_y);
      s.depth.sphere_x = p.value("sphere_x", s.depth.sphere_x);
      s.depth.sphere_y = p.value("sphere_y", s.depth.sphere_y);
      s.depth.sphere_z = p.value("sphere_z", s.depth.sphere_z);
      s.depth.sphere_radius = p.value("sphere_radius", s.depth.sphere_radius);
      s.depth.noise_amplitude = p.value("noise_amplitude", s.depth.noise_amplitude);
      s.depth.noise_scale = p.value("noise_scale", s.depth.noise_scale);
    }
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.intrinsics = Intrinsicsd::centered(64.0, s.width, s.height);
    if (j.contains("intrinsics")) {
      const auto& k = j.at("intrinsics");
      s.intrinsics.fx = k.value("fx", s.intrinsics.fx);
      s.intrinsics.fy = k.value("fy", s.intrinsics.fy);
      s.intrinsics.cx = k.value("cx", s.intrinsics.cx);
      s.intrinsics.cy = k.value("cy", s.intrinsics.cy);
    }
    s.texture_seed = j.value("texture_seed", s.texture_seed);
    if (j.contains("motion")) {
      const auto& m = j.at("motion");
      const std::string type = m.value("type", std::string("rigid"));
      if (type == "rigid") {
        const Eigen::Vector3d t = m.contains("translation") ? vec3(m, "translation") : Eigen::Vector3d::Zero();
        const Eigen::Vector3d aa = m.contains("axis_angle") ? vec3(m, "axis_angle") : Eigen::Vector3d::Zero();
        s.motion = RigidMotiond::FromAxisAngle(aa, t);
      } else if (type == "velocity") {
        s.motion = VelocityMotiond(m.contains("linear") ? vec3(m, "linear") : Eigen::Vector3d::Zero(),
                                   m.contains("angular") ? vec3(m, "angular") : Eigen::Vector3d::Zero());
      } else {
        throw ParameterError("unknown motion type: " + type);
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed scene spec: ") + e.what());
  }
}

std::vector<SceneSpec> scene_list_from_json(const nlohmann::json& j) {
  const nlohmann::json& list = j.is_object() && j.contains("scenes") ? j.at("scenes") : j;
  if (!list.is_array()) throw FormatError("scene list must be a JSON array or an object with a \"scenes\" array");
  std::vector<SceneSpec> specs;
  for (const auto& item : list) specs.push_back(scene_spec_from_json(item));
  return specs;
}

}  // namespace flowseek
