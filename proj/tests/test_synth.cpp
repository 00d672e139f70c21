#include <doctest.h>

#include <fstream>

#include "flowseek/flow_io.hpp"
#include "flowseek/flowops.hpp"
#include "flowseek/geometry.hpp"
#include "flowseek/parallel.hpp"
#include "flowseek/subspace.hpp"
#include "flowseek/synth.hpp"
#include "support.hpp"

using namespace flowseek;
using namespace flowseek::test;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SceneSpec rigid_spec(DepthKind kind, const Eigen::Vector3d& aa, const Eigen::Vector3d& t) {
  SceneSpec s;
  s.depth_kind = kind;
  s.width = 24;
  s.height = 20;
  s.intrinsics = Intrinsicsd{30, 32, 11.5, 9.5};
  s.motion = RigidMotiond::FromAxisAngle(aa, t);
  s.texture_seed = 42;
  return s;
}

}  // namespace

TEST_CASE("value noise texture") {
  const auto a = value_noise_texture(16, 20, 7);
  const auto b = value_noise_texture(16, 20, 7);
  const auto c = value_noise_texture(16, 20, 8);
  CHECK((a == b).all());
  CHECK((a != c).any());
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.maxCoeff() <= 1.0);
  // Lattice points of the coarse octave carry the hashed value exactly.
  CHECK(value_noise(8.0, 16.0, 8.0, 3) == value_noise(8.0, 16.0, 8.0, 3));
}

TEST_CASE("identity motion leaves the image unchanged") {
  for (auto kind : {DepthKind::fronto_plane, DepthKind::tilted_plane, DepthKind::sphere, DepthKind::smooth_noise}) {
    const auto s = generate_scene(rigid_spec(kind, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()));
    CHECK(s.gt.valid.all());
    CHECK(s.gt.u.abs().maxCoeff() == 0.0);
    CHECK(s.gt.v.abs().maxCoeff() == 0.0);
    CHECK((s.image0 == s.image1).all());
  }
}

TEST_CASE("scene generation is deterministic across thread counts") {
  const auto spec = rigid_spec(DepthKind::sphere, {0.01, -0.02, 0.005}, {0.1, 0.05, 0.2});
  set_num_threads(1);
  const auto a = generate_scene(spec);
  set_num_threads(3);
  const auto b = generate_scene(spec);
  set_num_threads(1);
  CHECK((a.image0 == b.image0).all());
  CHECK((a.image1 == b.image1).all());
  CHECK((a.gt.u == b.gt.u).all());
  CHECK((a.gt.v == b.gt.v).all());
  CHECK((a.gt.valid == b.gt.valid).all());
  CHECK((a.depth.d0 == b.depth.d0).all());
}

TEST_CASE("forward translation on a fronto-parallel plane expands radially") {
  const double Z = 5.0, tz = -0.4;  // points move toward the camera
  auto spec = rigid_spec(DepthKind::fronto_plane, Eigen::Vector3d::Zero(), {0, 0, tz});
  spec.depth.depth = Z;
  spec.intrinsics = Intrinsicsd{30, 30, 11.5, 9.5};
  const auto s = generate_scene(spec);
  CHECK((s.depth.d0 == 1.0 / Z).all());
  const double R[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const double t[3] = {0, 0, tz};
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 24; ++j) {
      if (!s.gt.valid(i, j)) continue;
      double u = 0, v = 0;
      REQUIRE(reproject_pixel(1.0 / Z, 30, 30, 11.5, 9.5, R, t, j, i, u, v));
      CHECK(std::abs(s.gt.u(i, j) - u) <= 1e-12);
      CHECK(std::abs(s.gt.v(i, j) - v) <= 1e-12);
      // Parallel to the offset from the principal point, pointing outward.
      const double ub = j - 11.5, vb = i - 9.5;
      CHECK(std::abs(s.gt.u(i, j) * vb - s.gt.v(i, j) * ub) <= 1e-12);
      CHECK(s.gt.u(i, j) * ub + s.gt.v(i, j) * vb > 0);
    }
  // Moving away (t_z > 0) contracts: flow antiparallel to the offset.
  spec.motion = RigidMotiond::FromAxisAngle(Eigen::Vector3d::Zero(), {0, 0, 0.4});
  const auto away = generate_scene(spec);
  CHECK(away.gt.u(0, 0) * (0 - 11.5) + away.gt.v(0, 0) * (0 - 9.5) < 0);
  // Radial symmetry: mirrored pixels about the principal point mirror the flow.
  CHECK(away.gt.u(2, 3) == doctest::Approx(-away.gt.u(17, 20)).epsilon(1e-12));
  CHECK(away.gt.v(2, 3) == doctest::Approx(-away.gt.v(17, 20)).epsilon(1e-12));
}

TEST_CASE("photometric consistency holds exactly on valid pixels") {
  Rng rng(1);
  for (auto kind : {DepthKind::fronto_plane, DepthKind::tilted_plane, DepthKind::sphere, DepthKind::smooth_noise}) {
    const auto s = generate_scene(rigid_spec(kind, random_vec3(rng, 0.02), random_vec3(rng, 0.2)));
    const auto warped = bilinear_warp(FeatureMapd::FromPlane(s.image1), s.gt);
    double sum = 0;
    for (int i = 0; i < s.gt.height(); ++i)
      for (int j = 0; j < s.gt.width(); ++j) {
        if (!s.gt.valid(i, j)) continue;
        REQUIRE(warped.valid(i, j));
        sum += std::abs(warped.image(i, j, 0) - s.image0(i, j));
      }
    CHECK(sum / double(s.gt.valid_count()) < 1e-12);
    CHECK(s.gt.valid_count() > 0);
  }
}

TEST_CASE("velocity scenes recover the generating velocity") {
  Rng rng(2);
  for (auto kind : {DepthKind::fronto_plane, DepthKind::tilted_plane, DepthKind::sphere, DepthKind::smooth_noise}) {
    SceneSpec spec = rigid_spec(kind, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());
    spec.depth.tilt_x = 0.3;
    spec.depth.tilt_y = -0.2;
    const auto vel = random_velocity(rng, 0.05, 0.002);
    spec.motion = vel;
    const auto s = generate_scene(spec);
    const auto fit = fit_coefficients(s.gt, build_six_bases(s.depth, spec.intrinsics));
    CHECK((fit.values - vel.coefficients()).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("degenerate specs are rejected") {
  auto spec = rigid_spec(DepthKind::fronto_plane, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());
  spec.depth.depth = 0.0;
  CHECK_THROWS_AS(generate_scene(spec), ParameterError);
  spec.depth.depth = 0.005;  // inverse depth 200 > 100
  CHECK_THROWS_AS(generate_scene(spec), ParameterError);
  spec.depth.depth = 4;
  spec.width = 7;
  CHECK_THROWS_AS(generate_scene(spec), DimensionError);
}

TEST_CASE("JSON spec round trip") {
  const auto suite = standard_suite();
  for (const auto& s : suite) {
    const auto back = scene_spec_from_json(to_json(s));
    CHECK(to_json(back) == to_json(s));
  }
  auto rigid = rigid_spec(DepthKind::sphere, {0.01, 0.02, -0.03}, {0.1, 0.2, 0.3});
  const auto back = scene_spec_from_json(to_json(rigid));
  const auto& m = std::get<RigidMotiond>(back.motion);
  CHECK((m.rotation - std::get<RigidMotiond>(rigid.motion).rotation).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(scene_list_from_json(nlohmann::json{{"scenes", 3}}), FormatError);
  CHECK_THROWS_AS(scene_spec_from_json(nlohmann::json{{"depth_kind", "cube"}}), ParameterError);
}

TEST_CASE("standard suite stays within 2 px") {
  const auto suite = standard_suite();
  REQUIRE(suite.size() == 10);
  for (const auto& spec : suite) {
    CHECK(spec.width == 64);
    CHECK(spec.height == 64);
    const auto s = generate_scene(spec);
    const double max_flow = (s.gt.u.square() + s.gt.v.square()).sqrt().maxCoeff();
    CHECK(max_flow <= 2.0);
    CHECK(max_flow > 0.5);
  }
}

TEST_CASE("emit_dataset") {
  SUBCASE("empty list") {
    const auto dir = temp_dir("emit_empty");
    const auto m = emit_dataset({}, dir.string());
    CHECK(m["count"] == 0);
    CHECK(m["scenes"].empty());
    CHECK(std::filesystem::exists(dir / "manifest.json"));
  }
  SUBCASE("three scenes, deterministic, readable") {
    const auto suite = standard_suite();
    const std::vector<SceneSpec> three(suite.begin(), suite.begin() + 3);
    const auto a = temp_dir("emit_a"), b = temp_dir("emit_b");
    emit_dataset(three, a.string());
    emit_dataset(three, b.string());
    int files = 0;
    for (const auto& e : std::filesystem::directory_iterator(a)) {
      ++files;
      CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    }
    CHECK(files == 3 * 5 + 1);

    const auto scene = generate_scene(three[1]);
    const auto flo = read_flo((a / "scene_001_flow.flo").string());
    const auto expect = scene.gt.cast<float>().cast<double>();
    CHECK((flo.valid == scene.gt.valid).all());
    CHECK((flo.u == expect.u).all());
    CHECK((flo.v == expect.v).all());

    const auto kitti = read_kitti_png((a / "scene_001_flow_kitti.png").string());
    CHECK((kitti.valid == scene.gt.valid).all());
    CHECK((kitti.u - scene.gt.u).abs().maxCoeff() <= 1.0 / 128);

    const auto depth = inverse_depth_from_png((a / "scene_001_invdepth.png").string());
    CHECK((depth.d0 - scene.depth.d0).abs().maxCoeff() <= 0.5 / kInverseDepthPngScale + 1e-15);

    const auto img = image_from_png((a / "scene_001_image1.png").string());
    CHECK((img - scene.image1).abs().maxCoeff() <= 0.5 / 255 + 1e-12);

    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest["count"] == 3);
    CHECK(manifest["scenes"][2]["texture_seed"] == three[2].texture_seed);
  }
}
