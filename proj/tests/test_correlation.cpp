#include <doctest.h>

#include "flowseek/correlation.hpp"
#include "flowseek/oracles.hpp"
#include "support.hpp"

using namespace flowseek;
using namespace flowseek::test;

namespace {

FeatureMapd random_features(Rng& rng, int h, int w, int k) {
  FeatureMapd f(h, w, k);
  for (Eigen::Index n = 0; n < f.data.size(); ++n) f.data.data()[n] = uniform(rng, -1, 1);
  return f;
}

double max_abs_diff(const CorrelationVolume<double>& a, const CorrelationVolume<double>& b) {
  return (a.data - b.data).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("one-hot features give an identity volume") {
  const int h = 3, w = 2;
  FeatureMapd f(h, w, h * w);
  for (int p = 0; p < h * w; ++p) f.data(p, p) = 1;
  const auto vol = correlate_all_pairs(f, f);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) CHECK(vol(i, j, u, v) == ((i == u && j == v) ? 1.0 : 0.0));
}

TEST_CASE("2x2x3 volume equals the triple loop") {
  Rng rng(1);
  const auto f0 = random_features(rng, 2, 2, 3), f1 = random_features(rng, 2, 2, 3);
  const auto vol = correlate_all_pairs(f0, f1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int u = 0; u < 2; ++u)
        for (int v = 0; v < 2; ++v) {
          double s = 0;
          for (int k = 0; k < 3; ++k) s += f0(i, j, k) * f1(u, v, k);
          CHECK(vol(i, j, u, v) == s);
        }
}

TEST_CASE("volume bilinearity and symmetry") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const int h = uniform_int(rng, 1, 5), w = uniform_int(rng, 1, 5), k = uniform_int(rng, 1, 4);
    const auto f0 = random_features(rng, h, w, k), f1 = random_features(rng, h, w, k);
    const auto g1 = random_features(rng, h, w, k);
    const auto v01 = correlate_all_pairs(f0, f1);
    const double scale = std::max(1.0, v01.data.cwiseAbs().maxCoeff());

    FeatureMapd twice = f1;
    twice.data *= 2.0;
    CHECK((correlate_all_pairs(f0, twice).data - 2.0 * v01.data).cwiseAbs().maxCoeff() == 0.0);

    FeatureMapd sum = f1;
    sum.data += g1.data;
    const Eigen::MatrixXd additive = correlate_all_pairs(f0, f1).data + correlate_all_pairs(f0, g1).data;
    CHECK((correlate_all_pairs(f0, sum).data - additive).cwiseAbs().maxCoeff() <= 1e-12 * scale * 2);

    const auto v10 = correlate_all_pairs(f1, f0);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int u = 0; u < h; ++u)
          for (int v = 0; v < w; ++v) CHECK(v01(i, j, u, v) == v10(u, v, i, j));
  }
}

TEST_CASE("optional 1/sqrt(K) scaling") {
  Rng rng(3);
  const auto f0 = random_features(rng, 3, 3, 4), f1 = random_features(rng, 3, 3, 4);
  const auto plain = correlate_all_pairs(f0, f1);
  const auto scaled = correlate_all_pairs(f0, f1, true);
  CHECK((scaled.data - plain.data / 2.0).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(correlate_all_pairs(f0, random_features(rng, 3, 3, 2)), DimensionError);
}

TEST_CASE("avg_pool") {
  Rng rng(4);
  const auto f = random_features(rng, 3, 3, 2);
  CHECK(avg_pool(f, 1).data == f.data);

  FeatureMapd c(2, 2, 1);
  c.data.setConstant(0.375);
  const auto pc = avg_pool(c, 2);
  CHECK(pc.height == 1);
  CHECK(pc.width == 1);
  CHECK(pc.data(0, 0) == 0.375);

  const auto p = avg_pool(f, 2);
  REQUIRE(p.height == 2);
  REQUIRE(p.width == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK(p(0, 0, k) == doctest::Approx((f(0, 0, k) + f(0, 1, k) + f(1, 0, k) + f(1, 1, k)) / 4).epsilon(1e-15));
    CHECK(p(0, 1, k) == doctest::Approx((f(0, 2, k) + f(1, 2, k)) / 2).epsilon(1e-15));
    CHECK(p(1, 0, k) == doctest::Approx((f(2, 0, k) + f(2, 1, k)) / 2).epsilon(1e-15));
    CHECK(p(1, 1, k) == f(2, 2, k));
  }
  CHECK_THROWS_AS(avg_pool(f, 0), ParameterError);
}

TEST_CASE("pyramid") {
  Rng rng(5);
  const auto f0 = random_features(rng, 4, 4, 3), f1 = random_features(rng, 4, 4, 3);
  const auto single = build_pyramid(f0, f1, {1});
  REQUIRE(single.size() == 1);
  CHECK(max_abs_diff(single.levels[0], correlate_all_pairs(f0, f1)) == 0.0);

  const auto two = build_pyramid(f0, f1, {1, 2});
  const auto& l2 = two.levels[1];
  CHECK(l2.src_height == 4);
  CHECK(l2.src_width == 4);
  CHECK(l2.tgt_height == 2);
  CHECK(l2.tgt_width == 2);
  int oh = 0, ow = 0;
  const auto pooled = oracle::avg_pool(f1, 2, oh, ow);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int u = 0; u < 2; ++u)
        for (int v = 0; v < 2; ++v) {
          double s = 0;
          for (int k = 0; k < 3; ++k) s += f0(i, j, k) * pooled[(u * ow + v) * 3 + k];
          CHECK(l2(i, j, u, v) == doctest::Approx(s).epsilon(1e-13));
        }

  CHECK(default_strides() == std::vector<int>{1, 2, 4, 8});
  CHECK_THROWS_AS(build_pyramid(f0, f1, {}), ParameterError);
  CHECK_THROWS_AS(build_pyramid(f0, f1, {2, 4}), ParameterError);
  CHECK_THROWS_AS(build_pyramid(f0, f1, {1, 4, 2}), ParameterError);
}

TEST_CASE("lookup") {
  Rng rng(6);
  SUBCASE("radius 0 at zero flow returns the diagonal") {
    const auto f0 = random_features(rng, 3, 4, 2), f1 = random_features(rng, 3, 4, 2);
    const auto pyr = build_pyramid(f0, f1, {1});
    const auto patch = lookup(pyr, FlowFieldd::Zero(3, 4), 0);
    CHECK(patch.samples.cols() == 1);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) CHECK(patch.at(i, j, 0, 0, 0) == pyr.levels[0](i, j, i, j));
  }
  SUBCASE("half-pixel flow averages two neighbours") {
    const auto f0 = random_features(rng, 2, 2, 3), f1 = random_features(rng, 2, 2, 3);
    const auto pyr = build_pyramid(f0, f1, {1});
    auto flow = FlowFieldd::Zero(2, 2);
    flow.u(0, 0) = 0.5;
    flow.v(1, 0) = 0.5;
    const auto patch = lookup(pyr, flow, 0);
    const auto& V = pyr.levels[0];
    CHECK(patch.at(0, 0, 0, 0, 0) == doctest::Approx((V(0, 0, 0, 0) + V(0, 0, 0, 1)) / 2).epsilon(1e-15));
    // (1, 0) looks at y = 1.5: one in-bounds tap and one zero-padded tap.
    CHECK(patch.at(1, 0, 0, 0, 0) == doctest::Approx(V(1, 0, 1, 0) / 2).epsilon(1e-15));
  }
  SUBCASE("far outside the image samples zero") {
    const auto f0 = random_features(rng, 4, 4, 2), f1 = random_features(rng, 4, 4, 2);
    const auto pyr = build_pyramid(f0, f1, {1, 2});
    auto flow = FlowFieldd::Zero(4, 4);
    flow.u.setConstant(1e9);
    flow.v.setConstant(-1e9);
    const auto patch = lookup(pyr, flow, 2);
    CHECK(patch.samples.cols() == 2 * 25);
    CHECK(patch.samples.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("Lipschitz bound of bilinear sampling") {
    const auto f0 = random_features(rng, 5, 5, 3), f1 = random_features(rng, 5, 5, 3);
    const auto pyr = build_pyramid(f0, f1, {1, 2, 4});
    const auto flow = random_flow(rng, 5, 5, -3, 3);
    auto moved = flow;
    const double delta = 1e-3;
    moved.u += delta;
    moved.v -= delta;
    const auto a = lookup(pyr, flow, 1), b = lookup(pyr, moved, 1);
    double vmax = 0;
    for (const auto& l : pyr.levels) vmax = std::max(vmax, l.data.cwiseAbs().maxCoeff());
    CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() <= 2 * 2 * delta * vmax);
  }
  SUBCASE("errors") {
    const auto f = random_features(rng, 3, 3, 1);
    const auto pyr = build_pyramid(f, f, {1});
    CHECK_THROWS_AS(lookup(pyr, FlowFieldd::Zero(3, 4), 1), DimensionError);
    CHECK_THROWS_AS(lookup(pyr, FlowFieldd::Zero(3, 3), -1), ParameterError);
  }
}

TEST_CASE("brute-force equivalence suite") {
  const auto cases = oracle::run_correlation_suite(7);
  CHECK(cases.size() == 4 * 4 * 3 * 3);
  for (const auto& c : cases) {
    INFO(c.name);
    CHECK(c.pass);
  }
}
