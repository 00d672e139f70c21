#include "flowseek/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace flowseek::oracle {

std::vector<double> correlation(const FeatureMapd& f0, const FeatureMapd& f1) {
  const int H = f0.height, W = f0.width, H1 = f1.height, W1 = f1.width, K = f0.channels();
  std::vector<double> vol(std::size_t(H) * W * H1 * W1, 0.0);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j)
      for (int u = 0; u < H1; ++u)
        for (int v = 0; v < W1; ++v) {
          double s = 0;
          for (int k = 0; k < K; ++k) s += f0(i, j, k) * f1(u, v, k);
          vol[((std::size_t(i) * W + j) * H1 + u) * W1 + v] = s;
        }
  return vol;
}

std::vector<double> avg_pool(const FeatureMapd& f, int stride, int& out_h, int& out_w) {
  out_h = (f.height + stride - 1) / stride;
  out_w = (f.width + stride - 1) / stride;
  const int K = f.channels();
  std::vector<double> out(std::size_t(out_h) * out_w * K, 0.0);
  for (int oi = 0; oi < out_h; ++oi)
    for (int oj = 0; oj < out_w; ++oj)
      for (int k = 0; k < K; ++k) {
        double s = 0;
        int n = 0;
        for (int i = oi * stride; i < oi * stride + stride; ++i)
          for (int j = oj * stride; j < oj * stride + stride; ++j)
            if (i < f.height && j < f.width) {
              s += f(i, j, k);
              ++n;
            }
        out[(std::size_t(oi) * out_w + oj) * K + k] = s / n;
      }
  return out;
}

std::vector<double> lookup_pixel(const FeatureMapd& f0, const FeatureMapd& f1, int stride, int i, int j, double fu,
                                 double fv, int radius) {
  int ph = 0, pw = 0;
  const std::vector<double> pooled = avg_pool(f1, stride, ph, pw);
  const int K = f0.channels();
  auto corr = [&](int y, int x) {
    if (y < 0 || x < 0 || y >= ph || x >= pw) return 0.0;
    double s = 0;
    for (int k = 0; k < K; ++k) s += f0(i, j, k) * pooled[(std::size_t(y) * pw + x) * K + k];
    return s;
  };
  std::vector<double> out;
  const double cx = (j + fu) / stride;
  const double cy = (i + fv) / stride;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const double x = cx + dx, y = cy + dy;
      const double x0 = std::floor(x), y0 = std::floor(y);
      const double ax = x - x0, ay = y - y0;
      if (std::abs(x0) > 1e6 || std::abs(y0) > 1e6) {
        out.push_back(0.0);
        continue;
      }
      const int xi = static_cast<int>(x0), yi = static_cast<int>(y0);
      out.push_back((1 - ax) * (1 - ay) * corr(yi, xi) + ax * (1 - ay) * corr(yi, xi + 1) +
                    (1 - ax) * ay * corr(yi + 1, xi) + ax * ay * corr(yi + 1, xi + 1));
    }
  return out;
}

namespace {

FeatureMapd random_features(std::mt19937_64& rng, int h, int w, int k) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  FeatureMapd f(h, w, k);
  for (Eigen::Index n = 0; n < f.data.size(); ++n) f.data.data()[n] = d(rng);
  return f;
}

/// max |a - b| over max |b|.
double array_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    num = std::max(num, std::abs(a[n] - b[n]));
    den = std::max(den, std::abs(b[n]));
  }
  return den > 0 ? num / den : num;
}

}  // namespace

std::vector<OracleCase> run_correlation_suite(std::uint64_t seed, double tolerance) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> flow_dist(-3.0, 3.0);
  std::vector<OracleCase> cases;
  auto record = [&](std::string name, double err) {
    cases.push_back({std::move(name), err, err <= tolerance});
  };

  for (int h = 1; h <= 4; ++h) {
    for (int w = 1; w <= 4; ++w) {
      for (int k = 1; k <= 3; ++k) {
        const std::string tag = std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(k);
        const FeatureMapd f0 = random_features(rng, h, w, k);
        const FeatureMapd f1 = random_features(rng, h, w, k);

        const auto vol = correlate_all_pairs(f0, f1);
        const auto ref = oracle::correlation(f0, f1);
        std::vector<double> got(ref.size());
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j)
            for (int u = 0; u < h; ++u)
              for (int v = 0; v < w; ++v) got[((std::size_t(i) * w + j) * h + u) * w + v] = vol(i, j, u, v);
        record("correlation " + tag, array_rel_err(got, ref));

        double pool_err = 0;
        for (int s = 1; s <= 4; ++s) {
          int oh = 0, ow = 0;
          const auto pref = oracle::avg_pool(f1, s, oh, ow);
          const auto pooled = flowseek::avg_pool(f1, s);
          if (pooled.height != oh || pooled.width != ow) {
            pool_err = INFINITY;
            break;
          }
          std::vector<double> pgot(pooled.data.data(), pooled.data.data() + pooled.data.size());
          pool_err = std::max(pool_err, array_rel_err(pgot, pref));
        }
        record("avg_pool " + tag, pool_err);

        const std::vector<int> strides{1, 2, 4};
        const auto pyr = build_pyramid(f0, f1, strides);
        FlowFieldd flow(h, w);
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) {
            flow.u(i, j) = flow_dist(rng);
            flow.v(i, j) = flow_dist(rng);
          }
        double look_err = 0;
        for (int r = 0; r <= 2; ++r) {
          const auto patch = lookup(pyr, flow, r);
          std::vector<double> lgot, lref;
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
              for (int l = 0; l < pyr.size(); ++l) {
                const auto expect = lookup_pixel(f0, f1, strides[l], i, j, flow.u(i, j), flow.v(i, j), r);
                lref.insert(lref.end(), expect.begin(), expect.end());
                for (int dy = -r; dy <= r; ++dy)
                  for (int dx = -r; dx <= r; ++dx) lgot.push_back(patch.at(i, j, l, dy, dx));
              }
          look_err = std::max(look_err, array_rel_err(lgot, lref));
        }
        record("pyramid+lookup " + tag, look_err);
      }
    }
  }
  return cases;
}

}  // namespace flowseek::oracle
