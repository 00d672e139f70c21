// Scalar brute-force re-implementations of the correlation operators, kept
// deliberately naive (nested loops over plain indices, no Eigen expressions)
// so they can cross-check the production code paths.

#ifndef FLOWSEEK_ORACLES_HPP
#define FLOWSEEK_ORACLES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "flowseek/correlation.hpp"

namespace flowseek::oracle {

/// vol[((i*W + j)*H1 + u)*W1 + v]
std::vector<double> correlation(const FeatureMapd& f0, const FeatureMapd& f1);

/// out[(oi*OW + oj)*K + k]
std::vector<double> avg_pool(const FeatureMapd& f, int stride, int& out_h, int& out_w);

/// Samples of one source pixel at one level, (dy, dx) row-major.
std::vector<double> lookup_pixel(const FeatureMapd& f0, const FeatureMapd& f1, int stride, int i, int j, double fu,
                                 double fv, int radius);

struct OracleCase {
  std::string name;
  double max_rel_err = 0;
  bool pass = false;
};

/// Random instances (errors are max |a - b| over max |oracle|) with H, W in 1..4 and K in 1..3, checking
/// correlate_all_pairs, avg_pool, build_pyramid and lookup.
std::vector<OracleCase> run_correlation_suite(std::uint64_t seed, double tolerance = 1e-12);

}  // namespace flowseek::oracle

#endif  // FLOWSEEK_ORACLES_HPP
