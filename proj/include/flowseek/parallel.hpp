// Row-parallel loop helper.
//
// Work is split into contiguous blocks of rows; each row is processed by
// exactly one thread and writes only its own outputs. Reductions are done by
// callers over per-row partials in row order, so results do not depend on the
// thread count.

#ifndef FLOWSEEK_PARALLEL_HPP
#define FLOWSEEK_PARALLEL_HPP

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace flowseek {

/// Number of worker threads used by parallel_rows. Defaults to the value of
/// FLOWSEEK_THREADS, or 1 when unset.
int num_threads();
void set_num_threads(int n);

template <typename Fn>
void parallel_rows(int rows, Fn&& fn) {
  const int workers = std::min(num_threads(), rows);
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (rows + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int begin = w * chunk;
    const int end = std::min(rows, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (int r = begin; r < end; ++r) fn(r);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace flowseek

#endif  // FLOWSEEK_PARALLEL_HPP
