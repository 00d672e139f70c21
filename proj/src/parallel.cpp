#include "flowseek/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace flowseek {
namespace {

int threads_from_env() {
  if (const char* env = std::getenv("FLOWSEEK_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> n{threads_from_env()};
  return n;
}

}  // namespace

int num_threads() { return thread_setting().load(); }

void set_num_threads(int n) { thread_setting().store(n < 1 ? 1 : n); }

}  // namespace flowseek
