#pragma once

// Data-parallel map over independent trials / seeds.
//
// Every trial derives its own RNG substream from (seed, index), so the
// OpenMP kernel and the serial reference produce bitwise-identical results.
// The serial path is kept for tests and for the benchmark baseline.

#include <cstddef>
#include <exception>
#include <functional>
#include <vector>

namespace evodpo {

enum class Execution { kSerial, kParallel };

template <typename Result, typename Fn>
std::vector<Result> map_serial(std::size_t n, Fn&& fn) {
  std::vector<Result> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(fn(i));
  return out;
}

template <typename Result, typename Fn>
std::vector<Result> map_parallel(std::size_t n, Fn&& fn) {
  std::vector<Result> out(n);
  std::exception_ptr failure;
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(evodpo_sweep_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

template <typename Result, typename Fn>
std::vector<Result> map_trials(std::size_t n, Fn&& fn,
                               Execution exec = Execution::kParallel) {
  if (exec == Execution::kSerial) {
    return map_serial<Result>(n, std::forward<Fn>(fn));
  }
  return map_parallel<Result>(n, std::forward<Fn>(fn));
}

}  // namespace evodpo
