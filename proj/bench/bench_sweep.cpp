// Serial reference vs OpenMP sweep over independent trials: wall time and a
// bitwise agreement check.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>

#include <omp.h>

#include "evodpo/evodpo.hpp"
#include "evodpo/verify.hpp"

namespace {

template <typename Fn>
double seconds(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void compare(const char* name, const std::function<evodpo::LemmaReport(evodpo::Execution)>& job) {
  evodpo::LemmaReport serial, parallel;
  const double ts = seconds([&] { serial = job(evodpo::Execution::kSerial); });
  const double tp = seconds([&] { parallel = job(evodpo::Execution::kParallel); });
  const bool same = serial.violations == parallel.violations &&
                    serial.trials == parallel.trials &&
                    std::memcmp(&serial.max_slack_ratio, &parallel.max_slack_ratio,
                                sizeof(double)) == 0;
  std::printf("%-22s serial %8.3f s  parallel %8.3f s  speedup %5.2fx  identical %s\n", name,
              ts, tp, ts / tp, same ? "yes" : "NO");
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  compare("kl_bound x20000", [](evodpo::Execution e) {
    return evodpo::check_kl_bound(20000, 1, {}, e);
  });
  compare("self_normalized x4000", [](evodpo::Execution e) {
    return evodpo::check_self_normalized(4000, 0.05, 1, {}, e);
  });
  compare("local_variation x200", [](evodpo::Execution e) {
    return evodpo::check_local_variation(200, 1, {}, e);
  });
  compare("estimation_error x50", [](evodpo::Execution e) {
    return evodpo::check_estimation_error(50, 0.05, 1, {}, e);
  });

  // Seed sweep of full runs.
  evodpo::EvoDpoConfig cfg;
  std::vector<double> serial, parallel;
  auto job = [&](std::size_t i) { return evodpo::run_evodpo(cfg, i + 1).ledger.cumulative(); };
  const double ts = seconds([&] { serial = evodpo::map_trials<double>(8, job, evodpo::Execution::kSerial); });
  const double tp = seconds([&] { parallel = evodpo::map_trials<double>(8, job, evodpo::Execution::kParallel); });
  std::printf("%-22s serial %8.3f s  parallel %8.3f s  speedup %5.2fx  identical %s\n",
              "run_evodpo x8 seeds", ts, tp, ts / tp, serial == parallel ? "yes" : "NO");
  return 0;
}
