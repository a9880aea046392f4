#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Core>

namespace evodpo {

// Named substreams of a run seed. Keeping environment draws apart from
// learner draws means two variants run on the same seed see the same
// theta path and contexts.
enum class Stream : std::uint64_t {
  kEnvironment = 1,
  kContexts = 2,
  kLabels = 3,
  kActions = 4,
  kGate = 5,
  kIslands = 6,
  kTrials = 7,
  kScoring = 8,
};

// Seeded 64-bit Mersenne Twister with the handful of draws the simulators
// need. All transforms are written out here (no std::*_distribution) so the
// byte stream of every report depends only on the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Counter-based split: the stream for (seed, stream, index) is independent
  // of how many other streams were drawn before it.
  static Rng substream(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t index = 0);
  static Rng substream(std::uint64_t seed, Stream stream,
                       std::uint64_t index = 0) {
    return substream(seed, static_cast<std::uint64_t>(stream), index);
  }

  std::uint64_t next() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::size_t index(std::size_t n);  // uniform on [0, n)
  bool bernoulli(double p) { return uniform() < p; }
  Eigen::VectorXd unit_vector(int dim);
  // Draw from an unnormalized nonnegative weight vector.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace evodpo
