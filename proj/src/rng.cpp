#include "evodpo/rng.hpp"

#include <cmath>
#include <numbers>

#include "evodpo/errors.hpp"

namespace evodpo {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t stream,
                   std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (stream * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ (index * 0x8cb92ba72f3d8dd7ULL));
  return Rng(h);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // Box-Muller; one value per call so the stream position is easy to reason
  // about.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::index: empty range");
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(engine_()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

Eigen::VectorXd Rng::unit_vector(int dim) {
  if (dim < 1) throw ContractError("Rng::unit_vector: dim must be >= 1");
  Eigen::VectorXd v(dim);
  double norm = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v[i] = normal();
    norm = v.norm();
  } while (norm < 1e-12);
  return v / norm;
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ContractError("Rng::categorical: zero mass");
  const double target = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  // Rounding left target at the top edge; return the last positive entry.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

}  // namespace evodpo
