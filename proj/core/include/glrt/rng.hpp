#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace glrt {

/// Deterministic pseudo-random source (splitmix64 core).
///
/// All sampling in the library goes through this class so that results are
/// bit-reproducible across platforms and independent of the standard
/// library's distribution implementations.  Streams for parallel work are
/// derived by hashing a key sequence (`substream`), never by sharing state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Derive an independent stream keyed by `ids`; the parent is unchanged.
  /// Same parent seed + same key sequence -> same stream, regardless of how
  /// many draws other streams have consumed.
  Rng substream(std::initializer_list<std::uint64_t> ids) const;

  std::uint64_t next_u64();

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal (Box-Muller, one value per call; no cached spare so
  /// substream splitting stays stateless).
  double normal();
  double normal(double mean, double stddev);
  /// Bernoulli(p) in {0, 1}.
  int bernoulli(double p);
  /// Poisson with the given rate; inversion for small rates, PTRS rejection
  /// for large ones.
  long long poisson(double rate);
  /// Index sampled from unnormalized nonnegative weights.
  std::size_t discrete(std::span<const double> weights);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
};

/// Stateless mix of a key sequence into a 64-bit seed (used for stream
/// derivation and anywhere a deterministic per-task seed is needed).
std::uint64_t mix_seed(std::span<const std::uint64_t> ids);

}  // namespace glrt
