#include "glrt/rng.hpp"

#include <cmath>
#include <numbers>

#include "glrt/errors.hpp"

namespace glrt {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::span<const std::uint64_t> ids) {
  std::uint64_t h = 0x8f1bbcdcbfa53e0bULL;
  for (std::uint64_t id : ids) {
    std::uint64_t x = h ^ (id + 0x9e3779b97f4a7c15ULL);
    h = splitmix64(x);
  }
  return h;
}

Rng Rng::substream(std::initializer_list<std::uint64_t> ids) const {
  std::vector<std::uint64_t> key;
  key.reserve(ids.size() + 1);
  key.push_back(state_);
  key.insert(key.end(), ids.begin(), ids.end());
  return Rng(mix_seed(key));
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller; u1 in (0,1] to avoid log(0).
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mean, double stddev) { return mean + stddev * normal(); }

int Rng::bernoulli(double p) { return uniform() < p ? 1 : 0; }

long long Rng::poisson(double rate) {
  if (!(rate >= 0.0)) raise(ErrorKind::NonFinite, "poisson rate must be nonnegative");
  if (rate == 0.0) return 0;
  if (rate < 30.0) {
    // inversion by sequential search
    double p = std::exp(-rate);
    double cdf = p;
    double u = uniform();
    long long k = 0;
    while (u > cdf && k < 1000000) {
      ++k;
      p *= rate / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  // PTRS transformed rejection (Hormann 1993), exact for large rates.
  const double b = 0.931 + 2.53 * std::sqrt(rate);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform();
    double us = 0.5 - std::abs(u);
    double k = std::floor((2.0 * a / us + b) * u + rate + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long long>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    double rhs = -rate + k * std::log(rate) - std::lgamma(k + 1.0);
    if (lhs <= rhs) return static_cast<long long>(k);
  }
}

std::size_t Rng::discrete(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) raise(ErrorKind::BadConfig, "discrete() needs positive total weight");
  double u = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) raise(ErrorKind::BadIndex, "below(0)");
  // rejection to kill modulo bias
  std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

}  // namespace glrt
