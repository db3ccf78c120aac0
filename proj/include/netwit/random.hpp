#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "netwit/error.hpp"
#include "netwit/metric_space.hpp"

namespace netwit {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-mode seed derivation: stream `stream`, counter `k` under a master seed.
/// Stable across versions; trial k of an experiment uses derive_seed(master, 0, k).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t counter) noexcept {
  return mix64(mix64(master ^ mix64(stream + 0x6a09e667f3bcc909ULL)) + counter);
}

/// A sample oracle yields point indices until (possibly) exhausted.
template <class S>
concept SampleOracle = requires(S& s) {
  { s.next() } -> std::same_as<std::optional<std::size_t>>;
};

/// I.i.d. draws from a probability vector.
class VectorSampler {
 public:
  VectorSampler(std::span<const double> weights, std::uint64_t seed)
      : rng_(seed), dist_(weights.begin(), weights.end()) {}
  VectorSampler(const Distribution& q, std::uint64_t seed) : VectorSampler(q.mass(), seed) {}

  std::optional<std::size_t> next() { return static_cast<std::size_t>(dist_(rng_)); }
  std::size_t draw() { return static_cast<std::size_t>(dist_(rng_)); }

 private:
  Rng rng_;
  std::discrete_distribution<std::size_t> dist_;
};

/// Replays a fixed list of recorded draws, then reports exhaustion.
class RecordedSampler {
 public:
  explicit RecordedSampler(std::vector<std::size_t> draws) : draws_(std::move(draws)) {}
  std::optional<std::size_t> next() {
    if (pos_ >= draws_.size()) return std::nullopt;
    return draws_[pos_++];
  }

 private:
  std::vector<std::size_t> draws_;
  std::size_t pos_ = 0;
};

template <SampleOracle S>
std::vector<std::size_t> draw_samples(S& sampler, std::size_t m) {
  std::vector<std::size_t> out;
  out.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    auto x = sampler.next();
    if (!x) throw SamplerExhausted("sampler ran dry after " + std::to_string(k) + " of " +
                                   std::to_string(m) + " samples");
    out.push_back(*x);
  }
  return out;
}

/// Dirichlet(1,...,1) probability vector.
inline std::vector<double> random_simplex_point(std::size_t n, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) s += (x = e(rng));
  for (auto& x : v) x /= s;
  return v;
}

}  // namespace netwit
