#pragma once

#include <cstdint>
#include <random>

namespace csbp {

using Rng = std::mt19937_64;

/// Independent stream for replicate `index` under `master_seed`. Streams are
/// a pure function of the pair, so results do not depend on scheduling.
Rng make_stream(std::uint64_t master_seed, std::uint64_t index);

std::uint64_t splitmix64(std::uint64_t& state);

/// Uniform on the open interval (0, 1).
double uniform01(Rng& rng);
double exponential(Rng& rng, double mean);
double gamma(Rng& rng, double shape, double scale);
std::uint64_t poisson(Rng& rng, double mean);
/// Poisson(mean) conditioned on being >= k.
std::uint64_t poisson_at_least(Rng& rng, double mean, std::uint64_t k);
/// Number of failures before the first success, success probability p.
std::uint64_t geometric(Rng& rng, double p);

}  // namespace csbp
