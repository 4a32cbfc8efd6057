#include "csbp/rng.hpp"

#include <cmath>

#include "csbp/error.hpp"

namespace csbp {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Rng make_stream(std::uint64_t master_seed, std::uint64_t index) {
  std::uint64_t state = master_seed;
  const std::uint64_t a = splitmix64(state);
  state ^= index * 0xD1B54A32D192ED03ull;
  const std::uint64_t b = splitmix64(state);
  const std::uint64_t c = splitmix64(state);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

double uniform01(Rng& rng) {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double exponential(Rng& rng, double mean) { return -mean * std::log(uniform01(rng)); }

double gamma(Rng& rng, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    fail(ErrorCode::kDomain, "gamma: shape and scale must be > 0");
  }
  std::gamma_distribution<double> dist(shape, scale);
  return dist(rng);
}

std::uint64_t poisson(Rng& rng, double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) fail(ErrorCode::kDomain, "poisson: bad mean");
  if (mean == 0.0) return 0;
  std::poisson_distribution<long long> dist(mean);
  return static_cast<std::uint64_t>(dist(rng));
}

std::uint64_t poisson_at_least(Rng& rng, double mean, std::uint64_t k) {
  if (k == 0) return poisson(rng, mean);
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    fail(ErrorCode::kDomain, "poisson_at_least: mean must be > 0");
  }
  if (mean > static_cast<double>(k) + 2.0) {
    // P(N >= k) >= ~1/2 here; plain rejection is cheap.
    for (;;) {
      const std::uint64_t n = poisson(rng, mean);
      if (n >= k) return n;
    }
  }
  // Inversion on the conditional pmf. The tail mass is summed directly so it
  // stays accurate when the mean is small.
  double pk = std::exp(-mean);
  for (std::uint64_t i = 1; i <= k; ++i) pk *= mean / static_cast<double>(i);
  double tail = 0.0;
  {
    double term = pk;
    for (std::uint64_t n = k; n < k + 400; ++n) {
      tail += term;
      term *= mean / static_cast<double>(n + 1);
      if (term < 1e-18 * tail) break;
    }
  }
  const double target = uniform01(rng) * tail;
  double cumulative = 0.0;
  double term = pk;
  std::uint64_t n = k;
  for (; n < k + 400; ++n) {
    cumulative += term;
    if (cumulative >= target) return n;
    term *= mean / static_cast<double>(n + 1);
  }
  return n;
}

std::uint64_t geometric(Rng& rng, double p) {
  if (!(p > 0.0 && p <= 1.0)) fail(ErrorCode::kDomain, "geometric: p must be in (0, 1]");
  if (p == 1.0) return 0;
  return static_cast<std::uint64_t>(std::floor(std::log(uniform01(rng)) / std::log1p(-p)));
}

}  // namespace csbp
