#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "csbp/rng.hpp"

namespace csbp {

/// Number of workers actually used for `requested` (0 means hardware
/// concurrency); never more than `tasks`.
unsigned resolve_threads(unsigned requested, std::size_t tasks);

/// Calls body(i) for every i in [0, n) on up to `threads` workers. Indices are
/// handed out in contiguous chunks; the first exception is rethrown after all
/// workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

/// Runs `n` replicates, replicate i drawing from make_stream(seed, i).
/// Output order is the replicate index, whatever the worker count.
template <class T, class F>
std::vector<T> run_replicates(std::uint64_t seed, std::size_t n, unsigned threads, F&& fn) {
  std::vector<T> out(n);
  parallel_for(n, threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    out[i] = fn(rng, i);
  });
  return out;
}

}  // namespace csbp
