#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmps {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

/// Mixes a list of integers into a single 64-bit seed (splitmix64 chain).
/// Used to derive independent per-sample / per-epoch streams from a master seed.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

inline Rng make_rng(std::initializer_list<std::uint64_t> parts) {
  return Rng(derive_seed(parts));
}

/// Uniform integer on the closed range [lo, hi].
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// Resolves a thread count: explicit value if > 0, else RMPS_THREADS, else hardware concurrency.
unsigned resolve_threads(int requested);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is claimed
/// dynamically, so fn must write only to slot i for the result to be
/// independent of the thread count.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Evenly spaced values on [lo, hi]; a single point sits at the midpoint.
std::vector<double> linspace(double lo, double hi, std::size_t count);

}  // namespace rmps
