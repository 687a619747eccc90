#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace gmmdiff {

/// Chains are processed in fixed-size blocks. The block layout never depends
/// on the worker count, which keeps every run bit-reproducible.
inline constexpr std::size_t kBlockSize = 256;

/// splitmix64 finalizer, used only to decorrelate substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the substream owned by `(seed, stream, chain)`. `stream` separates
/// independent uses of one user seed (sampling, perturbation fields, ...).
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream,
                                       std::uint64_t chain) noexcept {
  return mix64(mix64(mix64(seed) ^ stream) ^ chain);
}

/// Per-chain random source.
class ChainRng {
 public:
  ChainRng() = default;
  ChainRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t chain)
      : engine_(substream_seed(seed, stream, chain)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  boost::random::mt19937_64& engine() { return engine_; }

 private:
  boost::random::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
  boost::random::uniform_01<double> uniform_;
};

namespace stream {
inline constexpr std::uint64_t kMixtureSampling = 1;
inline constexpr std::uint64_t kSolverNoise = 2;
inline constexpr std::uint64_t kPerturbationField = 3;
inline constexpr std::uint64_t kMonteCarlo = 4;
inline constexpr std::uint64_t kCalibration = 5;
inline constexpr std::uint64_t kSuite = 6;
inline constexpr std::uint64_t kSweep = 7;
}  // namespace stream

/// Runs `fn(block_index, begin, end)` over `[0, n)` split into kBlockSize
/// blocks, on up to `threads` workers (0 means hardware concurrency).
/// If several blocks throw, the exception of the lowest block index wins, so
/// failures are reported identically for any worker count.
template <class Fn>
void for_each_block(std::size_t n, unsigned threads, Fn&& fn) {
  const std::size_t blocks = (n + kBlockSize - 1) / kBlockSize;
  if (blocks == 0) return;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threads, blocks));

  std::vector<std::exception_ptr> errors(blocks);
  std::atomic<std::size_t> first_failed{blocks};
  auto run_block = [&](std::size_t b) {
    // Blocks above a known failure are skipped; lower ones must still run.
    if (b > first_failed.load()) return;
    const std::size_t begin = b * kBlockSize;
    const std::size_t end = std::min(n, begin + kBlockSize);
    try {
      fn(b, begin, end);
    } catch (...) {
      errors[b] = std::current_exception();
      std::size_t cur = first_failed.load();
      while (b < cur && !first_failed.compare_exchange_weak(cur, b)) {
      }
    }
  };

  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t b = next.fetch_add(1); b < blocks; b = next.fetch_add(1)) run_block(b);
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace gmmdiff
