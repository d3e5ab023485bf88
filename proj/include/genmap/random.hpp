#pragma once

// Seeded random streams and a deterministic chunked parallel-for.
//
// Every Monte Carlo estimator splits its n draws into a fixed number of
// chunks. Chunk c draws from the engine of (seed, stream, c); partial sums
// are merged in chunk order. Results therefore depend on (seed, stream, n)
// only, never on the number of worker threads.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace genmap {

struct RngSpec {
    std::uint64_t seed = 42;
    std::uint64_t stream = 0;

    friend bool operator==(const RngSpec&, const RngSpec&) = default;
};

using Engine = std::mt19937_64;

/// Engine for (spec, substream). Identical arguments give identical draws.
[[nodiscard]] inline Engine make_engine(const RngSpec& spec, std::uint64_t substream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(spec.stream), static_cast<std::uint32_t>(spec.stream >> 32),
                      static_cast<std::uint32_t>(substream), static_cast<std::uint32_t>(substream >> 32)};
    return Engine(seq);
}

/// Derived stream for nested experiments, e.g. (row, replicate) pairs.
[[nodiscard]] inline RngSpec derive(const RngSpec& spec, std::uint64_t a, std::uint64_t b = 0) {
    // splitmix64 finalizer over the packed indices
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return RngSpec{spec.seed, mix(mix(spec.stream ^ mix(a)) ^ b)};
}

/// xi ~ U[-1, 1].
[[nodiscard]] inline double uniform_pm1(Engine& eng) {
    return std::uniform_real_distribution<double>(-1.0, 1.0)(eng);
}

/// Worker count: explicit value, else GENMAP_THREADS, else hardware concurrency.
[[nodiscard]] inline unsigned resolve_threads(unsigned requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GENMAP_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline constexpr std::size_t kMonteCarloChunks = 64;

/// Samples assigned to chunk c when n draws are split into `chunks` parts.
[[nodiscard]] inline std::size_t chunk_size(std::size_t n, std::size_t chunks, std::size_t c) {
    return n / chunks + (c < n % chunks ? 1 : 0);
}

/// Runs fn(c) for c in [0, chunks) on up to `threads` workers.
/// Exceptions thrown by fn are rethrown (first one wins).
template <class Fn>
void parallel_chunks(std::size_t chunks, unsigned threads, Fn&& fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), chunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) fn(c);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t c = w; c < chunks; c += workers) {
                try {
                    fn(c);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace genmap
