#pragma once

#include <cstdint>
#include <random>

namespace capremu {

/// SplitMix64 finaliser: a bijective avalanche mix of a 64-bit word.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed of substream `index` under `master`. Depends only on the pair, so
/// the assignment of paths to workers cannot change any draw.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Standard-normal source for one Monte Carlo path.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}
    NormalStream(std::uint64_t master, std::uint64_t index)
        : NormalStream(substream_seed(master, index)) {}

    double operator()() { return dist_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace capremu
