#ifndef NMFRANK_RNG_HPP
#define NMFRANK_RNG_HPP

#include <cstdint>
#include <random>

namespace nmfrank {

// splitmix64 finalizer; the basis of all seed derivation in this library.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

// Fold any number of integer tags into a parent seed. Every random stream in
// the library is keyed this way, so results are independent of the order in
// which work items execute.
template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t seed, Tags... tags) {
    std::uint64_t s = splitmix64(seed + 0x9e3779b97f4a7c15ULL);
    ((s = splitmix64(s + 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(tags))), ...);
    return s;
}

// Reserved stream tags. Keeping them in one place guarantees no two uses of
// a master seed ever collide.
enum SeedStream : std::uint64_t {
    kStreamInit = 1,        // NMF initialization, per (rank, start index)
    kStreamBootData = 2,    // bootstrap dataset draws, per replicate
    kStreamBootFit = 3,     // fits on bootstrap replicates, per (replicate, rank)
    kStreamErrorData = 4,   // the one extra dataset behind the pure error sample
    kStreamErrorFit = 5,    // fits on that dataset, per rank
    kStreamMask = 6,        // imputation masks, per repeat
    kStreamImputeFit = 7,   // masked fits, per (repeat, rank)
    kStreamScenario = 8,    // per-replicate simulation draws
    kStreamMethod = 9,      // per-method selection seeds inside run_scenario
    kStreamCvFold = 10,     // penalty cross-validation fold assignment
    kStreamStep = 11,       // per-rank bootstrap master seeds in the sequential tests
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    double normal(double mean = 0.0, double sd = 1.0) {
        return std::normal_distribution<double>(mean, sd)(gen_);
    }
    // std::poisson_distribution requires a strictly positive mean.
    double poisson(double mean) {
        if (mean <= 0.0) return 0.0;
        return static_cast<double>(std::poisson_distribution<long long>(mean)(gen_));
    }
    double gamma(double shape, double rate) {
        return std::gamma_distribution<double>(shape, 1.0 / rate)(gen_);
    }
    std::uint64_t next_u64() { return gen_(); }
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace nmfrank

#endif  // NMFRANK_RNG_HPP
