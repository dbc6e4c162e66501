// Seeded random streams with independent named substreams.
#pragma once

#include <concepts>
#include <cstdint>
#include <random>
#include <string_view>

namespace qguard {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

// Anything that can answer a biased coin flip. Stochastic steps are written
// against this so tests can force outcomes.
template <class R>
concept CoinSource = requires(R r, double p) {
    { r.bernoulli(p) } -> std::convertible_to<bool>;
};

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(detail::splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    // Substreams depend only on (seed, name, index), never on how much of the
    // parent stream has been consumed.
    RandomStream substream(std::string_view name, std::uint64_t index = 0) const {
        std::uint64_t s = detail::splitmix64(seed_ ^ detail::fnv1a(name));
        s = detail::splitmix64(s ^ detail::splitmix64(index + 0x51ed2701ULL));
        return RandomStream{s};
    }

    double uniform() { return std::uniform_real_distribution<double>{0.0, 1.0}(engine_); }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>{lo, hi}(engine_); }

    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>{lo, hi}(engine_); }

    bool bernoulli(double p) {
        if (p >= 1.0) return true;
        if (p <= 0.0) return false;
        return uniform() < p;
    }

    double normal(double mean, double sd) {
        if (sd <= 0.0) return mean;
        return std::normal_distribution<double>{mean, sd}(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

// Coin source with a fixed answer.
struct ForcedCoin {
    bool outcome = true;
    bool bernoulli(double) const { return outcome; }
};

} // namespace qguard
