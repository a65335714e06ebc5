#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace dnpu {

// All randomness in the project (dopant placement, disorder draws, KMC event
// selection, hypercube sampling) comes from xoshiro256++ generators seeded
// through SplitMix64. The generators are defined by 64-bit integer
// arithmetic only, so the raw streams are identical on every platform.
//
// Sub-seeding scheme: every independent stream is derived from the single
// master seed as
//     sub = splitmix_chain(master, tag, word0, word1, ...)
// where the tag identifies the purpose (see SeedTag) and the words are
// indices such as the sample number. Identical (master, tag, words) always
// yields the identical stream, which is what makes checkpoint resume and
// thread-order independence exact.

namespace detail {
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

enum class SeedTag : std::uint64_t {
    device_placement = 0x01,
    device_disorder = 0x02,
    kmc_replica = 0x03,
    control_draw = 0x04,
    generic = 0x05,
};

inline std::uint64_t derive_seed(std::uint64_t master, SeedTag tag,
                                 std::initializer_list<std::uint64_t> words = {}) {
    std::uint64_t s = master;
    std::uint64_t h = detail::splitmix64_next(s);
    s = h ^ static_cast<std::uint64_t>(tag);
    h = detail::splitmix64_next(s);
    for (std::uint64_t w : words) {
        s = h ^ w;
        h = detail::splitmix64_next(s);
    }
    return h;
}

class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = detail::splitmix64_next(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Exponential with the given rate (mean 1/rate). The argument of log is
    // in (0, 1], so the result is finite and non-negative.
    double exponential(double rate) { return -std::log(1.0 - uniform()) / rate; }

    // Standard normal via Box-Muller; the second variate of each pair is
    // kept so consecutive calls consume one uniform pair per two values.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n). Modulo bias is below 2^-40 for every n used
    // here (n < 2^24).
    int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Draw k distinct integers from [0, n), k << n.
inline std::vector<int> sample_distinct(Xoshiro256pp& rng, int n, int k) {
    std::vector<int> picked;
    picked.reserve(static_cast<std::size_t>(k));
    while (static_cast<int>(picked.size()) < k) {
        const int candidate = rng.below(n);
        bool duplicate = false;
        for (int seen : picked) {
            if (seen == candidate) { duplicate = true; break; }
        }
        if (!duplicate) picked.push_back(candidate);
    }
    return picked;
}

}  // namespace dnpu
