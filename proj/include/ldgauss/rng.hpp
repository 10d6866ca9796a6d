#pragma once

#include "ldgauss/common.hpp"

#include <array>
#include <cstdint>

namespace ldgauss {

// Counter-based randomness: Philox-4x32 with 10 rounds.
//
// A draw is addressed by (key, stream, counter). The 64-bit key is the user
// seed, the 64-bit stream id separates logically independent consumers, and
// the counter advances one block (= two doubles) per request. Identical
// (seed, stream, counter) triples produce identical output on any platform,
// which is what makes experiment records replayable.
//
// Stream-id conventions used by this library:
//   datagen:  0 for direct draws / component selection, j+1 for mixture
//             component j, 0x53545241 ("STRA") for corruption strategies.
//   decoding: stream ids are derived per worklist branch via derive().
namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
        const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace detail

class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    // Independent child stream; tag choice is up to the caller.
    RngStream derive(std::uint64_t tag) const {
        return RngStream(seed_, detail::splitmix64(stream_ ^ detail::splitmix64(tag)));
    }

    // Uniform in the open interval (0, 1), 53 bits from lanes 0..1.
    double u01() {
        const auto block = next_block();
        return to_unit(block[0], block[1]);
    }

    // Uniform integer in [0, bound) by 64-bit rejection-free scaling;
    // bias is < bound / 2^64 and irrelevant at our scales.
    std::uint64_t uniform_index(std::uint64_t bound) {
        const auto block = next_block();
        const std::uint64_t z = (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(z) * bound) >> 64);
    }

    // Standard normal via Box-Muller; each block yields two values.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const auto block = next_block();
        const double u1 = to_unit(block[0], block[1]);
        const double u2 = to_unit(block[2], block[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::array<std::uint32_t, 4> next_block() {
        const std::array<std::uint32_t, 4> ctr = {
            static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                                  static_cast<std::uint32_t>(seed_ >> 32)};
        ++counter_;
        return detail::philox4x32(ctr, key);
    }

    static double to_unit(std::uint32_t a, std::uint32_t b) {
        const std::uint64_t z = (static_cast<std::uint64_t>(a) << 32) | b;
        return static_cast<double>(z >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace ldgauss
