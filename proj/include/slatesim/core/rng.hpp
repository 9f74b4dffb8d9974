#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace slatesim {

    using Rng = std::mt19937_64;

    inline std::uint64_t splitmix64(std::uint64_t x)
    {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    inline std::uint64_t fnv1a(std::string_view text)
    {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (unsigned char c : text) {
            h ^= c;
            h *= 0x100000001B3ULL;
        }
        return h;
    }

    /// Stable substream seed for (master, stage, index). Independent of platform.
    inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index = 0)
    {
        return splitmix64(splitmix64(master ^ fnv1a(stage)) + splitmix64(index + 0x632BE59BD9B4E019ULL));
    }

    /// Uniform in [0, 1) from the top 53 bits; consumes exactly one engine draw.
    inline double uniform01(Rng& rng)
    {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }

    /// Box-Muller without caching, so every call consumes exactly two draws.
    inline double standard_normal(Rng& rng)
    {
        double u1 = uniform01(rng);
        const double u2 = uniform01(rng);
        if (u1 < 1e-300)
            u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    inline std::size_t uniform_index(Rng& rng, std::size_t n)
    {
        return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
    }

} // namespace slatesim
