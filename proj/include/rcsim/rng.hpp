#pragma once

#include <cstdint>
#include <random>

namespace rcsim
{
    inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    inline constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept
    {
        return splitmix64(seed ^ splitmix64(salt));
    }

    // mt19937_64 output is fixed by the standard; the distribution adaptors are
    // not, so uniform draws are derived by hand to stay identical across
    // standard libraries.
    class RngStream
    {
    public:
        explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

        std::uint64_t seed() const noexcept { return seed_; }
        std::uint64_t next_u64() { return engine_(); }

        // [0, 1)
        double next_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
        double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

        // [0, n)
        std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    private:
        std::uint64_t seed_;
        std::mt19937_64 engine_;
    };
} // namespace rcsim
