#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "lqmfg/grid.hpp"

namespace lqmfg
{

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
/// Stateless: the output is a pure function of (counter, key).
struct Philox4x32
{
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t m0 = 0xD2511F53u;
    static constexpr std::uint32_t m1 = 0xCD9E8D57u;
    static constexpr std::uint32_t w0 = 0x9E3779B9u;
    static constexpr std::uint32_t w1 = 0xBB67AE85u;

    static constexpr Counter round(Counter c, Key k)
    {
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }

    static constexpr Counter apply(Counter c, Key k)
    {
        for (int r = 0; r < 10; ++r)
        {
            if (r > 0)
            {
                k[0] += w0;
                k[1] += w1;
            }
            c = round(c, k);
        }
        return c;
    }
};

/// SplitMix64 finalizer, used to mix seeds and indices.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed of Monte-Carlo sample s in a population of size N.
constexpr std::uint64_t sample_seed(std::uint64_t base, std::uint64_t N, std::uint64_t s)
{
    return base ^ splitmix64(splitmix64(N) ^ s);
}

/// Standard normal draws indexed by (seed, stream, index).
///
/// Pair p of a stream is one Philox block with counter (p, stream) and key
/// seed. Its two leading 32-bit word pairs form 64-bit uniforms whose top 53
/// bits feed a Box-Muller transform:
///   u1 = ((w >> 11) + 1) 2^-53 in (0, 1],  u2 = (w' >> 11) 2^-53 in [0, 1),
///   z_{2p} = sqrt(-2 ln u1) cos(2 pi u2),  z_{2p+1} = sqrt(-2 ln u1) sin(2 pi u2).
class NormalStream
{
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    [[nodiscard]] std::array<double, 2> pair(std::uint64_t p) const
    {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(p >> 32),
                                      static_cast<std::uint32_t>(stream_),
                                      static_cast<std::uint32_t>(stream_ >> 32)};
        const Philox4x32::Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
        const auto w = Philox4x32::apply(ctr, key);
        const std::uint64_t a = (static_cast<std::uint64_t>(w[1]) << 32) | w[0];
        const std::uint64_t b = (static_cast<std::uint64_t>(w[3]) << 32) | w[2];
        constexpr double scale = 0x1.0p-53;
        const double u1 = static_cast<double>((a >> 11) + 1) * scale;
        const double u2 = static_cast<double>(b >> 11) * scale;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(th), r * std::sin(th)};
    }

    [[nodiscard]] double operator[](std::uint64_t index) const { return pair(index / 2)[index % 2]; }

    /// Fills out[0..count) with consecutive draws starting at index 0.
    template <class Out>
    void fill(Out&& out, std::size_t count, double scale = 1.0) const
    {
        for (std::size_t p = 0; 2 * p < count; ++p)
        {
            const auto z = pair(p);
            out[2 * p] = scale * z[0];
            if (2 * p + 1 < count)
                out[2 * p + 1] = scale * z[1];
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
};

/// Brownian increments on a grid, N(0, h) each. Stream 0 is the common
/// noise W_0; stream i >= 1 belongs to agent i.
struct NoisePath
{
    TimeGrid grid;
    std::uint64_t seed{0};
    std::uint64_t stream{0};
    Eigen::VectorXd increments;

    static NoisePath generate(const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream)
    {
        NoisePath p{grid, seed, stream, Eigen::VectorXd(static_cast<Eigen::Index>(grid.steps()))};
        NormalStream(seed, stream).fill(p.increments, grid.steps(), std::sqrt(grid.step()));
        return p;
    }

    /// Zero increments (deterministic runs).
    static NoisePath zero(const TimeGrid& grid)
    {
        return {grid, 0, 0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.steps()))};
    }
};

}  // namespace lqmfg
