#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace kcs {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless: the output
/// block is a pure function of (counter, key).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Gaussian and uniform variates addressed by (seed, step, index, block).
///
/// Draws for particle i at step n never depend on the order in which particles are
/// visited, which makes stochastic runs independent of the thread count.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    /// Four raw 32-bit words for the given address.
    Philox4x32::Counter raw(std::uint64_t step, std::uint32_t index, std::uint32_t block) const {
        return Philox4x32::generate(
            {index, block, static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)}, key_);
    }

    /// Two uniforms in (0, 1].
    std::array<double, 2> uniforms(std::uint64_t step, std::uint32_t index, std::uint32_t block) const {
        const auto w = raw(step, index, block);
        return {to_unit(w[0], w[1]), to_unit(w[2], w[3])};
    }

    /// Two independent standard normals (Box-Muller).
    std::array<double, 2> normals(std::uint64_t step, std::uint32_t index, std::uint32_t block) const {
        const auto u = uniforms(step, index, block);
        const double radius = std::sqrt(-2.0 * std::log(u[0]));
        const double angle = 2.0 * std::numbers::pi * u[1];
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

private:
    static double to_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
};

}  // namespace kcs
