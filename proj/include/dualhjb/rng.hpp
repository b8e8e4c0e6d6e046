#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace dualhjb {

/// Philox4x32-10 (Salmon et al., SC'11). Stateless: the output block is a
/// pure function of (counter, key).
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit Philox4x32(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    Block operator()(Block ctr) const {
        std::array<std::uint32_t, 2> k = key_;
        for (int r = 0; r < 10; ++r) {
            const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1], static_cast<std::uint32_t>(p0)};
            k[0] += kW0;
            k[1] += kW1;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;
    std::array<std::uint32_t, 2> key_;
};

/// Uniform in (0, 1) from two 32-bit words (52 bits, midpoint rule).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (std::uint64_t{hi} << 20) | (lo >> 12);
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

/// Normal variates addressed by (path, step, stream) under a fixed seed.
/// Each Philox block yields two normals by Box-Muller.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path, std::uint32_t stream)
        : gen_(seed), path_(path), stream_(stream) {}

    std::array<double, 2> pair(std::uint32_t index) const {
        const auto b = block(index);
        const double u1 = to_open_unit(b[0], b[1]);
        const double u2 = to_open_unit(b[2], b[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

    std::array<double, 2> uniforms(std::uint32_t index) const {
        const auto b = block(index);
        return {to_open_unit(b[0], b[1]), to_open_unit(b[2], b[3])};
    }

private:
    Philox4x32::Block block(std::uint32_t index) const {
        return gen_({index, static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32), stream_});
    }

    Philox4x32 gen_;
    std::uint64_t path_;
    std::uint32_t stream_;
};

}  // namespace dualhjb
