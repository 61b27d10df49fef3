#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace polyterm {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
/// pure function of (key, counter), which is what makes per-path streams
/// independent of scheduling.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }

private:
    static Block single_round(const Block& c, const Key& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Standard normal draws for one (seed, stream, path). Each Philox block
/// yields two uniforms and, through Box-Muller, two normals.
class PathNormals {
public:
    PathNormals(std::uint64_t seed, std::uint64_t path, std::uint32_t stream = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_(path), stream_(stream) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        auto block = Philox4x32::generate({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(path_),
                                           static_cast<std::uint32_t>(path_ >> 32), stream_},
                                          key_);
        ++counter_;
        const double u1 = to_unit(block[0], block[1]);
        const double u2 = to_unit(block[2], block[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Uniform in the open interval (0, 1) from 52 random bits; the largest
    /// value is 1 - 2^-53, so log(u) never vanishes.
    static double to_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
    }

private:
    Philox4x32::Key key_;
    std::uint64_t path_;
    std::uint32_t stream_;
    std::uint32_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace polyterm
