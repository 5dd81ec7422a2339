// Counter-based random streams.
//
// Every trajectory owns a stream identified by (master_seed, stream_id), and a
// stream can be split into numbered substreams. Output depends only on those
// identifiers and the draw count, never on which thread consumes it, so serial
// and parallel runs produce bit-identical trajectories.
//
// Generator: Philox4x32-10 (Salmon et al., SC'11).
//   key     = master_seed (64 bit)
//   counter = {block index, substream, stream_id lo, stream_id hi}
// Normals use the Box-Muller transform on two 53-bit uniforms in (0,1); one
// Philox block yields exactly one pair of normals.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace ptw {

namespace detail {

inline std::pair<std::uint32_t, std::uint32_t> mulhilo32(std::uint32_t a, std::uint32_t b) noexcept {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    return {static_cast<std::uint32_t>(p >> 32), static_cast<std::uint32_t>(p)};
}

} // namespace detail

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds.
inline PhiloxBlock philox4x32_10(PhiloxBlock ctr, PhiloxKey key) noexcept {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const auto [hi0, lo0] = detail::mulhilo32(kM0, ctr[0]);
        const auto [hi1, lo1] = detail::mulhilo32(kM1, ctr[2]);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id, std::uint32_t substream = 0) noexcept
        : master_seed_(master_seed), stream_id_(stream_id), substream_(substream) {}

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint32_t substream_index() const noexcept { return substream_; }

    /// Fresh stream on the same trajectory, independent of this one for k != substream_index().
    RngStream substream(std::uint32_t k) const noexcept { return RngStream(master_seed_, stream_id_, k); }

    std::uint32_t next_u32() {
        if (word_ == 4) refill();
        return buffer_[word_++];
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() {
        const std::uint64_t hi = next_u32();
        const std::uint64_t lo = next_u32();
        const std::uint64_t bits = ((hi << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    /// Two independent standard normals (Box-Muller).
    std::pair<double, double> normal_pair() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phase = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(phase), r * std::sin(phase)};
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const auto [z1, z2] = normal_pair();
        spare_ = z2;
        has_spare_ = true;
        return z1;
    }

private:
    void refill() {
        if (block_ == UINT32_MAX) throw std::overflow_error("RngStream: counter space exhausted");
        const PhiloxBlock ctr{block_++, substream_, static_cast<std::uint32_t>(stream_id_),
                              static_cast<std::uint32_t>(stream_id_ >> 32)};
        const PhiloxKey key{static_cast<std::uint32_t>(master_seed_),
                            static_cast<std::uint32_t>(master_seed_ >> 32)};
        buffer_ = philox4x32_10(ctr, key);
        word_ = 0;
    }

    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::uint32_t substream_;
    std::uint32_t block_ = 0;
    PhiloxBlock buffer_{};
    int word_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ptw
