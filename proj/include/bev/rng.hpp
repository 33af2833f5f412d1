#pragma once

#include <cstdint>

// PCG XSL-RR 128/64 with Box-Muller normals. Hand-rolled so datasets are
// reproducible across implementations; the algorithm identity is recorded
// in each dataset's meta file.

namespace bev {

class Pcg64 {
public:
    explicit Pcg64(std::uint64_t seed, std::uint64_t stream = 0) {
        state_ = 0;
        inc_ = (static_cast<u128>(stream) << 1) | 1u;
        next_u64();
        state_ += seed;
        next_u64();
    }

    std::uint64_t next_u64() {
        state_ = state_ * kMult + inc_;
        const std::uint64_t xored =
            static_cast<std::uint64_t>(state_ >> 64) ^ static_cast<std::uint64_t>(state_);
        const unsigned rot = static_cast<unsigned>(state_ >> 122);
        return (xored >> rot) | (xored << ((-rot) & 63u));
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (pairs cached).
    double normal();

private:
    using u128 = unsigned __int128;
    static constexpr u128 kMult =
        (static_cast<u128>(0x2360ed051fc65da4ULL) << 64) | 0x4385df649fccf645ULL;
    u128 state_ = 0;
    u128 inc_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace bev
