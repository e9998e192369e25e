#include "effdiff/rng.hpp"

#include <cmath>

namespace effdiff {

namespace {

inline void philox_round(std::uint32_t& c0, std::uint32_t& c1, std::uint32_t& c2,
                         std::uint32_t& c3, std::uint32_t k0, std::uint32_t k1) {
    const std::uint64_t m0 = 0xD2511F53ull * c0;
    const std::uint64_t m1 = 0xCD9E8D57ull * c2;
    const std::uint32_t h0 = static_cast<std::uint32_t>(m0 >> 32);
    const std::uint32_t l0 = static_cast<std::uint32_t>(m0);
    const std::uint32_t h1 = static_cast<std::uint32_t>(m1 >> 32);
    const std::uint32_t l1 = static_cast<std::uint32_t>(m1);
    c0 = h1 ^ c1 ^ k0;
    c1 = l1;
    c2 = h0 ^ c3 ^ k1;
    c3 = l0;
}

}  // namespace

void Philox4x32::block(std::uint64_t counter, std::uint64_t stream, std::uint32_t out[4]) const {
    std::uint32_t c0 = static_cast<std::uint32_t>(counter);
    std::uint32_t c1 = static_cast<std::uint32_t>(counter >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(stream);
    std::uint32_t c3 = static_cast<std::uint32_t>(stream >> 32);
    std::uint32_t k0 = key0;
    std::uint32_t k1 = key1;
    for (int r = 0; r < 10; ++r) {
        philox_round(c0, c1, c2, c3, k0, k1);
        k0 += 0x9E3779B9u;  // round-key Weyl increments from the Philox paper
        k1 += 0xBB67AE85u;
    }
    out[0] = c0;
    out[1] = c1;
    out[2] = c2;
    out[3] = c3;
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id) : stream_id_(stream_id) {
    philox_.key0 = static_cast<std::uint32_t>(master_seed);
    philox_.key1 = static_cast<std::uint32_t>(master_seed >> 32);
}

std::uint64_t RngStream::next_u64() {
    if (buf_pos_ >= 2) {
        philox_.block(counter_++, stream_id_, buf_);
        buf_pos_ = 0;
    }
    const int i = 2 * buf_pos_++;
    return (static_cast<std::uint64_t>(buf_[i]) << 32) | buf_[i + 1];
}

double RngStream::uniform01() {
    // 53 random bits, then shift into (0, 1]; never returns 0 so log() is safe.
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    for (;;) {
        const double u = 2.0 * uniform01() - 1.0;
        const double v = 2.0 * uniform01() - 1.0;
        const double s = u * u + v * v;
        if (s < 1.0 && s > 0.0) {
            const double f = std::sqrt(-2.0 * std::log(s) / s);
            cached_normal_ = v * f;
            has_cached_normal_ = true;
            return u * f;
        }
    }
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t salt) {
    // SplitMix64 finalizer over the combined words; good avalanche, stateless.
    std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace effdiff
