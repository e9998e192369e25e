#pragma once

#include <cstdint>

namespace effdiff {

// Philox4x32-10 counter-based generator (Salmon, Moraes, Dror, Shaw,
// "Parallel random numbers: as easy as 1, 2, 3", SC'11). Each (key, stream)
// pair addresses an independent 2^64-long sequence of 128-bit blocks, so a
// particle's stream is a pure function of (master_seed, particle_index) and
// never depends on how many particles ran before it.
struct Philox4x32 {
    std::uint32_t key0 = 0;
    std::uint32_t key1 = 0;

    void block(std::uint64_t counter, std::uint64_t stream, std::uint32_t out[4]) const;
};

/// One reproducible random stream, keyed on (master_seed, stream_id).
///
/// Uniform variates take 64 bits from a Philox block and map them to
/// (0, 1] as ((x >> 11) + 1) * 2^-53. Normal variates use the Marsaglia
/// polar transform on pairs of uniforms; the spare normal is cached, so
/// draws are strictly sequential within the stream. Given the same libm,
/// the sequence is identical on any platform.
class RngStream {
public:
    RngStream() = default;  // all-zero key/stream; reassign before use
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

    /// Uniform on (0, 1].
    double uniform01();

    /// Standard normal N(0, 1).
    double normal();

    std::uint64_t stream_id() const { return stream_id_; }

private:
    Philox4x32 philox_;
    std::uint64_t stream_id_ = 0;
    std::uint64_t counter_ = 0;
    std::uint32_t buf_[4] = {0, 0, 0, 0};
    int buf_pos_ = 2;       // in units of uint64 pairs; 2 == empty
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;

    std::uint64_t next_u64();
};

/// Stateless seed derivation for sub-experiments (one ensemble per sweep
/// value, per convergence time step, ...). SplitMix64-style finalizer over
/// (master_seed, salt); documented so runs can be reproduced externally.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t salt);

}  // namespace effdiff
