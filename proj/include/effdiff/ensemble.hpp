#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "effdiff/flow.hpp"
#include "effdiff/integrators.hpp"

namespace effdiff {

struct InitialDistribution {
    enum class Kind { dirac, uniform_box };
    Kind kind = Kind::dirac;
    std::array<double, 3> point{};           // dirac
    std::array<double, 3> lo{};              // uniform_box, per dimension
    std::array<double, 3> hi{};
};

/// Everything needed to reproduce one ensemble run. Bitwise reproducibility
/// contract: the result is a pure function of this struct (given the same
/// build), independent of worker count and of whether the run was
/// checkpointed and resumed.
struct SimulationConfig {
    Flow flow;
    SchemeKind scheme = SchemeKind::split2d;
    DiffusionSpec diffusion;
    double dt = 0.0;
    double horizon = 0.0;                    // T; run covers [start_time, start_time + T]
    double start_time = 0.0;
    long long n_particles = 0;
    std::uint64_t master_seed = 0;
    bool seed_set = false;                   // no silent default seed
    InitialDistribution initial;
    std::vector<double> sample_times;        // empty -> default 64 log-spaced times

    /// Throws ConfigError on any violation (dt <= 0, T/dt out of integer
    /// range, box bounds inverted, missing seed, flow/scheme mismatch...).
    /// Warns on stderr when dt does not divide a time-periodic flow's period.
    void validate() const;

    long long n_steps() const;               // round(T / dt)

    /// Sampling schedule resolved to step boundaries: requested times
    /// (or the default log-spaced schedule from max(dt, T/1e4) to T) snapped
    /// to the nearest step, deduplicated, strictly increasing, > 0.
    std::vector<long long> sample_steps() const;

    /// FNV-1a 64 over a canonical text rendering of every field above.
    /// Stamped into CSV headers and checkpoints.
    std::uint64_t fingerprint() const;
};

/// Streaming mean/comoment accumulator for displacement vectors at one
/// (sample time, particle batch) cell. Welford updates per particle,
/// Chan's formula for merging partials; both in a fixed order so results
/// are bitwise independent of scheduling.
struct MomentAccumulator {
    long long n = 0;
    std::array<double, 3> mean{};
    std::array<double, 6> m2{};              // central comoments, upper triangle

    void add(const double* delta, int dim);
    void merge(const MomentAccumulator& other, int dim);

    /// E[delta_i delta_j] = m2/n + mean_i mean_j (raw second moment).
    double raw_second(int i, int j, int dim) const;

    static int tri_index(int i, int j, int dim);  // i <= j upper triangle
};

/// Per-sample-time displacement statistics over the whole ensemble,
/// bucketed into 32 particle batches (batch = index mod 32) so standard
/// errors can be taken over batch means.
struct EnsembleStatistics {
    int dim = 0;
    int n_batches = 32;
    long long n_particles = 0;
    std::vector<double> times;               // snapped sample times (absolute offsets from start)
    std::vector<MomentAccumulator> cells;    // times.size() * n_batches, time-major
    std::uint64_t config_hash = 0;
    std::uint64_t master_seed = 0;

    MomentAccumulator& cell(int time_idx, int batch) { return cells[static_cast<size_t>(time_idx) * n_batches + batch]; }
    const MomentAccumulator& cell(int time_idx, int batch) const { return cells[static_cast<size_t>(time_idx) * n_batches + batch]; }

    /// All batches of one sample time merged (in batch order).
    MomentAccumulator combined(int time_idx) const;
};

struct RunOptions {
    int workers = 0;                         // 0 = hardware concurrency
    std::string checkpoint_path;             // empty = no checkpointing
    long long checkpoint_interval = 0;       // particles between snapshots (0 = off)
    bool resume = true;                      // reuse checkpoint_path if present and compatible
    bool progress = false;                   // throughput logging to stderr
    bool force_scalar = false;               // skip the vectorized kernels (tests)
};

/// Drives one particle from start_time over n_steps() steps and records the
/// unwrapped displacement x(t_k) - x(0) at each sample step into `out`
/// (sample-major, dim columns). Pure function of (config, index).
void run_particle(const SimulationConfig& config, long long particle_index, double* out);

/// Runs the full ensemble. Work is split into fixed 512-particle blocks
/// claimed by workers; per-block partial statistics are merged strictly in
/// block order, so the result is bitwise identical for any worker count.
/// Throws RunError with particle index and step on non-finite states.
EnsembleStatistics run_ensemble(const SimulationConfig& config, const RunOptions& opts = {});

/// Fixed block size underpinning the determinism and checkpoint layout.
inline constexpr int kEnsembleBlock = 512;
inline constexpr int kEnsembleBatches = 32;

/// Wall-clock metrics from the most recent run_ensemble call on this thread
/// (for manifests; not part of the reproducible surface).
struct RunMetrics {
    double wall_seconds = 0.0;
    double particle_steps_per_second = 0.0;
    long long particle_steps = 0;
};
RunMetrics last_run_metrics();

}  // namespace effdiff
