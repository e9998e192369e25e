#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "effdiff/analysis.hpp"

namespace effdiff {

/// Header-comment fields stamped into every CSV so each file is
/// self-describing. All values are deterministic functions of the config;
/// wall-clock data lives only in the manifest.
struct CsvMeta {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    double dt = 0.0;
    long long n_particles = 0;
};

/// Columns: t, D11, SE11, D12, SE12, ..., Ddd, SEdd (upper triangle,
/// row-major order).
void write_timeseries_csv(const std::string& path, const DiffusivityReport& report, const CsvMeta& meta);

/// Single-row summary at the final sample time plus plateau detection.
void write_final_csv(const std::string& path, const DiffusivityReport& report,
                     const PlateauDetection& plateau, const CsvMeta& meta);

/// Columns: dt, D11, SE11, error, noise_dominated; reference values and the
/// fitted slope go into header comments.
void write_convergence_csv(const std::string& path, const ConvergenceStudy& study, const CsvMeta& meta);

/// Columns: value, D11, SE11, mixed, t_mix; slope (when fitted) in header.
void write_sweep_csv(const std::string& path, const SweepResult& result, const CsvMeta& meta);

struct ManifestInfo {
    std::uint64_t config_hash = 0;
    std::string version;
    double wall_seconds = 0.0;
    double particle_steps_per_second = 0.0;
    std::vector<std::string> outputs;
};

/// Plain-text run manifest (key = value lines + output file list).
void write_manifest(const std::string& path, const ManifestInfo& info);

/// Shortest representation that round-trips a double (%.17g trimmed).
std::string format_double(double v);

}  // namespace effdiff
