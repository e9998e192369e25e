#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "effdiff/ensemble.hpp"

namespace effdiff {

/// Effective-diffusivity matrix time series with standard errors.
/// D_ij(t_k) = E[delta_i delta_j] / (2 t_k); SE from the spread of the 32
/// particle-batch means (robust to heavy-tailed displacements at small D0).
struct DiffusivityReport {
    int dim = 0;
    long long n_particles = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t master_seed = 0;
    bool is_reference = false;
    std::vector<double> times;
    std::vector<std::array<double, 6>> d;    // upper triangle per time
    std::vector<std::array<double, 6>> se;   // matching standard errors

    double d_at(int time_idx, int i, int j) const;
    double se_at(int time_idx, int i, int j) const;
    double final_d11() const { return d_at(static_cast<int>(times.size()) - 1, 0, 0); }
    double final_se11() const { return se_at(static_cast<int>(times.size()) - 1, 0, 0); }
};

DiffusivityReport effective_diffusivity(const EnsembleStatistics& stats);

/// Ordinary least squares on (log u, log w).
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;                  // in log space
    double residual_norm = 0.0;              // sqrt(sum of squared log residuals)
    double r2 = 0.0;
    int n_points = 0;
};

/// Throws RunError if fewer than 2 distinct abscissae or any coordinate
/// is not strictly positive.
SlopeFit fit_loglog(const std::vector<std::pair<double, double>>& points);

/// How runs are produced. Studies depend only on this signature, so tests
/// inject synthetic runners and the CLI injects run_ensemble +
/// effective_diffusivity with its own RunOptions.
using EnsembleRunner = std::function<DiffusivityReport(const SimulationConfig&)>;

/// run_ensemble -> effective_diffusivity with the given options.
EnsembleRunner make_default_runner(const RunOptions& opts = {});

struct PlateauParams {
    int window = 8;                          // consecutive sample times
    double rho = 0.05;                       // relative-change tolerance
};

struct PlateauDetection {
    bool mixed = false;
    double t_mix = 0.0;                      // valid when mixed
    int start_index = -1;                    // index of t_mix in report.times
};

/// Earliest sample time after which the relative change of D11 over every
/// window of `window` consecutive samples stays below rho. "Not mixed" is a
/// valid result (ballistic/growing reports).
PlateauDetection detect_plateau(const DiffusivityReport& report, const PlateauParams& p = {});

struct ConvergencePoint {
    double dt = 0.0;
    double d11 = 0.0;
    double se11 = 0.0;
    double error = 0.0;                      // |d11 - d11_ref|
    bool noise_dominated = false;            // excluded from the fit
};

struct ConvergenceStudy {
    std::vector<ConvergencePoint> points;    // in the order given
    double ref_dt = 0.0;
    double ref_d11 = 0.0;
    double ref_se11 = 0.0;
    SlopeFit fit;                            // over non-excluded (dt, error)
    int n_used = 0;
};

/// Runs base_config at each dt plus at ref_dt (which must be at least 8x
/// smaller than min(dt_list)), compares final D11 values, and fits the
/// log-log error slope. Each dt gets an independent seed derived from the
/// base seed. A point is flagged noise-dominated and excluded when
/// |D(dt) - D(ref)| < 2 (SE(dt) + SE(ref)).
ConvergenceStudy convergence_study(const SimulationConfig& base, const std::vector<double>& dt_list,
                                   double ref_dt, const EnsembleRunner& runner);

enum class SweepParameter { d0, eps, omega };

SweepParameter sweep_parameter_from_name(const std::string& name);  // "d0"|"eps"|"omega"
const char* sweep_parameter_name(SweepParameter p);

struct SweepPoint {
    double value = 0.0;
    double d11 = 0.0;
    double se11 = 0.0;
    bool mixed = false;
    double t_mix = 0.0;
};

struct SweepResult {
    SweepParameter parameter = SweepParameter::d0;
    std::vector<SweepPoint> points;
    bool has_fit = false;                    // log-log (value, D11), D0 sweeps only
    SlopeFit fit;
};

/// One full ensemble per value (independent derived seeds), collated with
/// plateau detection. D0 sweeps set sigma = sqrt(2 value) and also report
/// the log-log enhancement slope of D11 against D0.
SweepResult sweep(const SimulationConfig& base, SweepParameter param, const std::vector<double>& values,
                  const EnsembleRunner& runner, const PlateauParams& plateau = {});

}  // namespace effdiff
