#pragma once

// Internal seam between the strict-FP ensemble driver (ensemble.cpp) and the
// vectorized per-flow stepping loops (ensemble_kernels.cpp, compiled with
// fast-math so the trig/exp array passes use the SIMD libm). Everything that
// must be exact -- random variates, statistics folding, finiteness checks --
// stays on the strict side and is called from here.

#include <cstdint>

#include "effdiff/ensemble.hpp"
#include "effdiff/rng.hpp"

namespace effdiff::detail {

// Receives positions for a whole block at each scheduled sample, in
// ascending sample order. xs/x0s are `dim` pointers to n-long arrays.
struct BlockSampleSink {
    virtual void on_sample(int sample_idx, const double* const* xs, const double* const* x0s,
                           int n) = 0;
    virtual ~BlockSampleSink() = default;
};

// True when ensemble_kernels.cpp carries a specialized loop for this config
// (catalog flow, splitting scheme, isotropic diffusion).
bool fast_kernel_supported(const SimulationConfig& config);

// Advances particles [block_start, block_start + n) from start to horizon,
// firing the sink at each sample step. Noise and initial positions are drawn
// through the strict helpers below, so both paths consume identical variates.
void run_block_fast(const SimulationConfig& config, long long block_start, int n,
                    const long long* sample_steps, int n_samples, BlockSampleSink& sink);

// --- strict-side helpers (defined in ensemble.cpp) ---

// One RngStream per particle, keyed (master_seed, block_start + i).
void init_block_streams(const SimulationConfig& config, long long block_start, int n,
                        RngStream* streams);

// Draws initial positions (consuming dim uniforms per particle for
// uniform_box, nothing for dirac) and mirrors them into x.
void init_block_positions(const SimulationConfig& config, int n, RngStream* streams,
                          double* const* x, double* const* x0);

// Per-step Brownian increments sqrt(dt) * N(0,1), component-minor order per
// particle (the same order the scalar path consumes them in).
void fill_block_normals(RngStream* streams, int n, int dim, double sqrt_dt, double* const* dw);

}  // namespace effdiff::detail
