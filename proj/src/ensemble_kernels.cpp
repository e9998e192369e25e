// Per-flow blocked stepping loops. This translation unit is compiled with
// fast-math so the array passes over a block auto-vectorize against the SIMD
// libm; do not put RNG, statistics, or finiteness checks here (they live on
// the strict side, see ensemble_kernels.hpp).

#include <array>
#include <cmath>
#include <numbers>

#include "ensemble_kernels.hpp"

namespace effdiff::detail {

namespace {

constexpr int kB = kEnsembleBlock;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Arrays {
    alignas(64) double x[3][kB];
    alignas(64) double x0[3][kB];
    alignas(64) double dw[3][kB];
};

void sweep_shear2d(int n, double a, double k, double dt, double* x1, const double* x2) {
    for (int i = 0; i < n; ++i) x1[i] += a * std::sin(k * x2[i]) * dt;
}

void sweep_chaotic2d(int n, double tm, double dt, double* x1, double* x2) {
    const double phase = std::sin(kTwoPi * tm);
    alignas(64) double arg[kB];
    for (int i = 0; i < n; ++i) arg[i] = 4.0 * x2[i] + 1.0 + phase;
    for (int i = 0; i < n; ++i) x1[i] += std::sin(arg[i]) * std::exp(std::cos(arg[i])) * dt;
    for (int i = 0; i < n; ++i) arg[i] = 2.0 * x1[i] + phase;
    for (int i = 0; i < n; ++i) x2[i] += std::cos(arg[i]) * std::exp(std::sin(arg[i])) * dt;
}

void sweep_kolmogorov(int n, double e, double dt, double* x1, double* x2, double* x3) {
    for (int i = 0; i < n; ++i) x1[i] += std::sin(x3[i] + e) * dt;
    for (int i = 0; i < n; ++i) x2[i] += std::sin(x1[i] + e) * dt;
    for (int i = 0; i < n; ++i) x3[i] += std::sin(x2[i] + e) * dt;
}

void sweep_abc(int n, double e, double dt, double A, double B, double C, double* x1, double* x2,
               double* x3) {
    for (int i = 0; i < n; ++i) x1[i] += (A * std::sin(x3[i] + e) + C * std::cos(x2[i] + e)) * dt;
    for (int i = 0; i < n; ++i) x2[i] += (B * std::sin(x1[i] + e) + A * std::cos(x3[i] + e)) * dt;
    for (int i = 0; i < n; ++i) x3[i] += (C * std::sin(x2[i] + e) + B * std::cos(x1[i] + e)) * dt;
}

}  // namespace

bool fast_kernel_supported(const SimulationConfig& config) {
    if (config.scheme == SchemeKind::euler) return false;
    if (!config.diffusion.isotropic) return false;
    switch (config.flow.kind) {
        case FlowKind::zero:
        case FlowKind::shear2d:
        case FlowKind::chaotic2d:
        case FlowKind::kolmogorov3d:
        case FlowKind::abc3d:
        case FlowKind::abc3d_omega:
            return true;
        default:
            return false;
    }
}

void run_block_fast(const SimulationConfig& config, long long block_start, int n,
                    const long long* sample_steps, int n_samples, BlockSampleSink& sink) {
    const Flow& flow = config.flow;
    const int d = flow.dim;
    Arrays a;
    std::array<RngStream, kB> streams;
    double* xs[3] = {a.x[0], a.x[1], a.x[2]};
    double* x0s[3] = {a.x0[0], a.x0[1], a.x0[2]};
    double* dws[3] = {a.dw[0], a.dw[1], a.dw[2]};

    init_block_streams(config, block_start, n, streams.data());
    init_block_positions(config, n, streams.data(), xs, x0s);

    const double dt = config.dt;
    const double sqrt_dt = std::sqrt(dt);
    const double sigma = config.diffusion.sigma;
    const double t0 = config.start_time;
    const long long n_steps = config.n_steps();
    int next = 0;

    for (long long stepno = 0; stepno < n_steps; ++stepno) {
        fill_block_normals(streams.data(), n, d, sqrt_dt, dws);
        const double tm = t0 + (stepno + 0.5) * dt;
        switch (flow.kind) {
            case FlowKind::zero:
                break;
            case FlowKind::shear2d:
                sweep_shear2d(n, flow.a, flow.k, dt, a.x[0], a.x[1]);
                break;
            case FlowKind::chaotic2d:
                sweep_chaotic2d(n, tm, dt, a.x[0], a.x[1]);
                break;
            case FlowKind::kolmogorov3d:
                sweep_kolmogorov(n, flow.eps * std::sin(kTwoPi * tm), dt, a.x[0], a.x[1], a.x[2]);
                break;
            case FlowKind::abc3d:
                sweep_abc(n, flow.eps * std::sin(kTwoPi * tm), dt, flow.A, flow.B, flow.C, a.x[0],
                          a.x[1], a.x[2]);
                break;
            case FlowKind::abc3d_omega:
                sweep_abc(n, std::sin(flow.omega * tm), dt, flow.A, flow.B, flow.C, a.x[0], a.x[1],
                          a.x[2]);
                break;
            default:
                break;
        }
        for (int c = 0; c < d; ++c) {
            double* x = a.x[c];
            const double* dw = a.dw[c];
            for (int i = 0; i < n; ++i) x[i] += sigma * dw[i];
        }
        if (next < n_samples && stepno + 1 == sample_steps[next]) {
            sink.on_sample(next, xs, x0s, n);
            ++next;
        }
    }
}

}  // namespace effdiff::detail
