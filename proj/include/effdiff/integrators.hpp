#pragma once

#include <array>
#include <string>

#include "effdiff/flow.hpp"

namespace effdiff {

/// Unwrapped particle position in R^d plus its start point and clock.
/// Positions are never reduced to the torus: displacement statistics need
/// x(t) - x(0) in R, and the catalog fields are periodic on their own.
struct ParticleState {
    std::array<double, 3> x{};   // current position (first `dim` entries used)
    std::array<double, 3> x0{};  // initial position
    double t = 0.0;
    int dim = 2;
};

/// Constant diffusion: either sigma * I (scalar path, the only one the
/// catalog experiments use) or a full constant d x d matrix.
struct DiffusionSpec {
    bool isotropic = true;
    double sigma = 0.0;                   // isotropic: Sigma = sigma * I
    std::array<double, 9> matrix{};       // row-major d x d, used when !isotropic
    int dim = 2;

    static DiffusionSpec scalar(double sigma, int dim);
    /// Full matrix; throws ConfigError if singular (|det| < 1e-12 * scale).
    static DiffusionSpec full(const double* m, int dim);

    double d0() const { return 0.5 * sigma * sigma; }  // isotropic only

    /// x += Sigma * dW.
    void apply(const double* dw, double* x) const;
};

enum class SchemeKind {
    split2d,  // 2D symplectic Lie-Trotter splitting
    splitnd,  // d-dim volume-preserving sequential sweep
    euler,    // Euler-Maruyama baseline
};

SchemeKind scheme_from_name(const std::string& name);  // throws ConfigError
const char* scheme_name(SchemeKind kind);

/// Deterministic part of the splitting sweep: for i = 1..d in order,
///   x_i += dt * v_i(t_mid, x_1..x_{i-1} already updated, x_{i+1}.. old),
/// with t_mid = t + dt/2 for every sub-update. In 2D this is exactly the
/// symplectic splitting's transport part, so split2d and splitnd share it
/// and agree bitwise. Operates in place on x (length flow.dim).
void splitting_sweep(const Flow& flow, double t, double dt, double* x);

/// One step of the 2D symplectic splitting:
///   x1+ = x1 + v1(t+dt/2, x2) dt + sigma n1
///   x2+ = x2 + v2(t+dt/2, x1+) dt + sigma n2
/// where n = dW is the Brownian increment (already scaled by sqrt(dt)).
ParticleState step_2d_splitting(const ParticleState& s, double dt, const Flow& flow,
                                double sigma, const double* dw);

/// One step of the d-dim volume-preserving splitting: the sequential sweep
/// above, then X+ = X* + Sigma dW. Degenerates to step_2d_splitting for
/// d=2, Sigma = sigma I (bitwise, shared sweep).
ParticleState step_nd_volume_preserving(const ParticleState& s, double dt, const Flow& flow,
                                        const DiffusionSpec& sig, const double* dw);

/// Euler-Maruyama baseline: X+ = X + dt v(t, X) + Sigma dW.
ParticleState step_euler_maruyama(const ParticleState& s, double dt, const Flow& flow,
                                  const DiffusionSpec& sig, const double* dw);

/// Dispatch on kind with zero noise allowed (dw may be all zeros).
ParticleState step(SchemeKind kind, const ParticleState& s, double dt, const Flow& flow,
                   const DiffusionSpec& sig, const double* dw);

/// Central finite-difference Jacobian of the deterministic one-step map
/// x -> x+ (sigma = 0) at (t, x). Row-major d x d into jac.
void deterministic_jacobian(SchemeKind kind, const Flow& flow, double t, const double* x,
                            double dt, double h, double* jac);

/// Determinant of a 2x2 or 3x3 row-major matrix.
double det_small(const double* m, int dim);

}  // namespace effdiff
