#pragma once

#include <map>
#include <string>

namespace effdiff {

enum class FlowKind {
    zero,          // v = 0 (any dim; bare diffusion)
    shear2d,       // v = (a sin(k x2), 0)
    chaotic2d,     // time-periodic 2D flow with exponential stream function
    kolmogorov3d,  // v = (sin(x3+e), sin(x1+e), sin(x2+e)), e = eps sin(2 pi t)
    abc3d,         // ABC flow with phase eps sin(2 pi t)
    abc3d_omega,   // ABC flow with phase sin(omega t)
    test_constant,  // v = (A, B[, C]); not in the name catalog, tests only
    test_linear,    // v = (x1, 0); violates the structure checks on purpose
};

/// A velocity field v(t, x) from the built-in catalog, plus the structural
/// metadata (dimension, periodic cell, time period) the runner and the
/// validators need. Plain value type; cheap to copy.
struct Flow {
    FlowKind kind = FlowKind::zero;
    int dim = 2;
    std::string name = "zero";

    // shear2d
    double a = 1.0;
    double k = 1.0;
    // kolmogorov3d / abc3d / abc3d_omega: time phase amplitude
    double eps = 1.0;
    // abc3d / abc3d_omega
    double A = 1.0;
    double B = 1.0;
    double C = 1.0;
    // abc3d_omega: phase(t) = sin(omega t)
    double omega = 1.0;

    /// Component i of the velocity at time t, position x (length dim).
    double component(int i, double t, const double* x) const;

    /// All components at once.
    void velocity(double t, const double* x, double* v) const;

    /// Period of the flow in coordinate direction i (every catalog entry is
    /// periodic in space; zero flow reports 2 pi for a harmless cell).
    double spatial_period(int i) const;

    /// Temporal period, or 0 for autonomous fields.
    double time_period() const;
};

/// Build a catalog flow by name with parameter overrides. Valid names:
/// zero, shear2d, chaotic2d, kolmogorov3d, abc3d, abc3d_omega. Optional
/// "dim" override is accepted for zero (2 or 3). Unknown names or
/// parameters throw ConfigError.
Flow make_flow(const std::string& name, const std::map<std::string, double>& params = {});

/// Diagnostics from check_structure. All three should be ~0 (finite-difference
/// truncation / quadrature error) for catalog flows.
struct StructureReport {
    double max_abs_divergence = 0.0;   // central-difference div v over samples
    double max_abs_diag_jacobian = 0.0;  // max |dv_i/dx_i| (schemes assume 0)
    double max_abs_mean = 0.0;  // max | per-line average of v_i | (mean-zero)
};

/// Samples (t, x) quasi-randomly over one space-time cell and measures how
/// far the field is from the structural assumptions the splitting schemes
/// rely on: divergence-free, dv_i/dx_i = 0, and mean-zero along each
/// component's own periodic line (composite trapezoid, 1024 nodes).
/// Derivatives use central differences with step h.
StructureReport check_structure(const Flow& flow, int n_samples, double h);

}  // namespace effdiff
