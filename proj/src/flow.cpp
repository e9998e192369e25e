#include "effdiff/flow.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "effdiff/errors.hpp"

namespace effdiff {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double frac(double v) { return v - std::floor(v); }

}  // namespace

double Flow::component(int i, double t, const double* x) const {
    switch (kind) {
        case FlowKind::zero:
            return 0.0;
        case FlowKind::shear2d:
            return i == 0 ? a * std::sin(k * x[1]) : 0.0;
        case FlowKind::chaotic2d: {
            const double s = std::sin(kTwoPi * t);
            if (i == 0) {
                const double arg = 4.0 * x[1] + 1.0 + s;
                return std::sin(arg) * std::exp(std::cos(arg));
            }
            const double arg = 2.0 * x[0] + s;
            return std::cos(arg) * std::exp(std::sin(arg));
        }
        case FlowKind::kolmogorov3d: {
            const double e = eps * std::sin(kTwoPi * t);
            // v = (sin(x3+e), sin(x1+e), sin(x2+e))
            return std::sin(x[(i + 2) % 3] + e);
        }
        case FlowKind::abc3d:
        case FlowKind::abc3d_omega: {
            const double e = kind == FlowKind::abc3d ? eps * std::sin(kTwoPi * t)
                                                     : std::sin(omega * t);
            // v_i = S_i sin(x_{i+2} + e) + C_i cos(x_{i+1} + e), indices mod 3,
            // with S = (A,B,C) and C = (C,A,B).
            const double cs[3] = {A, B, C};
            const double cc[3] = {C, A, B};
            return cs[i] * std::sin(x[(i + 2) % 3] + e) + cc[i] * std::cos(x[(i + 1) % 3] + e);
        }
        case FlowKind::test_constant: {
            const double c[3] = {A, B, C};
            return c[i];
        }
        case FlowKind::test_linear:
            return i == 0 ? x[0] : 0.0;
    }
    return 0.0;
}

void Flow::velocity(double t, const double* x, double* v) const {
    for (int i = 0; i < dim; ++i) v[i] = component(i, t, x);
}

double Flow::spatial_period(int i) const {
    switch (kind) {
        case FlowKind::shear2d:
            return kTwoPi / k;  // only x2 matters; constant in x1
        case FlowKind::chaotic2d:
            // v2's argument is 2 x1, v1's is 4 x2.
            return i == 0 ? std::numbers::pi : std::numbers::pi / 2.0;
        default:
            return kTwoPi;
    }
}

double Flow::time_period() const {
    switch (kind) {
        case FlowKind::chaotic2d:
            return 1.0;
        case FlowKind::kolmogorov3d:
        case FlowKind::abc3d:
            return eps != 0.0 ? 1.0 : 0.0;
        case FlowKind::abc3d_omega:
            return omega != 0.0 ? kTwoPi / omega : 0.0;
        default:
            return 0.0;
    }
}

Flow make_flow(const std::string& name, const std::map<std::string, double>& params) {
    Flow f;
    f.name = name;
    std::set<std::string> allowed;
    if (name == "zero") {
        f.kind = FlowKind::zero;
        f.dim = 2;
        allowed = {"dim"};
    } else if (name == "shear2d") {
        f.kind = FlowKind::shear2d;
        f.dim = 2;
        f.a = 1.0;
        f.k = 1.0;
        allowed = {"a", "k"};
    } else if (name == "chaotic2d") {
        f.kind = FlowKind::chaotic2d;
        f.dim = 2;
    } else if (name == "kolmogorov3d") {
        f.kind = FlowKind::kolmogorov3d;
        f.dim = 3;
        f.eps = 1.0;
        allowed = {"eps"};
    } else if (name == "abc3d") {
        f.kind = FlowKind::abc3d;
        f.dim = 3;
        f.eps = 1.0;
        allowed = {"A", "B", "C", "eps"};
    } else if (name == "abc3d_omega") {
        f.kind = FlowKind::abc3d_omega;
        f.dim = 3;
        f.omega = 1.0;
        allowed = {"A", "B", "C", "omega"};
    } else {
        throw ConfigError("unknown flow '" + name +
                          "' (catalog: zero, shear2d, chaotic2d, kolmogorov3d, abc3d, abc3d_omega)");
    }
    for (const auto& [key, value] : params) {
        if (!allowed.count(key))
            throw ConfigError("flow '" + name + "' does not take parameter '" + key + "'");
        if (key == "dim") {
            if (value != 2.0 && value != 3.0) throw ConfigError("zero flow dim must be 2 or 3");
            f.dim = static_cast<int>(value);
        } else if (key == "a") {
            f.a = value;
        } else if (key == "k") {
            if (value <= 0.0) throw ConfigError("shear2d wavenumber k must be > 0");
            f.k = value;
        } else if (key == "eps") {
            f.eps = value;
        } else if (key == "A") {
            f.A = value;
        } else if (key == "B") {
            f.B = value;
        } else if (key == "C") {
            f.C = value;
        } else if (key == "omega") {
            if (value < 0.0) throw ConfigError("abc3d_omega frequency omega must be >= 0");
            f.omega = value;
        }
    }
    return f;
}

StructureReport check_structure(const Flow& flow, int n_samples, double h) {
    if (n_samples < 1) throw ConfigError("check_structure: n_samples must be >= 1");
    if (h <= 0.0) throw ConfigError("check_structure: h must be > 0");
    StructureReport rep;
    const int d = flow.dim;
    const double t_period = flow.time_period() > 0.0 ? flow.time_period() : 1.0;

    // Kronecker (golden-ratio-like) low-discrepancy samples over one cell.
    const double alphas[4] = {0.7548776662466927,   // from sqrt(2)-ish irrationals
                              0.5698402909980532, 0.3141592653589793, 0.8660254037844386};
    double xp[3] = {0.0, 0.0, 0.0};
    double xm[3] = {0.0, 0.0, 0.0};
    for (int m = 0; m < n_samples; ++m) {
        const double t = t_period * frac(0.5 + (m + 1) * alphas[0]);
        double x[3] = {0.0, 0.0, 0.0};
        for (int j = 0; j < d; ++j) x[j] = flow.spatial_period(j) * frac(0.5 + (m + 1) * alphas[j + 1]);
        double div = 0.0;
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                xp[j] = x[j];
                xm[j] = x[j];
            }
            xp[i] += h;
            xm[i] -= h;
            const double gi = (flow.component(i, t, xp) - flow.component(i, t, xm)) / (2.0 * h);
            div += gi;
            rep.max_abs_diag_jacobian = std::max(rep.max_abs_diag_jacobian, std::abs(gi));
        }
        rep.max_abs_divergence = std::max(rep.max_abs_divergence, std::abs(div));
    }

    // Mean-zero: average component i over all coordinates except x_i
    // (composite trapezoid = rectangle rule on a full period, so it is
    // spectrally accurate). In 2D this is exactly the per-line integral the
    // schemes assume; 1024 nodes for one free dimension, 192 per axis for two.
    const int n_mean_t = std::min(n_samples, 10);
    for (int m = 0; m < n_mean_t; ++m) {
        const double t = t_period * frac(0.5 + (m + 1) * alphas[0]);
        double base[3] = {0.0, 0.0, 0.0};
        for (int j = 0; j < d; ++j) base[j] = flow.spatial_period(j) * frac(0.5 + (m + 1) * alphas[j + 1]);
        for (int i = 0; i < d; ++i) {
            double x[3] = {base[0], base[1], base[2]};
            double sum = 0.0;
            long count = 0;
            if (d == 2) {
                const int o = 1 - i;
                const int n = 1024;
                const double p = flow.spatial_period(o);
                for (int u = 0; u < n; ++u) {
                    x[o] = p * u / n;
                    sum += flow.component(i, t, x);
                }
                count = n;
            } else {
                const int o1 = (i + 1) % 3, o2 = (i + 2) % 3;
                const int n = 192;
                const double p1 = flow.spatial_period(o1), p2 = flow.spatial_period(o2);
                for (int u = 0; u < n; ++u) {
                    x[o1] = p1 * u / n;
                    for (int w = 0; w < n; ++w) {
                        x[o2] = p2 * w / n;
                        sum += flow.component(i, t, x);
                    }
                }
                count = static_cast<long>(n) * n;
            }
            rep.max_abs_mean = std::max(rep.max_abs_mean, std::abs(sum / count));
        }
    }
    return rep;
}

}  // namespace effdiff
