#include "effdiff/integrators.hpp"

#include <cmath>
#include <cstring>

#include "effdiff/errors.hpp"

namespace effdiff {

DiffusionSpec DiffusionSpec::scalar(double sigma, int dim) {
    if (sigma < 0.0) throw ConfigError("sigma must be >= 0");
    if (dim < 2 || dim > 3) throw ConfigError("dimension must be 2 or 3");
    DiffusionSpec s;
    s.isotropic = true;
    s.sigma = sigma;
    s.dim = dim;
    return s;
}

DiffusionSpec DiffusionSpec::full(const double* m, int dim) {
    if (dim < 2 || dim > 3) throw ConfigError("dimension must be 2 or 3");
    DiffusionSpec s;
    s.isotropic = false;
    s.dim = dim;
    double scale = 0.0;
    for (int i = 0; i < dim * dim; ++i) {
        s.matrix[i] = m[i];
        scale = std::max(scale, std::abs(m[i]));
    }
    const double det = det_small(m, dim);
    if (std::abs(det) <= 1e-12 * std::max(1.0, std::pow(scale, dim)))
        throw ConfigError("diffusion matrix must be non-singular");
    return s;
}

void DiffusionSpec::apply(const double* dw, double* x) const {
    if (isotropic) {
        for (int i = 0; i < dim; ++i) x[i] += sigma * dw[i];
        return;
    }
    for (int i = 0; i < dim; ++i) {
        double acc = 0.0;
        for (int j = 0; j < dim; ++j) acc += matrix[i * dim + j] * dw[j];
        x[i] += acc;
    }
}

SchemeKind scheme_from_name(const std::string& name) {
    if (name == "split2d") return SchemeKind::split2d;
    if (name == "splitnd") return SchemeKind::splitnd;
    if (name == "euler") return SchemeKind::euler;
    throw ConfigError("unknown scheme '" + name + "' (split2d | splitnd | euler)");
}

const char* scheme_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::split2d: return "split2d";
        case SchemeKind::splitnd: return "splitnd";
        case SchemeKind::euler: return "euler";
    }
    return "?";
}

void splitting_sweep(const Flow& flow, double t, double dt, double* x) {
    const double t_mid = t + 0.5 * dt;
    for (int i = 0; i < flow.dim; ++i) x[i] += dt * flow.component(i, t_mid, x);
}

ParticleState step_2d_splitting(const ParticleState& s, double dt, const Flow& flow,
                                double sigma, const double* dw) {
    ParticleState out = s;
    splitting_sweep(flow, s.t, dt, out.x.data());
    out.x[0] += sigma * dw[0];
    out.x[1] += sigma * dw[1];
    out.t = s.t + dt;
    return out;
}

ParticleState step_nd_volume_preserving(const ParticleState& s, double dt, const Flow& flow,
                                        const DiffusionSpec& sig, const double* dw) {
    ParticleState out = s;
    splitting_sweep(flow, s.t, dt, out.x.data());
    sig.apply(dw, out.x.data());
    out.t = s.t + dt;
    return out;
}

ParticleState step_euler_maruyama(const ParticleState& s, double dt, const Flow& flow,
                                  const DiffusionSpec& sig, const double* dw) {
    ParticleState out = s;
    double v[3];
    flow.velocity(s.t, s.x.data(), v);
    for (int i = 0; i < flow.dim; ++i) out.x[i] += dt * v[i];
    sig.apply(dw, out.x.data());
    out.t = s.t + dt;
    return out;
}

ParticleState step(SchemeKind kind, const ParticleState& s, double dt, const Flow& flow,
                   const DiffusionSpec& sig, const double* dw) {
    switch (kind) {
        case SchemeKind::split2d:
            if (flow.dim != 2) throw ConfigError("split2d requires a 2D flow");
            if (!sig.isotropic) throw ConfigError("split2d requires scalar sigma");
            return step_2d_splitting(s, dt, flow, sig.sigma, dw);
        case SchemeKind::splitnd:
            return step_nd_volume_preserving(s, dt, flow, sig, dw);
        case SchemeKind::euler:
            return step_euler_maruyama(s, dt, flow, sig, dw);
    }
    throw ConfigError("bad scheme");
}

void deterministic_jacobian(SchemeKind kind, const Flow& flow, double t, const double* x,
                            double dt, double h, double* jac) {
    const int d = flow.dim;
    const DiffusionSpec nosig = DiffusionSpec::scalar(0.0, d);
    const double zero_dw[3] = {0.0, 0.0, 0.0};
    for (int j = 0; j < d; ++j) {
        ParticleState sp, sm;
        sp.dim = sm.dim = d;
        sp.t = sm.t = t;
        for (int i = 0; i < d; ++i) {
            sp.x[i] = x[i];
            sm.x[i] = x[i];
        }
        sp.x[j] += h;
        sm.x[j] -= h;
        const ParticleState fp = step(kind, sp, dt, flow, nosig, zero_dw);
        const ParticleState fm = step(kind, sm, dt, flow, nosig, zero_dw);
        for (int i = 0; i < d; ++i) jac[i * d + j] = (fp.x[i] - fm.x[i]) / (2.0 * h);
    }
}

double det_small(const double* m, int dim) {
    if (dim == 2) return m[0] * m[3] - m[1] * m[2];
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

}  // namespace effdiff
