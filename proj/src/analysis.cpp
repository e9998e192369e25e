#include "effdiff/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "effdiff/errors.hpp"
#include "effdiff/rng.hpp"

namespace effdiff {

double DiffusivityReport::d_at(int time_idx, int i, int j) const {
    if (j < i) std::swap(i, j);
    return d[time_idx][MomentAccumulator::tri_index(i, j, dim)];
}

double DiffusivityReport::se_at(int time_idx, int i, int j) const {
    if (j < i) std::swap(i, j);
    return se[time_idx][MomentAccumulator::tri_index(i, j, dim)];
}

DiffusivityReport effective_diffusivity(const EnsembleStatistics& stats) {
    if (stats.dim < 2 || stats.times.empty() || stats.n_particles < 1)
        throw RunError("effective_diffusivity: empty statistics");
    DiffusivityReport rep;
    rep.dim = stats.dim;
    rep.n_particles = stats.n_particles;
    rep.config_hash = stats.config_hash;
    rep.master_seed = stats.master_seed;
    rep.times = stats.times;
    const int nk = static_cast<int>(stats.times.size());
    rep.d.assign(nk, {});
    rep.se.assign(nk, {});
    for (int k = 0; k < nk; ++k) {
        const double t = stats.times[k];
        const MomentAccumulator all = stats.combined(k);
        for (int i = 0; i < stats.dim; ++i) {
            for (int j = i; j < stats.dim; ++j) {
                const int tri = MomentAccumulator::tri_index(i, j, stats.dim);
                rep.d[k][tri] = all.raw_second(i, j, stats.dim) / (2.0 * t);
                // SE over batch means of the raw second moment.
                double means[kEnsembleBatches];
                int nb = 0;
                for (int b = 0; b < stats.n_batches; ++b) {
                    const MomentAccumulator& cell = stats.cell(k, b);
                    if (cell.n > 0) means[nb++] = cell.raw_second(i, j, stats.dim);
                }
                if (nb >= 2) {
                    double m = 0.0;
                    for (int b = 0; b < nb; ++b) m += means[b];
                    m /= nb;
                    double ss = 0.0;
                    for (int b = 0; b < nb; ++b) ss += (means[b] - m) * (means[b] - m);
                    rep.se[k][tri] = std::sqrt(ss / (static_cast<double>(nb) * (nb - 1))) / (2.0 * t);
                }
            }
        }
    }
    return rep;
}

SlopeFit fit_loglog(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw RunError("fit_loglog: need at least 2 points");
    double su = 0.0, sw = 0.0;
    for (const auto& [u, w] : points) {
        if (!(u > 0.0) || !(w > 0.0)) throw RunError("fit_loglog: points must be strictly positive");
        su += std::log(u);
        sw += std::log(w);
    }
    const double n = static_cast<double>(points.size());
    const double mu = su / n, mw = sw / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [u, w] : points) {
        const double du = std::log(u) - mu, dw = std::log(w) - mw;
        sxx += du * du;
        sxy += du * dw;
        syy += dw * dw;
    }
    if (sxx == 0.0) throw RunError("fit_loglog: need at least 2 distinct abscissae");
    SlopeFit fit;
    fit.n_points = static_cast<int>(points.size());
    fit.slope = sxy / sxx;
    fit.intercept = mw - fit.slope * mu;
    double ssres = 0.0;
    for (const auto& [u, w] : points) {
        const double r = std::log(w) - (fit.intercept + fit.slope * std::log(u));
        ssres += r * r;
    }
    fit.residual_norm = std::sqrt(ssres);
    fit.r2 = syy > 0.0 ? 1.0 - ssres / syy : (ssres == 0.0 ? 1.0 : 0.0);
    return fit;
}

EnsembleRunner make_default_runner(const RunOptions& opts) {
    return [opts](const SimulationConfig& cfg) {
        RunOptions o = opts;
        if (!o.checkpoint_path.empty()) {
            // Studies launch several configs; give each its own snapshot.
            char suffix[32];
            std::snprintf(suffix, sizeof suffix, "-%016llx",
                          static_cast<unsigned long long>(cfg.fingerprint()));
            o.checkpoint_path += suffix;
        }
        return effective_diffusivity(run_ensemble(cfg, o));
    };
}

PlateauDetection detect_plateau(const DiffusivityReport& report, const PlateauParams& p) {
    PlateauDetection out;
    const int n = static_cast<int>(report.times.size());
    if (p.window < 2 || n < p.window) return out;
    int last_fail = -1;
    for (int s = 0; s + p.window <= n; ++s) {
        double mn = std::numeric_limits<double>::infinity();
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = s; i < s + p.window; ++i) {
            const double v = report.d_at(i, 0, 0);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        const double denom = std::abs(report.d_at(s + p.window - 1, 0, 0));
        const double rel = denom > 0.0 ? (mx - mn) / denom : (mx > mn ? std::numeric_limits<double>::infinity() : 0.0);
        if (!(rel < p.rho)) last_fail = s;
    }
    const int s_star = last_fail + 1;
    if (s_star + p.window > n) return out;  // no stable tail
    out.mixed = true;
    out.start_index = s_star;
    out.t_mix = report.times[s_star];
    return out;
}

ConvergenceStudy convergence_study(const SimulationConfig& base, const std::vector<double>& dt_list,
                                   double ref_dt, const EnsembleRunner& runner) {
    if (dt_list.size() < 2) throw ConfigError("convergence study needs at least 2 dt values");
    double min_dt = dt_list[0];
    for (double dt : dt_list) {
        if (dt <= 0.0) throw ConfigError("dt values must be positive");
        min_dt = std::min(min_dt, dt);
    }
    if (!(ref_dt > 0.0) || ref_dt * 8.0 > min_dt * (1.0 + 1e-12))
        throw ConfigError("reference dt must be at least 8x smaller than the smallest dt");

    ConvergenceStudy study;
    study.ref_dt = ref_dt;
    // Independent seed per run (documented policy: salt 0 for the reference,
    // 1 + index for each dt in the given order).
    SimulationConfig ref_cfg = base;
    ref_cfg.dt = ref_dt;
    ref_cfg.master_seed = derive_seed(base.master_seed, 0);
    ref_cfg.seed_set = true;
    const DiffusivityReport ref = runner(ref_cfg);
    study.ref_d11 = ref.final_d11();
    study.ref_se11 = ref.final_se11();

    std::vector<std::pair<double, double>> fit_pts;
    for (size_t i = 0; i < dt_list.size(); ++i) {
        SimulationConfig cfg = base;
        cfg.dt = dt_list[i];
        cfg.master_seed = derive_seed(base.master_seed, 1 + i);
        cfg.seed_set = true;
        const DiffusivityReport rep = runner(cfg);
        ConvergencePoint pt;
        pt.dt = dt_list[i];
        pt.d11 = rep.final_d11();
        pt.se11 = rep.final_se11();
        pt.error = std::abs(pt.d11 - study.ref_d11);
        pt.noise_dominated =
            pt.error < 2.0 * (pt.se11 + study.ref_se11) || pt.error <= 0.0;
        if (!pt.noise_dominated) fit_pts.emplace_back(pt.dt, pt.error);
        study.points.push_back(pt);
    }
    study.n_used = static_cast<int>(fit_pts.size());
    if (fit_pts.size() >= 2) study.fit = fit_loglog(fit_pts);
    return study;
}

SweepParameter sweep_parameter_from_name(const std::string& name) {
    if (name == "d0") return SweepParameter::d0;
    if (name == "eps") return SweepParameter::eps;
    if (name == "omega") return SweepParameter::omega;
    throw ConfigError("unknown sweep parameter '" + name + "' (d0 | eps | omega)");
}

const char* sweep_parameter_name(SweepParameter p) {
    switch (p) {
        case SweepParameter::d0: return "d0";
        case SweepParameter::eps: return "eps";
        case SweepParameter::omega: return "omega";
    }
    return "?";
}

SweepResult sweep(const SimulationConfig& base, SweepParameter param, const std::vector<double>& values,
                  const EnsembleRunner& runner, const PlateauParams& plateau) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    SweepResult result;
    result.parameter = param;
    for (size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        SimulationConfig cfg = base;
        cfg.master_seed = derive_seed(base.master_seed, 1000 + i);
        cfg.seed_set = true;
        switch (param) {
            case SweepParameter::d0:
                if (!(v > 0.0)) throw ConfigError("D0 values must be positive");
                if (!base.diffusion.isotropic) throw ConfigError("D0 sweep needs scalar sigma");
                cfg.diffusion = DiffusionSpec::scalar(std::sqrt(2.0 * v), base.flow.dim);
                break;
            case SweepParameter::eps:
                if (v < 0.0) throw ConfigError("eps values must be >= 0");
                if (cfg.flow.kind != FlowKind::kolmogorov3d && cfg.flow.kind != FlowKind::abc3d)
                    throw ConfigError("flow '" + cfg.flow.name + "' has no eps parameter");
                cfg.flow.eps = v;
                break;
            case SweepParameter::omega:
                if (!(v > 0.0)) throw ConfigError("omega values must be positive");
                if (cfg.flow.kind != FlowKind::abc3d_omega)
                    throw ConfigError("omega sweeps need the abc3d_omega flow");
                cfg.flow.omega = v;
                break;
        }
        const DiffusivityReport rep = runner(cfg);
        const PlateauDetection det = detect_plateau(rep, plateau);
        SweepPoint pt;
        pt.value = v;
        pt.d11 = rep.final_d11();
        pt.se11 = rep.final_se11();
        pt.mixed = det.mixed;
        pt.t_mix = det.t_mix;
        result.points.push_back(pt);
    }
    if (param == SweepParameter::d0 && values.size() >= 2) {
        std::vector<std::pair<double, double>> pts;
        bool ok = true;
        for (const auto& p : result.points) {
            if (!(p.d11 > 0.0)) ok = false;
            pts.emplace_back(p.value, p.d11);
        }
        if (ok) {
            result.fit = fit_loglog(pts);
            result.has_fit = true;
        }
    }
    return result;
}

}  // namespace effdiff
