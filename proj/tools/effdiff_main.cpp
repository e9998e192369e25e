#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "effdiff/analysis.hpp"
#include "effdiff/config_file.hpp"
#include "effdiff/errors.hpp"
#include "effdiff/oracles.hpp"
#include "effdiff/report_io.hpp"
#include "effdiff/version.hpp"

namespace {

using namespace effdiff;

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int workers = 0;
    bool quiet = false;
    bool no_resume = false;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("config", c.config_path, "run configuration file")->required();
    cmd->add_option("--seed", c.seed, "master seed (overrides the config file)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--workers", c.workers, "worker threads, 0 = all hardware threads")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--quiet", c.quiet, "suppress progress logging");
    cmd->add_flag("--no-resume", c.no_resume, "ignore an existing checkpoint");
}

ParsedConfig load_and_seed(const CommonOpts& c) {
    ParsedConfig pc = load_config(c.config_path);
    if (c.seed_given) {
        pc.sim.master_seed = c.seed;
        pc.sim.seed_set = true;
    }
    if (!pc.sim.seed_set)
        throw ConfigError("no master seed: pass --seed or set seed= in [ensemble] of " +
                          c.config_path);
    return pc;
}

std::string checkpoint_path_for(const ParsedConfig& pc) {
    if (pc.checkpoint_interval <= 0) return "";
    std::filesystem::path p(pc.output_prefix + ".ckpt");
    if (const char* dir = std::getenv("EFFDIFF_CHECKPOINT_DIR"))
        p = std::filesystem::path(dir) / p.filename();
    return p.string();
}

RunOptions run_options(const CommonOpts& c, const ParsedConfig& pc) {
    RunOptions opts;
    opts.workers = c.workers;
    opts.progress = !c.quiet;
    opts.resume = !c.no_resume;
    opts.checkpoint_interval = pc.checkpoint_interval;
    opts.checkpoint_path = checkpoint_path_for(pc);
    return opts;
}

CsvMeta meta_for(const SimulationConfig& sim) {
    CsvMeta m;
    m.config_hash = sim.fingerprint();
    m.seed = sim.master_seed;
    m.dt = sim.dt;
    m.n_particles = sim.n_particles;
    return m;
}

void require_valid_structure(const Flow& flow) {
    const StructureReport rep = check_structure(flow, 64, 1e-4);
    const double tol = 1e-6;
    if (rep.max_abs_divergence > tol || rep.max_abs_diag_jacobian > tol || rep.max_abs_mean > tol)
        throw ConfigError("flow '" + flow.name + "' fails structure checks (div=" +
                          format_double(rep.max_abs_divergence) + ", diag_jac=" +
                          format_double(rep.max_abs_diag_jacobian) + ", mean=" +
                          format_double(rep.max_abs_mean) + ")");
}

// Wraps the default pipeline so study subcommands can report aggregate
// throughput over all their sub-runs.
EnsembleRunner counting_runner(const RunOptions& opts, long long* steps_acc) {
    EnsembleRunner base = make_default_runner(opts);
    return [base, steps_acc](const SimulationConfig& cfg) {
        DiffusivityReport rep = base(cfg);
        *steps_acc += last_run_metrics().particle_steps;
        return rep;
    };
}

void write_run_manifest(const std::string& prefix, std::uint64_t hash, double wall_s,
                        long long steps, const std::vector<std::string>& outputs) {
    ManifestInfo info;
    info.config_hash = hash;
    info.version = kVersion;
    info.wall_seconds = wall_s;
    info.particle_steps_per_second = wall_s > 0 ? static_cast<double>(steps) / wall_s : 0.0;
    info.outputs = outputs;
    write_manifest(prefix + ".manifest", info);
}

int cmd_simulate(const CommonOpts& c, double assert_d11, double assert_rtol, double assert_se,
                 bool has_assert) {
    const auto t0 = std::chrono::steady_clock::now();
    ParsedConfig pc = load_and_seed(c);
    require_valid_structure(pc.sim.flow);
    pc.sim.validate();

    const EnsembleStatistics stats = run_ensemble(pc.sim, run_options(c, pc));
    const DiffusivityReport rep = effective_diffusivity(stats);
    const PlateauDetection plateau = detect_plateau(rep);

    const CsvMeta meta = meta_for(pc.sim);
    const std::string ts_path = pc.output_prefix + "_timeseries.csv";
    const std::string final_path = pc.output_prefix + "_final.csv";
    write_timeseries_csv(ts_path, rep, meta);
    write_final_csv(final_path, rep, plateau, meta);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_manifest(pc.output_prefix, meta.config_hash, wall, last_run_metrics().particle_steps,
                       {ts_path, final_path});

    const double d11 = rep.final_d11(), se11 = rep.final_se11();
    std::printf("D11 = %s +- %s (n=%lld, T=%s)\n", format_double(d11).c_str(),
                format_double(se11).c_str(), rep.n_particles,
                format_double(rep.times.back()).c_str());
    if (plateau.mixed)
        std::printf("mixing detected from t = %s\n", format_double(plateau.t_mix).c_str());
    else
        std::printf("not mixed by T = %s\n", format_double(rep.times.back()).c_str());

    if (has_assert) {
        const double tol = std::max(assert_rtol * std::abs(assert_d11), assert_se * se11);
        if (!(std::abs(d11 - assert_d11) <= tol)) {
            std::printf("ASSERT FAIL: |D11 - %s| = %s > %s\n", format_double(assert_d11).c_str(),
                        format_double(std::abs(d11 - assert_d11)).c_str(),
                        format_double(tol).c_str());
            return 3;
        }
        std::printf("ASSERT OK\n");
    }
    return 0;
}

int cmd_converge(const CommonOpts& c, std::vector<double> dt_list, double ref_dt) {
    const auto t0 = std::chrono::steady_clock::now();
    ParsedConfig pc = load_and_seed(c);
    require_valid_structure(pc.sim.flow);
    pc.sim.validate();

    long long steps = 0;
    const ConvergenceStudy study =
        convergence_study(pc.sim, dt_list, ref_dt, counting_runner(run_options(c, pc), &steps));

    const CsvMeta meta = meta_for(pc.sim);
    const std::string csv = pc.output_prefix + "_convergence.csv";
    write_convergence_csv(csv, study, meta);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_manifest(pc.output_prefix, meta.config_hash, wall, steps, {csv});

    std::printf("reference: dt=%s D11=%s +- %s\n", format_double(study.ref_dt).c_str(),
                format_double(study.ref_d11).c_str(), format_double(study.ref_se11).c_str());
    for (const auto& p : study.points)
        std::printf("dt=%-12s D11=%-20s error=%-16s%s\n", format_double(p.dt).c_str(),
                    format_double(p.d11).c_str(), format_double(p.error).c_str(),
                    p.noise_dominated ? " [noise-dominated, excluded]" : "");
    if (study.n_used >= 2)
        std::printf("fitted slope = %s (R2 = %s, %d points)\n", format_double(study.fit.slope).c_str(),
                    format_double(study.fit.r2).c_str(), study.n_used);
    else
        std::printf("fitted slope unavailable: %d usable points (noise-dominated study)\n",
                    study.n_used);
    return 0;
}

int cmd_sweep(const CommonOpts& c, const std::string& param_name, std::vector<double> values) {
    const auto t0 = std::chrono::steady_clock::now();
    ParsedConfig pc = load_and_seed(c);
    require_valid_structure(pc.sim.flow);
    pc.sim.validate();

    const SweepParameter param = sweep_parameter_from_name(param_name);
    long long steps = 0;
    const SweepResult result =
        sweep(pc.sim, param, values, counting_runner(run_options(c, pc), &steps));

    const CsvMeta meta = meta_for(pc.sim);
    const std::string csv = pc.output_prefix + "_sweep.csv";
    write_sweep_csv(csv, result, meta);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_manifest(pc.output_prefix, meta.config_hash, wall, steps, {csv});

    for (const auto& p : result.points)
        std::printf("%s=%-12s D11=%-20s SE=%-14s %s\n", sweep_parameter_name(param),
                    format_double(p.value).c_str(), format_double(p.d11).c_str(),
                    format_double(p.se11).c_str(),
                    p.mixed ? ("mixed from t=" + format_double(p.t_mix)).c_str() : "NOT MIXED");
    if (result.has_fit)
        std::printf("enhancement slope = %s (R2 = %s)\n", format_double(result.fit.slope).c_str(),
                    format_double(result.fit.r2).c_str());
    return 0;
}

int cmd_validate_flow(const CommonOpts& c, int n_samples, double h, double tol) {
    ParsedConfig pc = load_config(c.config_path);
    const StructureReport rep = check_structure(pc.sim.flow, n_samples, h);
    std::printf("flow: %s (dim %d)\n", pc.sim.flow.name.c_str(), pc.sim.flow.dim);
    std::printf("max |div v|        = %s\n", format_double(rep.max_abs_divergence).c_str());
    std::printf("max |dv_i/dx_i|    = %s\n", format_double(rep.max_abs_diag_jacobian).c_str());
    std::printf("max |mean v_i|     = %s\n", format_double(rep.max_abs_mean).c_str());
    const bool ok = rep.max_abs_divergence <= tol && rep.max_abs_diag_jacobian <= tol &&
                    rep.max_abs_mean <= tol;
    std::printf("structure: %s (tolerance %s)\n", ok ? "PASS" : "FAIL", format_double(tol).c_str());
    return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo effective-diffusivity toolkit for passive tracer SDEs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("effdiff ") + kVersion);

    CommonOpts sim_c, conv_c, sweep_c, val_c;
    double assert_d11 = 0.0, assert_rtol = 0.0, assert_se = 0.0;
    std::vector<double> dt_list, sweep_values;
    double ref_dt = 0.0;
    std::string sweep_param;
    int val_samples = 200;
    double val_h = 1e-4, val_tol = 1e-6;

    CLI::App* simulate = app.add_subcommand("simulate", "run one ensemble and report D(t)");
    add_common(simulate, sim_c);
    CLI::Option* a_opt = simulate->add_option("--assert-d11", assert_d11,
                                              "check the final D11 against this value (exit 3 on failure)");
    simulate->add_option("--assert-rtol", assert_rtol, "relative tolerance for --assert-d11");
    simulate->add_option("--assert-se", assert_se, "tolerance in standard-error multiples for --assert-d11");

    CLI::App* converge = app.add_subcommand("converge", "convergence study over a dt list");
    add_common(converge, conv_c);
    converge->add_option("--dt-list", dt_list, "time steps to test")->required()->expected(2, 64);
    converge->add_option("--ref-dt", ref_dt, "reference time step (>= 8x smaller)")->required();

    CLI::App* sweepcmd = app.add_subcommand("sweep", "parameter sweep (one ensemble per value)");
    add_common(sweepcmd, sweep_c);
    sweepcmd->add_option("--param", sweep_param, "d0 | eps | omega")->required();
    sweepcmd->add_option("--values", sweep_values, "parameter values")->required()->expected(1, 64);

    CLI::App* validate = app.add_subcommand("validate-flow", "check structural assumptions");
    add_common(validate, val_c);
    validate->add_option("--samples", val_samples, "sample points");
    validate->add_option("--fd-step", val_h, "finite-difference step");
    validate->add_option("--tolerance", val_tol, "pass/fail threshold");

    CLI11_PARSE(app, argc, argv);

    // CLI11 leaves us to detect whether --seed was actually passed.
    sim_c.seed_given = simulate->count("--seed") > 0;
    conv_c.seed_given = converge->count("--seed") > 0;
    sweep_c.seed_given = sweepcmd->count("--seed") > 0;
    val_c.seed_given = validate->count("--seed") > 0;

    try {
        if (simulate->parsed())
            return cmd_simulate(sim_c, assert_d11, assert_rtol, assert_se, a_opt->count() > 0);
        if (converge->parsed()) return cmd_converge(conv_c, dt_list, ref_dt);
        if (sweepcmd->parsed()) return cmd_sweep(sweep_c, sweep_param, sweep_values);
        if (validate->parsed()) return cmd_validate_flow(val_c, val_samples, val_h, val_tol);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const RunError& e) {
        std::fprintf(stderr, "run error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
