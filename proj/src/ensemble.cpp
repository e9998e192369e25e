#include "effdiff/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "effdiff/errors.hpp"
#include "effdiff/rng.hpp"
#include "ensemble_kernels.hpp"

namespace effdiff {

namespace {

thread_local RunMetrics g_last_metrics;

void append_hex(std::string& s, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a ", v);
    s += buf;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

long long SimulationConfig::n_steps() const {
    return static_cast<long long>(std::llround(horizon / dt));
}

void SimulationConfig::validate() const {
    if (dt <= 0.0 || !std::isfinite(dt)) throw ConfigError("dt must be positive and finite");
    if (horizon <= 0.0 || !std::isfinite(horizon)) throw ConfigError("horizon must be positive and finite");
    const double ratio = horizon / dt;
    if (ratio > 4e12) throw ConfigError("horizon/dt too large (over 4e12 steps)");
    if (n_steps() < 1) throw ConfigError("horizon shorter than one step");
    if (n_particles < 1) throw ConfigError("n_particles must be >= 1");
    if (n_particles > 2'000'000'000ll) throw ConfigError("n_particles too large");
    if (!seed_set) throw ConfigError("master seed not set (pass --seed or put seed= in [ensemble])");
    if (flow.dim < 2 || flow.dim > 3) throw ConfigError("flow dimension must be 2 or 3");
    if (diffusion.dim != flow.dim) throw ConfigError("diffusion dimension does not match flow");
    if (scheme == SchemeKind::split2d) {
        if (flow.dim != 2) throw ConfigError("split2d requires a 2D flow");
        if (!diffusion.isotropic) throw ConfigError("split2d requires scalar sigma");
    }
    if (initial.kind == InitialDistribution::Kind::uniform_box) {
        for (int i = 0; i < flow.dim; ++i) {
            if (!(initial.lo[i] < initial.hi[i]) || !std::isfinite(initial.lo[i]) ||
                !std::isfinite(initial.hi[i]))
                throw ConfigError("uniform_box bounds must be finite with lo < hi");
        }
    } else {
        for (int i = 0; i < flow.dim; ++i)
            if (!std::isfinite(initial.point[i])) throw ConfigError("dirac point must be finite");
    }
    for (double t : sample_times) {
        if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("sample times must be positive");
        if (t > horizon + 0.5 * dt) throw ConfigError("sample time beyond horizon");
    }
    if (sample_steps().empty()) throw ConfigError("no valid sample times");
    const double tp = flow.time_period();
    if (tp > 0.0) {
        const double cycles = tp / dt;
        if (std::abs(cycles - std::llround(cycles)) > 1e-9 * std::max(1.0, cycles))
            std::fprintf(stderr,
                         "warning: dt=%g does not divide the flow time period %g; "
                         "time-periodic sampling drifts across periods\n",
                         dt, tp);
    }
}

std::vector<long long> SimulationConfig::sample_steps() const {
    const long long n = n_steps();
    std::vector<long long> steps;
    if (!sample_times.empty()) {
        steps.reserve(sample_times.size());
        for (double t : sample_times)
            steps.push_back(std::clamp<long long>(std::llround(t / dt), 1, n));
    } else {
        const double t_min = std::max(dt, horizon / 1e4);
        const int count = 64;
        steps.reserve(count);
        for (int j = 0; j < count; ++j) {
            const double t = t_min * std::pow(horizon / t_min, j / double(count - 1));
            steps.push_back(std::clamp<long long>(std::llround(t / dt), 1, n));
        }
    }
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    return steps;
}

std::uint64_t SimulationConfig::fingerprint() const {
    std::string s;
    s.reserve(512);
    s += "flow " + flow.name + " ";
    s += std::to_string(static_cast<int>(flow.kind)) + " dim " + std::to_string(flow.dim) + " ";
    append_hex(s, flow.a);
    append_hex(s, flow.k);
    append_hex(s, flow.eps);
    append_hex(s, flow.A);
    append_hex(s, flow.B);
    append_hex(s, flow.C);
    append_hex(s, flow.omega);
    s += "scheme ";
    s += scheme_name(scheme);
    s += " diff ";
    s += diffusion.isotropic ? "iso " : "full ";
    append_hex(s, diffusion.sigma);
    if (!diffusion.isotropic)
        for (int i = 0; i < diffusion.dim * diffusion.dim; ++i) append_hex(s, diffusion.matrix[i]);
    s += "dt ";
    append_hex(s, dt);
    s += "T ";
    append_hex(s, horizon);
    s += "t0 ";
    append_hex(s, start_time);
    s += "n " + std::to_string(n_particles) + " seed " + std::to_string(master_seed) + " init ";
    s += initial.kind == InitialDistribution::Kind::dirac ? "dirac " : "box ";
    for (int i = 0; i < 3; ++i) append_hex(s, initial.point[i]);
    for (int i = 0; i < 3; ++i) append_hex(s, initial.lo[i]);
    for (int i = 0; i < 3; ++i) append_hex(s, initial.hi[i]);
    s += "samples ";
    if (sample_times.empty()) {
        s += "default64";
    } else {
        for (double t : sample_times) append_hex(s, t);
    }
    return fnv1a64(s);
}

int MomentAccumulator::tri_index(int i, int j, int dim) {
    return i * dim - i * (i - 1) / 2 + (j - i);
}

void MomentAccumulator::add(const double* delta, int dim) {
    ++n;
    double d1[3];
    for (int c = 0; c < dim; ++c) {
        d1[c] = delta[c] - mean[c];
        mean[c] += d1[c] / n;
    }
    double d2[3];
    for (int c = 0; c < dim; ++c) d2[c] = delta[c] - mean[c];
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j) m2[tri_index(i, j, dim)] += d1[i] * d2[j];
}

void MomentAccumulator::merge(const MomentAccumulator& other, int dim) {
    if (other.n == 0) return;
    if (n == 0) {
        *this = other;
        return;
    }
    const long long nt = n + other.n;
    double delta[3];
    for (int c = 0; c < dim; ++c) delta[c] = other.mean[c] - mean[c];
    const double w = static_cast<double>(n) * other.n / nt;
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j)
            m2[tri_index(i, j, dim)] += other.m2[tri_index(i, j, dim)] + delta[i] * delta[j] * w;
    for (int c = 0; c < dim; ++c) mean[c] += delta[c] * other.n / nt;
    n = nt;
}

double MomentAccumulator::raw_second(int i, int j, int dim) const {
    if (n == 0) return 0.0;
    return m2[tri_index(i, j, dim)] / n + mean[i] * mean[j];
}

MomentAccumulator EnsembleStatistics::combined(int time_idx) const {
    MomentAccumulator acc;
    for (int b = 0; b < n_batches; ++b) acc.merge(cell(time_idx, b), dim);
    return acc;
}

namespace detail {

void init_block_streams(const SimulationConfig& config, long long block_start, int n,
                        RngStream* streams) {
    for (int i = 0; i < n; ++i)
        streams[i] = RngStream(config.master_seed, static_cast<std::uint64_t>(block_start + i));
}

void init_block_positions(const SimulationConfig& config, int n, RngStream* streams,
                          double* const* x, double* const* x0) {
    const int d = config.flow.dim;
    if (config.initial.kind == InitialDistribution::Kind::dirac) {
        for (int c = 0; c < d; ++c) {
            const double p = config.initial.point[c];
            for (int i = 0; i < n; ++i) x0[c][i] = p;
        }
    } else {
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < d; ++c) {
                const double u = streams[i].uniform01();
                x0[c][i] = config.initial.lo[c] + (config.initial.hi[c] - config.initial.lo[c]) * u;
            }
        }
    }
    for (int c = 0; c < d; ++c) std::memcpy(x[c], x0[c], sizeof(double) * n);
}

void fill_block_normals(RngStream* streams, int n, int dim, double sqrt_dt, double* const* dw) {
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < dim; ++c) dw[c][i] = sqrt_dt * streams[i].normal();
}

#ifndef EFFDIFF_HAVE_FAST_KERNELS
bool fast_kernel_supported(const SimulationConfig&) { return false; }
void run_block_fast(const SimulationConfig&, long long, int, const long long*, int,
                    BlockSampleSink&) {
    throw RunError("fast kernels not built");
}
#endif

}  // namespace detail

namespace {

// Per-block partial statistics plus the first non-finite sighting, if any.
struct BlockAccum {
    long long block_start = 0;
    std::vector<MomentAccumulator> cells;  // n_samples * kEnsembleBatches
    bool nonfinite = false;
    long long bad_particle = -1;
    int bad_sample = -1;
};

struct FoldSink : detail::BlockSampleSink {
    BlockAccum* acc = nullptr;
    int dim = 0;

    void on_sample(int sample_idx, const double* const* xs, const double* const* x0s,
                   int n) override {
        for (int i = 0; i < n; ++i) {
            double delta[3] = {0.0, 0.0, 0.0};
            bool ok = true;
            for (int c = 0; c < dim; ++c) {
                delta[c] = xs[c][i] - x0s[c][i];
                ok = ok && std::isfinite(delta[c]);
            }
            if (!ok && !acc->nonfinite) {
                acc->nonfinite = true;
                acc->bad_particle = acc->block_start + i;
                acc->bad_sample = sample_idx;
            }
            acc->cells[static_cast<size_t>(sample_idx) * kEnsembleBatches +
                       (acc->block_start + i) % kEnsembleBatches]
                .add(delta, dim);
        }
    }
};

// Scalar reference path for one particle. Returns the 1-based step index of
// the first non-finite state, or -1; displacement samples go through `fold`.
template <typename FoldFn>
long long scalar_run_one(const SimulationConfig& config, long long index,
                         const long long* sample_steps, int n_samples, FoldFn&& fold) {
    RngStream rs(config.master_seed, static_cast<std::uint64_t>(index));
    const int d = config.flow.dim;
    ParticleState s;
    s.dim = d;
    s.t = config.start_time;
    if (config.initial.kind == InitialDistribution::Kind::dirac) {
        for (int c = 0; c < d; ++c) s.x0[c] = config.initial.point[c];
    } else {
        for (int c = 0; c < d; ++c)
            s.x0[c] = config.initial.lo[c] + (config.initial.hi[c] - config.initial.lo[c]) * rs.uniform01();
    }
    s.x = s.x0;
    const double sqrt_dt = std::sqrt(config.dt);
    const long long n = config.n_steps();
    double dw[3] = {0.0, 0.0, 0.0};
    int next = 0;
    for (long long stepno = 1; stepno <= n; ++stepno) {
        for (int c = 0; c < d; ++c) dw[c] = sqrt_dt * rs.normal();
        s = step(config.scheme, s, config.dt, config.flow, config.diffusion, dw);
        for (int c = 0; c < d; ++c)
            if (!std::isfinite(s.x[c])) return stepno;
        if (next < n_samples && stepno == sample_steps[next]) {
            double delta[3] = {0.0, 0.0, 0.0};
            for (int c = 0; c < d; ++c) delta[c] = s.x[c] - s.x0[c];
            fold(next, delta);
            ++next;
        }
    }
    return -1;
}

void process_block_scalar(const SimulationConfig& config, long long block_start, int n,
                          const std::vector<long long>& sample_steps, BlockAccum& acc) {
    const int d = config.flow.dim;
    for (int i = 0; i < n; ++i) {
        const long long index = block_start + i;
        const long long bad = scalar_run_one(
            config, index, sample_steps.data(), static_cast<int>(sample_steps.size()),
            [&](int k, const double* delta) {
                acc.cells[static_cast<size_t>(k) * kEnsembleBatches + index % kEnsembleBatches]
                    .add(delta, d);
            });
        if (bad >= 0 && !acc.nonfinite) {
            acc.nonfinite = true;
            acc.bad_particle = index;
            acc.bad_sample = static_cast<int>(bad);  // exact step, scalar path
            throw RunError("non-finite state at particle " + std::to_string(index) + ", step " +
                           std::to_string(bad) + " (t=" +
                           std::to_string(config.start_time + bad * config.dt) + ")");
        }
    }
}

std::string checkpoint_tmp_name(const std::string& path) { return path + ".tmp"; }

// istream extraction does not accept hexfloat ("0x1.8p+1" stops at the 'x'
// on libstdc++), so checkpoint doubles go through strtod by hand.
double read_hex_double(std::istream& in) {
    std::string tok;
    in >> tok;
    if (tok.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::strtod(tok.c_str(), nullptr);
}

void save_checkpoint(const std::string& path, const EnsembleStatistics& stats,
                     long long blocks_done) {
    const std::string tmp = checkpoint_tmp_name(path);
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw RunError("cannot write checkpoint " + tmp);
    out << "effdiff-ckpt 1\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%016" PRIx64 "\n", stats.config_hash);
    out << "hash " << buf;
    out << "blocks_done " << blocks_done << "\n";
    out << "n_particles " << stats.n_particles << "\n";
    out << "dim " << stats.dim << "\n";
    out << "n_times " << stats.times.size() << "\n";
    out << std::hexfloat;
    for (const auto& c : stats.cells) {
        out << "cell " << c.n;
        for (int i = 0; i < 3; ++i) out << " " << c.mean[i];
        for (int i = 0; i < 6; ++i) out << " " << c.m2[i];
        out << "\n";
    }
    out << "end\n";
    out.close();
    if (!out) throw RunError("failed writing checkpoint " + tmp);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw RunError("failed to move checkpoint into place: " + ec.message());
}

// Returns blocks_done, filling stats cells; throws RunError on mismatch.
long long load_checkpoint(const std::string& path, EnsembleStatistics& stats) {
    std::ifstream in(path);
    if (!in) throw RunError("cannot read checkpoint " + path);
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "effdiff-ckpt" || version != 1)
        throw RunError("unrecognized checkpoint format in " + path);
    std::string key, hash_hex;
    long long blocks_done = 0, n_particles = 0;
    int dim = 0;
    size_t n_times = 0;
    in >> key >> hash_hex;
    if (key != "hash") throw RunError("malformed checkpoint " + path);
    in >> key >> blocks_done >> key >> n_particles >> key >> dim >> key >> n_times;
    const std::uint64_t hash = std::stoull(hash_hex, nullptr, 16);
    if (hash != stats.config_hash)
        throw RunError("checkpoint " + path + " belongs to a different config (hash mismatch); "
                       "delete it to start over");
    if (dim != stats.dim || n_times != stats.times.size())
        throw RunError("checkpoint " + path + " layout does not match config");
    for (auto& c : stats.cells) {
        in >> key;
        if (key != "cell") throw RunError("truncated checkpoint " + path);
        in >> c.n;
        for (int i = 0; i < 3; ++i) c.mean[i] = read_hex_double(in);
        for (int i = 0; i < 6; ++i) c.m2[i] = read_hex_double(in);
    }
    in >> key;
    if (key != "end" || !in) throw RunError("truncated checkpoint " + path);
    stats.n_particles = n_particles;
    return blocks_done;
}

}  // namespace

void run_particle(const SimulationConfig& config, long long particle_index, double* out) {
    config.validate();
    if (particle_index < 0 || particle_index >= config.n_particles)
        throw ConfigError("particle index out of range");
    const std::vector<long long> steps = config.sample_steps();
    const int d = config.flow.dim;
    const long long bad =
        scalar_run_one(config, particle_index, steps.data(), static_cast<int>(steps.size()),
                       [&](int k, const double* delta) {
                           for (int c = 0; c < d; ++c) out[static_cast<size_t>(k) * d + c] = delta[c];
                       });
    if (bad >= 0)
        throw RunError("non-finite state at particle " + std::to_string(particle_index) +
                       ", step " + std::to_string(bad));
}

EnsembleStatistics run_ensemble(const SimulationConfig& config, const RunOptions& opts) {
    config.validate();
    const auto t_begin = std::chrono::steady_clock::now();
    const std::vector<long long> sample_steps = config.sample_steps();
    const int n_samples = static_cast<int>(sample_steps.size());

    EnsembleStatistics stats;
    stats.dim = config.flow.dim;
    stats.n_batches = kEnsembleBatches;
    stats.config_hash = config.fingerprint();
    stats.master_seed = config.master_seed;
    stats.times.reserve(sample_steps.size());
    for (long long s : sample_steps) stats.times.push_back(s * config.dt);
    stats.cells.assign(sample_steps.size() * kEnsembleBatches, MomentAccumulator{});

    const long long n_blocks = (config.n_particles + kEnsembleBlock - 1) / kEnsembleBlock;
    long long start_block = 0;
    if (!opts.checkpoint_path.empty() && opts.resume &&
        std::filesystem::exists(opts.checkpoint_path)) {
        start_block = load_checkpoint(opts.checkpoint_path, stats);
        if (opts.progress)
            std::fprintf(stderr, "resuming from checkpoint: %lld/%lld blocks done\n", start_block,
                         n_blocks);
    }

    const bool use_fast = !opts.force_scalar && detail::fast_kernel_supported(config);
    int workers = opts.workers > 0 ? opts.workers
                                   : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = static_cast<int>(std::min<long long>(workers, std::max<long long>(n_blocks - start_block, 1)));

    const long long ckpt_blocks =
        opts.checkpoint_path.empty() || opts.checkpoint_interval <= 0
            ? 0
            : std::max<long long>(1, opts.checkpoint_interval / kEnsembleBlock);

    std::atomic<long long> next_block{start_block};
    std::mutex merge_mutex;
    std::map<long long, std::unique_ptr<BlockAccum>> pending;
    long long frontier = start_block;
    long long last_ckpt = start_block;
    auto last_progress = t_begin;
    std::string first_error;
    bool nonfinite = false;
    long long bad_particle = -1;
    int bad_sample = -1;

    auto worker_fn = [&]() {
        for (;;) {
            const long long b = next_block.fetch_add(1);
            if (b >= n_blocks) break;
            {
                std::lock_guard<std::mutex> lk(merge_mutex);
                if (!first_error.empty()) break;
            }
            auto acc = std::make_unique<BlockAccum>();
            acc->block_start = b * kEnsembleBlock;
            acc->cells.assign(static_cast<size_t>(n_samples) * kEnsembleBatches,
                              MomentAccumulator{});
            const int n_in_block = static_cast<int>(
                std::min<long long>(kEnsembleBlock, config.n_particles - acc->block_start));
            try {
                if (use_fast) {
                    FoldSink sink;
                    sink.acc = acc.get();
                    sink.dim = config.flow.dim;
                    detail::run_block_fast(config, acc->block_start, n_in_block,
                                           sample_steps.data(), n_samples, sink);
                } else {
                    process_block_scalar(config, acc->block_start, n_in_block, sample_steps, *acc);
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(merge_mutex);
                if (first_error.empty()) first_error = e.what();
                break;
            }
            std::lock_guard<std::mutex> lk(merge_mutex);
            if (acc->nonfinite && !nonfinite) {
                nonfinite = true;
                bad_particle = acc->bad_particle;
                bad_sample = acc->bad_sample;
            }
            pending[b] = std::move(acc);
            while (true) {
                auto it = pending.find(frontier);
                if (it == pending.end()) break;
                BlockAccum& ba = *it->second;
                for (size_t ci = 0; ci < stats.cells.size(); ++ci)
                    stats.cells[ci].merge(ba.cells[ci], stats.dim);
                stats.n_particles += std::min<long long>(
                    kEnsembleBlock, config.n_particles - ba.block_start);
                pending.erase(it);
                ++frontier;
                if (ckpt_blocks > 0 && frontier - last_ckpt >= ckpt_blocks && frontier < n_blocks) {
                    save_checkpoint(opts.checkpoint_path, stats, frontier);
                    last_ckpt = frontier;
                }
            }
            if (opts.progress) {
                const auto now = std::chrono::steady_clock::now();
                if (now - last_progress > std::chrono::seconds(5)) {
                    last_progress = now;
                    const double secs = std::chrono::duration<double>(now - t_begin).count();
                    const double steps_done = static_cast<double>(frontier - start_block) *
                                              kEnsembleBlock * config.n_steps();
                    std::fprintf(stderr, "ensemble: %lld/%lld particles, %.1f Msteps/s\n",
                                 std::min(frontier * kEnsembleBlock, config.n_particles),
                                 config.n_particles, steps_done / secs / 1e6);
                }
            }
        }
    };

    if (workers == 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
        for (auto& th : pool) th.join();
    }

    if (!first_error.empty()) throw RunError(first_error);
    if (nonfinite) {
        // The fast path only checks at sample times; rerun the offender on
        // the scalar path to pin down the exact step if it reproduces.
        long long exact = -1;
        try {
            exact = scalar_run_one(config, bad_particle, sample_steps.data(), n_samples,
                                   [](int, const double*) {});
        } catch (...) {
        }
        std::string msg = "non-finite state at particle " + std::to_string(bad_particle);
        if (exact >= 0)
            msg += ", step " + std::to_string(exact);
        else
            msg += ", by sample index " + std::to_string(bad_sample) +
                   " (scalar rerun stayed finite)";
        throw RunError(msg);
    }

    if (!opts.checkpoint_path.empty()) {
        std::error_code ec;
        std::filesystem::remove(opts.checkpoint_path, ec);  // completed; snapshot obsolete
    }

    const auto t_end = std::chrono::steady_clock::now();
    RunMetrics m;
    m.wall_seconds = std::chrono::duration<double>(t_end - t_begin).count();
    m.particle_steps = (n_blocks - start_block) > 0
                           ? (config.n_particles - start_block * kEnsembleBlock) * config.n_steps()
                           : 0;
    m.particle_steps_per_second = m.wall_seconds > 0 ? m.particle_steps / m.wall_seconds : 0.0;
    g_last_metrics = m;
    return stats;
}

RunMetrics last_run_metrics() { return g_last_metrics; }

}  // namespace effdiff
