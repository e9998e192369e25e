#include "effdiff/report_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "effdiff/errors.hpp"
#include "effdiff/version.hpp"

namespace effdiff {

namespace {

std::ofstream open_report(const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RunError("cannot write " + path);
    return out;
}

void close_report(std::ofstream& out, const std::string& path) {
    out.close();
    if (!out) throw RunError("failed writing " + path);
}

void write_meta(std::ofstream& out, const char* what, const CsvMeta& meta) {
    char buf[64];
    out << "# effdiff " << what << " v" << kVersion << "\n";
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(meta.config_hash));
    out << "# config_hash: " << buf << "\n";
    out << "# seed: " << meta.seed << "\n";
    out << "# dt: " << format_double(meta.dt) << "\n";
    out << "# n_particles: " << meta.n_particles << "\n";
}

void matrix_columns(std::ofstream& out, int dim) {
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j)
            out << ",D" << i + 1 << j + 1 << ",SE" << i + 1 << j + 1;
}

void matrix_row(std::ofstream& out, const DiffusivityReport& rep, int k) {
    for (int i = 0; i < rep.dim; ++i)
        for (int j = i; j < rep.dim; ++j)
            out << "," << format_double(rep.d_at(k, i, j)) << "," << format_double(rep.se_at(k, i, j));
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    int prec = 17;
    for (int p = 1; p <= 17; ++p) {
        std::snprintf(buf, sizeof buf, "%.*g", p, v);
        if (std::strtod(buf, nullptr) == v) {
            prec = p;
            break;
        }
    }
    std::string s = buf;
    // Prefer plain decimal over scientific while it stays short (%g switches
    // to e-notation once the exponent reaches the precision).
    const size_t e = s.find('e');
    if (e != std::string::npos) {
        const int exp10 = std::atoi(s.c_str() + e + 1);
        if (exp10 >= -4 && exp10 < 17) {
            std::snprintf(buf, sizeof buf, "%.*f", std::max(0, prec - 1 - exp10), v);
            if (std::strtod(buf, nullptr) == v) s = buf;
        }
    }
    return s;
}

void write_timeseries_csv(const std::string& path, const DiffusivityReport& report, const CsvMeta& meta) {
    std::ofstream out = open_report(path);
    write_meta(out, "timeseries", meta);
    if (report.is_reference) out << "# reference: true\n";
    out << "t";
    matrix_columns(out, report.dim);
    out << "\n";
    for (size_t k = 0; k < report.times.size(); ++k) {
        out << format_double(report.times[k]);
        matrix_row(out, report, static_cast<int>(k));
        out << "\n";
    }
    close_report(out, path);
}

void write_final_csv(const std::string& path, const DiffusivityReport& report,
                     const PlateauDetection& plateau, const CsvMeta& meta) {
    std::ofstream out = open_report(path);
    write_meta(out, "final", meta);
    if (report.is_reference) out << "# reference: true\n";
    out << "t";
    matrix_columns(out, report.dim);
    out << ",mixed,t_mix\n";
    const int k = static_cast<int>(report.times.size()) - 1;
    out << format_double(report.times[k]);
    matrix_row(out, report, k);
    out << "," << (plateau.mixed ? 1 : 0) << "," << format_double(plateau.mixed ? plateau.t_mix : -1.0)
        << "\n";
    close_report(out, path);
}

void write_convergence_csv(const std::string& path, const ConvergenceStudy& study, const CsvMeta& meta) {
    std::ofstream out = open_report(path);
    write_meta(out, "convergence", meta);
    out << "# ref_dt: " << format_double(study.ref_dt) << "\n";
    out << "# ref_D11: " << format_double(study.ref_d11) << "\n";
    out << "# ref_SE11: " << format_double(study.ref_se11) << "\n";
    if (study.n_used >= 2) {
        out << "# slope: " << format_double(study.fit.slope) << "\n";
        out << "# r2: " << format_double(study.fit.r2) << "\n";
    } else {
        out << "# slope: noise-dominated\n";
    }
    out << "dt,D11,SE11,error,noise_dominated\n";
    for (const auto& p : study.points) {
        out << format_double(p.dt) << "," << format_double(p.d11) << "," << format_double(p.se11)
            << "," << format_double(p.error) << "," << (p.noise_dominated ? 1 : 0) << "\n";
    }
    close_report(out, path);
}

void write_sweep_csv(const std::string& path, const SweepResult& result, const CsvMeta& meta) {
    std::ofstream out = open_report(path);
    write_meta(out, "sweep", meta);
    out << "# parameter: " << sweep_parameter_name(result.parameter) << "\n";
    if (result.has_fit) {
        out << "# slope: " << format_double(result.fit.slope) << "\n";
        out << "# r2: " << format_double(result.fit.r2) << "\n";
    }
    out << sweep_parameter_name(result.parameter) << ",D11,SE11,mixed,t_mix\n";
    for (const auto& p : result.points) {
        out << format_double(p.value) << "," << format_double(p.d11) << "," << format_double(p.se11)
            << "," << (p.mixed ? 1 : 0) << "," << format_double(p.mixed ? p.t_mix : -1.0) << "\n";
    }
    close_report(out, path);
}

void write_manifest(const std::string& path, const ManifestInfo& info) {
    std::ofstream out = open_report(path);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(info.config_hash));
    out << "config_hash = " << buf << "\n";
    out << "version = " << info.version << "\n";
    out << "wall_clock_s = " << format_double(info.wall_seconds) << "\n";
    out << "particle_steps_per_s = " << format_double(info.particle_steps_per_second) << "\n";
    for (const auto& f : info.outputs) out << "output = " << f << "\n";
    close_report(out, path);
}

}  // namespace effdiff
