#include "effdiff/config_file.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "effdiff/errors.hpp"

namespace effdiff {

namespace {

struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
};

struct Doc {
    std::string filename;
    std::map<std::string, std::map<std::string, Entry>> sections;

    std::string where(int line) const { return filename + ":" + std::to_string(line) + ": "; }

    const Entry* find(const std::string& sec, const std::string& key) const {
        auto s = sections.find(sec);
        if (s == sections.end()) return nullptr;
        auto e = s->second.find(key);
        if (e == s->second.end()) return nullptr;
        e->second.used = true;
        return &e->second;
    }

    const Entry& require(const std::string& sec, const std::string& key) const {
        const Entry* e = find(sec, key);
        if (!e) throw ConfigError(filename + ": missing required key '" + key + "' in [" + sec + "]");
        return *e;
    }
};

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const Doc& doc, const Entry& e) {
    try {
        size_t pos = 0;
        const double v = std::stod(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(doc.where(e.line) + "expected a number, got '" + e.value + "'");
    }
}

long long parse_int(const Doc& doc, const Entry& e) {
    try {
        size_t pos = 0;
        const long long v = std::stoll(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(doc.where(e.line) + "expected an integer, got '" + e.value + "'");
    }
}

std::uint64_t parse_u64(const Doc& doc, const Entry& e) {
    try {
        size_t pos = 0;
        const std::uint64_t v = std::stoull(e.value, &pos, 0);
        if (pos != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(doc.where(e.line) + "expected an unsigned integer, got '" + e.value + "'");
    }
}

std::vector<double> parse_list(const Doc& doc, const Entry& e) {
    std::istringstream in(e.value);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        try {
            size_t pos = 0;
            out.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument("");
        } catch (...) {
            throw ConfigError(doc.where(e.line) + "expected numbers, got '" + tok + "'");
        }
    }
    if (out.empty()) throw ConfigError(doc.where(e.line) + "empty list");
    return out;
}

Doc parse_ini(std::istream& in, const std::string& filename) {
    Doc doc;
    doc.filename = filename;
    static const std::map<std::string, int> known_sections = {
        {"flow", 0}, {"integrator", 0}, {"ensemble", 0}, {"output", 0}};
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(doc.where(lineno) + "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!known_sections.count(section))
                throw ConfigError(doc.where(lineno) + "unknown section [" + section +
                                  "] (flow, integrator, ensemble, output)");
            doc.sections[section];  // sections may legitimately be empty
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(doc.where(lineno) + "expected key = value");
        if (section.empty()) throw ConfigError(doc.where(lineno) + "key outside of any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError(doc.where(lineno) + "expected key = value");
        auto [it, inserted] = doc.sections[section].emplace(key, Entry{value, lineno});
        if (!inserted)
            throw ConfigError(doc.where(lineno) + "duplicate key '" + key + "' (first at line " +
                              std::to_string(it->second.line) + ")");
    }
    return doc;
}

void reject_unused(const Doc& doc) {
    for (const auto& [sec, entries] : doc.sections)
        for (const auto& [key, e] : entries)
            if (!e.used)
                throw ConfigError(doc.where(e.line) + "unknown key '" + key + "' in [" + sec + "]");
}

}  // namespace

ParsedConfig load_config(std::istream& in, const std::string& filename) {
    const Doc doc = parse_ini(in, filename);
    ParsedConfig pc;
    SimulationConfig& sim = pc.sim;

    // [flow]
    const std::string flow_name = doc.require("flow", "name").value;
    std::map<std::string, double> flow_params;
    for (const char* key : {"a", "k", "eps", "A", "B", "C", "omega", "dim"})
        if (const Entry* e = doc.find("flow", key)) flow_params[key] = parse_double(doc, *e);
    sim.flow = make_flow(flow_name, flow_params);

    // [integrator]
    sim.scheme = scheme_from_name(doc.require("integrator", "scheme").value);
    const Entry* sigma_e = doc.find("integrator", "sigma");
    const Entry* d0_e = doc.find("integrator", "d0");
    const Entry* matrix_e = doc.find("integrator", "matrix");
    const int given = (sigma_e != nullptr) + (d0_e != nullptr) + (matrix_e != nullptr);
    if (given != 1)
        throw ConfigError(doc.filename +
                          ": [integrator] needs exactly one of sigma, d0, or matrix");
    if (sigma_e) {
        const double sigma = parse_double(doc, *sigma_e);
        if (sigma < 0.0) throw ConfigError(doc.where(sigma_e->line) + "sigma must be >= 0");
        sim.diffusion = DiffusionSpec::scalar(sigma, sim.flow.dim);
    } else if (d0_e) {
        const double d0 = parse_double(doc, *d0_e);
        if (d0 < 0.0) throw ConfigError(doc.where(d0_e->line) + "d0 must be >= 0");
        sim.diffusion = DiffusionSpec::scalar(std::sqrt(2.0 * d0), sim.flow.dim);
    } else {
        const std::vector<double> m = parse_list(doc, *matrix_e);
        const int d = sim.flow.dim;
        if (static_cast<int>(m.size()) != d * d)
            throw ConfigError(doc.where(matrix_e->line) + "matrix needs " + std::to_string(d * d) +
                              " entries (row-major)");
        sim.diffusion = DiffusionSpec::full(m.data(), d);
    }

    // [ensemble]
    sim.dt = parse_double(doc, doc.require("ensemble", "dt"));
    sim.horizon = parse_double(doc, doc.require("ensemble", "horizon"));
    sim.n_particles = parse_int(doc, doc.require("ensemble", "n_particles"));
    if (const Entry* e = doc.find("ensemble", "seed")) {
        sim.master_seed = parse_u64(doc, *e);
        sim.seed_set = true;
    }
    if (const Entry* e = doc.find("ensemble", "start_time")) sim.start_time = parse_double(doc, *e);
    if (const Entry* e = doc.find("ensemble", "initial")) {
        if (e->value == "dirac") {
            sim.initial.kind = InitialDistribution::Kind::dirac;
        } else if (e->value == "uniform_box") {
            sim.initial.kind = InitialDistribution::Kind::uniform_box;
        } else {
            throw ConfigError(doc.where(e->line) + "initial must be dirac or uniform_box");
        }
    }
    auto read_vec = [&](const char* key, std::array<double, 3>& out) {
        if (const Entry* e = doc.find("ensemble", key)) {
            const std::vector<double> v = parse_list(doc, *e);
            if (static_cast<int>(v.size()) != sim.flow.dim)
                throw ConfigError(doc.where(e->line) + std::string(key) + " needs " +
                                  std::to_string(sim.flow.dim) + " entries");
            for (int i = 0; i < sim.flow.dim; ++i) out[i] = v[i];
        }
    };
    read_vec("initial_point", sim.initial.point);
    read_vec("initial_lo", sim.initial.lo);
    read_vec("initial_hi", sim.initial.hi);
    if (const Entry* e = doc.find("ensemble", "sample_times")) sim.sample_times = parse_list(doc, *e);
    if (const Entry* e = doc.find("ensemble", "checkpoint_interval")) {
        pc.checkpoint_interval = parse_int(doc, *e);
        if (pc.checkpoint_interval < 0)
            throw ConfigError(doc.where(e->line) + "checkpoint_interval must be >= 0");
    }

    // [output]
    pc.output_prefix = "effdiff_out";
    if (const Entry* e = doc.find("output", "prefix")) pc.output_prefix = e->value;

    reject_unused(doc);
    return pc;
}

ParsedConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return load_config(in, path);
}

}  // namespace effdiff
