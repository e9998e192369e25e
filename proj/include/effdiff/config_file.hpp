#pragma once

#include <iosfwd>
#include <string>

#include "effdiff/ensemble.hpp"

namespace effdiff {

/// A run description loaded from an INI-style config file with sections
/// [flow], [integrator], [ensemble], [output]. See configs/ for the shipped
/// experiment recipes; every key is listed in the README.
struct ParsedConfig {
    SimulationConfig sim;
    std::string output_prefix;           // CSV/manifest path prefix ([output] prefix)
    long long checkpoint_interval = 0;   // particles between snapshots, 0 = off
};

/// Parse and validate. Unknown sections/keys, missing required keys, and
/// malformed values all throw ConfigError carrying "file:line:".
/// The seed may be absent here if the CLI supplies --seed.
ParsedConfig load_config(const std::string& path);
ParsedConfig load_config(std::istream& in, const std::string& filename);

}  // namespace effdiff
