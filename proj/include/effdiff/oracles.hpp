#pragma once

#include "effdiff/analysis.hpp"

namespace effdiff {

struct ShearFlowSpec {
    double a = 1.0;   // amplitude
    double k = 1.0;   // wavenumber, > 0
    double d0 = 1.0;  // molecular diffusivity, > 0
};

/// Exact D11 for the steady shear v = (a sin(k x2), 0): the corrector
/// equation D0 chi'' = -a sin(k x2) solves in closed form and yields
///   D11 = D0 + a^2 / (2 D0 k^2).
/// Throws ConfigError for k <= 0 or D0 <= 0.
double shear_effective_diffusivity(const ShearFlowSpec& spec);

/// With no flow the tracer is plain Brownian motion: D = D0 * I.
/// Writes a row-major dim x dim matrix.
void zero_flow_diffusivity(double d0, int dim, double* out);

/// Same pipeline at dt / refinement (refinement >= 8 enforced) with at
/// least the same particle count, tagged as reference in the report.
DiffusivityReport reference_run(const SimulationConfig& config, int refinement,
                                const EnsembleRunner& runner);

}  // namespace effdiff
