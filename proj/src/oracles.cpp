#include "effdiff/oracles.hpp"

#include "effdiff/errors.hpp"

namespace effdiff {

double shear_effective_diffusivity(const ShearFlowSpec& spec) {
    if (!(spec.k > 0.0)) throw ConfigError("shear oracle: k must be > 0");
    if (!(spec.d0 > 0.0)) throw ConfigError("shear oracle: D0 must be > 0");
    return spec.d0 + spec.a * spec.a / (2.0 * spec.d0 * spec.k * spec.k);
}

void zero_flow_diffusivity(double d0, int dim, double* out) {
    if (d0 < 0.0) throw ConfigError("zero-flow oracle: D0 must be >= 0");
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) out[i * dim + j] = i == j ? d0 : 0.0;
}

DiffusivityReport reference_run(const SimulationConfig& config, int refinement,
                                const EnsembleRunner& runner) {
    if (refinement < 8) throw ConfigError("reference run: refinement must be >= 8");
    SimulationConfig fine = config;
    fine.dt = config.dt / refinement;
    DiffusivityReport rep = runner(fine);
    rep.is_reference = true;
    return rep;
}

}  // namespace effdiff
