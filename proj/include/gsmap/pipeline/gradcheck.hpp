#pragma once

#include <cstdint>
#include <string>

namespace gsmap {

struct GradCheckOptions {
    uint32_t seed = 1;
    int n_gaussians = 20;  // per render configuration (upper bound)
    int configs = 1000;    // render configurations
    int core_configs = 1000;
    int image_size = 32;
    int params_per_config = 8; // individually finite-differenced scalars
    double core_tolerance = 1e-4;
    double render_tolerance = 1e-3;
    bool verbose = false;
};

struct GradCheckResult {
    bool passed = false;
    double max_rel_err_core = 0.0;
    double max_rel_err_render = 0.0;
    int configs_run = 0;
    int configs_resampled = 0; // draws rejected for sitting on a discontinuity
    std::string summary;
};

/// Central finite differences (step 1e-4) against the analytic gradients of
/// the core primitives and of full renders. Random configurations that put a
/// sample point within a finite-difference step of a non-differentiable
/// boundary (footprint edge on a pixel, radius ceil crossing, transmittance
/// cutoff, color clamp) are redrawn; the predicate uses forward quantities
/// only.
GradCheckResult run_gradcheck(const GradCheckOptions& opts);

} // namespace gsmap
