#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kcs/characteristics.hpp"
#include "kcs/diagnostics.hpp"
#include "kcs/error.hpp"
#include "kcs/grid_solver.hpp"
#include "kcs/particles.hpp"
#include "kcs/phase_grid.hpp"
#include "kcs/rng.hpp"

namespace kcs {

/// Boundary-cell mass above this fraction of M raises a truncation warning.
inline constexpr double kBoundaryMassWarning = 1e-8;

struct GridRunOptions {
    double sigma = 0.0;
    double dt = 1e-3;
    std::size_t steps = 0;
    std::size_t output_every = 1;  ///< record every k-th step (the last step is always recorded)
    GridStepOptions step;
    WeightSpec weights;
    bool record_fields = false;  ///< keep a FieldHistory at every step
    std::function<void(const PhaseGrid&)> observer;  ///< called at every output
};

struct GridRunResult {
    PhaseGrid final_state;
    DiagnosticsSeries series;
    std::optional<FieldHistory> fields;
    double max_boundary_mass = 0.0;  ///< largest mass in the outermost x and v cells, relative to M
    std::vector<std::string> warnings;
};

/// Mass held in the outermost ring of cells.
inline double boundary_mass(const PhaseGrid& f) {
    const auto& g = f.geom;
    double s = 0.0;
    for (std::size_t j = 0; j < g.nx; ++j)
        for (std::size_t k = 0; k < g.nv; ++k)
            if (j == 0 || k == 0 || j + 1 == g.nx || k + 1 == g.nv) s += f(j, k);
    return s * g.cell_area();
}

/// Advances f0 by opt.steps Strang steps. The dissipation integral is accumulated with the
/// trapezoidal rule at every step, independently of the output cadence.
inline GridRunResult run_grid(const PhaseGrid& f0, const KernelSpec& k, const GridRunOptions& opt) {
    if (opt.output_every == 0) throw DomainError("run_grid: output cadence must be at least 1");
    GridRunResult res;
    PhaseGrid f = f0;
    const double m0 = f0.mass();
    auto rate = [&](const PhaseGrid& s) { return opt.step.alignment ? dissipation_rate(s, k, opt.step.convolution) : 0.0; };
    auto monitor = [&](const PhaseGrid& s) {
        if (m0 > 0.0) res.max_boundary_mass = std::max(res.max_boundary_mass, boundary_mass(s) / m0);
    };
    if (opt.record_fields) {
        res.fields.emplace();
        res.fields->push(f.t, step_fields(f, k, opt.step));
    }
    double d_prev = rate(f);
    double cumulative = 0.0;
    auto record = [&](const PhaseGrid& s, double d_now) {
        DiagnosticsRecord r = grid_record(s, k, opt.weights, d_now);
        r.cumulative_dissipation = cumulative;
        res.series.append(r);
        if (opt.observer) opt.observer(s);
    };
    record(f, d_prev);
    monitor(f);
    for (std::size_t n = 0; n < opt.steps; ++n) {
        f = full_step(f, k, opt.sigma, opt.dt, opt.step);
        // exact multiple of dt avoids drift in the output times
        f.t = f0.t + static_cast<double>(n + 1) * opt.dt;
        const double d_now = rate(f);
        cumulative += 0.5 * opt.dt * (d_prev + d_now);
        d_prev = d_now;
        monitor(f);
        if (opt.record_fields) res.fields->push(f.t, step_fields(f, k, opt.step));
        if ((n + 1) % opt.output_every == 0 || n + 1 == opt.steps) record(f, d_now);
    }
    if (res.max_boundary_mass > kBoundaryMassWarning)
        res.warnings.push_back("boundary cells hold " + std::to_string(res.max_boundary_mass) +
                               " of the mass; enlarge the domain");
    res.final_state = std::move(f);
    return res;
}

struct ParticleRunOptions {
    double sigma = 0.0;
    double dt = 1e-3;
    std::size_t steps = 0;
    std::size_t output_every = 1;
    std::uint64_t seed = 1;
    bool alignment = true;         ///< false: forces are zero (noise-only dynamics)
    bool track_diameter = false;   ///< velocity diameter after every step
    std::function<void(const ParticleEnsemble&)> observer;
};

struct ParticleRunResult {
    ParticleEnsemble final_state;
    DiagnosticsSeries series;
    std::vector<double> diameters;  ///< index n: diameter after n steps
};

/// RK4 for sigma = 0, Euler-Maruyama otherwise. Forces at the current state are computed
/// once per step and reused for the dissipation rate and the first integrator stage.
inline ParticleRunResult run_particles(const ParticleEnsemble& e0, const KernelSpec& k, const ParticleRunOptions& opt) {
    if (opt.output_every == 0) throw DomainError("run_particles: output cadence must be at least 1");
    ParticleRunResult res;
    ParticleEnsemble e = e0;
    const CounterRng rng(opt.seed);
    std::vector<double> forces(e.x.size(), 0.0);
    auto update_forces = [&] {
        if (opt.alignment) compute_forces(e, k, forces);
    };
    update_forces();
    double d_prev = opt.alignment ? particle_dissipation_from_forces(e, forces) : 0.0;
    double cumulative = 0.0;
    auto record = [&](double d_now) {
        DiagnosticsRecord r = particle_record(e, d_now);
        r.cumulative_dissipation = cumulative;
        res.series.append(r);
        if (opt.observer) opt.observer(e);
    };
    record(d_prev);
    if (opt.track_diameter) res.diameters.push_back(velocity_diameter(e));
    for (std::size_t n = 0; n < opt.steps; ++n) {
        if (opt.sigma == 0.0 && opt.alignment)
            e = step_deterministic(e, k, opt.dt, forces);
        else
            e = step_stochastic(e, k, opt.dt, opt.sigma, rng, n, forces);
        e.t = e0.t + static_cast<double>(n + 1) * opt.dt;
        update_forces();
        const double d_now = opt.alignment ? particle_dissipation_from_forces(e, forces) : 0.0;
        cumulative += 0.5 * opt.dt * (d_prev + d_now);
        d_prev = d_now;
        if (opt.track_diameter) res.diameters.push_back(velocity_diameter(e));
        if ((n + 1) % opt.output_every == 0 || n + 1 == opt.steps) record(d_now);
    }
    res.final_state = std::move(e);
    return res;
}

}  // namespace kcs
