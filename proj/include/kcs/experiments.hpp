#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "kcs/diagnostics.hpp"
#include "kcs/error.hpp"
#include "kcs/grid_solver.hpp"
#include "kcs/kernel.hpp"
#include "kcs/model.hpp"
#include "kcs/profiles.hpp"
#include "kcs/simulation.hpp"

namespace kcs {

/// Everything needed to start both solvers from the same initial data.
struct Scenario {
    std::string name = "two_beam";
    Profile profile = TwoBeamProfile{};
    SimParams params;
    KernelSpec kernel;
    WeightSpec weights;
    GridStepOptions step;
};

enum class DistanceNorm { L1, L2Omega, W11, X };

inline std::string norm_name(DistanceNorm n) {
    switch (n) {
        case DistanceNorm::L1: return "l1";
        case DistanceNorm::L2Omega: return "l2_omega";
        case DistanceNorm::W11: return "w11";
        default: return "x";
    }
}

inline double select_distance(const Distances& d, DistanceNorm n) {
    switch (n) {
        case DistanceNorm::L1: return d.l1;
        case DistanceNorm::L2Omega: return d.l2_omega;
        case DistanceNorm::W11: return d.w11;
        default: return d.x_norm;
    }
}

/// Least-squares line y = slope * x + intercept.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw DomainError("fit_line: need at least two paired samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw DomainError("fit_line: abscissae are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.slope * x[i] + f.intercept);
        ss += r * r;
    }
    f.rms_residual = std::sqrt(ss / static_cast<double>(n));
    return f;
}

// ---------------------------------------------------------------------------
// Stability

struct StabilitySpec {
    double delta = 1e-3;
    DistanceNorm norm = DistanceNorm::L1;
    double bump_x = 0.0;  ///< perturbation center and half-widths
    double bump_v = 0.0;
    double bump_hx = 1.0;
    double bump_hv = 0.5;
};

struct StabilityRow {
    double t = 0.0;
    double dist_delta = 0.0;
    double dist_half = 0.0;
    double amp_delta = 0.0;  ///< dist(t) / dist(0); 0 when the perturbation vanishes
    double amp_half = 0.0;
};

struct StabilityResult {
    std::vector<StabilityRow> rows;
    double max_amplification = 0.0;
    double max_relative_gap = 0.0;  ///< max_t |A_delta - A_half| / A_delta
    LinearFit log_amp_fit;          ///< log A_delta(t) against t
    bool bounded = true;            ///< A finite and <= 10 A(0) throughout
    bool consistent = true;         ///< gap <= 10%
    bool pass() const { return bounded && consistent; }
};

inline constexpr double kAmplificationCeiling = 10.0;
inline constexpr double kLinearResponseTolerance = 0.10;

/// f0 + delta * bump, rejected when any cell would become negative.
inline PhaseGrid perturbed_initial_data(const PhaseGrid& f0, const StabilitySpec& s, double delta) {
    const PhaseGrid bump = cosine_bump(f0.geom, s.bump_x, s.bump_v, s.bump_hx, s.bump_hv);
    PhaseGrid g = f0;
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        g.values[i] += delta * bump.values[i];
        if (g.values[i] < 0.0)
            throw ValidationError("perturbed density nonnegative", "delta = " + std::to_string(delta));
    }
    return g;
}

/// Runs f0, f0 + delta bump and f0 + delta/2 bump on the grid to T and reports the
/// amplification of their distance in the chosen norm.
inline StabilityResult run_stability(const Scenario& sc, const StabilitySpec& spec, double T, std::size_t output_every) {
    SimParams p = sc.params;
    p.T = T;
    const PhaseGrid f0 = init_grid(sc.profile, p);
    const PhaseGrid g0 = perturbed_initial_data(f0, spec, spec.delta);
    const PhaseGrid h0 = perturbed_initial_data(f0, spec, 0.5 * spec.delta);

    GridRunOptions opt;
    opt.sigma = p.sigma;
    opt.dt = p.dt;
    opt.steps = p.steps();
    opt.output_every = std::max<std::size_t>(1, output_every);
    opt.step = sc.step;
    opt.weights = sc.weights;

    std::vector<PhaseGrid> snaps_f, snaps_g, snaps_h;
    auto capture = [&](std::vector<PhaseGrid>& out) {
        GridRunOptions o = opt;
        o.observer = [&out](const PhaseGrid& s) { out.push_back(s); };
        return o;
    };
    run_grid(f0, sc.kernel, capture(snaps_f));
    run_grid(g0, sc.kernel, capture(snaps_g));
    run_grid(h0, sc.kernel, capture(snaps_h));

    StabilityResult res;
    const double d0 = select_distance(pairwise_distance(f0, g0, sc.weights), spec.norm);
    const double h0d = select_distance(pairwise_distance(f0, h0, sc.weights), spec.norm);
    std::vector<double> ts, logs;
    for (std::size_t i = 0; i < snaps_f.size(); ++i) {
        StabilityRow row;
        row.t = snaps_f[i].t;
        row.dist_delta = select_distance(pairwise_distance(snaps_f[i], snaps_g[i], sc.weights), spec.norm);
        row.dist_half = select_distance(pairwise_distance(snaps_f[i], snaps_h[i], sc.weights), spec.norm);
        row.amp_delta = d0 > 0.0 ? row.dist_delta / d0 : 0.0;
        row.amp_half = h0d > 0.0 ? row.dist_half / h0d : 0.0;
        res.max_amplification = std::max(res.max_amplification, row.amp_delta);
        if (!std::isfinite(row.amp_delta) || !std::isfinite(row.amp_half) ||
            row.amp_delta > kAmplificationCeiling || row.amp_half > kAmplificationCeiling)
            res.bounded = false;
        if (row.amp_delta > 0.0) {
            res.max_relative_gap = std::max(res.max_relative_gap, std::abs(row.amp_delta - row.amp_half) / row.amp_delta);
            ts.push_back(row.t);
            logs.push_back(std::log(row.amp_delta));
        }
        res.rows.push_back(row);
    }
    res.consistent = res.max_relative_gap <= kLinearResponseTolerance;
    if (ts.size() >= 2) res.log_amp_fit = fit_line(ts, logs);
    return res;
}

// ---------------------------------------------------------------------------
// Vanishing noise

struct SigmaSweepSpec {
    std::vector<double> sigmas{0.2, 0.1, 0.05, 0.025};
    DistanceNorm norm = DistanceNorm::L2Omega;
    double observable_half_width = 1.0;  ///< half-width of the cos^2 test function psi(v)
};

struct SigmaSweepRow {
    double sigma = 0.0;
    double err_norm = 0.0;        ///< ||f^sigma(T) - f^0(T)|| in the chosen norm
    double err_l1 = 0.0;
    double err_observable = 0.0;  ///< || int (f^sigma - f^0) psi dv ||_{L1((0,T) x R)}
};

struct SigmaSweepVerdict {
    bool monotone = true;       ///< err non-increasing as sigma decreases, within 5%
    double worst_ratio = 0.0;   ///< max err(sigma_{i+1}) / err(sigma_i)
    bool ratio_ok = true;       ///< worst_ratio <= 0.7
    LinearFit fit;              ///< log err against log sigma; slope is the fitted order
    bool extrapolation_ok = true;  ///< err(smallest sigma) <= 3 x fit prediction
    bool pass() const { return monotone && ratio_ok && extrapolation_ok; }
};

struct SigmaSweepResult {
    std::vector<SigmaSweepRow> rows;
    GridGeometry geometry;
    SigmaSweepVerdict norm_verdict;
    SigmaSweepVerdict l1_verdict;
    SigmaSweepVerdict observable_verdict;
    bool pass() const { return norm_verdict.pass() && observable_verdict.pass(); }
};

inline constexpr double kSweepNoiseFloor = 0.05;
inline constexpr double kSweepHalvingRatio = 0.7;
inline constexpr double kSweepExtrapolationFactor = 3.0;

/// Monotonicity, halving ratio and fitted order of an error sequence indexed by a
/// strictly decreasing sigma list.
inline SigmaSweepVerdict judge_sweep(const std::vector<double>& sigmas, const std::vector<double>& errs) {
    SigmaSweepVerdict v;
    for (std::size_t i = 1; i < errs.size(); ++i) {
        if (errs[i] > errs[i - 1] * (1.0 + kSweepNoiseFloor)) v.monotone = false;
        const double ratio = errs[i - 1] > 0.0 ? errs[i] / errs[i - 1] : std::numeric_limits<double>::infinity();
        v.worst_ratio = std::max(v.worst_ratio, ratio);
    }
    v.ratio_ok = v.worst_ratio <= kSweepHalvingRatio;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < errs.size(); ++i)
        if (errs[i] > 0.0 && sigmas[i] > 0.0) {
            lx.push_back(std::log(sigmas[i]));
            ly.push_back(std::log(errs[i]));
        }
    if (lx.size() >= 2) {
        v.fit = fit_line(lx, ly);
        const double predicted = std::exp(v.fit.intercept + v.fit.slope * lx.back());
        v.extrapolation_ok = std::exp(ly.back()) <= kSweepExtrapolationFactor * predicted;
    }
    return v;
}

/// m(x_j) = sum_k f_jk psi(v_k) dv.
inline std::vector<double> velocity_observable(const PhaseGrid& f, double half_width) {
    const auto& g = f.geom;
    std::vector<double> m(g.nx, 0.0);
    for (std::size_t j = 0; j < g.nx; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < g.nv; ++k) s += f(j, k) * detail::cos2_bump(g.v(k), half_width);
        m[j] = s * g.dv();
    }
    return m;
}

/// Runs the noiseless reference and every sigma of the list on one common grid, sized for
/// the largest sigma, with common time step and output times.
inline SigmaSweepResult run_sigma_sweep(const Scenario& sc, const SigmaSweepSpec& spec, double T,
                                        std::size_t output_every) {
    if (spec.sigmas.empty()) throw ValidationError("σ list strictly decreasing and positive", "empty list");
    for (std::size_t i = 0; i < spec.sigmas.size(); ++i) {
        if (!(spec.sigmas[i] > 0.0 && spec.sigmas[i] <= 1.0) || (i > 0 && !(spec.sigmas[i] < spec.sigmas[i - 1])))
            throw ValidationError("σ list strictly decreasing and positive",
                                  "entry " + std::to_string(i) + " = " + std::to_string(spec.sigmas[i]));
    }
    SimParams p = sc.params;
    p.T = T;
    p.sigma = spec.sigmas.front();
    const PhaseGrid f0 = init_grid(sc.profile, p, false);

    struct Run {
        PhaseGrid final_state;
        std::vector<double> times;
        std::vector<std::vector<double>> observable;
    };
    auto run = [&](double sigma) {
        Run r;
        GridRunOptions opt;
        opt.sigma = sigma;
        opt.dt = p.dt;
        opt.steps = p.steps();
        opt.output_every = std::max<std::size_t>(1, output_every);
        opt.step = sc.step;
        opt.weights = sc.weights;
        opt.observer = [&](const PhaseGrid& s) {
            r.times.push_back(s.t);
            r.observable.push_back(velocity_observable(s, spec.observable_half_width));
        };
        r.final_state = run_grid(f0, sc.kernel, opt).final_state;
        return r;
    };
    const Run ref = run(0.0);
    const double dx = f0.geom.dx();

    SigmaSweepResult res;
    res.geometry = f0.geom;
    std::vector<double> e_norm, e_l1, e_obs;
    for (double sigma : spec.sigmas) {
        const Run r = run(sigma);
        SigmaSweepRow row;
        row.sigma = sigma;
        const Distances d = pairwise_distance(r.final_state, ref.final_state, sc.weights);
        row.err_norm = select_distance(d, spec.norm);
        row.err_l1 = d.l1;
        // trapezoid in time over the output instants, midpoint in x
        std::vector<double> slice(r.times.size(), 0.0);
        for (std::size_t n = 0; n < r.times.size(); ++n) {
            double s = 0.0;
            for (std::size_t j = 0; j < r.observable[n].size(); ++j) s += std::abs(r.observable[n][j] - ref.observable[n][j]);
            slice[n] = s * dx;
        }
        for (std::size_t n = 1; n < slice.size(); ++n)
            row.err_observable += 0.5 * (r.times[n] - r.times[n - 1]) * (slice[n] + slice[n - 1]);
        res.rows.push_back(row);
        e_norm.push_back(row.err_norm);
        e_l1.push_back(row.err_l1);
        e_obs.push_back(row.err_observable);
    }
    res.norm_verdict = judge_sweep(spec.sigmas, e_norm);
    res.l1_verdict = judge_sweep(spec.sigmas, e_l1);
    res.observable_verdict = judge_sweep(spec.sigmas, e_obs);
    return res;
}

// ---------------------------------------------------------------------------
// Particle / grid cross-validation

struct CrossValidationSpec {
    std::vector<std::size_t> particle_counts{1000, 4000};
};

/// Discrepancies between a particle ensemble and a grid state at one time. Momentum is
/// scaled by sqrt(M E), energy and histograms relative to the grid values.
struct Discrepancy {
    double mass = 0.0;
    double momentum = 0.0;
    double energy = 0.0;
    double histogram = 0.0;  ///< L1 distance of the v-marginals divided by M
    double max_moment() const { return std::max({mass, momentum, energy}); }
};

/// v-marginal int f dx on the grid's velocity cells.
inline std::vector<double> grid_velocity_marginal(const PhaseGrid& f) {
    const auto& g = f.geom;
    std::vector<double> h(g.nv, 0.0);
    for (std::size_t j = 0; j < g.nx; ++j)
        for (std::size_t k = 0; k < g.nv; ++k) h[k] += f(j, k) * g.dx();
    return h;
}

/// Particle velocities binned onto the grid's velocity cells (mass per unit velocity);
/// particles outside [-Lv, Lv] land in the outermost cells.
inline std::vector<double> particle_velocity_histogram(const ParticleEnsemble& e, const GridGeometry& g) {
    if (e.d != 1) throw DomainError("particle_velocity_histogram: only d = 1 ensembles are binned");
    std::vector<double> h(g.nv, 0.0);
    const double w = e.weight() / g.dv();
    for (double v : e.v) {
        const double u = std::floor(v / g.dv() + 0.5 * static_cast<double>(g.nv));
        const auto k = static_cast<std::size_t>(std::clamp(u, 0.0, static_cast<double>(g.nv - 1)));
        h[k] += w;
    }
    return h;
}

inline Discrepancy compare_states(const ParticleEnsemble& e, const PhaseGrid& f) {
    const EmpiricalMoments pm = empirical_moments(e);
    DiagnosticsRecord gr;
    {
        const auto m = momentum_density(f);
        const auto en = energy_density(f);
        double mom = 0.0, energy = 0.0;
        for (std::size_t j = 0; j < f.geom.nx; ++j) {
            mom += m[j];
            energy += en[j];
        }
        gr.mass = f.mass();
        gr.momentum[0] = mom * f.geom.dx();
        gr.energy = energy * f.geom.dx();
    }
    Discrepancy d;
    d.mass = std::abs(pm.mass - gr.mass) / gr.mass;
    const double scale = std::sqrt(gr.mass * std::max(gr.energy, std::numeric_limits<double>::min()));
    d.momentum = std::abs(pm.momentum[0] - gr.momentum[0]) / scale;
    d.energy = gr.energy > 0.0 ? std::abs(pm.energy - gr.energy) / gr.energy : std::abs(pm.energy);
    const auto hg = grid_velocity_marginal(f);
    const auto hp = particle_velocity_histogram(e, f.geom);
    double s = 0.0;
    for (std::size_t k = 0; k < hg.size(); ++k) s += std::abs(hg[k] - hp[k]);
    d.histogram = s * f.geom.dv() / gr.mass;
    return d;
}

struct CrossValidationRow {
    std::size_t n = 0;
    Discrepancy worst;        ///< componentwise maximum over output times
    double energy_curve_gap = 0.0;  ///< max_t |E_p - E_g| / E_g(0)
};

struct CrossValidationResult {
    GridGeometry geometry;
    std::vector<CrossValidationRow> rows;
    double moment_scaling_slope = 0.0;  ///< fitted d log(max moment discrepancy) / d log N
};

/// Runs the grid solver once and the particle solver for every N, particles being drawn
/// from the grid's initial density. d = 1 only.
inline CrossValidationResult run_cross_validation(const Scenario& sc, const CrossValidationSpec& spec, double T,
                                                  std::size_t output_every) {
    if (sc.params.d != 1) throw ValidationError("d = 1 for cross-validation", "d = " + std::to_string(sc.params.d));
    SimParams p = sc.params;
    p.T = T;
    const PhaseGrid f0 = init_grid(sc.profile, p);
    GridRunOptions gopt;
    gopt.sigma = p.sigma;
    gopt.dt = p.dt;
    gopt.steps = p.steps();
    gopt.output_every = std::max<std::size_t>(1, output_every);
    gopt.step = sc.step;
    gopt.weights = sc.weights;
    std::vector<PhaseGrid> grid_snaps;
    gopt.observer = [&](const PhaseGrid& s) { grid_snaps.push_back(s); };
    run_grid(f0, sc.kernel, gopt);

    CrossValidationResult res;
    res.geometry = f0.geom;
    std::vector<double> ln, ld;
    for (std::size_t n : spec.particle_counts) {
        const ParticleEnsemble e0 = sample_particles(f0, n, p.seed);
        ParticleRunOptions popt;
        popt.sigma = p.sigma;
        popt.dt = p.dt;
        popt.steps = p.steps();
        popt.output_every = gopt.output_every;
        popt.seed = p.seed;
        popt.alignment = sc.step.alignment;
        std::vector<ParticleEnsemble> psnaps;
        popt.observer = [&](const ParticleEnsemble& s) { psnaps.push_back(s); };
        run_particles(e0, sc.kernel, popt);
        CrossValidationRow row;
        row.n = n;
        const double e_ref = grid_record(f0, sc.kernel, sc.weights, 0.0).energy;
        for (std::size_t i = 0; i < std::min(psnaps.size(), grid_snaps.size()); ++i) {
            const Discrepancy d = compare_states(psnaps[i], grid_snaps[i]);
            row.worst.mass = std::max(row.worst.mass, d.mass);
            row.worst.momentum = std::max(row.worst.momentum, d.momentum);
            row.worst.energy = std::max(row.worst.energy, d.energy);
            row.worst.histogram = std::max(row.worst.histogram, d.histogram);
            const double ep = empirical_moments(psnaps[i]).energy;
            const double eg = grid_record(grid_snaps[i], sc.kernel, sc.weights, 0.0).energy;
            if (e_ref > 0.0) row.energy_curve_gap = std::max(row.energy_curve_gap, std::abs(ep - eg) / e_ref);
        }
        res.rows.push_back(row);
        if (row.worst.max_moment() > 0.0) {
            ln.push_back(std::log(static_cast<double>(n)));
            ld.push_back(std::log(row.worst.max_moment()));
        }
    }
    if (ln.size() >= 2) res.moment_scaling_slope = fit_line(ln, ld).slope;
    return res;
}

/// Root-mean-square initial-energy discrepancy of ensembles sampled from f over the
/// given seeds, for every N. Halves when N quadruples (Monte Carlo rate N^{-1/2}).
inline std::vector<double> sampling_discrepancy(const PhaseGrid& f, const std::vector<std::size_t>& counts,
                                                std::uint64_t first_seed, std::size_t seeds) {
    std::vector<double> out;
    for (std::size_t n : counts) {
        double ss = 0.0;
        for (std::size_t s = 0; s < seeds; ++s) {
            const Discrepancy d = compare_states(sample_particles(f, n, first_seed + s), f);
            ss += d.energy * d.energy;
        }
        out.push_back(std::sqrt(ss / static_cast<double>(seeds)));
    }
    return out;
}

}  // namespace kcs
