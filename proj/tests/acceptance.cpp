#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "kcs/kcs.hpp"

using namespace kcs;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

GridRunResult grid_run(const PhaseGrid& f0, const KernelSpec& k, double sigma, double dt, std::size_t steps,
                       std::size_t every, GridStepOptions step = {}) {
    GridRunOptions o;
    o.sigma = sigma;
    o.dt = dt;
    o.steps = steps;
    o.output_every = every;
    o.step = step;
    return run_grid(f0, k, o);
}

SimParams two_beam_params(std::size_t n, double sigma, double T) {
    SimParams p;
    p.Nx = p.Nv = n;
    p.Lx = 8.0;
    p.sigma = sigma;
    p.T = T;
    p.Lv = auto_velocity_extent(TwoBeamProfile{}, p);
    return p;
}

// Shared between criteria 2 and 3.
struct ParticleEnergyRuns {
    ParticleRunResult coarse, fine;
};

const ParticleEnergyRuns& particle_energy_runs() {
    static const ParticleEnergyRuns runs = [] {
        SimParams p;
        p.N = 2000;
        p.T = 5.0;
        p.Lv = 2.0;
        const auto e0 = init_particles(TwoBeamProfile{}, p);
        auto run = [&](double dt) {
            ParticleRunOptions o;
            o.dt = dt;
            o.steps = static_cast<std::size_t>(std::llround(p.T / dt));
            o.output_every = o.steps / 50;
            o.track_diameter = true;
            return run_particles(e0, KernelSpec{}, o);
        };
        return ParticleEnergyRuns{run(2e-3), run(1e-3)};
    }();
    return runs;
}

// Shared between criteria 1 and 3.
const GridRunResult& two_beam_grid(double sigma) {
    static std::vector<std::pair<double, GridRunResult>> cache;
    for (const auto& [s, r] : cache)
        if (s == sigma) return r;
    const auto p = two_beam_params(128, sigma, 2.0);
    cache.emplace_back(sigma, grid_run(init_grid(TwoBeamProfile{}, p), KernelSpec{}, sigma, 1e-3, 2000, 20));
    return cache.back().second;
}

Outcome mass_conservation() {
    Outcome o{true, ""};
    for (double sigma : {0.0, 0.1}) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto& r = two_beam_grid(sigma);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        double drift = 0.0;
        for (const auto& rec : r.series.records()) drift = std::max(drift, std::abs(rec.mass / r.series.front().mass - 1.0));
        o.pass = o.pass && drift <= 1e-9 && secs <= 10.0;
        o.detail += "sigma " + sci(sigma) + ": drift " + sci(drift) + " in " + sci(secs) + " s; ";
    }
    return o;
}

Outcome energy_identity() {
    const auto& runs = particle_energy_runs();
    auto resid = [](const ParticleRunResult& r) { return max_abs(energy_ledger(r.series, 0.0, 1, 1.0)) / r.series.front().energy; };
    const double coarse = resid(runs.coarse), fine = resid(runs.fine);
    const double ratio = coarse / fine;
    return {fine <= 1e-6 && ratio >= 3.5,
            "N 2000, T 5: residual " + sci(coarse) + " at dt 2e-3, " + sci(fine) + " at dt 1e-3, ratio " + sci(ratio)};
}

Outcome energy_monotonicity() {
    const auto& g = two_beam_grid(0.0);
    double worst_rise = -1.0;
    for (std::size_t i = 1; i < g.series.size(); ++i)
        worst_rise = std::max(worst_rise, g.series[i].energy - g.series[0].energy);
    bool diam_ok = true;
    double diam_rise = -1.0;
    for (const auto* r : {&particle_energy_runs().coarse, &particle_energy_runs().fine}) {
        for (std::size_t i = 1; i < r->diameters.size(); ++i) {
            diam_rise = std::max(diam_rise, r->diameters[i] - r->diameters[i - 1]);
            if (r->diameters[i] > r->diameters[i - 1] + 1e-12) diam_ok = false;
        }
    }
    return {worst_rise <= 0.0 && diam_ok,
            "grid max E(t) - E(0) " + sci(worst_rise) + "; particle max step change of diameter " + sci(diam_rise)};
}

Outcome support_bound() {
    struct Case {
        const char* name;
        Profile profile;
        KernelSpec kernel;
        double lv;
    };
    const std::vector<Case> cases{{"two_beam", TwoBeamProfile{}, KernelSpec{}, 0.0},
                                  {"bump", BumpCompactProfile{}, KernelSpec{}, 0.0},
                                  {"rigid_flock", RigidFlockProfile{}, KernelSpec::constant(1.0), 2.0},
                                  {"maxwellian", MaxwellianProfile{}, KernelSpec{}, 4.0}};
    Outcome o{true, ""};
    for (const auto& c : cases) {
        SimParams p;
        p.Nx = p.Nv = 128;
        p.T = 2.0;
        p.N = 1000;
        p.dt = 2e-3;
        p.Lv = c.lv > 0.0 ? c.lv : auto_velocity_extent(c.profile, p);
        const auto f0 = init_grid(c.profile, p, c.lv == 0.0);
        const auto g = grid_run(f0, c.kernel, 0.0, p.dt, p.steps(), 10);
        const auto gc = support_bound_check(g.series, grid_support_radius(f0), f0.mass(), 2.0 * f0.geom.dv());
        const auto e0 = init_particles(c.profile, p);
        ParticleRunOptions po;
        po.dt = p.dt;
        po.steps = p.steps();
        po.output_every = 10;
        const auto pr = run_particles(e0, c.kernel, po);
        const auto pc = support_bound_check(pr.series, pr.series.front().support_radius, e0.mass, 0.0);
        o.pass = o.pass && gc.pass && pc.pass;
        o.detail += std::string(c.name) + " margin grid " + sci(gc.worst_margin) + " particles " + sci(pc.worst_margin) + "; ";
    }
    return o;
}

Outcome noise_ledger() {
    Outcome o{true, ""};
    {
        const double sigma = 0.1;
        const auto p = two_beam_params(128, sigma, 2.0);
        const auto f0 = init_grid(TwoBeamProfile{}, p, false);
        GridStepOptions step;
        step.alignment = false;
        const auto r = grid_run(f0, KernelSpec{}, sigma, 1e-3, 2000, 100, step);
        const double M = f0.mass();
        double worst = 0.0;
        for (std::size_t i = 1; i < r.series.size(); ++i) {
            const double expected = 2.0 * sigma * M * r.series[i].t;
            worst = std::max(worst, std::abs(r.series[i].energy - r.series[0].energy - expected) / expected);
        }
        o.pass = worst <= 0.02;
        o.detail = "alignment off: worst relative deviation " + sci(worst) + "; ";
    }
    double previous = std::numeric_limits<double>::infinity();
    GridStepOptions step;
    step.reconstruction = Reconstruction::VanLeer;
    for (std::size_t n : {128u, 256u}) {
        const auto p = two_beam_params(n, 0.1, 2.0);
        const auto f0 = init_grid(TwoBeamProfile{}, p, false);
        const auto r = grid_run(f0, KernelSpec{}, 0.1, 1e-3, 2000, 100, step);
        const double rel = max_abs(energy_ledger(r.series, 0.1, 1, f0.mass())) / r.series.front().energy;
        o.pass = o.pass && rel <= 0.05 && rel < previous;
        previous = rel;
        o.detail += "full ledger " + std::to_string(n) + "^2: " + sci(rel) + " of E(0); ";
    }
    return o;
}

Outcome weighted_growth() {
    Outcome o{true, ""};
    for (double sigma : {0.0, 0.1, 0.5, 1.0}) {
        const auto p = two_beam_params(128, sigma, 2.0);
        const auto f0 = init_grid(TwoBeamProfile{}, p);
        const auto r = grid_run(f0, KernelSpec{}, sigma, 2e-3, 1000, 10);
        const double ceiling = (2.0 * f0.mass() + 1.0) * 1.05;
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < r.series.size(); ++i) {
            const auto &a = r.series[i - 1], &b = r.series[i];
            worst = std::max(worst, (std::log(b.l1_v_weighted) - std::log(a.l1_v_weighted)) / (b.t - a.t));
        }
        o.pass = o.pass && worst <= ceiling;
        o.detail += "sigma " + sci(sigma) + ": max slope " + sci(worst) + "; ";
    }
    o.detail += "ceiling " + sci(3.0 * 1.05);
    return o;
}

Outcome stability() {
    struct Case {
        const char* name;
        Scenario sc;
        StabilitySpec st;
    };
    std::vector<Case> cases;
    {
        Scenario sc;
        sc.profile = RigidFlockProfile{0.5, 1.0};
        sc.kernel = KernelSpec::constant(1.0);
        sc.params.Lv = 2.0;
        StabilitySpec st;
        st.bump_v = 0.5;
        cases.push_back({"rigid_flock", sc, st});
    }
    {
        Scenario sc;
        sc.params.T = 2.0;
        sc.params.Lv = auto_velocity_extent(sc.profile, sc.params);
        cases.push_back({"two_beam", sc, StabilitySpec{}});
    }
    {
        Scenario sc;
        sc.profile = MaxwellianProfile{0, 0, 1, 0.5};
        sc.params.sigma = 0.1;
        sc.params.T = 2.0;
        sc.params.Lv = auto_velocity_extent(sc.profile, sc.params);
        StabilitySpec st;
        st.norm = DistanceNorm::L2Omega;
        cases.push_back({"maxwellian", sc, st});
    }
    Outcome o{true, ""};
    for (auto& c : cases) {
        c.sc.params.dt = 2e-3;
        const auto r = run_stability(c.sc, c.st, 2.0, 50);
        o.pass = o.pass && r.pass();
        o.detail += std::string(c.name) + " (" + norm_name(c.st.norm) + "): max A " + sci(r.max_amplification) + ", gap " +
                    sci(r.max_relative_gap) + "; ";
    }
    return o;
}

Outcome vanishing_noise() {
    Scenario sc;
    sc.profile = MaxwellianProfile{0, 0, 1, 0.5};
    sc.params.Nx = sc.params.Nv = 128;
    sc.params.Lx = 8.0;
    sc.params.dt = 2e-3;
    sc.params.sigma = 0.2;
    sc.params.T = 1.0;
    sc.params.Lv = auto_velocity_extent(sc.profile, sc.params);
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_sigma_sweep(sc, SigmaSweepSpec{}, 1.0, 10);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& n = r.norm_verdict;
    const auto& m = r.observable_verdict;
    return {n.monotone && n.ratio_ok && m.monotone && m.ratio_ok && secs <= 120.0,
            "L2(omega) worst ratio " + sci(n.worst_ratio) + " slope " + sci(n.fit.slope) + "; observable worst ratio " +
                sci(m.worst_ratio) + " slope " + sci(m.fit.slope) + "; " + sci(secs) + " s"};
}

Outcome characteristics() {
    double ode_err = 0.0;
    for (double a : {0.4, 1.3})
        for (double b : {-0.5, 0.3}) {
            const double x0 = 0.2, v0 = 1.1, T = 2.0;
            const auto s = solve_characteristic(std::vector<double>{x0}, std::vector<double>{v0},
                                                ConstantFieldProvider{a, {b}}, T, 1e-3);
            const double u = b / a, decay = std::exp(-a * T);
            const double V = u + (v0 - u) * decay;
            const double X = x0 + u * T + (v0 - u) * (1.0 - decay) / a;
            ode_err = std::max({ode_err, std::abs(s.state.V[0] - V), std::abs(s.state.X[0] - X),
                                std::abs(s.V_closed_form[0] - V), std::abs(s.state.logJ - a * T)});
        }
    SimParams p;
    p.Nx = p.Nv = 256;
    p.Lx = 6.0;
    p.Lv = 3.0;
    p.dt = 2e-3;
    p.T = 1.0;
    const auto f0 = init_grid(MaxwellianProfile{0, 0, 1, 0.5}, p, false);
    GridRunOptions o;
    o.dt = p.dt;
    o.steps = p.steps();
    o.output_every = o.steps;
    o.record_fields = true;
    const auto r = run_grid(f0, KernelSpec{}, o);
    double worst = 0.0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) {
            const double x0 = -1.0 + 0.5 * i, v0 = -0.5 + j / 3.0;
            const auto cs = solve_characteristic(std::vector<double>{x0}, std::vector<double>{v0}, *r.fields, p.T, p.dt);
            const double predicted = density_along_characteristic(sample_density(f0, x0, v0), cs.state);
            const double got = sample_density(r.final_state, cs.state.X[0], cs.state.V[0]);
            worst = std::max(worst, std::abs(got - predicted) / predicted);
        }
    return {ode_err <= 1e-9 && worst <= 0.05,
            "constant field error " + sci(ode_err) + "; grid vs characteristic at 20 probes, 256^2: " + sci(worst)};
}

Outcome oracle_equivalences() {
    double diss_err = 0.0;
    for (std::size_t nx : {2u, 5u, 8u})
        for (std::size_t nv : {3u, 8u}) {
            PhaseGrid f(GridGeometry{nx, nv, 1.3, 0.9});
            const CounterRng rng(nx * 100 + nv);
            for (std::size_t s = 0; s < f.values.size(); ++s) f.values[s] = rng.uniforms(0, static_cast<std::uint32_t>(s), 0)[0];
            const KernelSpec k;
            const auto& g = f.geom;
            double brute = 0.0;
            for (std::size_t j = 0; j < nx; ++j)
                for (std::size_t a = 0; a < nv; ++a)
                    for (std::size_t l = 0; l < nx; ++l)
                        for (std::size_t b = 0; b < nv; ++b)
                            brute += k(std::abs(g.x(j) - g.x(l))) * f(j, a) * f(l, b) * std::pow(g.v(a) - g.v(b), 2);
            brute *= g.cell_area() * g.cell_area();
            diss_err = std::max(diss_err, std::abs(dissipation_rate(f, k) - brute) / brute);
        }

    double conv_err = 0.0;
    for (std::size_t n : {7u, 64u, 300u}) {
        std::vector<double> in(n);
        for (std::size_t i = 0; i < n; ++i) in[i] = std::exp(-0.01 * static_cast<double>(i)) * (1.5 + std::sin(0.3 * i));
        const double dx = 16.0 / static_cast<double>(n);
        const auto taps = kernel_taps(KernelSpec{}, n, dx);
        const auto direct = kernel_convolve(taps, in, dx, ConvolutionMethod::Direct);
        const auto fast = kernel_convolve(taps, in, dx, ConvolutionMethod::Fft);
        const double scale = max_abs(direct);
        for (std::size_t i = 0; i < n; ++i) conv_err = std::max(conv_err, std::abs(direct[i] - fast[i]) / scale);
    }

    auto grid_final = [] {
        auto p = two_beam_params(64, 0.1, 0.1);
        GridStepOptions step;
        step.reconstruction = Reconstruction::VanLeer;
        step.convolution = ConvolutionMethod::Fft;
        return grid_run(init_grid(TwoBeamProfile{}, p, false), KernelSpec{}, 0.1, 2e-3, 50, 10, step).final_state;
    };
    auto particle_final = [] {
        SimParams p;
        p.N = 301;
        p.Lv = 2.0;
        ParticleRunOptions o;
        o.sigma = 0.1;
        o.dt = 2e-3;
        o.steps = 50;
        o.seed = 11;
        return run_particles(init_particles(TwoBeamProfile{}, p), KernelSpec{}, o).final_state;
    };
    PhaseGrid g_ref;
    ParticleEnsemble p_ref;
    bool same = true;
    for (unsigned threads : {1u, 2u, 8u}) {
        ScopedThreadCount scope(threads);
        const auto g = grid_final();
        const auto e = particle_final();
        if (threads == 1) {
            g_ref = g;
            p_ref = e;
        } else {
            same = same && g == g_ref && e == p_ref;
        }
    }
    return {diss_err <= 1e-12 && conv_err <= 1e-12 && same,
            "dissipation vs four-index sum " + sci(diss_err) + "; fft vs direct " + sci(conv_err) +
                "; bitwise equal across 1, 2, 8 threads: " + (same ? "yes" : "no")};
}

}  // namespace

int main() {
    std::setvbuf(stdout, nullptr, _IONBF, 0);
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"mass conservation", mass_conservation},
        {"energy identity", energy_identity},
        {"energy inequality and flocking", energy_monotonicity},
        {"support bound", support_bound},
        {"noise ledger", noise_ledger},
        {"weighted-norm growth", weighted_growth},
        {"stability", stability},
        {"vanishing noise", vanishing_noise},
        {"characteristics", characteristics},
        {"oracle equivalences", oracle_equivalences},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        while (o.detail.size() >= 2 && o.detail.ends_with("; ")) o.detail.resize(o.detail.size() - 2);
        std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), secs);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
