#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kcs/config.hpp"
#include "kcs/csv.hpp"
#include "kcs/diagnostics.hpp"
#include "kcs/error.hpp"
#include "kcs/experiments.hpp"
#include "kcs/parallel.hpp"
#include "kcs/plots.hpp"
#include "kcs/profiles.hpp"
#include "kcs/simulation.hpp"
#include "kcs/snapshot.hpp"

namespace kcs {

enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitConfig = 2, kExitRuntime = 3 };

struct Check {
    std::string name;
    bool pass = true;
    double value = 0.0;
    double limit = 0.0;
    std::string detail;
};

/// Tolerance on the weighted-L1 log-slope ceiling 2M + 1, absorbing scheme error.
inline constexpr double kSlopeSchemeTolerance = 0.05;
/// Largest admissible ledger residual of a grid run, relative to E(0).
inline constexpr double kGridLedgerTolerance = 0.05;
inline constexpr double kMassDriftTolerance = 1e-9;

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline nlohmann::json check_json(const Check& c) {
    return {{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"limit", c.limit}, {"detail", c.detail}};
}

inline double relative_max(const std::vector<double>& v, double scale) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return scale > 0.0 ? m / scale : m;
}

/// Largest forward difference of log y over t.
inline double max_log_slope(const DiagnosticsSeries& s, double DiagnosticsRecord::*field) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double a = s[i - 1].*field, b = s[i].*field;
        if (!(a > 0.0 && b > 0.0)) continue;
        worst = std::max(worst, (std::log(b) - std::log(a)) / (s[i].t - s[i - 1].t));
    }
    return worst;
}

inline GridRunOptions grid_options(const RunConfig& cfg) {
    const Scenario& sc = cfg.scenario;
    GridRunOptions o;
    o.sigma = sc.params.sigma;
    o.dt = sc.params.dt;
    o.steps = sc.params.steps();
    o.output_every = cfg.output_every;
    o.step = sc.step;
    o.weights = sc.weights;
    return o;
}

inline ParticleRunOptions particle_options(const RunConfig& cfg) {
    const Scenario& sc = cfg.scenario;
    ParticleRunOptions o;
    o.sigma = sc.params.sigma;
    o.dt = sc.params.dt;
    o.steps = sc.params.steps();
    o.output_every = cfg.output_every;
    o.seed = sc.params.seed;
    o.alignment = sc.step.alignment;
    o.track_diameter = true;
    return o;
}

inline bool uses_grid(const RunConfig& c) { return c.solver != SolverSelection::Particle; }
inline bool uses_particles(const RunConfig& c) { return c.solver != SolverSelection::Grid; }

}  // namespace detail

/// Invariant checks on a completed grid run starting from f0.
inline std::vector<Check> grid_checks(const RunConfig& cfg, const PhaseGrid& f0, const GridRunResult& r) {
    const SimParams& p = cfg.scenario.params;
    const auto& s = r.series;
    const double m0 = s.front().mass;
    const double e0 = s.front().energy;
    std::vector<Check> out;

    double drift = 0.0;
    for (const auto& rec : s.records()) drift = std::max(drift, std::abs(rec.mass - m0) / m0);
    out.push_back({"grid.mass_conservation", drift <= kMassDriftTolerance, drift, kMassDriftTolerance,
                   "max relative mass drift"});

    const auto ledger = energy_ledger(s, p.sigma, 1, m0);
    const double res = detail::relative_max(ledger, e0);
    out.push_back({"grid.energy_ledger", res <= kGridLedgerTolerance, res, kGridLedgerTolerance,
                   "max |E + int D - E0 - 2 sigma M t| / E0"});

    if (p.sigma == 0.0) {
        double excess = 0.0;
        for (const auto& rec : s.records()) excess = std::max(excess, (rec.energy - e0) / e0);
        out.push_back({"grid.energy_nonincreasing", excess <= 1e-12, excess, 1e-12, "max (E(t) - E0) / E0"});
        if (profile_support_radius(cfg.scenario.profile, f0.geom)) {
            const auto sup = support_bound_check(s, grid_support_radius(f0), m0, 2.0 * f0.geom.dv());
            out.push_back({"grid.support_bound", sup.pass, -sup.worst_margin, 0.0,
                           "R(t) <= R0 + M R0 t + 2 dv; value is the worst excess"});
        }
    }

    const double ceiling = (2.0 * m0 + 1.0) * (1.0 + kSlopeSchemeTolerance);
    const double slope = detail::max_log_slope(s, &DiagnosticsRecord::l1_v_weighted);
    out.push_back({"grid.weighted_l1_growth", slope <= ceiling, slope, ceiling,
                   "max d/dt log ||(1+v^2)^1/2 f||_L1 against 2M+1"});

    if (r.max_boundary_mass > kBoundaryMassWarning)
        out.push_back({"grid.boundary_mass", false, r.max_boundary_mass, kBoundaryMassWarning,
                       "mass reaching the outermost cells; enlarge the domain"});
    return out;
}

inline std::vector<Check> particle_checks(const RunConfig& cfg, const ParticleRunResult& r) {
    const SimParams& p = cfg.scenario.params;
    const auto& s = r.series;
    const double m0 = s.front().mass;
    const double e0 = s.front().energy;
    std::vector<Check> out;
    if (p.sigma == 0.0) {
        double mom = 0.0;
        const double scale = std::sqrt(m0 * std::max(e0, 1e-300));
        for (const auto& rec : s.records())
            for (std::size_t c = 0; c < 3; ++c) mom = std::max(mom, std::abs(rec.momentum[c] - s.front().momentum[c]) / scale);
        out.push_back({"particles.momentum_conservation", mom <= 1e-10, mom, 1e-10, "max |P(t) - P0| / sqrt(M E0)"});
        const auto ledger = energy_ledger(s, 0.0, p.d, m0);
        const double res = detail::relative_max(ledger, e0);
        out.push_back({"particles.energy_identity", res <= 1e-4, res, 1e-4, "max |E + int D - E0| / E0"});
        double rise = 0.0;
        for (std::size_t i = 1; i < r.diameters.size(); ++i) rise = std::max(rise, r.diameters[i] - r.diameters[i - 1]);
        out.push_back({"particles.diameter_nonincreasing", rise <= 1e-12, rise, 1e-12, "max step-to-step diameter increase"});
        const auto sup = support_bound_check(s, s.front().support_radius, m0, 0.0);
        out.push_back({"particles.support_bound", sup.pass, -sup.worst_margin, 0.0,
                       "R(t) <= R0 + M R0 t; value is the worst excess"});
    }
    const double ceiling = (2.0 * m0 + 1.0) * (1.0 + kSlopeSchemeTolerance);
    const double slope = detail::max_log_slope(s, &DiagnosticsRecord::l1_v_weighted);
    out.push_back({"particles.weighted_l1_growth", slope <= ceiling, slope, ceiling,
                   "max d/dt log sum w (1+v^2)^1/2 against 2M+1"});
    return out;
}

/// Outcome of one declared study: a verdict, a result table and optional plots.
struct StudyOutcome {
    std::string kind;
    std::optional<bool> pass;  ///< empty for studies without a verdict (cross-validation)
    nlohmann::json summary;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::optional<StabilityResult> stability;
    std::optional<SigmaSweepResult> sweep;
};

inline StudyOutcome run_study(const StudySpec& st) {
    StudyOutcome o;
    o.kind = st.kind_name();
    o.summary = {{"kind", o.kind}, {"scenario", st.scenario.name}, {"T", st.T}, {"line", st.line}};
    if (const auto* k = std::get_if<StabilitySpec>(&st.kind)) {
        auto r = run_stability(st.scenario, *k, st.T, st.output_every);
        o.pass = r.pass();
        o.summary["norm"] = norm_name(k->norm);
        o.summary["delta"] = k->delta;
        o.summary["max_amplification"] = r.max_amplification;
        o.summary["max_relative_gap"] = r.max_relative_gap;
        o.summary["log_amplification_slope"] = r.log_amp_fit.slope;
        o.columns = {"t", "dist_delta", "dist_half", "amp_delta", "amp_half"};
        for (const auto& row : r.rows) o.rows.push_back({row.t, row.dist_delta, row.dist_half, row.amp_delta, row.amp_half});
        o.stability = std::move(r);
    } else if (const auto* k = std::get_if<SigmaSweepSpec>(&st.kind)) {
        auto r = run_sigma_sweep(st.scenario, *k, st.T, st.output_every);
        o.pass = r.pass();
        o.summary["norm"] = norm_name(k->norm);
        o.summary["fitted_order"] = r.norm_verdict.fit.slope;
        o.summary["worst_ratio"] = r.norm_verdict.worst_ratio;
        o.summary["observable_order"] = r.observable_verdict.fit.slope;
        o.summary["observable_worst_ratio"] = r.observable_verdict.worst_ratio;
        o.summary["l1_worst_ratio"] = r.l1_verdict.worst_ratio;
        o.columns = {"sigma", "err_norm", "err_l1", "err_observable"};
        for (const auto& row : r.rows) o.rows.push_back({row.sigma, row.err_norm, row.err_l1, row.err_observable});
        o.sweep = std::move(r);
    } else {
        const auto& cv = std::get<CrossValidationSpec>(st.kind);
        const auto r = run_cross_validation(st.scenario, cv, st.T, st.output_every);
        o.summary["moment_scaling_slope"] = r.moment_scaling_slope;
        o.columns = {"n", "mass", "momentum", "energy", "histogram", "energy_curve_gap"};
        for (const auto& row : r.rows)
            o.rows.push_back({static_cast<double>(row.n), row.worst.mass, row.worst.momentum, row.worst.energy,
                              row.worst.histogram, row.energy_curve_gap});
    }
    if (o.pass) o.summary["pass"] = *o.pass;
    return o;
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

inline void print_check(std::ostream& os, const Check& c) {
    os << (c.pass ? "PASS " : "FAIL ") << c.name << "  value=" << fmt(c.value) << "  limit=" << fmt(c.limit) << "  ("
       << c.detail << ")\n";
}

inline std::string study_file(const std::string& dir, std::size_t i, const StudyOutcome& o) {
    return dir + "/study_" + std::to_string(i) + "_" + o.kind;
}

/// Runs the studies selected by keep; each writes its CSV and plots into dir.
template <class Keep>
std::vector<StudyOutcome> run_studies(const RunConfig& cfg, const std::string& dir, Keep keep, std::ostream& os) {
    std::vector<StudyOutcome> outs;
    for (std::size_t i = 0; i < cfg.studies.size(); ++i) {
        if (!keep(cfg.studies[i])) continue;
        StudyOutcome o = run_study(cfg.studies[i]);
        const std::string base = study_file(dir, i, o);
        write_table(base + ".csv", o.columns, o.rows);
        RunOutputs plots;
        plots.label = o.kind;
        if (o.sweep) plots.sweeps.push_back(*o.sweep);
        if (o.stability) plots.stability.push_back(*o.stability);
        emit_plots(plots, base);
        os << (o.pass ? (*o.pass ? "PASS " : "FAIL ") : "INFO ") << "study." << i << "." << o.kind << "  "
           << o.summary.dump() << '\n';
        outs.push_back(std::move(o));
    }
    return outs;
}

inline RunConfig load_for_cli(const std::string& path, const std::optional<std::string>& out_dir, std::size_t threads) {
    RunConfig cfg = load_config(path);
    if (out_dir) cfg.output_dir = *out_dir;
    if (threads) cfg.threads = threads;
    if (cfg.threads) set_thread_count(static_cast<unsigned>(cfg.threads));
    return cfg;
}

inline nlohmann::json run_header(const RunConfig& cfg, const std::string& command) {
    const auto& p = cfg.scenario.params;
    return {{"command", command}, {"scenario", cfg.scenario.name}, {"solver", solver_name(cfg.solver)},
            {"sigma", p.sigma}, {"dt", p.dt}, {"T", p.T}, {"d", p.d}, {"Nx", p.Nx}, {"Nv", p.Nv},
            {"Lx", p.Lx}, {"Lv", p.Lv}, {"N", p.N}, {"threads", thread_count()}};
}

struct SolverRuns {
    std::vector<Check> checks;
    nlohmann::json summary = nlohmann::json::object();
};

/// Runs the configured solvers, writes CSV, snapshots and plots, and evaluates invariants.
inline SolverRuns run_solvers(const RunConfig& cfg, std::ostream& os) {
    SolverRuns out;
    const Scenario& sc = cfg.scenario;
    const std::string& dir = cfg.output_dir;
    if (uses_grid(cfg)) {
        const PhaseGrid f0 = init_grid(sc.profile, sc.params);
        const auto r = run_grid(f0, sc.kernel, grid_options(cfg));
        for (const auto& w : r.warnings) os << "warning: " << w << '\n';
        const std::string csv = dir + "/grid.csv";
        std::filesystem::remove(csv);
        emit_csv(r.series, csv);
        write_snapshot(f0, sc.params.sigma, dir + "/grid_initial.kcs");
        write_snapshot(r.final_state, sc.params.sigma, dir + "/grid_final.kcs");
        RunOutputs plots;
        plots.label = "grid";
        plots.series = r.series;
        plots.sigma = sc.params.sigma;
        plots.mass = f0.mass();
        if (profile_support_radius(sc.profile, f0.geom)) plots.support_r0 = grid_support_radius(f0);
        plots.heatmaps = {f0, r.final_state};
        emit_plots(plots, dir + "/grid");
        const auto checks = grid_checks(cfg, f0, r);
        out.checks.insert(out.checks.end(), checks.begin(), checks.end());
        out.summary["grid"] = {{"records", r.series.size()}, {"final_t", r.final_state.t},
                               {"final_energy", r.series.back().energy},
                               {"max_boundary_mass", r.max_boundary_mass}};
    }
    if (uses_particles(cfg)) {
        const ParticleEnsemble e0 = init_particles(sc.profile, sc.params);
        const auto r = run_particles(e0, sc.kernel, particle_options(cfg));
        const std::string csv = dir + "/particles.csv";
        std::filesystem::remove(csv);
        emit_csv(r.series, csv);
        write_snapshot(e0, sc.params.sigma, dir + "/particles_initial.kcs");
        write_snapshot(r.final_state, sc.params.sigma, dir + "/particles_final.kcs");
        RunOutputs plots;
        plots.label = "particles";
        plots.series = r.series;
        plots.sigma = sc.params.sigma;
        plots.d = sc.params.d;
        plots.mass = e0.mass;
        plots.support_r0 = r.series.front().support_radius;
        emit_plots(plots, dir + "/particles");
        const auto checks = particle_checks(cfg, r);
        out.checks.insert(out.checks.end(), checks.begin(), checks.end());
        out.summary["particles"] = {{"records", r.series.size()}, {"final_t", r.final_state.t},
                                    {"final_energy", r.series.back().energy}};
    }
    return out;
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& os) {
    ensure_dir(cfg.output_dir);
    auto runs = run_solvers(cfg, os);
    nlohmann::json summary = run_header(cfg, "simulate");
    summary["runs"] = runs.summary;
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : runs.checks) checks.push_back(check_json(c));
    summary["checks"] = checks;
    const auto studies = run_studies(cfg, cfg.output_dir, [](const StudySpec&) { return true; }, os);
    nlohmann::json js = nlohmann::json::array();
    for (const auto& s : studies) js.push_back(s.summary);
    summary["studies"] = js;
    write_json(cfg.output_dir + "/summary.json", summary);
    os << "wrote " << cfg.output_dir << '\n';
    return kExitOk;
}

inline int cmd_verify(const RunConfig& cfg, std::ostream& os) {
    ensure_dir(cfg.output_dir);
    auto runs = run_solvers(cfg, os);
    bool ok = true;
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : runs.checks) {
        print_check(os, c);
        checks.push_back(check_json(c));
        ok = ok && c.pass;
    }
    const auto studies = run_studies(cfg, cfg.output_dir, [](const StudySpec&) { return true; }, os);
    nlohmann::json js = nlohmann::json::array();
    for (const auto& s : studies) {
        js.push_back(s.summary);
        if (s.pass && !*s.pass) ok = false;
    }
    nlohmann::json summary = run_header(cfg, "verify");
    summary["checks"] = checks;
    summary["studies"] = js;
    summary["pass"] = ok;
    write_json(cfg.output_dir + "/verify.json", summary);
    os << summary.dump(2) << '\n';
    os << (ok ? "verify: all checks passed" : "verify: FAILED") << '\n';
    return ok ? kExitOk : kExitVerifyFailed;
}

/// Declared studies of the given kind, or one default study on the base scenario.
inline RunConfig with_default_study(RunConfig cfg, std::size_t kind_index) {
    for (const auto& s : cfg.studies)
        if (s.kind.index() == kind_index) return cfg;
    StudySpec st;
    st.scenario = cfg.scenario;
    st.T = cfg.scenario.params.T;
    st.output_every = std::max<std::size_t>(1, cfg.output_every / 10);
    if (kind_index == 1) {
        SigmaSweepSpec k;
        st.scenario.params.sigma = k.sigmas.front();
        if (cfg.lv_auto) st.scenario.params.Lv = auto_velocity_extent(st.scenario.profile, st.scenario.params);
        validate_scenario(st.scenario, true, false, 0, 0, 0);
        st.kind = k;
    } else {
        st.kind = CrossValidationSpec{};
    }
    cfg.studies.push_back(std::move(st));
    return cfg;
}

inline int cmd_studies(const RunConfig& base, std::size_t kind_index, const std::string& name, std::ostream& os) {
    const RunConfig cfg = with_default_study(base, kind_index);
    ensure_dir(cfg.output_dir);
    const auto studies = run_studies(cfg, cfg.output_dir, [&](const StudySpec& s) { return s.kind.index() == kind_index; }, os);
    bool ok = true;
    nlohmann::json js = nlohmann::json::array();
    for (const auto& s : studies) {
        js.push_back(s.summary);
        for (const auto& row : s.rows) {
            os << "  ";
            for (std::size_t i = 0; i < row.size(); ++i) os << s.columns[i] << '=' << fmt(row[i]) << ' ';
            os << '\n';
        }
        if (s.pass && !*s.pass) ok = false;
    }
    nlohmann::json summary = run_header(cfg, name);
    summary["studies"] = js;
    summary["pass"] = ok;
    write_json(cfg.output_dir + "/" + name + ".json", summary);
    return ok ? kExitOk : kExitVerifyFailed;
}

inline int cmd_inspect(const std::string& path, std::ostream& os) {
    const Snapshot s = read_snapshot(path);
    const auto& h = s.header;
    os << "file:     " << path << '\n';
    os << "format:   KCS1\n";
    if (h.solver == SolverTag::Grid) {
        os << "solver:   grid\n";
        os << "d:        " << h.d << '\n';
        os << "geometry: Nx = " << h.n0 << ", Nv = " << h.n1 << ", Lx = " << h.extent0 << ", Lv = " << h.extent1
           << " (x in [-Lx, Lx], v in [-Lv, Lv])\n";
    } else {
        os << "solver:   particles\n";
        os << "d:        " << h.d << '\n';
        os << "geometry: N = " << h.n0 << '\n';
    }
    os << "t:        " << format_double(h.t) << '\n';
    os << "sigma:    " << format_double(h.sigma) << '\n';
    os << "mass:     " << format_double(h.mass) << '\n';
    os << "payload:  " << h.payload_len << " doubles\n";
    return kExitOk;
}

}  // namespace detail

/// Command-line entry point; returns the process exit code.
inline int cli_main(int argc, char** argv, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"kinetic Cucker-Smale solvers"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::string> out_dir;
    std::size_t threads = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "configuration file")->required();
        sub->add_option("-o,--output-dir", out_dir, "override [run] output_dir");
        sub->add_option("-j,--threads", threads, "worker threads (0 keeps the configured value)");
    };
    auto* simulate = app.add_subcommand("simulate", "run the configured solvers and studies");
    auto* verify = app.add_subcommand("verify", "run the invariant suite; nonzero exit on any failure");
    auto* sweep = app.add_subcommand("sweep", "run the vanishing-noise sweep studies");
    auto* compare = app.add_subcommand("compare", "cross-validate particle and grid solvers");
    for (auto* s : {simulate, verify, sweep, compare}) add_common(s);
    auto* inspect = app.add_subcommand("inspect", "print a snapshot header");
    std::string snapshot_path;
    inspect->add_option("snapshot", snapshot_path, "KCS1 snapshot file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, os, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (inspect->parsed()) return detail::cmd_inspect(snapshot_path, os);
        const RunConfig cfg = detail::load_for_cli(config_path, out_dir, threads);
        if (simulate->parsed()) return detail::cmd_simulate(cfg, os);
        if (verify->parsed()) return detail::cmd_verify(cfg, os);
        if (sweep->parsed()) return detail::cmd_studies(cfg, 1, "sweep", os);
        return detail::cmd_studies(cfg, 2, "compare", os);
    } catch (const ConfigError& e) {
        err << "configuration error: " << (config_path.empty() ? "" : config_path + ": ") << e.what() << '\n';
        return kExitConfig;
    } catch (const SnapshotError& e) {
        err << "snapshot error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const BlowUpError& e) {
        err << "blow-up: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const Error& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace kcs
