#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kcs/error.hpp"
#include "kcs/experiments.hpp"
#include "kcs/grid_solver.hpp"
#include "kcs/kernel.hpp"
#include "kcs/model.hpp"
#include "kcs/profiles.hpp"

namespace kcs {

enum class SolverSelection { Particle, Grid, Both };

inline std::string solver_name(SolverSelection s) {
    switch (s) {
        case SolverSelection::Particle: return "particle";
        case SolverSelection::Grid: return "grid";
        default: return "both";
    }
}

struct StudySpec {
    std::variant<StabilitySpec, SigmaSweepSpec, CrossValidationSpec> kind;
    Scenario scenario;  ///< base scenario with the study's overrides applied
    double T = 1.0;
    std::size_t output_every = 1;
    std::size_t line = 0;  ///< line of the [study] header

    std::string kind_name() const {
        switch (kind.index()) {
            case 0: return "stability";
            case 1: return "sigma_sweep";
            default: return "cross_validate";
        }
    }
};

struct RunConfig {
    Scenario scenario;
    SolverSelection solver = SolverSelection::Grid;
    std::string output_dir = "kcs_out";
    std::size_t output_every = 100;
    std::size_t threads = 0;  ///< 0 keeps the library default
    bool lv_auto = true;      ///< Lv derived from the profile, T and sigma
    std::vector<StudySpec> studies;
};

namespace detail {

struct ConfigEntry {
    std::string value;
    std::size_t line = 0;
    std::size_t column = 0;  ///< column of the value
    bool used = false;
};

struct ConfigSection {
    std::string name;
    std::size_t line = 0;
    std::map<std::string, ConfigEntry> entries;
};

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline const std::vector<std::string>& known_sections() {
    static const std::vector<std::string> s{"run", "kernel", "params", "weights", "profile", "study"};
    return s;
}

// Splits the text into sections; comments start at '#'.
inline std::vector<ConfigSection> tokenize_config(std::string_view text) {
    std::vector<ConfigSection> sections;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        const std::size_t hash = raw.find('#');
        const std::string_view body = raw.substr(0, hash);
        const std::string line = trim(body);
        if (line.empty()) continue;
        const std::size_t indent = body.find_first_not_of(" \t") + 1;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header", line_no, indent);
            const std::string name = lower(trim(std::string_view(line).substr(1, line.size() - 2)));
            bool known = false;
            for (const auto& k : known_sections()) known = known || k == name;
            if (!known) throw ConfigError("unknown section [" + name + "]", line_no, indent + 1);
            if (name != "study")
                for (const auto& s : sections)
                    if (s.name == name) throw ConfigError("duplicate section [" + name + "]", line_no, indent);
            sections.push_back({name, line_no, {}});
            continue;
        }
        const std::size_t eq = body.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no, indent);
        if (sections.empty()) throw ConfigError("key outside of any [section]", line_no, indent);
        const std::string key = lower(trim(body.substr(0, eq)));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", line_no, indent);
        const std::size_t vcol = body.find_first_not_of(" \t", eq + 1);
        if (value.empty()) throw ConfigError("missing value for '" + key + "'", line_no, eq + 2);
        auto& entries = sections.back().entries;
        if (entries.count(key)) throw ConfigError("duplicate key '" + key + "'", line_no, indent);
        entries[key] = {value, line_no, vcol == std::string_view::npos ? eq + 2 : vcol + 1, false};
    }
    return sections;
}

// Typed access to one section, recording which keys were consumed.
class SectionReader {
public:
    explicit SectionReader(ConfigSection* s) : s_(s) {}

    bool has(const std::string& key) const { return s_ && s_->entries.count(key); }
    std::size_t line_of(const std::string& key) const {
        if (!s_) return 0;
        auto it = s_->entries.find(key);
        return it == s_->entries.end() ? s_->line : it->second.line;
    }

    double number(const std::string& key, double fallback) {
        auto* e = find(key);
        if (!e) return fallback;
        return parse_double(*e, key);
    }

    std::size_t count(const std::string& key, std::size_t fallback) {
        auto* e = find(key);
        if (!e) return fallback;
        std::uint64_t v = 0;
        const char* b = e->value.data();
        const char* end = b + e->value.size();
        auto [p, ec] = std::from_chars(b, end, v);
        if (ec != std::errc() || p != end)
            throw ConfigError("'" + key + "' expects a nonnegative integer, got '" + e->value + "'", e->line, e->column);
        return static_cast<std::size_t>(v);
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
        return static_cast<std::uint64_t>(count(key, static_cast<std::size_t>(fallback)));
    }

    std::string word(const std::string& key, const std::string& fallback) {
        auto* e = find(key);
        return e ? lower(e->value) : fallback;
    }

    std::string text(const std::string& key, const std::string& fallback) {
        auto* e = find(key);
        return e ? e->value : fallback;
    }

    bool flag(const std::string& key, bool fallback) {
        auto* e = find(key);
        if (!e) return fallback;
        const std::string v = lower(e->value);
        if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
        if (v == "false" || v == "no" || v == "off" || v == "0") return false;
        throw ConfigError("'" + key + "' expects true or false, got '" + e->value + "'", e->line, e->column);
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
        auto* e = find(key);
        if (!e) return fallback;
        std::vector<double> out;
        std::size_t start = 0;
        const std::string& v = e->value;
        while (start <= v.size()) {
            std::size_t comma = v.find(',', start);
            if (comma == std::string::npos) comma = v.size();
            ConfigEntry piece = *e;
            piece.value = trim(std::string_view(v).substr(start, comma - start));
            piece.column = e->column + start;
            out.push_back(parse_double(piece, key));
            start = comma + 1;
        }
        return out;
    }

    /// Chooses among fixed spellings; the error lists the alternatives.
    template <class T>
    T choice(const std::string& key, T fallback, const std::vector<std::pair<std::string, T>>& options) {
        auto* e = find(key);
        if (!e) return fallback;
        const std::string v = lower(e->value);
        std::string alts;
        for (const auto& [name, val] : options) {
            if (name == v) return val;
            alts += (alts.empty() ? "" : ", ") + name;
        }
        throw ConfigError("'" + key + "' must be one of {" + alts + "}, got '" + e->value + "'", e->line, e->column);
    }

    void reject_unused() const {
        if (!s_) return;
        for (const auto& [key, e] : s_->entries)
            if (!e.used) throw ConfigError("unknown key '" + key + "' in [" + s_->name + "]", e.line);
    }

private:
    ConfigEntry* find(const std::string& key) {
        if (!s_) return nullptr;
        auto it = s_->entries.find(key);
        if (it == s_->entries.end()) return nullptr;
        it->second.used = true;
        return &it->second;
    }

    static double parse_double(const ConfigEntry& e, const std::string& key) {
        const std::string& s = e.value;
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
            throw ConfigError("'" + key + "' expects a finite number, got '" + s + "'", e.line, e.column);
        return v;
    }

    ConfigSection* s_;
};

inline Profile read_profile(const std::string& scenario, SectionReader& r, std::size_t line) {
    if (scenario == "two_beam") {
        TwoBeamProfile p;
        p.v0 = r.number("v0", p.v0);
        p.beam_width = r.number("beam_width", p.beam_width);
        p.x_width = r.number("x_width", p.x_width);
        if (!(p.beam_width > 0.0 && p.x_width > 0.0))
            throw ValidationError("profile widths > 0", "two_beam", r.line_of("beam_width"));
        return p;
    }
    if (scenario == "bump_compact") {
        BumpCompactProfile p;
        p.r0 = r.number("r0", p.r0);
        p.x_width = r.number("x_width", p.x_width);
        if (!(p.r0 > 0.0 && p.x_width > 0.0)) throw ValidationError("profile widths > 0", "bump_compact", r.line_of("r0"));
        return p;
    }
    if (scenario == "maxwellian") {
        MaxwellianProfile p;
        p.x_center = r.number("x_center", p.x_center);
        p.v_center = r.number("v_center", p.v_center);
        p.x_spread = r.number("x_spread", p.x_spread);
        p.v_spread = r.number("v_spread", p.v_spread);
        if (!(p.x_spread > 0.0 && p.v_spread > 0.0))
            throw ValidationError("profile widths > 0", "maxwellian", r.line_of("x_spread"));
        return p;
    }
    if (scenario == "rigid_flock") {
        RigidFlockProfile p;
        p.u = r.number("u", p.u);
        p.x_width = r.number("x_width", p.x_width);
        if (!(p.x_width > 0.0)) throw ValidationError("profile widths > 0", "rigid_flock", r.line_of("x_width"));
        return p;
    }
    throw ConfigError("unknown scenario '" + scenario + "' (two_beam, bump_compact, maxwellian, rigid_flock)", line);
}

inline const std::vector<std::pair<std::string, DistanceNorm>>& norm_choices() {
    static const std::vector<std::pair<std::string, DistanceNorm>> c{
        {"l1", DistanceNorm::L1}, {"l2_omega", DistanceNorm::L2Omega}, {"w11", DistanceNorm::W11}, {"x", DistanceNorm::X}};
    return c;
}

// Constraints that involve several sections; line points at the most specific key.
inline void validate_scenario(const Scenario& sc, bool grid, bool noiseless_bound, std::size_t line_sigma,
                              std::size_t line_dt, std::size_t line_profile) {
    const SimParams& p = sc.params;
    try {
        p.validate();
    } catch (const ValidationError& e) {
        const std::size_t line = e.constraint() == "0 ≤ σ ≤ 1" ? line_sigma : line_dt;
        throw ValidationError(e.constraint(), e.detail(), line);
    }
    if (grid) {
        if (p.d != 1) throw ValidationError("grid solver requires d = 1", "d = " + std::to_string(p.d), line_dt);
        try {
            validate_profile_domain(sc.profile, p, noiseless_bound);
        } catch (const ValidationError& e) {
            throw ValidationError(e.constraint(), e.detail(), line_profile);
        }
        // Courant limits of the half-step sub-steps; |L| <= sup(phi) M (|v| + Lv) <= 2 M Lv.
        const GridGeometry g{p.Nx, p.Nv, p.Lx, p.Lv};
        const double vmax = std::abs(g.v(0));
        const double transport = vmax * 0.5 * p.dt / g.dx();
        const double drift = 2.0 * sc.kernel.sup() * p.mass * p.Lv * 0.5 * p.dt / g.dv();
        if (transport > 1.0 || drift > 1.0)
            throw ValidationError("CFL feasibility", "Courant numbers transport " + std::to_string(transport) +
                                                         ", drift bound " + std::to_string(drift) + " must be ≤ 1",
                                  line_dt);
        if (sc.step.diffusion == DiffusionScheme::Explicit && p.sigma * p.dt / (g.dv() * g.dv()) > 0.5)
            throw ValidationError("σ dt / dv² ≤ 1/2 for explicit diffusion",
                                  "value " + std::to_string(p.sigma * p.dt / (g.dv() * g.dv())), line_dt);
    }
}

}  // namespace detail

/// Parses and validates a configuration. Either returns a complete RunConfig or throws
/// ConfigError (syntax) / ValidationError (named constraint), both with line numbers.
inline RunConfig parse_config(std::string_view text) {
    auto sections = detail::tokenize_config(text);
    auto section = [&](const std::string& name) -> detail::ConfigSection* {
        for (auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    };
    detail::SectionReader run(section("run"));
    detail::SectionReader kern(section("kernel"));
    detail::SectionReader par(section("params"));
    detail::SectionReader wts(section("weights"));
    detail::SectionReader prof(section("profile"));

    RunConfig cfg;
    Scenario& sc = cfg.scenario;
    sc.name = run.word("scenario", "two_beam");
    cfg.solver = run.choice<SolverSelection>(
        "solver", SolverSelection::Grid,
        {{"grid", SolverSelection::Grid}, {"particle", SolverSelection::Particle}, {"both", SolverSelection::Both}});
    cfg.output_dir = run.text("output_dir", cfg.output_dir);
    cfg.output_every = run.count("output_every", cfg.output_every);
    if (cfg.output_every == 0) throw ValidationError("output_every ≥ 1", "0", run.line_of("output_every"));
    cfg.threads = run.count("threads", 0);
    sc.step.alignment = run.flag("alignment", true);
    sc.step.reconstruction = run.choice<Reconstruction>(
        "reconstruction", Reconstruction::Upwind,
        {{"upwind", Reconstruction::Upwind}, {"van_leer", Reconstruction::VanLeer}});
    sc.step.diffusion = run.choice<DiffusionScheme>(
        "diffusion", DiffusionScheme::Implicit,
        {{"implicit", DiffusionScheme::Implicit}, {"explicit", DiffusionScheme::Explicit}, {"auto", DiffusionScheme::Auto}});
    sc.step.convolution = run.choice<ConvolutionMethod>(
        "convolution", ConvolutionMethod::Direct, {{"direct", ConvolutionMethod::Direct}, {"fft", ConvolutionMethod::Fft}});

    const std::string ktype = kern.word("type", "algebraic_decay");
    try {
        if (ktype == "algebraic_decay") {
            sc.kernel = KernelSpec::algebraic_decay(kern.number("beta", 1.0));
        } else if (ktype == "constant") {
            sc.kernel = KernelSpec::constant(kern.number("value", 1.0));
        } else {
            throw ConfigError("'type' must be one of {algebraic_decay, constant}, got '" + ktype + "'", kern.line_of("type"));
        }
    } catch (const DomainError& e) {
        throw ValidationError("max{|φ|, |φ′|, |φ″|} ≤ 1", e.what(),
                              kern.line_of(ktype == "constant" ? "value" : "beta"));
    }

    SimParams& p = sc.params;
    p.d = par.count("d", p.d);
    p.sigma = par.number("sigma", p.sigma);
    p.dt = par.number("dt", p.dt);
    p.T = par.number("t", p.T);
    p.N = par.count("n", p.N);
    p.seed = par.u64("seed", p.seed);
    p.Lx = par.number("lx", p.Lx);
    p.Nx = par.count("nx", p.Nx);
    p.Nv = par.count("nv", p.Nv);
    p.mass = par.number("mass", p.mass);
    cfg.lv_auto = !par.has("lv") || par.word("lv", "auto") == "auto";
    if (!cfg.lv_auto) p.Lv = par.number("lv", p.Lv);

    const double alpha = wts.number("alpha", 4.0);
    try {
        sc.weights = WeightSpec(alpha);
    } catch (const ValidationError& e) {
        throw ValidationError(e.constraint(), "alpha = " + std::to_string(alpha), wts.line_of("alpha"));
    }

    sc.profile = detail::read_profile(sc.name, prof, run.line_of("scenario"));
    // σ must be checked before it is used to size the velocity domain
    if (!(p.sigma >= 0.0 && p.sigma <= 1.0))
        throw ValidationError("0 ≤ σ ≤ 1", "sigma = " + std::to_string(p.sigma), par.line_of("sigma"));
    if (cfg.lv_auto && p.Nv >= 4 && p.T >= 0.0 && p.mass > 0.0) p.Lv = auto_velocity_extent(sc.profile, p);
    const bool grid = cfg.solver != SolverSelection::Particle;
    detail::validate_scenario(sc, grid, true, par.line_of("sigma"), par.line_of("dt"), run.line_of("scenario"));

    for (auto& s : sections) {
        if (s.name != "study") continue;
        detail::SectionReader st(&s);
        StudySpec spec;
        spec.line = s.line;
        spec.scenario = sc;
        const std::string kind = st.word("kind", "");
        if (kind.empty()) throw ConfigError("[study] needs 'kind'", s.line);
        spec.T = st.number("t", p.T);
        spec.output_every = st.count("output_every", 10);
        if (spec.output_every == 0) throw ValidationError("output_every ≥ 1", "0", st.line_of("output_every"));
        Scenario& ss = spec.scenario;
        if (st.has("scenario")) {
            ss.name = st.word("scenario", sc.name);
            detail::SectionReader none(nullptr);
            ss.profile = ss.name == sc.name ? sc.profile : detail::read_profile(ss.name, none, st.line_of("scenario"));
        }
        ss.params.sigma = st.number("sigma", p.sigma);
        if (!(ss.params.sigma >= 0.0 && ss.params.sigma <= 1.0))
            throw ValidationError("0 ≤ σ ≤ 1", "sigma = " + std::to_string(ss.params.sigma), st.line_of("sigma"));
        ss.params.T = spec.T;
        if (kind == "stability") {
            StabilitySpec k;
            k.delta = st.number("delta", k.delta);
            if (!(k.delta > 0.0)) throw ValidationError("δ > 0", "delta = " + std::to_string(k.delta), st.line_of("delta"));
            k.norm = st.choice<DistanceNorm>("norm", k.norm, detail::norm_choices());
            k.bump_x = st.number("bump_x", k.bump_x);
            k.bump_v = st.number("bump_v", k.bump_v);
            k.bump_hx = st.number("bump_hx", k.bump_hx);
            k.bump_hv = st.number("bump_hv", k.bump_hv);
            spec.kind = k;
        } else if (kind == "sigma_sweep") {
            SigmaSweepSpec k;
            k.sigmas = st.numbers("sigmas", k.sigmas);
            for (std::size_t i = 0; i < k.sigmas.size(); ++i)
                if (!(k.sigmas[i] > 0.0 && k.sigmas[i] <= 1.0) || (i > 0 && !(k.sigmas[i] < k.sigmas[i - 1])))
                    throw ValidationError("σ list strictly decreasing and positive",
                                          "entry " + std::to_string(i + 1) + " = " + std::to_string(k.sigmas[i]),
                                          st.line_of("sigmas"));
            k.norm = st.choice<DistanceNorm>("norm", k.norm, detail::norm_choices());
            k.observable_half_width = st.number("observable_half_width", k.observable_half_width);
            ss.params.sigma = k.sigmas.front();
            spec.kind = k;
        } else if (kind == "cross_validate") {
            CrossValidationSpec k;
            const auto ns = st.numbers("particle_counts", {1000.0, 4000.0});
            k.particle_counts.clear();
            for (double n : ns) {
                if (!(n >= 1.0) || n != std::floor(n))
                    throw ValidationError("N ≥ 1", "particle count " + std::to_string(n), st.line_of("particle_counts"));
                k.particle_counts.push_back(static_cast<std::size_t>(n));
            }
            spec.kind = k;
        } else {
            throw ConfigError("'kind' must be one of {stability, sigma_sweep, cross_validate}, got '" + kind + "'",
                              st.line_of("kind"));
        }
        if (cfg.lv_auto) ss.params.Lv = auto_velocity_extent(ss.profile, ss.params);
        // the sweep's sigma = 0 reference shares the grid sized for the largest sigma
        detail::validate_scenario(ss, true, kind != "sigma_sweep", st.line_of("sigma"), s.line, st.line_of("scenario"));
        st.reject_unused();
        cfg.studies.push_back(std::move(spec));
    }

    run.reject_unused();
    kern.reject_unused();
    par.reject_unused();
    wts.reject_unused();
    prof.reject_unused();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace kcs
