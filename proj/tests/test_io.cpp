#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kcs/kcs.hpp"

using namespace kcs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("kcs_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <class E>
E expect_throw(const std::string& text) {
    try {
        parse_config(text);
    } catch (const E& e) {
        return e;
    }
    ADD_FAILURE() << "no error for:\n" << text;
    return E("", 0);
}

const char* kBase = R"([run]
scenario = two_beam
solver = grid

[params]
T = 0.5
Nx = 64
Nv = 64
)";

int run_cli(std::vector<std::string> args, std::string& out, std::string& err) {
    args.insert(args.begin(), "kcs");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream o, e;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), o, e);
    out = o.str();
    err = e.str();
    return code;
}

}  // namespace

TEST(Config, MinimalConfigFillsDefaults) {
    const auto cfg = parse_config(kBase);
    EXPECT_EQ(cfg.solver, SolverSelection::Grid);
    EXPECT_EQ(cfg.scenario.params.Nx, 64u);
    EXPECT_EQ(cfg.scenario.params.sigma, 0.0);
    EXPECT_EQ(cfg.scenario.weights.alpha, 4.0);
    EXPECT_TRUE(cfg.lv_auto);
    EXPECT_GT(cfg.scenario.params.Lv, 1.25);
    EXPECT_TRUE(cfg.studies.empty());
}

TEST(Config, SigmaOutOfRangeNamedWithLine) {
    const auto e = expect_throw<ValidationError>(std::string(kBase) + "sigma = 1.5\n");
    EXPECT_EQ(e.constraint(), "0 ≤ σ ≤ 1");
    EXPECT_EQ(e.line(), 9u);
}

TEST(Config, AlphaTooSmallNamedWithLine) {
    const auto e = expect_throw<ValidationError>(std::string(kBase) + "[weights]\nalpha = 2\n");
    EXPECT_EQ(e.constraint(), "α > 3");
    EXPECT_EQ(e.line(), 10u);
}

TEST(Config, KernelBoundNamed) {
    const auto e = expect_throw<ValidationError>(std::string(kBase) + "[kernel]\nbeta = 40\n");
    EXPECT_EQ(e.constraint(), "max{|φ|, |φ′|, |φ″|} ≤ 1");
}

TEST(Config, SyntaxErrorsCarryLineAndColumn) {
    const auto e = expect_throw<ConfigError>("[run]\n  scenario two_beam\n");
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 3u);
    const auto bad = expect_throw<ConfigError>(std::string(kBase) + "dt = fast\n");
    EXPECT_EQ(bad.line(), 9u);
    EXPECT_EQ(bad.column(), 6u);
}

TEST(Config, UnknownKeyAndDuplicateSectionRejected) {
    EXPECT_NE(std::string(expect_throw<ConfigError>(std::string(kBase) + "gamma = 1\n").what()).find("unknown key 'gamma'"),
              std::string::npos);
    EXPECT_NE(std::string(expect_throw<ConfigError>(std::string(kBase) + "[run]\n").what()).find("duplicate section"),
              std::string::npos);
    EXPECT_NE(std::string(expect_throw<ConfigError>("[nonsense]\n").what()).find("unknown section"), std::string::npos);
}

TEST(Config, CflConstraintNamed) {
    const auto e = expect_throw<ValidationError>(std::string(kBase) + "dt = 0.5\n");
    EXPECT_EQ(e.constraint(), "CFL feasibility");
}

TEST(Config, StudiesParsed) {
    const auto cfg = parse_config(std::string(kBase) +
                                  "[study]\nkind = stability\ndelta = 1e-2\nnorm = l2_omega\n"
                                  "[study]\nkind = sigma_sweep\nscenario = maxwellian\nsigmas = 0.2, 0.1\n"
                                  "[study]\nkind = cross_validate\nparticle_counts = 10, 40\n");
    ASSERT_EQ(cfg.studies.size(), 3u);
    EXPECT_EQ(std::get<StabilitySpec>(cfg.studies[0].kind).delta, 1e-2);
    EXPECT_EQ(std::get<StabilitySpec>(cfg.studies[0].kind).norm, DistanceNorm::L2Omega);
    const auto& sw = std::get<SigmaSweepSpec>(cfg.studies[1].kind);
    EXPECT_EQ(sw.sigmas, (std::vector<double>{0.2, 0.1}));
    EXPECT_EQ(cfg.studies[1].scenario.params.sigma, 0.2);
    EXPECT_TRUE(std::holds_alternative<MaxwellianProfile>(cfg.studies[1].scenario.profile));
    EXPECT_EQ(std::get<CrossValidationSpec>(cfg.studies[2].kind).particle_counts, (std::vector<std::size_t>{10, 40}));
}

TEST(Config, NonDecreasingSigmaListRejected) {
    const auto e = expect_throw<ValidationError>(std::string(kBase) + "[study]\nkind = sigma_sweep\nsigmas = 0.1, 0.1\n");
    EXPECT_EQ(e.constraint(), "σ list strictly decreasing and positive");
    EXPECT_EQ(e.line(), 11u);
}

TEST(Config, MissingFileNamesPath) {
    try {
        load_config("/nonexistent/run.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/run.cfg"), std::string::npos);
    }
}

TEST(Config, ShippedDefaultParses) {
    const auto cfg = load_config(KCS_DEFAULT_CONFIG);
    EXPECT_EQ(cfg.scenario.step.reconstruction, Reconstruction::VanLeer);
    EXPECT_EQ(cfg.studies.size(), 1u);
}

TEST(Config, EveryShippedConfigParses) {
    std::size_t n = 0;
    for (const auto& entry : fs::directory_iterator(fs::path(KCS_DEFAULT_CONFIG).parent_path())) {
        if (entry.path().extension() != ".cfg") continue;
        EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
        ++n;
    }
    EXPECT_GE(n, 3u);
}

TEST(Snapshot, GridRoundTripIsBitwise) {
    const auto dir = scratch("snap_grid");
    PhaseGrid f(GridGeometry{7, 5, 1.5, 2.5}, 0.375);
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = std::sin(1.0 + static_cast<double>(i)) * 1e-3 + 1e-3;
    f.values[3] = 5e-324;
    const auto path = (dir / "g.kcs").string();
    write_snapshot(f, 0.125, path);
    const auto s = read_snapshot(path);
    EXPECT_EQ(s.header.sigma, 0.125);
    EXPECT_EQ(std::get<PhaseGrid>(s.state), f);
}

TEST(Snapshot, ParticleRoundTripIsBitwiseIncludingEmpty) {
    const auto dir = scratch("snap_particles");
    for (std::size_t n : {0u, 1u, 9u}) {
        ParticleEnsemble e(2, n, 3.0);
        e.t = 1.5;
        for (std::size_t i = 0; i < e.x.size(); ++i) {
            e.x[i] = 0.1 * static_cast<double>(i) - 1.0 / 3.0;
            e.v[i] = -std::sqrt(static_cast<double>(i + 2));
        }
        const auto path = (dir / ("p" + std::to_string(n) + ".kcs")).string();
        write_snapshot(e, 0.0, path);
        EXPECT_EQ(std::get<ParticleEnsemble>(read_snapshot(path).state), e) << n;
    }
}

TEST(Snapshot, CorruptFilesRejected) {
    const auto dir = scratch("snap_bad");
    PhaseGrid f(GridGeometry{4, 4, 1.0, 1.0});
    const auto path = (dir / "g.kcs").string();
    write_snapshot(f, 0.0, path);
    const std::string bytes = slurp(path);

    const auto truncated = (dir / "t.kcs").string();
    std::ofstream(truncated, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
    EXPECT_THROW(read_snapshot(truncated), SnapshotError);

    std::string magic = bytes;
    magic[0] = 'X';
    const auto badmagic = (dir / "m.kcs").string();
    std::ofstream(badmagic, std::ios::binary).write(magic.data(), static_cast<std::streamsize>(magic.size()));
    EXPECT_THROW(read_snapshot(badmagic), SnapshotError);

    const auto header_only = (dir / "h.kcs").string();
    std::ofstream(header_only, std::ios::binary).write(bytes.data(), 10);
    EXPECT_THROW(read_snapshot(header_only), SnapshotError);
    EXPECT_THROW(read_snapshot((dir / "absent.kcs").string()), SnapshotError);
}

TEST(Csv, EmptySeriesWritesHeaderOnly) {
    const auto dir = scratch("csv_empty");
    const auto path = (dir / "s.csv").string();
    emit_csv(DiagnosticsSeries{}, path);
    EXPECT_EQ(slurp(path), csv_header() + "\n");
    EXPECT_EQ(kCsvColumns.size(), 18u);
}

TEST(Csv, RecordRoundTripIsBitExact) {
    const auto dir = scratch("csv_round");
    DiagnosticsRecord r;
    r.t = 0.1;
    r.mass = 1.0 / 3.0;
    r.momentum = {-2e-17, 0.0, 0.0};
    r.energy = 0.7071067811865476;
    r.dissipation_rate = 1e-300;
    r.support_radius = 1.25;
    r.l1 = 1.0 / 3.0;
    r.l2_omega = kNotAvailable;
    r.x_norm = kNotAvailable;
    DiagnosticsSeries s;
    s.append(r);
    const auto path = (dir / "s.csv").string();
    emit_csv(s, path);
    emit_csv(s, path);  // appending repeats no header
    const std::string text = slurp(path);
    EXPECT_EQ(text.find(csv_header()), text.rfind(csv_header()));
    std::ofstream(path, std::ios::trunc);
    emit_csv(s, path);
    const auto back = read_csv(path);
    ASSERT_EQ(back.size(), 1u);
    const auto a = csv_values(s[0]), b = csv_values(back[0]);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i])) {
            EXPECT_TRUE(std::isnan(b[i])) << kCsvColumns[i];
        } else {
            EXPECT_EQ(std::memcmp(&a[i], &b[i], sizeof(double)), 0) << kCsvColumns[i];
        }
    }
}

TEST(Plots, SupportPlotShowsBoundOnlyWithoutNoise) {
    const auto dir = scratch("plots_support");
    DiagnosticsSeries s;
    for (int i = 0; i < 3; ++i) {
        DiagnosticsRecord r;
        r.t = 0.5 * i;
        r.energy = 1.0 - 0.1 * i;
        r.support_radius = 1.0;
        r.l1_v_weighted = 1.0;
        r.l2_omega = 1.0;
        r.x_norm = r.w11 = 1.0;
        s.append(r);
    }
    RunOutputs o;
    o.series = s;
    o.support_r0 = 1.0;
    const auto files = emit_plots(o, (dir / "a").string());
    EXPECT_EQ(files.size(), 3u);
    EXPECT_NE(slurp(dir / "a_support.svg").find("R0 + M R0 t"), std::string::npos);
    o.sigma = 0.1;
    emit_plots(o, (dir / "b").string());
    EXPECT_EQ(slurp(dir / "b_support.svg").find("R0 + M R0 t"), std::string::npos);
}

TEST(Plots, SweepPlotAnnotatedWithSlope) {
    const auto dir = scratch("plots_sweep");
    SigmaSweepResult sw;
    for (double s : {0.2, 0.1, 0.05}) sw.rows.push_back({s, s, 2 * s, 3 * s});
    sw.norm_verdict = judge_sweep({0.2, 0.1, 0.05}, {0.2, 0.1, 0.05});
    RunOutputs o;
    o.sweeps.push_back(sw);
    const auto files = emit_plots(o, (dir / "s").string());
    ASSERT_EQ(files.size(), 1u);
    const auto svg = slurp(files[0]);
    EXPECT_NE(svg.find("fitted slope 1"), std::string::npos);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
}

TEST(Plots, EmptyOutputsWriteNothing) {
    const auto dir = scratch("plots_empty");
    EXPECT_TRUE(emit_plots(RunOutputs{}, (dir / "x").string()).empty());
    EXPECT_TRUE(fs::is_empty(dir));
}

TEST(Cli, VerifyDefaultConfigSucceeds) {
    const auto dir = scratch("cli_verify");
    std::string out, err;
    const int code = run_cli({"verify", KCS_DEFAULT_CONFIG, "-o", dir.string()}, out, err);
    EXPECT_EQ(code, kExitOk) << out << err;
    EXPECT_NE(out.find("PASS"), std::string::npos);
    EXPECT_EQ(out.find("FAIL"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "verify.json"));
    EXPECT_TRUE(fs::exists(dir / "grid.csv"));
}

TEST(Cli, MissingConfigIsConfigurationError) {
    std::string out, err;
    EXPECT_EQ(run_cli({"simulate", "/nonexistent/x.cfg"}, out, err), kExitConfig);
    EXPECT_NE(err.find("/nonexistent/x.cfg"), std::string::npos);
}

TEST(Cli, InvalidConfigIsConfigurationError) {
    const auto dir = scratch("cli_invalid");
    const auto path = dir / "bad.cfg";
    std::ofstream(path) << kBase << "sigma = 1.5\n";
    std::string out, err;
    EXPECT_EQ(run_cli({"verify", path.string()}, out, err), kExitConfig);
    EXPECT_NE(err.find("0 ≤ σ ≤ 1"), std::string::npos);
    EXPECT_NE(err.find("line 9"), std::string::npos);
}

TEST(Cli, UsageErrorsAndHelp) {
    std::string out, err;
    EXPECT_EQ(run_cli({}, out, err), kExitConfig);
    EXPECT_EQ(run_cli({"--help"}, out, err), kExitOk);
    EXPECT_EQ(run_cli({"explode"}, out, err), kExitConfig);
}

TEST(Cli, InspectPrintsHeader) {
    const auto dir = scratch("cli_inspect");
    PhaseGrid f(GridGeometry{8, 6, 2.0, 3.0}, 0.75);
    f.values.assign(f.values.size(), 0.5);
    const auto path = (dir / "f.kcs").string();
    write_snapshot(f, 0.25, path);
    std::string out, err;
    ASSERT_EQ(run_cli({"inspect", path}, out, err), kExitOk) << err;
    EXPECT_NE(out.find("8"), std::string::npos);
    EXPECT_NE(out.find("0.75"), std::string::npos);
    EXPECT_NE(out.find("0.25"), std::string::npos);

    std::ofstream(path, std::ios::trunc) << "KCS1";
    EXPECT_EQ(run_cli({"inspect", path}, out, err), kExitConfig);
    EXPECT_NE(err.find("corrupt"), std::string::npos);
}

TEST(Cli, SimulateWritesOutputs) {
    const auto dir = scratch("cli_simulate");
    const auto path = dir / "run.cfg";
    std::ofstream(path) << "[run]\nsolver = both\noutput_every = 10\n[params]\nT = 0.1\nNx = 32\nNv = 32\nN = 64\ndt = 5e-3\n";
    std::string out, err;
    ASSERT_EQ(run_cli({"simulate", path.string(), "-o", (dir / "out").string(), "-j", "2"}, out, err), kExitOk) << err;
    for (const char* name : {"grid.csv", "particles.csv", "grid_final.kcs", "summary.json"})
        EXPECT_TRUE(fs::exists(dir / "out" / name)) << name;
    const auto series = read_csv((dir / "out" / "grid.csv").string());
    EXPECT_EQ(series.size(), 3u);
}
