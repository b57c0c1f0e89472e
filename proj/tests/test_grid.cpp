#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "kcs/characteristics.hpp"
#include "kcs/fields.hpp"
#include "kcs/grid_solver.hpp"
#include "kcs/parallel.hpp"
#include "kcs/phase_grid.hpp"
#include "kcs/profiles.hpp"

using namespace kcs;

namespace {

PhaseGrid smooth_grid(std::size_t nx, std::size_t nv, double lx = 4.0, double lv = 2.0) {
    PhaseGrid f(GridGeometry{nx, nv, lx, lv});
    for (std::size_t j = 0; j < nx; ++j)
        for (std::size_t k = 0; k < nv; ++k) {
            const double x = f.geom.x(j), v = f.geom.v(k);
            f(j, k) = std::exp(-x * x) * std::exp(-4 * v * v) * (1.0 + 0.3 * std::sin(x + v));
        }
    return f;
}

double energy(const PhaseGrid& f) {
    double s = 0;
    for (std::size_t j = 0; j < f.geom.nx; ++j)
        for (std::size_t k = 0; k < f.geom.nv; ++k) s += f(j, k) * f.geom.v(k) * f.geom.v(k);
    return s * f.geom.cell_area();
}

// Pure free transport of a smooth profile over [0, T]; returns the L1 error against
// the exact solution f0(x - v T, v).
double free_transport_error(std::size_t n, Reconstruction rec) {
    const double lx = 4.0, lv = 1.0, T = 0.5;
    auto f0 = [](double x, double v) { return std::exp(-2.0 * x * x) * std::exp(-8.0 * v * v); };
    PhaseGrid f(GridGeometry{n, n, lx, lv});
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) f(j, k) = f0(f.geom.x(j), f.geom.v(k));
    GridStepOptions opt;
    opt.alignment = false;
    opt.reconstruction = rec;
    const std::size_t steps = n / 4;
    const double dt = T / static_cast<double>(steps);
    for (std::size_t s = 0; s < steps; ++s) f = full_step(f, KernelSpec{}, 0.0, dt, opt);
    double err = 0;
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
            err += std::abs(f(j, k) - f0(f.geom.x(j) - f.geom.v(k) * T, f.geom.v(k)));
    return err * f.geom.cell_area();
}

}  // namespace

TEST(Geometry, CellCentersAreMirrorSymmetric) {
    const GridGeometry g{7, 10, 3.0, 2.0};
    for (std::size_t j = 0; j < g.nx; ++j) EXPECT_EQ(g.x(j), -g.x(g.nx - 1 - j));
    for (std::size_t k = 0; k < g.nv; ++k) EXPECT_EQ(g.v(k), -g.v(g.nv - 1 - k));
    EXPECT_DOUBLE_EQ(g.x(0), -3.0 + 0.5 * g.dx());
    EXPECT_EQ(g.v_face(0), -2.0);
    EXPECT_EQ(g.v_face(g.nv), 2.0);
}

TEST(Geometry, DegenerateRejected) {
    EXPECT_THROW(PhaseGrid(GridGeometry{0, 4, 1.0, 1.0}), InvalidStateError);
    EXPECT_THROW(PhaseGrid(GridGeometry{4, 4, 0.0, 1.0}), InvalidStateError);
}

TEST(SampleDensity, ExactOnLinearProfiles) {
    PhaseGrid f(GridGeometry{8, 6, 2.0, 1.5});
    for (std::size_t j = 0; j < 8; ++j)
        for (std::size_t k = 0; k < 6; ++k) f(j, k) = 3.0 + 0.5 * f.geom.x(j) - 0.25 * f.geom.v(k);
    for (double x : {-1.2, 0.0, 0.33, 1.49})
        for (double v : {-0.9, 0.1, 0.74}) EXPECT_NEAR(sample_density(f, x, v), 3.0 + 0.5 * x - 0.25 * v, 1e-14);
    EXPECT_THROW(sample_density(f, 2.5, 0.0), DomainError);
}

TEST(Fields, RigidFlockMomentumIsVelocityTimesDensity) {
    SimParams p;
    p.Nx = 32;
    p.Nv = 32;
    p.Lv = 2.0;
    const auto f = init_grid(RigidFlockProfile{0.5, 1.0}, p);
    const auto fp = alignment_field_grid(f, KernelSpec{});
    double u = 0;
    for (std::size_t k = 0; k < 32; ++k)
        if (f(16, k) > 0) u = f.geom.v(k);
    for (std::size_t j = 0; j < 32; ++j) EXPECT_NEAR(fp.b[j], u * fp.a[j], 1e-15);
}

TEST(Fields, FastConvolutionMatchesDirect) {
    for (std::size_t n : {5u, 64u, 127u, 256u}) {
        const auto taps = kernel_taps(KernelSpec{}, n, 0.1);
        std::vector<double> in(n);
        for (std::size_t i = 0; i < n; ++i) in[i] = std::exp(-0.01 * static_cast<double>((i - n / 2) * (i - n / 2))) + 0.1;
        const auto a = kernel_convolve(taps, in, 0.1, ConvolutionMethod::Direct);
        const auto b = kernel_convolve(taps, in, 0.1, ConvolutionMethod::Fft);
        double scale = 0;
        for (double v : a) scale = std::max(scale, std::abs(v));
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a[i], b[i], 1e-12 * scale) << n;
    }
}

TEST(Fields, DirectConvolutionMatchesNaiveSum) {
    const std::size_t n = 9;
    const double dx = 0.3;
    const KernelSpec k;
    const auto taps = kernel_taps(k, n, dx);
    std::vector<double> in{1, 0, 2, 5, 0.5, 0, 0, 3, 1};
    const auto out = kernel_convolve(taps, in, dx);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) s += k(std::abs(static_cast<double>(i) - static_cast<double>(j)) * dx) * in[j];
        EXPECT_NEAR(out[i], s * dx, 1e-14);
    }
}

TEST(Fields, NegativeDensityRejected) {
    auto f = smooth_grid(8, 8);
    f(3, 3) = -1e-3;
    EXPECT_THROW(alignment_field_grid(f, KernelSpec{}), InvalidStateError);
}

TEST(Fields, SampleOutsideRangeIsExtrapolationError) {
    EXPECT_THROW(sample_fields(FieldPair{}, 0.0), ExtrapolationError);
    FieldHistory h;
    h.push(0.0, zero_fields(GridGeometry{4, 4, 1, 1}));
    h.push(1.0, zero_fields(GridGeometry{4, 4, 1, 1}));
    const std::vector<double> x{0.0};
    EXPECT_THROW(h(1.5, x), ExtrapolationError);
    EXPECT_THROW(h.push(0.5, zero_fields(GridGeometry{4, 4, 1, 1})), InvalidStateError);
}

TEST(Transport, CourantOneShiftsByExactlyOneCell) {
    PhaseGrid f(GridGeometry{16, 4, 2.0, 1.0});
    const std::size_t k = 3;  // fastest positive row
    f(5, k) = 2.0;
    const double dt = f.geom.dx() / f.geom.v(k);
    const auto g = substep_transport_x(f, dt);
    EXPECT_DOUBLE_EQ(g(6, k), 2.0);
    EXPECT_EQ(g(5, k), 0.0);
}

TEST(Transport, ConservesMassAwayFromBoundaryAndRejectsLargeSteps) {
    const auto f = smooth_grid(64, 32);
    const auto g = substep_transport_x(f, 0.01);
    EXPECT_NEAR(g.mass(), f.mass(), 1e-9 * f.mass());  // outflow of the exp(-16) tails only
    EXPECT_THROW(substep_transport_x(f, 1.0), StepSizeError);
}

TEST(Transport, ZeroInflowAtBoundaries) {
    PhaseGrid f(GridGeometry{8, 2, 1.0, 1.0});
    f(0, 0) = 1.0;  // v < 0: leaves through the left boundary
    const auto g = substep_transport_x(f, 0.2);
    EXPECT_LT(g.mass(), f.mass());
    EXPECT_EQ(g(7, 1), 0.0);
}

TEST(Drift, ClosedBoundariesConserveMassExactly) {
    const auto f = smooth_grid(16, 32);
    const auto fp = alignment_field_grid(f, KernelSpec{});
    for (auto rec : {Reconstruction::Upwind, Reconstruction::VanLeer}) {
        const auto g = substep_drift_v(f, fp, 0.02, rec);
        EXPECT_NEAR(g.mass(), f.mass(), 1e-14 * f.mass());
        EXPECT_GE(g.min_value(), 0.0);
    }
}

TEST(Drift, ConstantFieldCourantOneContractsTowardMean) {
    // L = -a v with all mass in the top row: the flux moves it one row down per step.
    PhaseGrid f(GridGeometry{2, 8, 1.0, 1.0});
    FieldPair fp = zero_fields(f.geom);
    fp.a = {1.0, 1.0};
    f(0, 7) = 1.0;
    const double face = f.geom.v_face(7);
    const auto g = substep_drift_v(f, fp, f.geom.dv() / face);
    EXPECT_NEAR(g(0, 6), 1.0, 1e-15);
    EXPECT_NEAR(g(0, 7), 0.0, 1e-15);
}

TEST(Diffusion, ExplicitStepAddsTwoSigmaDtMassToEnergy) {
    auto f = smooth_grid(8, 64, 4.0, 4.0);
    const double sigma = 0.3, dt = 1e-3;
    const auto g = substep_diffuse_v(f, sigma, dt, DiffusionScheme::Explicit);
    EXPECT_NEAR(energy(g) - energy(f), 2.0 * sigma * dt * f.mass(), 1e-12);
    EXPECT_NEAR(g.mass(), f.mass(), 1e-14);
}

TEST(Diffusion, ImplicitSolvesTheTridiagonalSystem) {
    const auto f = smooth_grid(4, 16);
    const double sigma = 0.8, dt = 0.05;
    const auto g = substep_diffuse_v(f, sigma, dt);
    const double mu = sigma * dt / (f.geom.dv() * f.geom.dv());
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 0; k < 16; ++k) {
            const double lo = k > 0 ? g(j, k - 1) - g(j, k) : 0.0;
            const double hi = k + 1 < 16 ? g(j, k + 1) - g(j, k) : 0.0;
            EXPECT_NEAR(g(j, k) - mu * (lo + hi), f(j, k), 1e-14);
        }
    EXPECT_NEAR(g.mass(), f.mass(), 1e-14);
}

TEST(Diffusion, ExplicitLimitEnforcedAndZeroSigmaIsIdentity) {
    const auto f = smooth_grid(4, 64);
    EXPECT_THROW(substep_diffuse_v(f, 1.0, 1.0, DiffusionScheme::Explicit), StepSizeError);
    EXPECT_EQ(substep_diffuse_v(f, 0.0, 1.0), f);
    EXPECT_NO_THROW(substep_diffuse_v(f, 1.0, 1.0, DiffusionScheme::Auto));
}

TEST(FullStep, FirstOrderConvergenceOfUpwind) {
    const double e1 = free_transport_error(64, Reconstruction::Upwind);
    const double e2 = free_transport_error(128, Reconstruction::Upwind);
    const double order = std::log2(e1 / e2);
    EXPECT_GT(order, 0.8);
    EXPECT_LT(order, 1.3);
}

TEST(FullStep, LimitedReconstructionConvergesFaster) {
    const double e1 = free_transport_error(64, Reconstruction::VanLeer);
    const double e2 = free_transport_error(128, Reconstruction::VanLeer);
    EXPECT_GT(std::log2(e1 / e2), 1.3);
    EXPECT_LT(e2, free_transport_error(128, Reconstruction::Upwind));
}

TEST(FullStep, PositivityAndTimeAdvance) {
    SimParams p;
    p.Nx = 32;
    p.Nv = 32;
    p.Lv = 2.5;
    auto f = init_grid(TwoBeamProfile{}, p, false);
    for (auto rec : {Reconstruction::Upwind, Reconstruction::VanLeer}) {
        GridStepOptions opt;
        opt.reconstruction = rec;
        PhaseGrid g = f;
        for (int n = 0; n < 50; ++n) g = full_step(g, KernelSpec{}, 0.1, 0.01, opt);
        EXPECT_GE(g.min_value(), 0.0);
        EXPECT_NEAR(g.t, 0.5, 1e-12);
    }
    EXPECT_THROW(full_step(f, KernelSpec{}, 0.0, 0.0), StepSizeError);
}

TEST(FullStep, BitwiseIndependentOfThreadCount) {
    SimParams p;
    p.Nx = 48;
    p.Nv = 40;
    p.Lv = 2.5;
    const auto f = init_grid(TwoBeamProfile{}, p, false);
    auto run = [&] {
        PhaseGrid g = f;
        GridStepOptions opt;
        opt.reconstruction = Reconstruction::VanLeer;
        for (int n = 0; n < 10; ++n) g = full_step(g, KernelSpec{}, 0.2, 0.01, opt);
        return g;
    };
    PhaseGrid ref;
    {
        ScopedThreadCount one(1);
        ref = run();
    }
    for (unsigned t : {2u, 8u}) {
        ScopedThreadCount scope(t);
        EXPECT_EQ(run(), ref) << t;
    }
}

TEST(FullStep, StableTimeStepIsAccepted) {
    SimParams p;
    p.Nx = 32;
    p.Nv = 32;
    p.Lv = 2.5;
    const auto f = init_grid(TwoBeamProfile{}, p, false);
    const double dt = stable_time_step(f, KernelSpec{});
    EXPECT_GT(dt, 0.0);
    EXPECT_NO_THROW(full_step(f, KernelSpec{}, 0.0, dt));
}

TEST(Profiles, InitialDataHasRequestedMass) {
    SimParams p;
    p.mass = 2.5;
    p.Lv = 12.0;
    for (const Profile& prof : {Profile{TwoBeamProfile{}}, Profile{BumpCompactProfile{}}, Profile{MaxwellianProfile{}},
                                Profile{RigidFlockProfile{}}}) {
        const auto f = init_grid(prof, p);
        EXPECT_NEAR(f.mass(), 2.5, 1e-12) << profile_name(prof);
        EXPECT_GE(f.min_value(), 0.0);
    }
}

TEST(Profiles, DomainTooSmallRejected) {
    SimParams p;
    p.Lv = 1.0;  // two_beam reaches |v| = 1.25
    try {
        init_grid(TwoBeamProfile{}, p);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.constraint(), "domain covers support");
    }
    p.Lv = 2.0;  // covers the data but not R0 (1 + M T)
    EXPECT_THROW(init_grid(TwoBeamProfile{}, p), ValidationError);
    EXPECT_NO_THROW(init_grid(TwoBeamProfile{}, p, false));
    p.Lv = auto_velocity_extent(TwoBeamProfile{}, p);
    EXPECT_NO_THROW(init_grid(TwoBeamProfile{}, p));
}

TEST(Characteristics, ConstantFieldMatchesClosedForm) {
    const double a = 0.7, b = 0.3, T = 2.0;
    const std::vector<double> x0{0.4}, v0{1.5};
    const auto sol = solve_characteristic(x0, v0, ConstantFieldProvider{a, {b}}, T, 1e-3);
    const double e = std::exp(-a * T);
    const double v_exact = v0[0] * e + b / a * (1.0 - e);
    const double x_exact = x0[0] + b / a * T + (v0[0] - b / a) * (1.0 - e) / a;
    EXPECT_NEAR(sol.state.V[0], v_exact, 1e-9);
    EXPECT_NEAR(sol.V_closed_form[0], v_exact, 1e-9);
    EXPECT_NEAR(sol.state.X[0], x_exact, 1e-9);
    EXPECT_NEAR(sol.state.logJ, a * T, 1e-12);
    EXPECT_NEAR(density_along_characteristic(2.0, sol.state), 2.0 * std::exp(a * T), 1e-9);
}

TEST(Characteristics, ZeroFieldIsFreeStreaming) {
    const std::vector<double> x0{0.0, 1.0}, v0{1.0, -2.0};
    const auto sol = solve_characteristic(x0, v0, ConstantFieldProvider{0.0, {0.0, 0.0}}, 1.5, 0.01);
    EXPECT_NEAR(sol.state.X[0], 1.5, 1e-14);
    EXPECT_NEAR(sol.state.X[1], -2.0, 1e-14);
    EXPECT_EQ(sol.state.V, v0);
    EXPECT_EQ(sol.state.logJ, 0.0);
}

TEST(Characteristics, InputValidation) {
    const std::vector<double> x0{0.0}, v0{1.0, 2.0};
    EXPECT_THROW(solve_characteristic(x0, v0, ConstantFieldProvider{0.0, {0.0}}, 1.0, 0.1), DomainError);
    const std::vector<double> v1{1.0};
    EXPECT_THROW(solve_characteristic(x0, v1, ConstantFieldProvider{0.0, {0.0}}, 1.0, 0.0), StepSizeError);
    CharacteristicState cs;
    EXPECT_THROW(density_along_characteristic(-1.0, cs), DomainError);
}
