#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kcs/error.hpp"
#include "kcs/model.hpp"
#include "kcs/particles.hpp"
#include "kcs/phase_grid.hpp"
#include "kcs/rng.hpp"

namespace kcs {

/// Gaussian in x and v, cell-averaged exactly through erf.
struct MaxwellianProfile {
    double x_center = 0.0;
    double v_center = 0.0;
    double x_spread = 1.0;
    double v_spread = 0.5;
};

/// cos^2 bump of half-width x_width in x times (1 - (v/R0)^2)^2 on |v| < R0.
struct BumpCompactProfile {
    double r0 = 1.0;
    double x_width = 1.0;
};

/// Two counter-streaming beams (1 - ((v -+ v0)/w)^2)^2 sharing a cos^2 bump in x.
struct TwoBeamProfile {
    double v0 = 1.0;
    double beam_width = 0.25;
    double x_width = 1.0;
};

/// A single velocity row (the cell nearest u) with a cos^2 bump in x: every particle of
/// the flock moves with the same velocity.
struct RigidFlockProfile {
    double u = 0.5;
    double x_width = 1.0;
};

using Profile = std::variant<MaxwellianProfile, BumpCompactProfile, TwoBeamProfile, RigidFlockProfile>;

inline std::string profile_name(const Profile& p) {
    switch (p.index()) {
        case 0: return "maxwellian";
        case 1: return "bump_compact";
        case 2: return "two_beam";
        default: return "rigid_flock";
    }
}

namespace detail {

inline double cos2_bump(double s, double half_width) {
    if (std::abs(s) >= half_width) return 0.0;
    const double c = std::cos(0.5 * std::numbers::pi * s / half_width);
    return c * c;
}

inline double quartic_bump(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    const double q = 1.0 - s * s;
    return q * q;
}

// Exact cell average of a unit Gaussian density over [lo, hi].
inline double gaussian_cell_average(double lo, double hi, double center, double spread) {
    const double scale = 1.0 / (std::numbers::sqrt2 * spread);
    return 0.5 * (std::erf((hi - center) * scale) - std::erf((lo - center) * scale)) / (hi - lo);
}

inline std::size_t nearest_cell(double s, double spacing, std::size_t n) {
    const double u = s / spacing + 0.5 * static_cast<double>(n) - 0.5;
    const double r = std::clamp(std::round(u), 0.0, static_cast<double>(n - 1));
    return static_cast<std::size_t>(r);
}

}  // namespace detail

/// Velocity-support radius of a compactly supported profile on the given geometry,
/// nullopt for profiles with unbounded support.
inline std::optional<double> profile_support_radius(const Profile& p, const GridGeometry& g) {
    if (std::holds_alternative<MaxwellianProfile>(p)) return std::nullopt;
    if (const auto* b = std::get_if<BumpCompactProfile>(&p)) return b->r0;
    if (const auto* tb = std::get_if<TwoBeamProfile>(&p)) return std::abs(tb->v0) + tb->beam_width;
    const auto& rf = std::get<RigidFlockProfile>(p);
    return std::abs(g.v(detail::nearest_cell(rf.u, g.dv(), g.nv)));
}

/// Spatial half-extent |x| of the profile's support (6 spreads for a Maxwellian).
inline double profile_x_extent(const Profile& p) {
    if (const auto* m = std::get_if<MaxwellianProfile>(&p)) return std::abs(m->x_center) + 6.0 * m->x_spread;
    if (const auto* b = std::get_if<BumpCompactProfile>(&p)) return b->x_width;
    if (const auto* tb = std::get_if<TwoBeamProfile>(&p)) return tb->x_width;
    return std::get<RigidFlockProfile>(p).x_width;
}

/// Velocity half-extent |v| of the profile's support (6 spreads for a Maxwellian).
inline double profile_v_extent(const Profile& p, const GridGeometry& g) {
    if (const auto* m = std::get_if<MaxwellianProfile>(&p)) return std::abs(m->v_center) + 6.0 * m->v_spread;
    return *profile_support_radius(p, g);
}

/// Smallest Lv for which the noiseless support bound R0 (1 + M T) stays inside the domain,
/// or the 6-standard-deviation diffusive spread for sigma > 0.
inline double auto_velocity_extent(const Profile& p, const SimParams& params) {
    GridGeometry g{params.Nx, params.Nv, params.Lx, params.Lv};
    const double base = profile_v_extent(p, g);
    double lv = 0.0;
    if (params.sigma == 0.0) {
        lv = base * (1.0 + params.mass * params.T);
    } else {
        lv = base + 6.0 * std::sqrt(2.0 * params.sigma * params.T);
    }
    // margin of two cells at the resulting resolution
    return lv * (1.0 + 4.0 / static_cast<double>(params.Nv));
}

/// Checks that the profile fits the domain; for noiseless runs additionally that
/// Lv >= R0 (1 + M T) + dv, so the support can never touch the velocity boundary.
inline void validate_profile_domain(const Profile& p, const SimParams& params, bool noiseless_bound = true) {
    const GridGeometry g{params.Nx, params.Nv, params.Lx, params.Lv};
    if (profile_x_extent(p) > params.Lx)
        throw ValidationError("domain covers support", "profile extends to |x| = " +
                                                           std::to_string(profile_x_extent(p)) + " > Lx = " +
                                                           std::to_string(params.Lx));
    if (profile_v_extent(p, g) > params.Lv)
        throw ValidationError("domain covers support", "profile extends to |v| = " +
                                                           std::to_string(profile_v_extent(p, g)) + " > Lv = " +
                                                           std::to_string(params.Lv));
    if (noiseless_bound && params.sigma == 0.0) {
        if (const auto r0 = profile_support_radius(p, g)) {
            const double needed = *r0 * (1.0 + params.mass * params.T) + g.dv();
            if (params.Lv < needed)
                throw ValidationError("Lv ≥ R0(1 + M T) + margin",
                                      "need Lv >= " + std::to_string(needed) + ", have " + std::to_string(params.Lv));
        }
    }
}

/// Nonnegative cell values of the profile, normalized to total mass M. The noiseless
/// velocity-boundary check can be skipped when the grid only serves as a sampling lattice.
inline PhaseGrid init_grid(const Profile& p, const SimParams& params, bool noiseless_bound = true) {
    params.validate();
    validate_profile_domain(p, params, noiseless_bound);
    PhaseGrid f(GridGeometry{params.Nx, params.Nv, params.Lx, params.Lv});
    const auto& g = f.geom;
    std::vector<double> gx(g.nx, 0.0);
    std::vector<double> hv(g.nv, 0.0);
    if (const auto* m = std::get_if<MaxwellianProfile>(&p)) {
        for (std::size_t j = 0; j < g.nx; ++j)
            gx[j] = detail::gaussian_cell_average(g.x(j) - 0.5 * g.dx(), g.x(j) + 0.5 * g.dx(), m->x_center, m->x_spread);
        for (std::size_t k = 0; k < g.nv; ++k)
            hv[k] = detail::gaussian_cell_average(g.v(k) - 0.5 * g.dv(), g.v(k) + 0.5 * g.dv(), m->v_center, m->v_spread);
    } else if (const auto* b = std::get_if<BumpCompactProfile>(&p)) {
        for (std::size_t j = 0; j < g.nx; ++j) gx[j] = detail::cos2_bump(g.x(j), b->x_width);
        for (std::size_t k = 0; k < g.nv; ++k) hv[k] = detail::quartic_bump(g.v(k) / b->r0);
    } else if (const auto* tb = std::get_if<TwoBeamProfile>(&p)) {
        for (std::size_t j = 0; j < g.nx; ++j) gx[j] = detail::cos2_bump(g.x(j), tb->x_width);
        for (std::size_t k = 0; k < g.nv; ++k)
            hv[k] = detail::quartic_bump((g.v(k) - tb->v0) / tb->beam_width) +
                    detail::quartic_bump((g.v(k) + tb->v0) / tb->beam_width);
    } else {
        const auto& rf = std::get<RigidFlockProfile>(p);
        for (std::size_t j = 0; j < g.nx; ++j) gx[j] = detail::cos2_bump(g.x(j), rf.x_width);
        hv[detail::nearest_cell(rf.u, g.dv(), g.nv)] = 1.0;
    }
    for (std::size_t j = 0; j < g.nx; ++j)
        for (std::size_t k = 0; k < g.nv; ++k) f(j, k) = gx[j] * hv[k];
    const double raw = f.mass();
    if (!(raw > 0.0)) throw ValidationError("domain covers support", "profile has no mass on this grid");
    const double scale = params.mass / raw;
    for (double& v : f.values) v *= scale;
    return f;
}

/// Smooth compactly supported cos^2 x cos^2 bump centered at (xc, vc), scaled to unit L1 norm.
inline PhaseGrid cosine_bump(const GridGeometry& g, double xc, double vc, double hx, double hv) {
    PhaseGrid b(g);
    for (std::size_t j = 0; j < g.nx; ++j)
        for (std::size_t k = 0; k < g.nv; ++k)
            b(j, k) = detail::cos2_bump(g.x(j) - xc, hx) * detail::cos2_bump(g.v(k) - vc, hv);
    const double l1 = b.mass();
    if (!(l1 > 0.0)) throw ValidationError("perturbation inside domain", "bump has no support on this grid");
    for (double& v : b.values) v /= l1;
    return b;
}

/// Stream index reserved for initial sampling; time steps never reach it.
inline constexpr std::uint64_t kInitStream = ~std::uint64_t{0};

/// Inverse-CDF sampling of N equally weighted particles from a 1-D phase-space grid.
/// A cell is drawn with probability proportional to its mass; the position is uniform in
/// the cell and the velocity is the cell-center velocity, so velocity moments of the
/// ensemble are unbiased estimates of the grid's.
inline ParticleEnsemble sample_particles(const PhaseGrid& f, std::size_t n, std::uint64_t seed) {
    const auto& g = f.geom;
    std::vector<double> cdf(g.size());
    double run = 0.0;
    for (std::size_t s = 0; s < g.size(); ++s) {
        if (!(f.values[s] >= 0.0)) throw InvalidStateError("sample_particles: negative density");
        run += f.values[s];
        cdf[s] = run;
    }
    if (!(run > 0.0)) throw InvalidStateError("sample_particles: empty density");
    ParticleEnsemble e(1, n, f.mass());
    e.t = f.t;
    const CounterRng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const auto u = rng.uniforms(kInitStream, static_cast<std::uint32_t>(i), 0);
        const double target = (1.0 - u[0]) * run;  // in [0, run)
        auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
        const std::size_t cell = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), g.size() - 1);
        const std::size_t j = cell / g.nv;
        const std::size_t k = cell % g.nv;
        e.x[i] = g.x(j) + (u[1] - 0.5) * g.dx();
        e.v[i] = g.v(k);
    }
    return e;
}

/// Particle initial data in d dimensions: every position component is drawn from the
/// profile's x-marginal and every velocity component from its v-marginal (all shipped
/// profiles are separable). For d = 1 this coincides with sample_particles.
inline ParticleEnsemble init_particles(const Profile& p, const SimParams& params) {
    const PhaseGrid f = init_grid(p, params, false);
    if (params.d == 1) return sample_particles(f, params.N, params.seed);
    const auto& g = f.geom;
    std::vector<double> cx(g.nx, 0.0);
    std::vector<double> cv(g.nv, 0.0);
    for (std::size_t j = 0; j < g.nx; ++j)
        for (std::size_t k = 0; k < g.nv; ++k) {
            cx[j] += f(j, k);
            cv[k] += f(j, k);
        }
    for (std::size_t j = 1; j < g.nx; ++j) cx[j] += cx[j - 1];
    for (std::size_t k = 1; k < g.nv; ++k) cv[k] += cv[k - 1];
    auto pick = [](const std::vector<double>& cdf, double u) {
        const double target = (1.0 - u) * cdf.back();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    };
    ParticleEnsemble e(params.d, params.N, params.mass);
    const CounterRng rng(params.seed);
    for (std::size_t i = 0; i < params.N; ++i) {
        for (std::size_t c = 0; c < params.d; ++c) {
            const auto ux = rng.uniforms(kInitStream, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(2 * c));
            const auto uv = rng.uniforms(kInitStream, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(2 * c + 1));
            const std::size_t j = pick(cx, ux[0]);
            e.x[i * params.d + c] = g.x(j) + (ux[1] - 0.5) * g.dx();
            e.v[i * params.d + c] = g.v(pick(cv, uv[0]));
        }
    }
    return e;
}

}  // namespace kcs
