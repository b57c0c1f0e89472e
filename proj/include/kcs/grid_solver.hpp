#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "kcs/error.hpp"
#include "kcs/fields.hpp"
#include "kcs/kernel.hpp"
#include "kcs/parallel.hpp"
#include "kcs/phase_grid.hpp"

namespace kcs {

enum class DiffusionScheme {
    Implicit,  ///< backward Euler, unconditionally stable
    Explicit,  ///< forward Euler, requires sigma dt / dv^2 <= 1/2
    Auto,      ///< explicit when stable, implicit otherwise
};

enum class Reconstruction {
    Upwind,   ///< first order, donor cell
    VanLeer,  ///< second order, van Leer limited slopes with a Lax-Wendroff time correction
};

struct GridStepOptions {
    bool alignment = true;  ///< false replaces a, b by zero (pure transport + diffusion)
    DiffusionScheme diffusion = DiffusionScheme::Implicit;
    ConvolutionMethod convolution = ConvolutionMethod::Direct;
    Reconstruction reconstruction = Reconstruction::Upwind;
};

/// Slack on Courant-number checks so that an exact unit Courant number passes.
inline constexpr double kCflSlack = 1e-12;

namespace detail {

inline double van_leer_slope(double minus, double plus) {
    const double prod = minus * plus;
    return prod > 0.0 ? 2.0 * prod / (minus + plus) : 0.0;
}

// Value carried through a face with Courant number c from donor cell u, whose
// neighbours on the upwind and downwind side are uu and ud.
inline double face_value(Reconstruction rec, double c, double uu, double u, double ud) {
    if (rec == Reconstruction::Upwind) return u;
    // the limited value lies in [0, 2u]; max() only removes round-off below zero
    return std::max(0.0, u + 0.5 * (1.0 - std::abs(c)) * van_leer_slope(u - uu, ud - u));
}

// f - (out - in), with a negative result inside the round-off of the three operands
// replaced by zero; larger negative values are left for the positivity check.
inline double flux_update(double f, double out, double in) {
    const double r = f - (out - in);
    if (r < 0.0 && r >= -4.0 * std::numeric_limits<double>::epsilon() * (f + std::abs(out) + std::abs(in)))
        return 0.0;
    return r;
}

}  // namespace detail

/// Upwind finite-volume step of f_t + v f_x = 0 along every velocity row. No inflow
/// enters through x = -Lx, Lx; outflow leaves the domain.
inline PhaseGrid substep_transport_x(const PhaseGrid& f, double dt,
                                     Reconstruction rec = Reconstruction::Upwind) {
    const auto& g = f.geom;
    const double lambda = dt / g.dx();
    const double vmax = std::max(std::abs(g.v(0)), std::abs(g.v(g.nv - 1)));
    if (vmax * std::abs(lambda) > 1.0 + kCflSlack)
        throw StepSizeError("transport CFL violated: max|v| dt / dx = " + std::to_string(vmax * lambda));
    PhaseGrid out = f;
    parallel_for(g.nv, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double c = g.v(k) * lambda;
            if (c == 0.0) continue;
            // flux through face j (left face of cell j), scaled by dt/dx
            auto at = [&](std::ptrdiff_t j) {
                return j < 0 || j >= static_cast<std::ptrdiff_t>(g.nx) ? 0.0 : f(static_cast<std::size_t>(j), k);
            };
            auto flux = [&](std::size_t j) {
                if (j == 0 && c > 0.0) return 0.0;
                if (j == g.nx && c < 0.0) return 0.0;
                const auto jj = static_cast<std::ptrdiff_t>(j);
                if (c > 0.0) return c * detail::face_value(rec, c, at(jj - 2), at(jj - 1), at(jj));
                return c * detail::face_value(rec, c, at(jj + 1), at(jj), at(jj - 1));
            };
            double left = flux(0);
            for (std::size_t j = 0; j < g.nx; ++j) {
                const double right = flux(j + 1);
                out(j, k) = detail::flux_update(f(j, k), right, left);
                left = right;
            }
        }
    });
    return out;
}

/// Upwind flux-form step of f_t + (L f)_v = 0 in every spatial column with
/// L = b(x_j) - a(x_j) v evaluated on velocity faces. Both velocity boundaries are closed.
inline PhaseGrid substep_drift_v(const PhaseGrid& f, const FieldPair& fp, double dt,
                                 Reconstruction rec = Reconstruction::Upwind) {
    const auto& g = f.geom;
    if (fp.a.size() != g.nx || fp.b.size() != g.nx) throw GeometryMismatchError("drift: field size does not match grid");
    const double lambda = dt / g.dv();
    double lmax = 0.0;
    for (std::size_t j = 0; j < g.nx; ++j) {
        lmax = std::max(lmax, std::abs(fp.b[j] - fp.a[j] * g.v_face(1)));
        lmax = std::max(lmax, std::abs(fp.b[j] - fp.a[j] * g.v_face(g.nv - 1)));
    }
    if (lmax * std::abs(lambda) > 1.0 + kCflSlack)
        throw StepSizeError("drift CFL violated: max|L| dt / dv = " + std::to_string(lmax * lambda));
    PhaseGrid out = f;
    parallel_for(g.nx, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const double a = fp.a[j];
            const double b = fp.b[j];
            // outside the velocity range the slope is taken as zero
            auto at = [&](std::size_t k, std::size_t fallback) { return k < g.nv ? f(j, k) : f(j, fallback); };
            auto flux = [&](std::size_t k) {  // through the lower face of cell k
                if (k == 0 || k == g.nv) return 0.0;
                const double c = (b - a * g.v_face(k)) * lambda;
                if (c > 0.0) return c * detail::face_value(rec, c, k >= 2 ? f(j, k - 2) : f(j, k - 1), f(j, k - 1), f(j, k));
                return c * detail::face_value(rec, c, at(k + 1, k), f(j, k), f(j, k - 1));
            };
            double lower = 0.0;
            for (std::size_t k = 0; k < g.nv; ++k) {
                const double upper = flux(k + 1);
                out(j, k) = detail::flux_update(f(j, k), upper, lower);
                lower = upper;
            }
        }
    });
    return out;
}

namespace detail {

// Solves (1 + 2mu) u_k - mu u_{k-1} - mu u_{k+1} = r_k with zero-flux ends
// ((1 + mu) on the first and last diagonal entries) by the Thomas algorithm.
inline void solve_neumann_heat(double mu, std::vector<double>& rhs, std::vector<double>& scratch) {
    const std::size_t n = rhs.size();
    scratch.resize(n);
    auto diag = [&](std::size_t k) { return (k == 0 || k == n - 1) ? 1.0 + mu : 1.0 + 2.0 * mu; };
    double denom = diag(0);
    scratch[0] = -mu / denom;
    rhs[0] /= denom;
    for (std::size_t k = 1; k < n; ++k) {
        denom = diag(k) + mu * scratch[k - 1];
        scratch[k] = -mu / denom;
        rhs[k] = (rhs[k] + mu * rhs[k - 1]) / denom;
    }
    for (std::size_t k = n - 1; k-- > 0;) rhs[k] -= scratch[k] * rhs[k + 1];
}

}  // namespace detail

/// sigma f_vv with zero-flux velocity boundaries; identity for sigma = 0.
inline PhaseGrid substep_diffuse_v(const PhaseGrid& f, double sigma, double dt,
                                   DiffusionScheme scheme = DiffusionScheme::Implicit) {
    if (!(sigma >= 0.0)) throw DomainError("diffusion: sigma must be nonnegative");
    if (sigma == 0.0) return f;
    const auto& g = f.geom;
    const double mu = sigma * dt / (g.dv() * g.dv());
    if (scheme == DiffusionScheme::Auto) scheme = mu <= 0.5 ? DiffusionScheme::Explicit : DiffusionScheme::Implicit;
    if (scheme == DiffusionScheme::Explicit && mu > 0.5 + kCflSlack)
        throw StepSizeError("explicit diffusion requires sigma dt / dv^2 <= 1/2, have " + std::to_string(mu));
    PhaseGrid out = f;
    parallel_for(g.nx, [&](std::size_t begin, std::size_t end) {
        std::vector<double> column(g.nv);
        std::vector<double> scratch;
        for (std::size_t j = begin; j < end; ++j) {
            if (scheme == DiffusionScheme::Explicit) {
                double lower = 0.0;
                for (std::size_t k = 0; k < g.nv; ++k) {
                    const double upper = k + 1 == g.nv ? 0.0 : mu * (f(j, k + 1) - f(j, k));
                    out(j, k) = f(j, k) + (upper - lower);
                    lower = upper;
                }
            } else {
                for (std::size_t k = 0; k < g.nv; ++k) column[k] = f(j, k);
                detail::solve_neumann_heat(mu, column, scratch);
                for (std::size_t k = 0; k < g.nv; ++k) out(j, k) = column[k];
            }
        }
    });
    return out;
}

inline FieldPair step_fields(const PhaseGrid& f, const KernelSpec& k, const GridStepOptions& opt) {
    return opt.alignment ? alignment_field_grid(f, k, opt.convolution) : zero_fields(f.geom);
}

/// One Strang-split step: half transport, half drift, full diffusion, half drift, half
/// transport. Fields are recomputed from the current density before each drift.
inline PhaseGrid full_step(const PhaseGrid& f, const KernelSpec& k, double sigma, double dt,
                           const GridStepOptions& opt = {}) {
    if (!(dt > 0.0)) throw StepSizeError("full_step: dt must be positive");
    const double half = 0.5 * dt;
    const auto rec = opt.reconstruction;
    PhaseGrid s = substep_transport_x(f, half, rec);
    s = substep_drift_v(s, step_fields(s, k, opt), half, rec);
    s = substep_diffuse_v(s, sigma, dt, opt.diffusion);
    s = substep_drift_v(s, step_fields(s, k, opt), half, rec);
    s = substep_transport_x(s, half, rec);
    s.t = f.t + dt;
    for (double v : s.values) {
        if (!std::isfinite(v)) throw BlowUpError(s.t, "non-finite density");
        if (v < 0.0) throw InvalidStateError("negative density after step at t = " + std::to_string(s.t));
    }
    return s;
}

/// Largest dt satisfying the transport and drift Courant limits for the current state,
/// scaled by the safety factor.
inline double stable_time_step(const PhaseGrid& f, const KernelSpec& k, double safety = 0.9) {
    const auto& g = f.geom;
    const double vmax = std::max(std::abs(g.v(0)), std::abs(g.v(g.nv - 1)));
    const FieldPair fp = alignment_field_grid(f, k);
    double lmax = 0.0;
    for (std::size_t j = 0; j < g.nx; ++j)
        lmax = std::max({lmax, std::abs(fp.b[j] - fp.a[j] * g.v_face(0)), std::abs(fp.b[j] - fp.a[j] * g.v_face(g.nv))});
    // half steps in both sub-steps
    double limit = 2.0 * g.dx() / vmax;
    if (lmax > 0.0) limit = std::min(limit, 2.0 * g.dv() / lmax);
    return safety * limit;
}

}  // namespace kcs
