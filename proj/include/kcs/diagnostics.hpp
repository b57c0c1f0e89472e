#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kcs/error.hpp"
#include "kcs/fields.hpp"
#include "kcs/kernel.hpp"
#include "kcs/model.hpp"
#include "kcs/particles.hpp"
#include "kcs/phase_grid.hpp"

namespace kcs {

inline constexpr double kNotAvailable = std::numeric_limits<double>::quiet_NaN();

/// One output time. Entries a solver cannot represent (weighted L2 and gradient norms
/// of a particle ensemble) hold NaN.
struct DiagnosticsRecord {
    double t = 0.0;
    double mass = 0.0;
    std::array<double, kMaxDim> momentum{};
    double energy = 0.0;
    double dissipation_rate = 0.0;
    double cumulative_dissipation = kNotAvailable;  ///< NaN: filled by DiagnosticsSeries::append
    double support_radius = 0.0;
    double l1 = 0.0;             ///< ||f||_{L1}
    double l1_v_weighted = 0.0;  ///< ||(1+v^2)^{1/2} f||_{L1}
    double l2_omega = 0.0;       ///< ||f||_{L2(omega)}
    double l2_omega_v_weighted = 0.0;  ///< ||(1+v^2)^{1/2} f||_{L2(omega)}
    double grad_x_l2_nu = 0.0;   ///< ||d_x f||_{L2(nu)}
    double grad_v_l2 = 0.0;      ///< ||d_v f||_{L2}
    double x_norm = 0.0;         ///< sqrt(l2_omega^2 + grad_x_l2_nu^2 + grad_v_l2^2)
    double w11 = 0.0;            ///< ||f||_{L1} + ||d_x f||_{L1} + ||d_v f||_{L1}
    double v_gradient_dissipation = 0.0;  ///< ||(1+v^2)^{1/2} d_v f||^2_{L2(omega)}
};

/// Output records with strictly increasing times.
class DiagnosticsSeries {
public:
    /// Appends r; a NaN cumulative dissipation is filled by the trapezoidal rule from the
    /// previous record's rate.
    void append(DiagnosticsRecord r) {
        if (!records_.empty() && !(r.t > records_.back().t))
            throw InvalidStateError("DiagnosticsSeries: output times must be strictly increasing");
        if (std::isnan(r.cumulative_dissipation)) {
            if (records_.empty()) {
                r.cumulative_dissipation = 0.0;
            } else {
                const auto& p = records_.back();
                r.cumulative_dissipation =
                    p.cumulative_dissipation + 0.5 * (r.t - p.t) * (p.dissipation_rate + r.dissipation_rate);
            }
        }
        records_.push_back(r);
    }

    const std::vector<DiagnosticsRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const DiagnosticsRecord& operator[](std::size_t i) const { return records_[i]; }
    const DiagnosticsRecord& front() const { return records_.front(); }
    const DiagnosticsRecord& back() const { return records_.back(); }

private:
    std::vector<DiagnosticsRecord> records_;
};

namespace detail {

// Centered difference quotients, one-sided in the first and last cell.
inline double diff_x(const PhaseGrid& f, std::size_t j, std::size_t k) {
    const auto& g = f.geom;
    if (g.nx < 2) return 0.0;
    if (j == 0) return (f(1, k) - f(0, k)) / g.dx();
    if (j + 1 == g.nx) return (f(j, k) - f(j - 1, k)) / g.dx();
    return (f(j + 1, k) - f(j - 1, k)) / (2.0 * g.dx());
}

inline double diff_v(const PhaseGrid& f, std::size_t j, std::size_t k) {
    const auto& g = f.geom;
    if (g.nv < 2) return 0.0;
    if (k == 0) return (f(j, 1) - f(j, 0)) / g.dv();
    if (k + 1 == g.nv) return (f(j, k) - f(j, k - 1)) / g.dv();
    return (f(j, k + 1) - f(j, k - 1)) / (2.0 * g.dv());
}

}  // namespace detail

/// Norm entries of a record (t, moments and dissipation left untouched). f may be signed.
inline void fill_grid_norms(const PhaseGrid& f, const WeightSpec& w, DiagnosticsRecord& r) {
    const auto& g = f.geom;
    double l1 = 0.0, l1v = 0.0, l2w = 0.0, l2wv = 0.0, gx2 = 0.0, gv2 = 0.0, gx1 = 0.0, gv1 = 0.0, vgd = 0.0;
    for (std::size_t j = 0; j < g.nx; ++j) {
        const double x = g.x(j);
        for (std::size_t k = 0; k < g.nv; ++k) {
            const double v = g.v(k);
            const double v2 = v * v;
            const double val = f(j, k);
            const double om = w.omega(x * x, v2);
            const double nu = WeightSpec::nu(v2);
            const double fx = detail::diff_x(f, j, k);
            const double fv = detail::diff_v(f, j, k);
            l1 += std::abs(val);
            l1v += std::sqrt(nu) * std::abs(val);
            l2w += val * val * om;
            l2wv += nu * val * val * om;
            gx2 += fx * fx * nu;
            gv2 += fv * fv;
            gx1 += std::abs(fx);
            gv1 += std::abs(fv);
            vgd += nu * om * fv * fv;
        }
    }
    const double area = g.cell_area();
    r.l1 = l1 * area;
    r.l1_v_weighted = l1v * area;
    r.l2_omega = std::sqrt(l2w * area);
    r.l2_omega_v_weighted = std::sqrt(l2wv * area);
    r.grad_x_l2_nu = std::sqrt(gx2 * area);
    r.grad_v_l2 = std::sqrt(gv2 * area);
    r.x_norm = std::sqrt((l2w + gx2 + gv2) * area);
    r.w11 = (l1 + gx1 + gv1) * area;
    r.v_gradient_dissipation = vgd * area;
}

/// Norms of f by midpoint quadrature with centered difference quotients.
inline DiagnosticsRecord grid_norms(const PhaseGrid& f, const WeightSpec& w) {
    DiagnosticsRecord r;
    r.t = f.t;
    fill_grid_norms(f, w, r);
    return r;
}

/// D = sum over cell pairs of phi f f (v - v*)^2 (dx dv)^2, evaluated as
/// sum_j sum_k f_jk (a_j v_k^2 - 2 b_j v_k + q_j) dx dv with q = phi * (energy density).
inline double dissipation_rate(const PhaseGrid& f, const KernelSpec& k,
                               ConvolutionMethod method = ConvolutionMethod::Direct) {
    require_nonnegative(f, "dissipation_rate");
    const auto& g = f.geom;
    const auto taps = kernel_taps(k, g.nx, g.dx());
    const auto a = kernel_convolve(taps, spatial_density(f), g.dx(), method);
    const auto b = kernel_convolve(taps, momentum_density(f), g.dx(), method);
    const auto q = kernel_convolve(taps, energy_density(f), g.dx(), method);
    double total = 0.0;
    for (std::size_t j = 0; j < g.nx; ++j) {
        double col = 0.0;
        for (std::size_t kk = 0; kk < g.nv; ++kk) {
            const double v = g.v(kk);
            col += f(j, kk) * (a[j] * v * v - 2.0 * b[j] * v + q[j]);
        }
        total += col;
    }
    return std::max(0.0, total * g.cell_area());
}

/// Velocity-support radius: largest |v_k| over cells whose value exceeds
/// rel_threshold * max f.
inline double grid_support_radius(const PhaseGrid& f, double rel_threshold = 1e-12) {
    const auto& g = f.geom;
    const double thr = rel_threshold * f.max_value();
    double r = 0.0;
    for (std::size_t j = 0; j < g.nx; ++j)
        for (std::size_t k = 0; k < g.nv; ++k)
            if (f(j, k) > thr) r = std::max(r, std::abs(g.v(k)));
    return r;
}

/// Full record of a grid state. dissipation is passed in when the caller already has it
/// (e.g. zero for alignment-free runs); otherwise it is computed from k.
inline DiagnosticsRecord grid_record(const PhaseGrid& f, const KernelSpec& k, const WeightSpec& w,
                                     std::optional<double> dissipation = std::nullopt) {
    DiagnosticsRecord r = grid_norms(f, w);
    const auto& g = f.geom;
    double mass = 0.0, mom = 0.0, energy = 0.0;
    const auto m = momentum_density(f);
    const auto e = energy_density(f);
    for (std::size_t j = 0; j < g.nx; ++j) {
        mom += m[j];
        energy += e[j];
    }
    for (double v : f.values) mass += v;
    r.mass = mass * g.cell_area();
    r.momentum = {mom * g.dx(), 0.0, 0.0};
    r.energy = energy * g.dx();
    r.dissipation_rate = dissipation ? *dissipation : dissipation_rate(f, k);
    r.support_radius = grid_support_radius(f);
    return r;
}

/// Moment-level record of a particle ensemble; L2 and gradient norms are NaN.
inline DiagnosticsRecord particle_record(const ParticleEnsemble& e, double dissipation) {
    const EmpiricalMoments m = empirical_moments(e);
    DiagnosticsRecord r;
    r.t = e.t;
    r.mass = m.mass;
    for (std::size_t c = 0; c < e.d; ++c) r.momentum[c] = m.momentum[c];
    r.energy = m.energy;
    r.dissipation_rate = dissipation;
    r.support_radius = m.support_radius;
    r.l1 = m.mass;
    double l1v = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        double v2 = 0.0;
        for (std::size_t c = 0; c < e.d; ++c) v2 += e.v[i * e.d + c] * e.v[i * e.d + c];
        l1v += std::sqrt(1.0 + v2);
    }
    r.l1_v_weighted = l1v * e.weight();
    r.l2_omega = r.l2_omega_v_weighted = r.grad_x_l2_nu = r.grad_v_l2 = kNotAvailable;
    r.x_norm = r.w11 = r.v_gradient_dissipation = kNotAvailable;
    return r;
}

/// residual(t) = E(t) + int_0^t D - E(0) - 2 d sigma M (t - t0).
inline std::vector<double> energy_ledger(const DiagnosticsSeries& s, double sigma, std::size_t d, double M) {
    std::vector<double> res;
    if (s.empty()) return res;
    const auto& r0 = s.front();
    res.reserve(s.size());
    for (const auto& r : s.records())
        res.push_back(r.energy + (r.cumulative_dissipation - r0.cumulative_dissipation) - r0.energy -
                      2.0 * static_cast<double>(d) * sigma * M * (r.t - r0.t));
    return res;
}

struct SupportCheck {
    bool pass = true;
    double worst_margin = std::numeric_limits<double>::infinity();  ///< min over t of bound - R(t)
    std::optional<double> violation_t;
    std::optional<double> violation_r;
};

/// R(t) <= R0 + M R0 (t - t0) + tol_geom at every record.
inline SupportCheck support_bound_check(const DiagnosticsSeries& s, double R0, double M, double tol_geom) {
    SupportCheck c;
    if (s.empty()) return c;
    const double t0 = s.front().t;
    for (const auto& r : s.records()) {
        const double margin = R0 + M * R0 * (r.t - t0) + tol_geom - r.support_radius;
        if (margin < c.worst_margin) c.worst_margin = margin;
        if (margin < 0.0 && c.pass) {
            c.pass = false;
            c.violation_t = r.t;
            c.violation_r = r.support_radius;
        }
    }
    return c;
}

struct Distances {
    double l1 = 0.0;
    double l2_omega = 0.0;
    double w11 = 0.0;
    double x_norm = 0.0;
};

inline Distances pairwise_distance(const PhaseGrid& fa, const PhaseGrid& fb, const WeightSpec& w) {
    require_same_geometry(fa, fb);
    PhaseGrid diff(fa.geom, fa.t);
    for (std::size_t s = 0; s < diff.values.size(); ++s) diff.values[s] = fa.values[s] - fb.values[s];
    const DiagnosticsRecord r = grid_norms(diff, w);
    return {r.l1, r.l2_omega, r.w11, r.x_norm};
}

}  // namespace kcs
