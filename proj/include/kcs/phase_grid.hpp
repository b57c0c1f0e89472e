#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "kcs/error.hpp"

namespace kcs {

/// Uniform cell-centered lattice on [-Lx, Lx] x [-Lv, Lv].
///
/// Centers are computed as (i + 1/2 - n/2) * spacing so that mirrored cells carry
/// exactly opposite coordinates; symmetric sums then cancel to zero.
struct GridGeometry {
    std::size_t nx = 0;
    std::size_t nv = 0;
    double lx = 1.0;
    double lv = 1.0;

    double dx() const { return 2.0 * lx / static_cast<double>(nx); }
    double dv() const { return 2.0 * lv / static_cast<double>(nv); }
    double cell_area() const { return dx() * dv(); }
    double x(std::size_t j) const { return (static_cast<double>(j) + 0.5 - 0.5 * static_cast<double>(nx)) * dx(); }
    double v(std::size_t k) const { return (static_cast<double>(k) + 0.5 - 0.5 * static_cast<double>(nv)) * dv(); }
    /// Velocity at the lower face of cell k (k = nv gives the upper boundary).
    double v_face(std::size_t k) const { return (static_cast<double>(k) - 0.5 * static_cast<double>(nv)) * dv(); }
    std::size_t size() const { return nx * nv; }

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Cell-averaged phase-space density f(x_j, v_k), stored x-major (index j * nv + k).
struct PhaseGrid {
    GridGeometry geom;
    std::vector<double> values;
    double t = 0.0;

    PhaseGrid() = default;
    explicit PhaseGrid(GridGeometry g, double time = 0.0) : geom(g), values(g.size(), 0.0), t(time) {
        if (g.nx < 1 || g.nv < 1 || !(g.lx > 0.0) || !(g.lv > 0.0))
            throw InvalidStateError("PhaseGrid: degenerate geometry");
    }

    double& operator()(std::size_t j, std::size_t k) { return values[j * geom.nv + k]; }
    double operator()(std::size_t j, std::size_t k) const { return values[j * geom.nv + k]; }

    double max_value() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
    double min_value() const { return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end()); }

    /// Total mass sum f dx dv.
    double mass() const {
        double s = 0.0;
        for (double f : values) s += f;
        return s * geom.cell_area();
    }

    friend bool operator==(const PhaseGrid&, const PhaseGrid&) = default;
};

inline void require_same_geometry(const PhaseGrid& a, const PhaseGrid& b) {
    if (!(a.geom == b.geom)) throw GeometryMismatchError("phase grids have different geometry");
}

/// Bilinear interpolation between cell centers; constant extension in the half cell
/// next to each boundary. Exact on profiles that are linear in (x, v).
inline double sample_density(const PhaseGrid& f, double x, double v) {
    const auto& g = f.geom;
    if (!(std::abs(x) <= g.lx) || !(std::abs(v) <= g.lv))
        throw DomainError("sample_density: probe (" + std::to_string(x) + ", " + std::to_string(v) +
                          ") outside the phase-space domain");
    auto locate = [](double s, double spacing, std::size_t n, std::size_t& i0, double& w) {
        const double u = s / spacing + 0.5 * static_cast<double>(n) - 0.5;
        if (u <= 0.0) {
            i0 = 0;
            w = 0.0;
        } else if (u >= static_cast<double>(n - 1)) {
            i0 = n >= 2 ? n - 2 : 0;
            w = n >= 2 ? 1.0 : 0.0;
        } else {
            i0 = static_cast<std::size_t>(std::floor(u));
            w = u - static_cast<double>(i0);
        }
    };
    std::size_t j0 = 0;
    std::size_t k0 = 0;
    double wx = 0.0;
    double wv = 0.0;
    locate(x, g.dx(), g.nx, j0, wx);
    locate(v, g.dv(), g.nv, k0, wv);
    const std::size_t j1 = std::min(j0 + 1, g.nx - 1);
    const std::size_t k1 = std::min(k0 + 1, g.nv - 1);
    return (1.0 - wx) * ((1.0 - wv) * f(j0, k0) + wv * f(j0, k1)) + wx * ((1.0 - wv) * f(j1, k0) + wv * f(j1, k1));
}

}  // namespace kcs
