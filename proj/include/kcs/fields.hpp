#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kcs/error.hpp"
#include "kcs/fft_convolution.hpp"
#include "kcs/kernel.hpp"
#include "kcs/parallel.hpp"
#include "kcs/phase_grid.hpp"

namespace kcs {

/// Alignment fields a(x) = int phi f, b(x) = int phi f v* sampled at spatial points.
/// L[f](x, v) = b(x) - a(x) v.
struct FieldPair {
    std::size_t dim = 1;
    std::vector<double> x;  ///< strictly increasing sample coordinates
    std::vector<double> a;
    std::vector<double> b;  ///< x.size() * dim, sample-major
};

struct FieldSample {
    double a = 0.0;
    std::vector<double> b;
};

enum class ConvolutionMethod { Direct, Fft };

/// rho_j = sum_k f_jk dv.
inline std::vector<double> spatial_density(const PhaseGrid& f) {
    const auto& g = f.geom;
    std::vector<double> rho(g.nx, 0.0);
    for (std::size_t j = 0; j < g.nx; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < g.nv; ++k) s += f(j, k);
        rho[j] = s * g.dv();
    }
    return rho;
}

/// m_j = sum_k f_jk v_k dv, summed over mirrored pairs (k, nv-1-k) so that a density even
/// in v yields exactly zero.
inline std::vector<double> momentum_density(const PhaseGrid& f) {
    const auto& g = f.geom;
    std::vector<double> m(g.nx, 0.0);
    const std::size_t half = g.nv / 2;
    for (std::size_t j = 0; j < g.nx; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < half; ++k) {
            const std::size_t km = g.nv - 1 - k;
            s += f(j, k) * g.v(k) + f(j, km) * g.v(km);
        }
        m[j] = s * g.dv();
    }
    return m;
}

/// e_j = sum_k f_jk v_k^2 dv.
inline std::vector<double> energy_density(const PhaseGrid& f) {
    const auto& g = f.geom;
    std::vector<double> e(g.nx, 0.0);
    for (std::size_t j = 0; j < g.nx; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < g.nv; ++k) {
            const double v = g.v(k);
            s += f(j, k) * v * v;
        }
        e[j] = s * g.dv();
    }
    return e;
}

/// taps[m] = phi(m dx).
inline std::vector<double> kernel_taps(const KernelSpec& k, std::size_t n, double dx) {
    std::vector<double> taps(n);
    for (std::size_t m = 0; m < n; ++m) taps[m] = k(static_cast<double>(m) * dx);
    return taps;
}

/// out_i = dx * sum_j phi(|x_i - x_j|) in_j, midpoint rule on cell centers.
/// The direct path sums j in ascending order for every i.
inline std::vector<double> kernel_convolve(std::span<const double> taps, std::span<const double> in, double dx,
                                           ConvolutionMethod method = ConvolutionMethod::Direct) {
    const std::size_t n = in.size();
    std::vector<double> out(n, 0.0);
    if (method == ConvolutionMethod::Fft) {
        ToeplitzConvolver conv(taps.first(n));
        out = conv.apply(in);
        for (double& o : out) o *= dx;
        return out;
    }
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += taps[i > j ? i - j : j - i] * in[j];
            out[i] = s * dx;
        }
    });
    return out;
}

inline void require_nonnegative(const PhaseGrid& f, const char* where) {
    for (double v : f.values)
        if (!(v >= 0.0)) throw InvalidStateError(std::string(where) + ": negative or NaN density cell");
}

/// Midpoint-quadrature alignment fields of a 1-D phase-space density.
inline FieldPair alignment_field_grid(const PhaseGrid& f, const KernelSpec& k,
                                      ConvolutionMethod method = ConvolutionMethod::Direct) {
    require_nonnegative(f, "alignment_field_grid");
    const auto& g = f.geom;
    const auto taps = kernel_taps(k, g.nx, g.dx());
    FieldPair fp;
    fp.dim = 1;
    fp.x.resize(g.nx);
    for (std::size_t j = 0; j < g.nx; ++j) fp.x[j] = g.x(j);
    const auto rho = spatial_density(f);
    const auto mom = momentum_density(f);
    fp.a = kernel_convolve(taps, rho, g.dx(), method);
    fp.b = kernel_convolve(taps, mom, g.dx(), method);
    return fp;
}

/// Fields identically zero on the grid's spatial centers (alignment switched off).
inline FieldPair zero_fields(const GridGeometry& g) {
    FieldPair fp;
    fp.x.resize(g.nx);
    for (std::size_t j = 0; j < g.nx; ++j) fp.x[j] = g.x(j);
    fp.a.assign(g.nx, 0.0);
    fp.b.assign(g.nx, 0.0);
    return fp;
}

/// Linear interpolation of (a, b) at x. Throws ExtrapolationError outside [x_0, x_last].
inline FieldSample sample_fields(const FieldPair& fp, double x) {
    const std::size_t n = fp.x.size();
    if (n == 0) throw ExtrapolationError("sample_fields: empty field");
    if (!(x >= fp.x.front() && x <= fp.x.back()))
        throw ExtrapolationError("field evaluated at x = " + std::to_string(x) + " outside [" +
                                 std::to_string(fp.x.front()) + ", " + std::to_string(fp.x.back()) + "]");
    FieldSample s;
    s.b.assign(fp.dim, 0.0);
    if (n == 1) {
        s.a = fp.a[0];
        for (std::size_t c = 0; c < fp.dim; ++c) s.b[c] = fp.b[c];
        return s;
    }
    auto it = std::upper_bound(fp.x.begin(), fp.x.end(), x);
    std::size_t i1 = static_cast<std::size_t>(it - fp.x.begin());
    if (i1 >= n) i1 = n - 1;
    const std::size_t i0 = i1 - 1;
    const double w = (x - fp.x[i0]) / (fp.x[i1] - fp.x[i0]);
    s.a = (1.0 - w) * fp.a[i0] + w * fp.a[i1];
    for (std::size_t c = 0; c < fp.dim; ++c)
        s.b[c] = (1.0 - w) * fp.b[i0 * fp.dim + c] + w * fp.b[i1 * fp.dim + c];
    return s;
}

/// L[f](x, v) = b(x) - a(x) v.
inline std::vector<double> eval_L(const FieldPair& fp, double x, std::span<const double> v) {
    if (v.size() != fp.dim) throw DomainError("eval_L: velocity dimension does not match field");
    const FieldSample s = sample_fields(fp, x);
    std::vector<double> out(fp.dim);
    for (std::size_t c = 0; c < fp.dim; ++c) out[c] = s.b[c] - s.a * v[c];
    return out;
}

}  // namespace kcs
