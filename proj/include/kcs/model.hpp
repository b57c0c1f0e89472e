#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "kcs/error.hpp"

namespace kcs {

/// Largest spatial dimension supported by the particle solver.
inline constexpr std::size_t kMaxDim = 3;

/// Physical and numerical parameters shared by both solvers.
struct SimParams {
    std::size_t d = 1;
    double sigma = 0.0;
    double dt = 1e-3;
    double T = 1.0;
    std::size_t N = 1000;
    std::uint64_t seed = 1;
    double Lx = 8.0;
    double Lv = 4.0;
    std::size_t Nx = 128;
    std::size_t Nv = 128;
    double mass = 1.0;

    double dx() const { return 2.0 * Lx / static_cast<double>(Nx); }
    double dv() const { return 2.0 * Lv / static_cast<double>(Nv); }
    std::size_t steps() const { return static_cast<std::size_t>(std::llround(T / dt)); }

    /// Throws ValidationError naming the first violated constraint.
    void validate() const {
        if (!(sigma >= 0.0 && sigma <= 1.0))
            throw ValidationError("0 ≤ σ ≤ 1", "sigma = " + std::to_string(sigma));
        if (d < 1 || d > kMaxDim) throw ValidationError("1 ≤ d ≤ 3", "d = " + std::to_string(d));
        if (!(dt > 0.0)) throw ValidationError("dt > 0", "dt = " + std::to_string(dt));
        if (!(T >= 0.0)) throw ValidationError("T ≥ 0", "T = " + std::to_string(T));
        if (N < 1) throw ValidationError("N ≥ 1", "N = 0");
        if (Nx < 4) throw ValidationError("Nx ≥ 4", "Nx = " + std::to_string(Nx));
        if (Nv < 4) throw ValidationError("Nv ≥ 4", "Nv = " + std::to_string(Nv));
        if (!(Lx > 0.0)) throw ValidationError("Lx > 0", "Lx = " + std::to_string(Lx));
        if (!(Lv > 0.0)) throw ValidationError("Lv > 0", "Lv = " + std::to_string(Lv));
        if (!(mass > 0.0)) throw ValidationError("M > 0", "mass = " + std::to_string(mass));
    }
};

/// Exponent of the phase-space weight omega(x,v) = (1+|v|^2)(1+|x|^2+|v|^2)^alpha.
struct WeightSpec {
    double alpha = 4.0;

    WeightSpec() = default;
    explicit WeightSpec(double a) : alpha(a) {
        if (!(alpha > 3.0)) throw ValidationError("α > 3", "alpha = " + std::to_string(alpha));
    }

    double omega(double x2, double v2) const { return (1.0 + v2) * std::pow(1.0 + x2 + v2, alpha); }
    static double nu(double v2) { return 1.0 + v2; }
};

struct WeightValues {
    double omega;
    double nu;
};

inline WeightValues eval_weights(const WeightSpec& w, std::span<const double> x, std::span<const double> v) {
    double x2 = 0.0;
    double v2 = 0.0;
    for (double xi : x) x2 += xi * xi;
    for (double vi : v) v2 += vi * vi;
    return {w.omega(x2, v2), WeightSpec::nu(v2)};
}

}  // namespace kcs
