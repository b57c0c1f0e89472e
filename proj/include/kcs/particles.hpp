#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kcs/error.hpp"
#include "kcs/kernel.hpp"
#include "kcs/model.hpp"
#include "kcs/parallel.hpp"
#include "kcs/rng.hpp"

namespace kcs {

/// Equally weighted particles in d dimensions. Positions and velocities are stored
/// particle-major: component c of particle i lives at [i * d + c].
struct ParticleEnsemble {
    std::size_t d = 1;
    double mass = 1.0;  ///< total mass M; each particle carries M / N
    double t = 0.0;
    std::vector<double> x;
    std::vector<double> v;

    ParticleEnsemble() = default;
    ParticleEnsemble(std::size_t dim, std::size_t n, double total_mass)
        : d(dim), mass(total_mass), x(n * dim, 0.0), v(n * dim, 0.0) {
        if (dim < 1 || dim > kMaxDim) throw InvalidStateError("ParticleEnsemble: dimension must be 1..3");
    }

    std::size_t size() const { return d == 0 ? 0 : x.size() / d; }
    double weight() const { return size() == 0 ? 0.0 : mass / static_cast<double>(size()); }

    std::span<double> position(std::size_t i) { return {x.data() + i * d, d}; }
    std::span<const double> position(std::size_t i) const { return {x.data() + i * d, d}; }
    std::span<double> velocity(std::size_t i) { return {v.data() + i * d, d}; }
    std::span<const double> velocity(std::size_t i) const { return {v.data() + i * d, d}; }

    bool all_finite() const {
        auto finite = [](double s) { return std::isfinite(s); };
        return std::all_of(x.begin(), x.end(), finite) && std::all_of(v.begin(), v.end(), finite);
    }

    friend bool operator==(const ParticleEnsemble&, const ParticleEnsemble&) = default;
};

namespace detail {

inline constexpr std::size_t kForceLanes = 8;

// F_i = w * sum_j phi(|X_i - X_j|) (V_j - V_i) for i in [begin, end).
// Partial sums are kept per lane (j mod kForceLanes) and combined in a fixed order, so
// every F_i is bitwise independent of how rows are distributed over threads.
template <std::size_t D, class Phi>
void force_rows(const double* x, const double* v, std::size_t n, double w, Phi phi, std::size_t begin,
                std::size_t end, double* out) {
    for (std::size_t i = begin; i < end; ++i) {
        std::array<double, D> xi;
        std::array<double, D> vi;
        for (std::size_t c = 0; c < D; ++c) {
            xi[c] = x[i * D + c];
            vi[c] = v[i * D + c];
        }
        double acc[D][kForceLanes] = {};
        std::size_t j = 0;
        for (; j + kForceLanes <= n; j += kForceLanes) {
            for (std::size_t l = 0; l < kForceLanes; ++l) {
                const std::size_t idx = j + l;
                double r2 = 0.0;
                for (std::size_t c = 0; c < D; ++c) {
                    const double dx = x[idx * D + c] - xi[c];
                    r2 += dx * dx;
                }
                const double p = phi(r2);
                for (std::size_t c = 0; c < D; ++c) acc[c][l] += p * (v[idx * D + c] - vi[c]);
            }
        }
        for (std::size_t c = 0; c < D; ++c) {
            double tail = 0.0;
            for (std::size_t jj = j; jj < n; ++jj) {
                double r2 = 0.0;
                for (std::size_t cc = 0; cc < D; ++cc) {
                    const double dx = x[jj * D + cc] - xi[cc];
                    r2 += dx * dx;
                }
                tail += phi(r2) * (v[jj * D + c] - vi[c]);
            }
            double s = 0.0;
            for (std::size_t l = 0; l < kForceLanes; ++l) s += acc[c][l];
            out[i * D + c] = w * (s + tail);
        }
    }
}

template <std::size_t D>
void compute_forces_dim(const ParticleEnsemble& e, const KernelSpec& k, std::span<double> out, std::size_t begin,
                        std::size_t end) {
    const std::size_t n = e.size();
    const double w = e.weight();
    k.visit_squared([&](auto phi) {
        force_rows<D>(e.x.data(), e.v.data(), n, w, phi, begin, end, out.data());
        return 0;
    });
}

inline void compute_force_range(const ParticleEnsemble& e, const KernelSpec& k, std::span<double> out,
                                std::size_t begin, std::size_t end) {
    switch (e.d) {
        case 1: compute_forces_dim<1>(e, k, out, begin, end); break;
        case 2: compute_forces_dim<2>(e, k, out, begin, end); break;
        case 3: compute_forces_dim<3>(e, k, out, begin, end); break;
        default: throw InvalidStateError("unsupported dimension");
    }
}

}  // namespace detail

/// Alignment forces for every particle, written into out (size N * d).
inline void compute_forces(const ParticleEnsemble& e, const KernelSpec& k, std::span<double> out) {
    if (out.size() != e.x.size()) throw InvalidStateError("compute_forces: output size mismatch");
    parallel_for(e.size(), [&](std::size_t begin, std::size_t end) { detail::compute_force_range(e, k, out, begin, end); });
}

inline std::vector<double> compute_forces(const ParticleEnsemble& e, const KernelSpec& k) {
    std::vector<double> out(e.x.size());
    compute_forces(e, k, out);
    return out;
}

/// Alignment force on particle i; bitwise equal to the i-th row of compute_forces.
inline std::vector<double> pairwise_force(const ParticleEnsemble& e, const KernelSpec& k, std::size_t i) {
    if (i >= e.size()) throw DomainError("pairwise_force: particle index out of range");
    std::vector<double> all(e.x.size(), 0.0);
    detail::compute_force_range(e, k, all, i, i + 1);
    return {all.begin() + static_cast<std::ptrdiff_t>(i * e.d), all.begin() + static_cast<std::ptrdiff_t>((i + 1) * e.d)};
}

namespace detail {
inline void require_finite(const ParticleEnsemble& e) {
    if (!e.all_finite()) throw BlowUpError(e.t, "non-finite particle state");
}
}  // namespace detail

/// One classical RK4 step of dX/dt = V, dV/dt = F(X, V). forces_at_e, when non-empty,
/// must hold compute_forces(e) and is used as the first stage. dt may be negative
/// (backward integration).
inline ParticleEnsemble step_deterministic(const ParticleEnsemble& e, const KernelSpec& k, double dt,
                                           std::span<const double> forces_at_e = {}) {
    if (!(std::isfinite(dt) && dt != 0.0)) throw StepSizeError("step_deterministic: dt must be finite and nonzero");
    const std::size_t len = e.x.size();
    std::vector<double> k1v;
    if (forces_at_e.empty()) {
        k1v = compute_forces(e, k);
        forces_at_e = k1v;
    } else if (forces_at_e.size() != len) {
        throw InvalidStateError("step_deterministic: cached forces have the wrong size");
    }

    ParticleEnsemble stage = e;
    const double half = 0.5 * dt;
    for (std::size_t s = 0; s < len; ++s) {
        stage.x[s] = e.x[s] + half * e.v[s];
        stage.v[s] = e.v[s] + half * forces_at_e[s];
    }
    const std::vector<double> k2x = stage.v;
    const std::vector<double> k2v = compute_forces(stage, k);

    for (std::size_t s = 0; s < len; ++s) {
        stage.x[s] = e.x[s] + half * k2x[s];
        stage.v[s] = e.v[s] + half * k2v[s];
    }
    const std::vector<double> k3x = stage.v;
    const std::vector<double> k3v = compute_forces(stage, k);

    for (std::size_t s = 0; s < len; ++s) {
        stage.x[s] = e.x[s] + dt * k3x[s];
        stage.v[s] = e.v[s] + dt * k3v[s];
    }
    const std::vector<double> k4x = stage.v;
    const std::vector<double> k4v = compute_forces(stage, k);

    ParticleEnsemble next = e;
    const double sixth = dt / 6.0;
    for (std::size_t s = 0; s < len; ++s) {
        next.x[s] = e.x[s] + sixth * (e.v[s] + 2.0 * k2x[s] + 2.0 * k3x[s] + k4x[s]);
        next.v[s] = e.v[s] + sixth * (forces_at_e[s] + 2.0 * k2v[s] + 2.0 * k3v[s] + k4v[s]);
    }
    next.t = e.t + dt;
    detail::require_finite(next);
    return next;
}

/// Gaussian increment component c of particle i at the given step.
inline double noise_component(const CounterRng& rng, std::uint64_t step, std::size_t i, std::size_t c) {
    return rng.normals(step, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(c / 2))[c % 2];
}

/// Euler-Maruyama step: V <- V + F dt + sqrt(2 sigma dt) xi, then X <- X + V dt with the
/// updated velocity. xi is addressed by (seed, step, particle), so results do not depend
/// on the thread count. forces_at_e follows the same convention as step_deterministic;
/// an alignment-free run passes a zero vector.
inline ParticleEnsemble step_stochastic(const ParticleEnsemble& e, const KernelSpec& k, double dt, double sigma,
                                        const CounterRng& rng, std::uint64_t step,
                                        std::span<const double> forces_at_e = {}) {
    if (!(dt > 0.0)) throw StepSizeError("step_stochastic: dt must be positive");
    if (!(sigma >= 0.0 && sigma <= 1.0)) throw DomainError("step_stochastic: sigma outside [0, 1]");
    std::vector<double> own;
    if (forces_at_e.empty()) {
        own = compute_forces(e, k);
        forces_at_e = own;
    }
    ParticleEnsemble next = e;
    const double amplitude = std::sqrt(2.0 * sigma * dt);
    const std::size_t d = e.d;
    parallel_for(e.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t c = 0; c < d; ++c) {
                const std::size_t s = i * d + c;
                double vn = e.v[s] + forces_at_e[s] * dt;
                if (amplitude > 0.0) vn += amplitude * noise_component(rng, step, i, c);
                next.v[s] = vn;
                next.x[s] = e.x[s] + vn * dt;
            }
        }
    });
    next.t = e.t + dt;
    detail::require_finite(next);
    return next;
}

struct EmpiricalMoments {
    double mass = 0.0;
    std::vector<double> momentum;
    double energy = 0.0;
    double support_radius = 0.0;
};

inline EmpiricalMoments empirical_moments(const ParticleEnsemble& e) {
    EmpiricalMoments m;
    m.mass = e.mass;
    m.momentum.assign(e.d, 0.0);
    const double w = e.weight();
    double r2max = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        double v2 = 0.0;
        for (std::size_t c = 0; c < e.d; ++c) {
            const double vc = e.v[i * e.d + c];
            m.momentum[c] += vc;
            v2 += vc * vc;
        }
        m.energy += v2;
        r2max = std::max(r2max, v2);
    }
    for (double& p : m.momentum) p *= w;
    m.energy *= w;
    m.support_radius = std::sqrt(r2max);
    return m;
}

/// max_{i,j} |V_i - V_j|.
inline double velocity_diameter(const ParticleEnsemble& e) {
    const std::size_t n = e.size();
    if (n < 2) return 0.0;
    if (e.d == 1) {
        const auto [lo, hi] = std::minmax_element(e.v.begin(), e.v.end());
        return *hi - *lo;
    }
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double r2 = 0.0;
            for (std::size_t c = 0; c < e.d; ++c) {
                const double dv = e.v[i * e.d + c] - e.v[j * e.d + c];
                r2 += dv * dv;
            }
            best = std::max(best, r2);
        }
    return std::sqrt(best);
}

/// sum_{i,j} w_i w_j phi(|X_i - X_j|) |V_i - V_j|^2 by direct double summation.
inline double particle_dissipation_direct(const ParticleEnsemble& e, const KernelSpec& k) {
    const std::size_t n = e.size();
    const double w = e.weight();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double r2 = 0.0;
            double v2 = 0.0;
            for (std::size_t c = 0; c < e.d; ++c) {
                const double dx = e.x[i * e.d + c] - e.x[j * e.d + c];
                const double dv = e.v[i * e.d + c] - e.v[j * e.d + c];
                r2 += dx * dx;
                v2 += dv * dv;
            }
            row += k(std::sqrt(r2)) * v2;
        }
        total += row;
    }
    return w * w * total;
}

/// The same double sum recovered from forces: D = -2 sum_i w (V_i - u) . F_i, where u is
/// the mean velocity (sum_i w F_i vanishes, so subtracting u only removes cancellation).
inline double particle_dissipation_from_forces(const ParticleEnsemble& e, std::span<const double> forces) {
    const std::size_t n = e.size();
    if (n == 0) return 0.0;
    std::array<double, kMaxDim> mean{};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < e.d; ++c) mean[c] += e.v[i * e.d + c];
    for (std::size_t c = 0; c < e.d; ++c) mean[c] /= static_cast<double>(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < e.d; ++c) s += (e.v[i * e.d + c] - mean[c]) * forces[i * e.d + c];
    return std::max(0.0, -2.0 * e.weight() * s);
}

}  // namespace kcs
