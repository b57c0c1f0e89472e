#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <variant>

#include "kcs/error.hpp"

namespace kcs {

/// phi(r) = c for all r.
struct ConstantKernel {
    double value = 1.0;
};

/// phi(r) = (1 + r^2)^(-beta/2), the classical Cucker-Smale communication weight.
struct AlgebraicDecayKernel {
    double beta = 1.0;
};

using KernelVariant = std::variant<ConstantKernel, AlgebraicDecayKernel>;

struct KernelBoundsReport {
    double max_phi = 0.0;
    double max_dphi = 0.0;
    double max_ddphi = 0.0;
};

/// Tolerance on the constraint max{|phi|, |phi'|, |phi''|} <= 1.
inline constexpr double kKernelBoundTolerance = 1e-12;

namespace detail {

inline double kernel_value(const KernelVariant& k, double r) {
    if (const auto* c = std::get_if<ConstantKernel>(&k)) return c->value;
    const double beta = std::get<AlgebraicDecayKernel>(k).beta;
    return std::pow(1.0 + r * r, -0.5 * beta);
}

inline double kernel_first_derivative(const KernelVariant& k, double r) {
    if (std::holds_alternative<ConstantKernel>(k)) return 0.0;
    const double beta = std::get<AlgebraicDecayKernel>(k).beta;
    return -beta * r * std::pow(1.0 + r * r, -0.5 * beta - 1.0);
}

inline double kernel_second_derivative(const KernelVariant& k, double r) {
    if (std::holds_alternative<ConstantKernel>(k)) return 0.0;
    const double beta = std::get<AlgebraicDecayKernel>(k).beta;
    const double s = 1.0 + r * r;
    return -beta * std::pow(s, -0.5 * beta - 2.0) * (1.0 - (beta + 1.0) * r * r);
}

// 1/sqrt(y) for y >= 1: single-precision seed refined by two Newton steps. Within a
// couple of ulp of the correctly rounded value and vectorizes without libm calls.
inline double inv_sqrt(double y) {
    const float yf = static_cast<float>(y);
    double r = static_cast<double>(1.0f / std::sqrt(yf));
    r = r * (1.5 - 0.5 * y * r * r);
    r = r * (1.5 - 0.5 * y * r * r);
    return r;
}

// Kernel evaluators taking the squared distance; these feed the O(N^2) inner loops.
struct ConstantOfR2 {
    double value;
    double operator()(double /*r2*/) const { return value; }
};
struct InvSqrtOfR2 {
    double operator()(double r2) const { return inv_sqrt(1.0 + r2); }
};
struct PowerOfR2 {
    double exponent;
    double operator()(double r2) const { return std::pow(1.0 + r2, exponent); }
};

}  // namespace detail

/// Samples |phi|, |phi'|, |phi''| on a uniform grid of [0, r_max] using the analytic
/// derivatives of each variant.
inline KernelBoundsReport validate_kernel_bounds(const KernelVariant& k, double r_max, std::size_t samples) {
    if (!(r_max > 0.0)) throw DomainError("validate_kernel_bounds: r_max must be positive");
    if (samples < 100) throw DomainError("validate_kernel_bounds: at least 100 samples required");
    KernelBoundsReport report;
    for (std::size_t i = 0; i < samples; ++i) {
        const double r = r_max * static_cast<double>(i) / static_cast<double>(samples - 1);
        report.max_phi = std::max(report.max_phi, std::abs(detail::kernel_value(k, r)));
        report.max_dphi = std::max(report.max_dphi, std::abs(detail::kernel_first_derivative(k, r)));
        report.max_ddphi = std::max(report.max_ddphi, std::abs(detail::kernel_second_derivative(k, r)));
    }
    return report;
}

/// A validated interaction kernel. Immutable; construction rejects kernels that are not
/// positive, or whose value or first two derivatives exceed 1 in magnitude.
class KernelSpec {
public:
    static constexpr double kValidationRadius = 20.0;
    static constexpr std::size_t kValidationSamples = 20001;

    KernelSpec() : KernelSpec(AlgebraicDecayKernel{1.0}) {}

    explicit KernelSpec(KernelVariant k) : kernel_(k) {
        if (const auto* c = std::get_if<ConstantKernel>(&kernel_)) {
            if (!(c->value > 0.0 && c->value <= 1.0))
                throw DomainError("constant kernel value must lie in (0, 1]");
        } else {
            const double beta = std::get<AlgebraicDecayKernel>(kernel_).beta;
            if (!(beta >= 0.0) || !std::isfinite(beta))
                throw DomainError("algebraic decay exponent beta must be >= 0");
        }
        bounds_ = validate_kernel_bounds(kernel_, kValidationRadius, kValidationSamples);
        const double worst = std::max({bounds_.max_phi, bounds_.max_dphi, bounds_.max_ddphi});
        if (worst > 1.0 + kKernelBoundTolerance)
            throw DomainError("kernel violates max{|phi|, |phi'|, |phi''|} <= 1 (sampled max " +
                              std::to_string(worst) + ")");
    }

    static KernelSpec constant(double c) { return KernelSpec(ConstantKernel{c}); }
    static KernelSpec algebraic_decay(double beta) { return KernelSpec(AlgebraicDecayKernel{beta}); }

    const KernelVariant& variant() const noexcept { return kernel_; }
    const KernelBoundsReport& bounds() const noexcept { return bounds_; }

    double operator()(double r) const {
        if (r < 0.0 || std::isnan(r)) throw DomainError("kernel evaluated at negative distance");
        return detail::kernel_value(kernel_, r);
    }
    double derivative(double r) const { return detail::kernel_first_derivative(kernel_, r); }
    double second_derivative(double r) const { return detail::kernel_second_derivative(kernel_, r); }

    /// sup phi = phi(0) for a non-increasing kernel.
    double sup() const { return detail::kernel_value(kernel_, 0.0); }

    /// Invokes fn with a callable phi(r^2) specialized for this kernel.
    template <class Fn>
    decltype(auto) visit_squared(Fn&& fn) const {
        if (const auto* c = std::get_if<ConstantKernel>(&kernel_)) return fn(detail::ConstantOfR2{c->value});
        const double beta = std::get<AlgebraicDecayKernel>(kernel_).beta;
        if (beta == 0.0) return fn(detail::ConstantOfR2{1.0});
        if (beta == 1.0) return fn(detail::InvSqrtOfR2{});
        return fn(detail::PowerOfR2{-0.5 * beta});
    }

    std::string describe() const {
        if (const auto* c = std::get_if<ConstantKernel>(&kernel_)) return "constant(" + std::to_string(c->value) + ")";
        return "algebraic_decay(beta=" + std::to_string(std::get<AlgebraicDecayKernel>(kernel_).beta) + ")";
    }

private:
    KernelVariant kernel_;
    KernelBoundsReport bounds_;
};

inline double eval_kernel(const KernelSpec& k, double r) { return k(r); }

}  // namespace kcs
