#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "kcs/error.hpp"
#include "kcs/fields.hpp"

namespace kcs {

/// Anything that returns the alignment fields (a, b) at time t and position x.
template <class P>
concept FieldProvider = requires(const P& p, double t, std::span<const double> x) {
    { p(t, x) } -> std::convertible_to<FieldSample>;
};

/// a(t, x) = a0, b(t, x) = b0.
struct ConstantFieldProvider {
    double a = 0.0;
    std::vector<double> b;

    FieldSample operator()(double /*t*/, std::span<const double> /*x*/) const { return {a, b}; }
};

/// Field snapshots of a 1-D run, interpolated linearly in time and space.
class FieldHistory {
public:
    void push(double t, FieldPair fields) {
        if (!times_.empty() && !(t > times_.back())) throw InvalidStateError("FieldHistory: times must increase");
        times_.push_back(t);
        fields_.push_back(std::move(fields));
    }

    std::size_t size() const { return times_.size(); }
    double start() const { return times_.front(); }
    double end() const { return times_.back(); }

    FieldSample operator()(double t, std::span<const double> x) const {
        if (times_.empty()) throw ExtrapolationError("FieldHistory: no samples");
        constexpr double kSlack = 1e-12;
        if (t < times_.front() - kSlack || t > times_.back() + kSlack)
            throw ExtrapolationError("FieldHistory: time " + std::to_string(t) + " outside recorded range");
        const double xs = x[0];
        if (times_.size() == 1) return sample_fields(fields_[0], xs);
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t i1 = std::clamp<std::size_t>(static_cast<std::size_t>(it - times_.begin()), 1, times_.size() - 1);
        const std::size_t i0 = i1 - 1;
        const double w = std::clamp((t - times_[i0]) / (times_[i1] - times_[i0]), 0.0, 1.0);
        FieldSample s0 = sample_fields(fields_[i0], xs);
        const FieldSample s1 = sample_fields(fields_[i1], xs);
        s0.a = (1.0 - w) * s0.a + w * s1.a;
        for (std::size_t c = 0; c < s0.b.size(); ++c) s0.b[c] = (1.0 - w) * s0.b[c] + w * s1.b[c];
        return s0;
    }

private:
    std::vector<double> times_;
    std::vector<FieldPair> fields_;
};

/// Endpoint of a characteristic, with logJ = d * int_0^t a(s, X(s)) ds.
struct CharacteristicState {
    std::vector<double> X;
    std::vector<double> V;
    double logJ = 0.0;
    double t = 0.0;
};

struct CharacteristicSolution {
    CharacteristicState state;        ///< RK4 integration of (X, V, logJ)
    std::vector<double> V_closed_form; ///< V0 e^{-A} + e^{-A} int_0^t b e^{A(s)} ds from the same quadratures
};

/// Integrates dX/dt = V, dV/dt = b(t,X) - a(t,X) V with RK4 on [0, T] using
/// round(T/dt) equal steps. The cumulative integrals A = int a and B = int b e^{A} are
/// carried as extra ODE components, from which the explicit velocity formula is evaluated.
template <FieldProvider Provider>
CharacteristicSolution solve_characteristic(std::span<const double> x0, std::span<const double> v0,
                                            const Provider& fields, double T, double dt, double t0 = 0.0) {
    const std::size_t d = x0.size();
    if (v0.size() != d || d == 0) throw DomainError("solve_characteristic: x0 and v0 must have equal, positive size");
    if (!(dt > 0.0) || !(T >= 0.0)) throw StepSizeError("solve_characteristic: need dt > 0 and T >= 0");
    const std::size_t steps = T == 0.0 ? 0 : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(T / dt)));
    const double h = steps == 0 ? 0.0 : T / static_cast<double>(steps);

    // Packed state y = (X[d], V[d], A, B[d]).
    const std::size_t len = 3 * d + 1;
    std::vector<double> y(len, 0.0);
    std::copy(x0.begin(), x0.end(), y.begin());
    std::copy(v0.begin(), v0.end(), y.begin() + static_cast<std::ptrdiff_t>(d));

    auto rhs = [&](double t, const std::vector<double>& s, std::vector<double>& out) {
        const FieldSample f = fields(t, std::span<const double>(s.data(), d));
        if (f.b.size() != d) throw DomainError("solve_characteristic: field dimension does not match");
        const double growth = std::exp(s[2 * d]);
        for (std::size_t c = 0; c < d; ++c) {
            out[c] = s[d + c];
            out[d + c] = f.b[c] - f.a * s[d + c];
            out[2 * d + 1 + c] = f.b[c] * growth;
        }
        out[2 * d] = f.a;
    };

    std::vector<double> k1(len), k2(len), k3(len), k4(len), tmp(len);
    double t = t0;
    for (std::size_t n = 0; n < steps; ++n) {
        rhs(t, y, k1);
        for (std::size_t s = 0; s < len; ++s) tmp[s] = y[s] + 0.5 * h * k1[s];
        rhs(t + 0.5 * h, tmp, k2);
        for (std::size_t s = 0; s < len; ++s) tmp[s] = y[s] + 0.5 * h * k2[s];
        rhs(t + 0.5 * h, tmp, k3);
        for (std::size_t s = 0; s < len; ++s) tmp[s] = y[s] + h * k3[s];
        rhs(t + h, tmp, k4);
        for (std::size_t s = 0; s < len; ++s) y[s] += h / 6.0 * (k1[s] + 2.0 * k2[s] + 2.0 * k3[s] + k4[s]);
        t = t0 + static_cast<double>(n + 1) * h;
    }

    CharacteristicSolution sol;
    sol.state.X.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(d));
    sol.state.V.assign(y.begin() + static_cast<std::ptrdiff_t>(d), y.begin() + static_cast<std::ptrdiff_t>(2 * d));
    const double A = y[2 * d];
    sol.state.logJ = static_cast<double>(d) * A;
    sol.state.t = t;
    sol.V_closed_form.resize(d);
    const double decay = std::exp(-A);
    for (std::size_t c = 0; c < d; ++c) sol.V_closed_form[c] = decay * (v0[c] + y[2 * d + 1 + c]);
    return sol;
}

/// f(t, X(t), V(t)) = f0(x0, v0) exp(logJ).
inline double density_along_characteristic(double f0_value, const CharacteristicState& cs) {
    if (!(f0_value >= 0.0)) throw DomainError("density_along_characteristic: negative initial density");
    return f0_value * std::exp(cs.logJ);
}

}  // namespace kcs
