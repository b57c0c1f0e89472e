#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace kcs {

namespace detail {

// FFTW's planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwPlanDeleter {
    void operator()(fftw_plan_s* p) const {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};
using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDeleter>;

}  // namespace detail

/// Symmetric Toeplitz product out_i = sum_j taps[|i-j|] * in_j evaluated through a
/// zero-padded circulant embedding of length 2n and FFTW real transforms.
class ToeplitzConvolver {
public:
    explicit ToeplitzConvolver(std::span<const double> taps)
        : n_(taps.size()), padded_(2 * taps.size()), spectrum_(padded_ / 2 + 1), work_real_(padded_),
          work_complex_(padded_ / 2 + 1) {
        std::lock_guard lock(detail::fftw_planner_mutex());
        auto* in = work_real_.data();
        auto* out = reinterpret_cast<fftw_complex*>(work_complex_.data());
        forward_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(padded_), in, out, FFTW_ESTIMATE));
        backward_.reset(fftw_plan_dft_c2r_1d(static_cast<int>(padded_), out, in, FFTW_ESTIMATE));

        std::fill(work_real_.begin(), work_real_.end(), 0.0);
        for (std::size_t m = 0; m < n_; ++m) work_real_[m] = taps[m];
        for (std::size_t m = 1; m < n_; ++m) work_real_[padded_ - m] = taps[m];
        fftw_execute(forward_.get());
        spectrum_ = work_complex_;
    }

    std::size_t size() const { return n_; }

    /// Not thread-safe: reuses internal buffers.
    std::vector<double> apply(std::span<const double> input) {
        std::fill(work_real_.begin(), work_real_.end(), 0.0);
        std::copy(input.begin(), input.end(), work_real_.begin());
        fftw_execute(forward_.get());
        for (std::size_t i = 0; i < work_complex_.size(); ++i) work_complex_[i] *= spectrum_[i];
        fftw_execute(backward_.get());
        std::vector<double> out(n_);
        const double scale = 1.0 / static_cast<double>(padded_);
        for (std::size_t i = 0; i < n_; ++i) out[i] = work_real_[i] * scale;
        return out;
    }

private:
    std::size_t n_;
    std::size_t padded_;
    std::vector<std::complex<double>> spectrum_;
    std::vector<double> work_real_;
    std::vector<std::complex<double>> work_complex_;
    detail::FftwPlan forward_;
    detail::FftwPlan backward_;
};

}  // namespace kcs
