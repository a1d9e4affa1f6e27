#pragma once

// Thin RAII wrapper over FFTW for in-place multidimensional complex DFTs.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include "errors.hpp"

namespace otfs {

namespace detail {
// FFTW's planner is not thread-safe; execution on distinct arrays is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

enum class FftDirection { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

/// Unnormalized DFT over a row-major grid with the given extents.
/// forward:  X_k = sum_l x_l e^{-2 pi i k.l / n}
/// backward: x_l = sum_k X_k e^{+2 pi i k.l / n}
class FftPlan {
public:
    FftPlan(std::vector<int> extents, FftDirection dir) : extents_(std::move(extents)) {
        size_ = 1;
        for (int e : extents_) {
            if (e < 1) throw DomainError("fft extent must be positive");
            size_ *= static_cast<std::size_t>(e);
        }
        std::vector<std::complex<double>> probe(size_);
        auto* p = reinterpret_cast<fftw_complex*>(probe.data());
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan_ = fftw_plan_dft(static_cast<int>(extents_.size()), extents_.data(), p, p,
                              static_cast<int>(dir), FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!plan_) throw Error("fftw: planning failed");
    }
    ~FftPlan() {
        if (plan_) {
            std::lock_guard lock(detail::fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    FftPlan(FftPlan&& o) noexcept
        : extents_(std::move(o.extents_)), size_(o.size_), plan_(o.plan_) {
        o.plan_ = nullptr;
    }

    std::size_t size() const { return size_; }
    const std::vector<int>& extents() const { return extents_; }

    void execute(std::span<std::complex<double>> data) const {
        if (data.size() != size_) throw PlanMismatch("fft: buffer size does not match plan");
        auto* p = reinterpret_cast<fftw_complex*>(data.data());
        fftw_execute_dft(plan_, p, p);
    }

private:
    std::vector<int> extents_;
    std::size_t size_ = 0;
    fftw_plan plan_ = nullptr;
};

}  // namespace otfs
