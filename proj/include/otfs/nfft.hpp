#pragma once

// Nonequispaced discrete Fourier transform on the torus [-1/2, 1/2)^D.
//
//   trafo:   f_j = sum_{k in I_N} b_k e^{+2 pi i k.x_j}
//   adjoint: c_k = sum_j v_j e^{-2 pi i k.x_j}
//
// with I_N = {-N/2, ..., N/2-1}^D. Coefficients are stored row-major over
// the axes, axis index k + N/2. The fast versions use a Kaiser-Bessel window
// of half-width m grid cells on an oversampled grid of n = sigma*N points per
// axis: deconvolve, FFT, then gather (trafo) or spread, FFT, deconvolve
// (adjoint). ndft_direct / ndft_adjoint_direct are the exact O(N^D M) sums.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"
#include "memory.hpp"

namespace otfs {

using Complex = std::complex<double>;

namespace detail {

inline std::size_t ipow(std::size_t base, int e) {
    std::size_t r = 1;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

inline void check_nodes(int dim, std::span<const double> nodes) {
    if (dim < 1 || dim > 3) throw DimensionError("nfft: dimension must be 1, 2 or 3");
    if (nodes.size() % static_cast<std::size_t>(dim) != 0)
        throw PlanMismatch("nfft: node array length is not a multiple of the dimension");
    for (double x : nodes)
        if (!(x >= -0.5 && x < 0.5)) throw DomainError("nfft: node outside [-1/2, 1/2)");
}

}  // namespace detail

/// Exact evaluation of the trigonometric polynomial at the nodes.
inline std::vector<Complex> ndft_direct(int dim, int bandwidth, std::span<const Complex> coeffs,
                                        std::span<const double> nodes) {
    detail::check_nodes(dim, nodes);
    const auto N = static_cast<std::size_t>(bandwidth);
    if (coeffs.size() != detail::ipow(N, dim)) throw PlanMismatch("ndft: coefficient count");
    const std::size_t M = nodes.size() / static_cast<std::size_t>(dim);
    const double half = static_cast<double>(N / 2);
    std::vector<Complex> out(M);
    for (std::size_t j = 0; j < M; ++j) {
        const double* x = nodes.data() + j * static_cast<std::size_t>(dim);
        Complex acc = 0.0;
        for (std::size_t idx = 0; idx < coeffs.size(); ++idx) {
            double phase = 0.0;
            std::size_t rest = idx;
            for (int d = dim - 1; d >= 0; --d) {
                const double k = static_cast<double>(rest % N) - half;
                rest /= N;
                phase += k * x[d];
            }
            acc += coeffs[idx] * std::polar(1.0, 2.0 * std::numbers::pi * phase);
        }
        out[j] = acc;
    }
    return out;
}

/// Exact adjoint sums c_k = sum_j v_j e^{-2 pi i k.x_j}.
inline std::vector<Complex> ndft_adjoint_direct(int dim, int bandwidth, std::span<const Complex> values,
                                                std::span<const double> nodes) {
    detail::check_nodes(dim, nodes);
    const auto N = static_cast<std::size_t>(bandwidth);
    const std::size_t M = nodes.size() / static_cast<std::size_t>(dim);
    if (values.size() != M) throw PlanMismatch("ndft adjoint: value count");
    const double half = static_cast<double>(N / 2);
    std::vector<Complex> out(detail::ipow(N, dim));
    for (std::size_t idx = 0; idx < out.size(); ++idx) {
        std::array<double, 3> k{};
        std::size_t rest = idx;
        for (int d = dim - 1; d >= 0; --d) {
            k[static_cast<std::size_t>(d)] = static_cast<double>(rest % N) - half;
            rest /= N;
        }
        Complex acc = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
            double phase = 0.0;
            for (int d = 0; d < dim; ++d) phase += k[static_cast<std::size_t>(d)] * nodes[j * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)];
            acc += values[j] * std::polar(1.0, -2.0 * std::numbers::pi * phase);
        }
        out[idx] = acc;
    }
    return out;
}

struct NfftOptions {
    double oversampling = 2.0;
    int cutoff = 8;
};

/// Kaiser-Bessel window in grid units, t in [-m, m]:
///   phi(t) = sinh(b sqrt(m^2 - t^2)) / (pi sqrt(m^2 - t^2)),  b = pi (2 - 1/sigma),
/// and n times its Fourier transform at frequency k:
///   I_0(m sqrt(b^2 - (2 pi k / n)^2)).
struct KaiserBessel {
    int m;
    double b;
    int n;

    KaiserBessel(int cutoff, double sigma, int grid)
        : m(cutoff), b(std::numbers::pi * (2.0 - 1.0 / sigma)), n(grid) {}

    double window(double t) const {
        const double s = static_cast<double>(m) * m - t * t;
        if (s < 0.0) return 0.0;
        if (s == 0.0) return b / std::numbers::pi;
        const double r = std::sqrt(s);
        return std::sinh(b * r) / (std::numbers::pi * r);
    }

    double scaled_transform(double k) const {
        const double w = 2.0 * std::numbers::pi * k / n;
        return std::cyl_bessel_i(0.0, m * std::sqrt(b * b - w * w));
    }
};

class NfftPlan {
public:
    NfftPlan(int dim, int bandwidth, std::span<const double> nodes, NfftOptions opts = {})
        : dim_(dim), N_(bandwidth), m_(opts.cutoff) {
        detail::check_nodes(dim, nodes);
        if (bandwidth < 2 || bandwidth % 2 != 0) throw DomainError("nfft: bandwidth must be even and >= 2");
        if (!(opts.oversampling >= 1.0)) throw DomainError("nfft: oversampling must be >= 1");
        n_ = static_cast<int>(std::lround(opts.oversampling * bandwidth));
        if (n_ % 2 != 0) throw DomainError("nfft: oversampled grid length must be even");
        if (m_ < 1 || 2 * m_ + 2 > n_) throw DomainError("nfft: cutoff must satisfy 1 <= m and 2m+2 <= sigma*N");

        nodes_count_ = nodes.size() / static_cast<std::size_t>(dim);
        width_ = 2 * static_cast<std::size_t>(m_) + 1;
        const KaiserBessel kb(m_, static_cast<double>(n_) / bandwidth, n_);

        inv_phihat_.resize(static_cast<std::size_t>(N_));
        for (int k = -N_ / 2; k < N_ / 2; ++k)
            inv_phihat_[static_cast<std::size_t>(k + N_ / 2)] = 1.0 / kb.scaled_transform(k);

        start_.resize(nodes_count_ * static_cast<std::size_t>(dim_));
        psi_.resize(nodes_count_ * static_cast<std::size_t>(dim_) * width_);
        for (std::size_t j = 0; j < nodes_count_; ++j) {
            for (int d = 0; d < dim_; ++d) {
                const std::size_t jd = j * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(d);
                const double y = nodes[jd] * n_;
                const long first = static_cast<long>(std::ceil(y - m_));
                long wrapped = first % n_;
                if (wrapped < 0) wrapped += n_;
                start_[jd] = static_cast<int>(wrapped);
                for (std::size_t a = 0; a < width_; ++a)
                    psi_[jd * width_ + a] = kb.window(y - static_cast<double>(first + static_cast<long>(a)));
            }
        }

        std::vector<int> ext(static_cast<std::size_t>(dim_), n_);
        forward_ = std::make_unique<FftPlan>(ext, FftDirection::forward);
        backward_ = std::make_unique<FftPlan>(ext, FftDirection::backward);
    }

    int dim() const { return dim_; }
    int bandwidth() const { return N_; }
    int grid_size() const { return n_; }
    int cutoff() const { return m_; }
    std::size_t node_count() const { return nodes_count_; }
    std::size_t coeff_count() const { return detail::ipow(static_cast<std::size_t>(N_), dim_); }

    /// f_j = sum_k b_k e^{2 pi i k.x_j}.
    std::vector<Complex> trafo(std::span<const Complex> coeffs) const {
        std::vector<Complex> out(nodes_count_);
        trafo(coeffs, out);
        return out;
    }

    void trafo(std::span<const Complex> coeffs, std::span<Complex> out) const {
        if (coeffs.size() != coeff_count()) throw PlanMismatch("nfft trafo: coefficient count");
        if (out.size() != nodes_count_) throw PlanMismatch("nfft trafo: output size");
        tracked_vector<Complex> grid(grid_elements(), Complex(0.0));
        for_each_coefficient([&](std::size_t cidx, std::size_t gidx, double deconv) {
            grid[gidx] = coeffs[cidx] * deconv;
        });
        backward_->execute(grid);

        const Axes ax = axes();
        for (std::size_t j = 0; j < nodes_count_; ++j) {
            const Window w = window_of(j);
            Complex acc = 0.0;
            std::size_t i0 = w.start[0];
            for (std::size_t a = 0; a < ax.width[0]; ++a, i0 = wrap(i0 + 1)) {
                Complex acc1 = 0.0;
                std::size_t i1 = w.start[1];
                for (std::size_t b = 0; b < ax.width[1]; ++b, i1 = wrap(i1 + 1)) {
                    Complex acc2 = 0.0;
                    std::size_t i2 = w.start[2];
                    const std::size_t row = (i0 * ax.ext[1] + i1) * ax.ext[2];
                    for (std::size_t c = 0; c < ax.width[2]; ++c, i2 = wrap(i2 + 1))
                        acc2 += grid[row + i2] * w.psi[2][c];
                    acc1 += acc2 * w.psi[1][b];
                }
                acc += acc1 * w.psi[0][a];
            }
            out[j] = acc;
        }
    }

    /// c_k = sum_j v_j e^{-2 pi i k.x_j}.
    std::vector<Complex> adjoint(std::span<const Complex> values) const {
        std::vector<Complex> out(coeff_count());
        spread_and_transform(out, [&](std::size_t j) { return values[j]; }, values.size());
        return out;
    }

    /// Adjoint for real node values.
    void adjoint(std::span<const double> values, std::span<Complex> out) const {
        spread_and_transform(out, [&](std::size_t j) { return Complex(values[j], 0.0); }, values.size());
    }

private:
    struct Axes {
        std::array<std::size_t, 3> ext;
        std::array<std::size_t, 3> width;
    };
    struct Window {
        std::array<std::size_t, 3> start;
        std::array<const double*, 3> psi;
    };

    std::size_t grid_elements() const { return detail::ipow(static_cast<std::size_t>(n_), dim_); }

    std::size_t wrap(std::size_t i) const { return i == static_cast<std::size_t>(n_) ? 0 : i; }

    // Unused trailing axes have extent 1 and a single unit weight.
    Axes axes() const {
        Axes ax{};
        for (std::size_t d = 0; d < 3; ++d) {
            const bool used = d < static_cast<std::size_t>(dim_);
            ax.ext[d] = used ? static_cast<std::size_t>(n_) : 1;
            ax.width[d] = used ? width_ : 1;
        }
        return ax;
    }

    Window window_of(std::size_t j) const {
        static const double one = 1.0;
        Window w{};
        for (std::size_t d = 0; d < 3; ++d) {
            if (d < static_cast<std::size_t>(dim_)) {
                const std::size_t jd = j * static_cast<std::size_t>(dim_) + d;
                w.start[d] = static_cast<std::size_t>(start_[jd]);
                w.psi[d] = psi_.data() + jd * width_;
            } else {
                w.start[d] = 0;
                w.psi[d] = &one;
            }
        }
        return w;
    }

    // Visits every frequency: (coefficient index, grid index of k mod n, deconvolution factor).
    template <class F>
    void for_each_coefficient(F&& f) const {
        const auto N = static_cast<std::size_t>(N_);
        const auto n = static_cast<std::size_t>(n_);
        const std::size_t total = coeff_count();
        for (std::size_t cidx = 0; cidx < total; ++cidx) {
            std::size_t rest = cidx;
            std::size_t gidx = 0;
            std::size_t stride = 1;
            double deconv = 1.0;
            for (int d = dim_ - 1; d >= 0; --d) {
                const std::size_t kd = rest % N;
                rest /= N;
                const long k = static_cast<long>(kd) - N_ / 2;
                const std::size_t g = static_cast<std::size_t>(k < 0 ? k + static_cast<long>(n) : k);
                gidx += g * stride;
                stride *= n;
                deconv *= inv_phihat_[kd];
            }
            f(cidx, gidx, deconv);
        }
    }

    template <class V>
    void spread_and_transform(std::span<Complex> out, V&& value, std::size_t count) const {
        if (count != nodes_count_) throw PlanMismatch("nfft adjoint: value count");
        if (out.size() != coeff_count()) throw PlanMismatch("nfft adjoint: output size");
        tracked_vector<Complex> grid(grid_elements(), Complex(0.0));
        const Axes ax = axes();
        // serial over nodes, so accumulation order is fixed
        for (std::size_t j = 0; j < nodes_count_; ++j) {
            const Window w = window_of(j);
            const Complex v = value(j);
            std::size_t i0 = w.start[0];
            for (std::size_t a = 0; a < ax.width[0]; ++a, i0 = wrap(i0 + 1)) {
                const Complex va = v * w.psi[0][a];
                std::size_t i1 = w.start[1];
                for (std::size_t b = 0; b < ax.width[1]; ++b, i1 = wrap(i1 + 1)) {
                    const Complex vb = va * w.psi[1][b];
                    std::size_t i2 = w.start[2];
                    const std::size_t row = (i0 * ax.ext[1] + i1) * ax.ext[2];
                    for (std::size_t c = 0; c < ax.width[2]; ++c, i2 = wrap(i2 + 1))
                        grid[row + i2] += vb * w.psi[2][c];
                }
            }
        }
        forward_->execute(grid);
        for_each_coefficient([&](std::size_t cidx, std::size_t gidx, double deconv) {
            out[cidx] = grid[gidx] * deconv;
        });
    }

    int dim_;
    int N_;
    int n_ = 0;
    int m_;
    std::size_t nodes_count_ = 0;
    std::size_t width_ = 0;
    std::vector<double> inv_phihat_;
    tracked_vector<int> start_;
    tracked_vector<double> psi_;
    std::unique_ptr<FftPlan> forward_;
    std::unique_ptr<FftPlan> backward_;
};

}  // namespace otfs
