#pragma once

// Seeded generators for synthetic instances.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. Distributions are derived by hand (not via <random>
// distributions, whose algorithms are implementation-defined) so a given
// seed yields the same instance on every platform.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "measures.hpp"

namespace otfs {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        // Lemire-style rejection keeps the draw unbiased
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 == 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// n points uniform in [0,1]^dim with uniform weights.
inline DiscreteMeasure uniform_cloud(Rng& rng, int dim, std::size_t n) {
    std::vector<double> coords(n * static_cast<std::size_t>(dim));
    for (double& c : coords) c = rng.uniform();
    return empirical_measure(dim, coords);
}

/// n points in [0,1]^dim with random positive weights.
inline DiscreteMeasure random_weighted_cloud(Rng& rng, int dim, std::size_t n) {
    std::vector<double> coords(n * static_cast<std::size_t>(dim));
    for (double& c : coords) c = rng.uniform();
    std::vector<double> w(n);
    for (double& x : w) x = 0.05 + rng.uniform();
    return DiscreteMeasure(dim, std::move(coords), std::move(w));
}

/// Smooth synthetic gray image: a few random Gaussian blobs on a background.
inline GrayscaleImage synthetic_image(Rng& rng, std::size_t rows, std::size_t cols, int blobs = 3) {
    std::vector<double> px(rows * cols, 0.0);
    struct Blob {
        double r, c, s, a;
    };
    std::vector<Blob> bs;
    for (int b = 0; b < blobs; ++b)
        bs.push_back({rng.uniform(), rng.uniform(), 0.05 + 0.2 * rng.uniform(), 0.3 + 0.7 * rng.uniform()});
    double mx = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double y = static_cast<double>(r) / rows;
            const double x = static_cast<double>(c) / cols;
            double v = 0.02;
            for (const auto& b : bs) {
                const double d2 = (y - b.r) * (y - b.r) + (x - b.c) * (x - b.c);
                v += b.a * std::exp(-d2 / (2.0 * b.s * b.s));
            }
            px[r * cols + c] = v;
            mx = std::max(mx, v);
        }
    }
    for (double& v : px) v /= mx;
    return GrayscaleImage(rows, cols, std::move(px));
}

}  // namespace otfs
