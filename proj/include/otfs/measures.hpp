#pragma once

// Discrete probability measures and information functionals.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace otfs {

/// Weighted atoms in R^D, D in {1,2,3}. Coordinates are stored row-major
/// (atom i occupies coords[i*D .. i*D+D)). Weights are strictly positive and
/// sum to one; zero-weight atoms are dropped and the rest renormalized.
class DiscreteMeasure {
public:
    DiscreteMeasure() = default;

    DiscreteMeasure(int dim, std::vector<double> coords, std::vector<double> weights)
        : dim_(dim) {
        if (dim < 1 || dim > 3)
            throw DimensionError("dimension must be 1, 2 or 3, got " + std::to_string(dim));
        if (coords.size() != weights.size() * static_cast<std::size_t>(dim))
            throw DomainError("coordinate count does not match weights * dimension");
        double total = 0.0;
        for (double w : weights) {
            if (!std::isfinite(w) || w < 0.0) throw DomainError("weights must be finite and >= 0");
            total += w;
        }
        for (double c : coords)
            if (!std::isfinite(c)) throw DomainError("coordinates must be finite");
        if (!(total > 0.0)) throw DomainError("weights sum to zero");

        coords_.reserve(coords.size());
        weights_.reserve(weights.size());
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] == 0.0) continue;
            weights_.push_back(weights[i] / total);
            coords_.insert(coords_.end(), coords.begin() + static_cast<std::ptrdiff_t>(i * dim),
                           coords.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
        }
    }

    int dim() const { return dim_; }
    std::size_t size() const { return weights_.size(); }
    std::span<const double> weights() const { return weights_; }
    std::span<const double> coords() const { return coords_; }
    std::span<const double> point(std::size_t i) const {
        return std::span<const double>(coords_).subspan(i * static_cast<std::size_t>(dim_),
                                                        static_cast<std::size_t>(dim_));
    }
    double weight(std::size_t i) const { return weights_[i]; }

private:
    int dim_ = 1;
    std::vector<double> coords_;
    std::vector<double> weights_;
};

/// Row-major gray levels in [0,1].
struct GrayscaleImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> pixels;

    GrayscaleImage() = default;
    GrayscaleImage(std::size_t r, std::size_t c, std::vector<double> px)
        : rows(r), cols(c), pixels(std::move(px)) {
        if (rows == 0 || cols == 0) throw DomainError("image must have positive size");
        if (pixels.size() != rows * cols) throw DomainError("pixel count != rows * cols");
        for (double g : pixels)
            if (!(g >= 0.0 && g <= 1.0)) throw DomainError("gray levels must lie in [0,1]");
    }

    double at(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }

    GrayscaleImage transposed() const {
        std::vector<double> t(pixels.size());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = pixels[r * cols + c];
        return GrayscaleImage(cols, rows, std::move(t));
    }
};

/// One atom per nonzero pixel at (row/rows, col/cols) with weight g / sum(g).
inline DiscreteMeasure measure_from_image(const GrayscaleImage& img) {
    double total = 0.0;
    for (double g : img.pixels) total += g;
    if (!(total > 0.0)) throw AllBlackImage();

    std::vector<double> coords;
    std::vector<double> weights;
    for (std::size_t r = 0; r < img.rows; ++r) {
        for (std::size_t c = 0; c < img.cols; ++c) {
            const double g = img.at(r, c);
            if (g == 0.0) continue;
            coords.push_back(static_cast<double>(r) / static_cast<double>(img.rows));
            coords.push_back(static_cast<double>(c) / static_cast<double>(img.cols));
            weights.push_back(g / total);
        }
    }
    return DiscreteMeasure(2, std::move(coords), std::move(weights));
}

/// Shannon entropy with natural log.
inline double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double pi : p)
        if (pi > 0.0) h -= pi * std::log(pi);
    return h;
}

inline double entropy(const DiscreteMeasure& m) { return entropy(m.weights()); }

/// sum_i p_i log(p_i / q_i); terms with p_i = 0 contribute nothing.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw DomainError("kl_divergence: length mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(q[i] > 0.0)) throw DomainError("kl_divergence: q must be strictly positive");
        if (p[i] > 0.0) d += p[i] * std::log(p[i] / q[i]);
    }
    return d;
}

/// 1-D quantile quantizer with an explicit CDF. Atoms s_i = Q(i/(n+1)); the
/// weight of atom i is the mass of its midpoint cell, with the outer cells
/// extended to -inf and +inf.
inline DiscreteMeasure quantile_quantizer(const std::function<double(double)>& inverse_cdf,
                                          const std::function<double(double)>& cdf,
                                          int n_atoms) {
    if (n_atoms < 1) throw DomainError("quantile_quantizer: n_atoms must be >= 1");
    const auto n = static_cast<std::size_t>(n_atoms);
    std::vector<double> atoms(n);
    for (std::size_t i = 0; i < n; ++i)
        atoms[i] = inverse_cdf(static_cast<double>(i + 1) / static_cast<double>(n + 1));

    std::vector<double> weights(n);
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double upper = (i + 1 < n) ? cdf(0.5 * (atoms[i] + atoms[i + 1])) : 1.0;
        weights[i] = std::max(0.0, upper - prev);
        prev = upper;
    }
    return DiscreteMeasure(1, std::move(atoms), std::move(weights));
}

/// Quantizer from the inverse CDF alone; the CDF at cell boundaries is
/// recovered by bisection on the monotone inverse.
inline DiscreteMeasure quantile_quantizer(const std::function<double(double)>& inverse_cdf,
                                          int n_atoms) {
    auto cdf = [&inverse_cdf](double x) {
        double lo = 0.0;
        double hi = 1.0;
        // F(x) = sup{u : Q(u) <= x}
        for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (inverse_cdf(mid) <= x)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    };
    return quantile_quantizer(inverse_cdf, cdf, n_atoms);
}

/// Uniform weights 1/n on the samples; bitwise-identical points are merged.
/// Atoms keep the order of first occurrence.
inline DiscreteMeasure empirical_measure(int dim, std::span<const double> samples) {
    if (dim < 1 || dim > 3) throw DimensionError("dimension must be 1, 2 or 3");
    const auto d = static_cast<std::size_t>(dim);
    if (samples.empty()) throw EmptySample();
    if (samples.size() % d != 0) throw DomainError("sample length not a multiple of dim");
    const std::size_t n = samples.size() / d;

    auto key = [&](std::size_t i, std::size_t k) {
        return std::bit_cast<std::uint64_t>(samples[i * d + k]);
    };
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        for (std::size_t k = 0; k < d; ++k)
            if (key(a, k) != key(b, k)) return key(a, k) < key(b, k);
        return false;
    });

    // representative (first occurrence) and multiplicity per group
    std::vector<std::size_t> rep_of(n);
    std::vector<std::size_t> count(n, 0);
    for (std::size_t g = 0; g < n;) {
        std::size_t e = g + 1;
        auto same = [&](std::size_t a, std::size_t b) {
            for (std::size_t k = 0; k < d; ++k)
                if (key(a, k) != key(b, k)) return false;
            return true;
        };
        while (e < n && same(order[g], order[e])) ++e;
        const std::size_t rep = order[g];  // stable sort keeps the first occurrence first
        for (std::size_t t = g; t < e; ++t) rep_of[order[t]] = rep;
        count[rep] = e - g;
        g = e;
    }

    std::vector<double> coords;
    std::vector<double> weights;
    for (std::size_t i = 0; i < n; ++i) {
        if (rep_of[i] != i) continue;
        coords.insert(coords.end(), samples.begin() + static_cast<std::ptrdiff_t>(i * d),
                      samples.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
        weights.push_back(static_cast<double>(count[i]) / static_cast<double>(n));
    }
    return DiscreteMeasure(dim, std::move(coords), std::move(weights));
}

/// Euclidean distance between two points of equal dimension.
inline double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double t = a[k] - b[k];
        s += t * t;
    }
    return std::sqrt(s);
}

/// d^r, with the r = 1 and r = 2 cases avoiding pow.
inline double cost_power(std::span<const double> a, std::span<const double> b, double r) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double t = a[k] - b[k];
        s += t * t;
    }
    if (r == 2.0) return s;
    if (r == 1.0) return std::sqrt(s);
    return std::pow(std::sqrt(s), r);
}

}  // namespace otfs
