#pragma once

// Fast summation of t_i = sum_j w_j K(x_i - y_j) for radial kernels
// exp(-lambda |x|^r) (and lambda |x|^r exp(-lambda |x|^r)).
//
// The kernel is regularized into an h-periodic smooth function: K itself on
// |x| <= L, a polynomial K_B on [L, h/2] that matches K to order p-1 at L and
// is flat to order p-1 at h/2, and the constant K_B(h/2) beyond. Its Fourier
// coefficients b_k on the band [-N/2, N/2)^D turn the sum into
// adjoint NFFT -> multiply by b_k -> NFFT. For r = 1 the cusp at the origin
// is removed by an inner polynomial K_I on [0, a] and the difference K - K_I
// is added back exactly over close pairs.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"
#include "memory.hpp"
#include "nfft.hpp"
#include "two_point_taylor.hpp"

namespace otfs {

struct KernelGeometry {
    double L = 0.25;  // support radius; points satisfy |x| <= L/2
    double h = 1.0;   // period
    int p = 10;       // smoothness order
    int N = 256;      // bandwidth per axis
};

inline KernelGeometry default_geometry(int dim) {
    KernelGeometry g;
    g.N = dim == 3 ? 64 : 256;
    return g;
}

inline void check_geometry(const KernelGeometry& g) {
    if (!(g.h > 0.0) || !(g.L > 0.0)) throw GeometryError("geometry: L and h must be positive");
    if (!(g.L < 0.5 * g.h)) throw GeometryError("geometry: need L < h/2");
    if (g.p < 2) throw GeometryError("geometry: smoothness p must be >= 2");
    if (g.N < 2 || g.N % 2 != 0) throw GeometryError("geometry: bandwidth N must be even and >= 2");
}

struct FastsumOptions {
    KernelGeometry geometry;
    NfftOptions nfft;
    int near_cells = 16;    // nearfield radius in oversampled grid cells (r = 1)
    bool nearfield = true;  // only meaningful for r = 1
};

inline FastsumOptions default_fastsum_options(int dim) {
    FastsumOptions o;
    o.geometry = default_geometry(dim);
    return o;
}

/// K_B on [L, h/2]: K(L) + integral from L of the two-point Taylor
/// interpolant of K' (Hermite data of K' at L, zero data at h/2).
class BoundaryPolynomial {
public:
    BoundaryPolynomial() = default;

    BoundaryPolynomial(const RadialKernel& k, double L, double half_period, int p)
        : L_(L), value_at_L_(k(L)), rule_(gauss_legendre(p)) {
        const std::vector<double> t = k.taylor(L, p);
        // K'(L + s) = sum_k (k+1) t_{k+1} s^k, p-1 conditions
        std::vector<double> dleft(static_cast<std::size_t>(p - 1));
        for (std::size_t i = 0; i < dleft.size(); ++i) dleft[i] = static_cast<double>(i + 1) * t[i + 1];
        std::vector<double> dright(dleft.size(), 0.0);
        derivative_ = TwoPointTaylor(L, half_period, dleft, dright);
    }

    double operator()(double x) const {
        const double span = x - L_;
        double acc = 0.0;
        for (std::size_t g = 0; g < rule_.nodes.size(); ++g)
            acc += rule_.weights[g] * derivative_(L_ + span * rule_.nodes[g]);
        return value_at_L_ + span * acc;
    }

    double derivative(double x) const { return derivative_(x); }

private:
    double L_ = 0.0;
    double value_at_L_ = 0.0;
    QuadratureRule rule_;
    TwoPointTaylor derivative_;
};

/// Periodized, regularized radial kernel with its Fourier coefficients.
class RegularizedKernel {
public:
    RegularizedKernel(const RadialKernel& kernel, int dim, const FastsumOptions& opts)
        : kernel_(kernel), dim_(dim), opts_(opts) {
        check_kernel(kernel);
        check_geometry(opts.geometry);
        if (dim < 1 || dim > 3) throw DimensionError("fastsum: dimension must be 1, 2 or 3");
        const KernelGeometry& g = opts.geometry;
        boundary_ = BoundaryPolynomial(kernel, g.L, 0.5 * g.h, g.p);
        flat_value_ = boundary_(0.5 * g.h);

        if (kernel.order == 1 && opts.nearfield) {
            const double sigma_n = opts.nfft.oversampling * g.N;
            radius_ = g.h * opts.near_cells / sigma_n;
            if (!(radius_ < g.L)) throw GeometryError("fastsum: nearfield radius must be below L");
            const std::vector<double> right = kernel.taylor(radius_, g.p);
            std::vector<double> left(right);
            for (std::size_t k = 1; k < left.size(); k += 2) left[k] = -left[k];
            inner_ = TwoPointTaylor(-radius_, radius_, left, right);
        }
        compute_coefficients();
    }

    const RadialKernel& kernel() const { return kernel_; }
    int dim() const { return dim_; }
    const FastsumOptions& options() const { return opts_; }
    const KernelGeometry& geometry() const { return opts_.geometry; }
    const BoundaryPolynomial& boundary() const { return boundary_; }
    bool has_nearfield() const { return inner_.has_value(); }
    double nearfield_radius() const { return radius_; }

    /// Regularized radial profile on [0, inf).
    double radial(double rho) const {
        const KernelGeometry& g = opts_.geometry;
        if (inner_ && rho < radius_) return (*inner_)(rho);
        if (rho <= g.L) return kernel_(rho);
        if (rho < 0.5 * g.h) return boundary_(rho);
        return flat_value_;
    }

    /// K - K_I inside the nearfield radius, zero outside.
    double nearfield_difference(double rho) const {
        if (!inner_ || rho >= radius_) return 0.0;
        return kernel_(rho) - (*inner_)(rho);
    }

    /// h-periodic kernel at an arbitrary point.
    double periodic(std::span<const double> x) const {
        const double h = opts_.geometry.h;
        double r2 = 0.0;
        for (int d = 0; d < dim_; ++d) {
            double y = x[static_cast<std::size_t>(d)] / h;
            y -= std::floor(y + 0.5);
            r2 += y * y;
        }
        return radial(h * std::sqrt(r2));
    }

    /// b_k over [-N/2, N/2)^D, row-major, axis index k + N/2.
    std::span<const Complex> coefficients() const { return coeffs_; }

private:
    void compute_coefficients() {
        const int N = opts_.geometry.N;
        const int M = 2 * N;
        const double h = opts_.geometry.h;
        const auto Mz = static_cast<std::size_t>(M);
        std::size_t total = 1;
        for (int d = 0; d < dim_; ++d) total *= Mz;

        // the sample only depends on the integer sum of squared wrapped offsets
        std::vector<std::size_t> sq(Mz);
        for (std::size_t l = 0; l < Mz; ++l) {
            const std::size_t o = l < Mz / 2 ? l : Mz - l;
            sq[l] = o * o;
        }
        std::vector<double> profile(static_cast<std::size_t>(dim_) * (Mz / 2) * (Mz / 2) + 1,
                                    std::numeric_limits<double>::quiet_NaN());

        tracked_vector<Complex> grid(total);
        std::array<std::size_t, 3> idx{0, 0, 0};
        for (std::size_t flat = 0; flat < total; ++flat) {
            std::size_t rem = flat;
            for (int d = dim_ - 1; d >= 0; --d) {
                idx[static_cast<std::size_t>(d)] = rem % Mz;
                rem /= Mz;
            }
            std::size_t s2 = 0;
            for (int d = 0; d < dim_; ++d) s2 += sq[idx[static_cast<std::size_t>(d)]];
            double& v = profile[s2];
            if (std::isnan(v)) v = radial(h * std::sqrt(static_cast<double>(s2)) / M);
            grid[flat] = Complex(v, 0.0);
        }
        FftPlan plan(std::vector<int>(static_cast<std::size_t>(dim_), M), FftDirection::forward);
        plan.execute(grid);

        const auto Nz = static_cast<std::size_t>(N);
        std::size_t count = 1;
        for (int d = 0; d < dim_; ++d) count *= Nz;
        coeffs_.assign(count, Complex(0.0));
        const double norm = 1.0 / static_cast<double>(total);
        for (std::size_t c = 0; c < count; ++c) {
            std::size_t rem = c;
            std::size_t g = 0;
            std::size_t stride = 1;
            for (int d = dim_ - 1; d >= 0; --d) {
                const long k = static_cast<long>(rem % Nz) - N / 2;
                rem /= Nz;
                const auto gk = static_cast<std::size_t>(k < 0 ? k + M : k);
                g += gk * stride;
                stride *= Mz;
            }
            coeffs_[c] = grid[g] * norm;
        }
    }

    RadialKernel kernel_;
    int dim_;
    FastsumOptions opts_;
    BoundaryPolynomial boundary_;
    double flat_value_ = 0.0;
    double radius_ = 0.0;
    std::optional<TwoPointTaylor> inner_;
    tracked_vector<Complex> coeffs_;
};

inline RegularizedKernel build_regularized_kernel(double lambda, int order, int dim,
                                                  const FastsumOptions& opts) {
    return RegularizedKernel(RadialKernel{KernelKind::exponential, lambda, order}, dim, opts);
}

namespace detail {

inline double distance_between(std::span<const double> a, std::size_t i, std::span<const double> b,
                               std::size_t j, int dim) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
        const double diff = a[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)] -
                            b[j * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)];
        s += diff * diff;
    }
    return std::sqrt(s);
}

inline void check_inside(std::span<const double> pts, int dim, const KernelGeometry& g) {
    if (pts.size() % static_cast<std::size_t>(dim) != 0) throw DimensionError("fastsum: coordinate count");
    const double limit = 0.5 * g.L * (1.0 + 1e-12);
    const std::size_t n = pts.size() / static_cast<std::size_t>(dim);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int d = 0; d < dim; ++d) {
            const double v = pts[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)];
            if (!std::isfinite(v)) throw GeometryViolation("fastsum: non-finite coordinate");
            s += v * v;
        }
        if (std::sqrt(s) > limit) throw GeometryViolation("fastsum: point outside |x| <= L/2");
    }
}

}  // namespace detail

/// Close (target, source) pairs, found by bucketing sources on a uniform grid.
struct NearPair {
    std::size_t target;
    std::size_t source;
    double distance;
};

inline std::vector<NearPair> near_pairs(std::span<const double> targets, std::span<const double> sources, int dim,
                                        double radius, double half_width) {
    std::vector<NearPair> pairs;
    if (!(radius > 0.0)) return pairs;
    const auto dz = static_cast<std::size_t>(dim);
    const std::size_t nt = targets.size() / dz;
    const std::size_t ns = sources.size() / dz;
    const long cells = std::max<long>(1, static_cast<long>(std::ceil(2.0 * half_width / radius)));
    auto cell_of = [&](double v) {
        const long c = static_cast<long>(std::floor((v + half_width) / radius));
        return std::clamp<long>(c, 0, cells - 1);
    };
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(cells);
    auto flat_cell = [&](const std::array<long, 3>& c) {
        std::size_t f = 0;
        for (int d = 0; d < dim; ++d) f = f * static_cast<std::size_t>(cells) + static_cast<std::size_t>(c[static_cast<std::size_t>(d)]);
        return f;
    };
    // counting sort of sources into cells
    std::vector<std::size_t> start(total + 1, 0);
    std::vector<std::size_t> cell_index(ns);
    for (std::size_t j = 0; j < ns; ++j) {
        std::array<long, 3> c{0, 0, 0};
        for (int d = 0; d < dim; ++d) c[static_cast<std::size_t>(d)] = cell_of(sources[j * dz + static_cast<std::size_t>(d)]);
        cell_index[j] = flat_cell(c);
        ++start[cell_index[j] + 1];
    }
    for (std::size_t c = 0; c < total; ++c) start[c + 1] += start[c];
    std::vector<std::size_t> order(ns);
    {
        std::vector<std::size_t> fill(start.begin(), start.end() - 1);
        for (std::size_t j = 0; j < ns; ++j) order[fill[cell_index[j]]++] = j;
    }

    for (std::size_t i = 0; i < nt; ++i) {
        std::array<long, 3> base{0, 0, 0};
        for (int d = 0; d < dim; ++d) base[static_cast<std::size_t>(d)] = cell_of(targets[i * dz + static_cast<std::size_t>(d)]);
        const long span1 = dim > 1 ? 1 : 0;
        const long span2 = dim > 2 ? 1 : 0;
        for (long o0 = -1; o0 <= 1; ++o0)
            for (long o1 = -span1; o1 <= span1; ++o1)
                for (long o2 = -span2; o2 <= span2; ++o2) {
                    std::array<long, 3> c{base[0] + o0, base[1] + o1, base[2] + o2};
                    bool valid = true;
                    for (int d = 0; d < dim; ++d) {
                        const long v = c[static_cast<std::size_t>(d)];
                        if (v < 0 || v >= cells) valid = false;
                    }
                    if (!valid) continue;
                    const std::size_t f = flat_cell(c);
                    for (std::size_t q = start[f]; q < start[f + 1]; ++q) {
                        const std::size_t j = order[q];
                        const double rho = detail::distance_between(targets, i, sources, j, dim);
                        if (rho < radius) pairs.push_back({i, j, rho});
                    }
                }
    }
    return pairs;
}

/// Fast summation between two fixed node sets. Plans are built once;
/// forward() sums over sources at targets, transposed() the other way.
class FastSummation {
public:
    FastSummation(int dim, std::span<const double> sources, std::span<const double> targets,
                  const FastsumOptions& opts)
        : dim_(dim), opts_(opts), sources_(sources.begin(), sources.end()), targets_(targets.begin(), targets.end()) {
        check_geometry(opts.geometry);
        if (dim < 1 || dim > 3) throw DimensionError("fastsum: dimension must be 1, 2 or 3");
        detail::check_inside(sources, dim, opts.geometry);
        detail::check_inside(targets, dim, opts.geometry);
        const double h = opts.geometry.h;
        std::vector<double> ys(sources.size()), xs(targets.size());
        for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = sources[i] / h;
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = targets[i] / h;
        source_plan_ = std::make_unique<NfftPlan>(dim, opts.geometry.N, ys, opts.nfft);
        target_plan_ = std::make_unique<NfftPlan>(dim, opts.geometry.N, xs, opts.nfft);
    }

    std::size_t source_count() const { return source_plan_->node_count(); }
    std::size_t target_count() const { return target_plan_->node_count(); }

    /// t_i = sum_j w_j K(x_i - y_j), i over targets, j over sources.
    std::vector<double> forward(const RegularizedKernel& k, std::span<const double> weights) const {
        std::vector<double> out(target_count());
        apply(k, *source_plan_, *target_plan_, weights, out, false);
        return out;
    }
    void forward(const RegularizedKernel& k, std::span<const double> weights, std::span<double> out) const {
        apply(k, *source_plan_, *target_plan_, weights, out, false);
    }

    /// s_j = sum_i w_i K(x_i - y_j), j over sources.
    std::vector<double> transposed(const RegularizedKernel& k, std::span<const double> weights) const {
        std::vector<double> out(source_count());
        apply(k, *target_plan_, *source_plan_, weights, out, true);
        return out;
    }
    void transposed(const RegularizedKernel& k, std::span<const double> weights, std::span<double> out) const {
        apply(k, *target_plan_, *source_plan_, weights, out, true);
    }

    std::size_t near_pair_count() const { return pairs_.size(); }

private:
    void apply(const RegularizedKernel& k, const NfftPlan& from, const NfftPlan& to, std::span<const double> w,
               std::span<double> out, bool swap) const {
        if (k.dim() != dim_ || k.geometry().N != opts_.geometry.N || k.geometry().h != opts_.geometry.h ||
            k.geometry().L != opts_.geometry.L)
            throw PlanMismatch("fastsum: kernel geometry differs from plan geometry");
        if (w.size() != from.node_count() || out.size() != to.node_count())
            throw PlanMismatch("fastsum: weight or output length");

        tracked_vector<Complex> c(from.coeff_count());
        from.adjoint(w, c);
        const auto b = k.coefficients();
        for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
        tracked_vector<Complex> f(to.node_count());
        to.trafo(c, f);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f[i].real();

        if (k.has_nearfield()) {
            ensure_pairs(k.nearfield_radius());
            for (const NearPair& pr : pairs_) {
                const double d = k.nearfield_difference(pr.distance);
                if (swap) out[pr.source] += w[pr.target] * d;
                else out[pr.target] += w[pr.source] * d;
            }
        }
    }

    void ensure_pairs(double radius) const {
        std::lock_guard<std::mutex> lock(pairs_mutex_);
        if (pairs_radius_ == radius) return;
        pairs_ = near_pairs(targets_, sources_, dim_, radius, 0.5 * opts_.geometry.L);
        pairs_radius_ = radius;
    }

    int dim_;
    FastsumOptions opts_;
    std::vector<double> sources_;
    std::vector<double> targets_;
    std::unique_ptr<NfftPlan> source_plan_;
    std::unique_ptr<NfftPlan> target_plan_;
    mutable std::vector<NearPair> pairs_;
    mutable double pairs_radius_ = -1.0;
    mutable std::mutex pairs_mutex_;
};

/// One-shot fast summation; builds plans and the nearfield index per call.
inline std::vector<double> fastsum_apply(const RegularizedKernel& k, std::span<const double> sources,
                                         std::span<const double> weights, std::span<const double> targets) {
    FastSummation fs(k.dim(), sources, targets, k.options());
    return fs.forward(k, weights);
}

inline constexpr std::size_t kDefaultDirectCap = 100'000'000;

/// Exact O(n * m) kernel sums at the targets.
inline std::vector<double> direct_sum(const RadialKernel& k, int dim, std::span<const double> sources,
                                      std::span<const double> weights, std::span<const double> targets,
                                      std::size_t cap = kDefaultDirectCap) {
    check_kernel(k);
    if (dim < 1 || dim > 3) throw DimensionError("direct_sum: dimension must be 1, 2 or 3");
    const auto dz = static_cast<std::size_t>(dim);
    if (sources.size() % dz != 0 || targets.size() % dz != 0) throw DimensionError("direct_sum: coordinate count");
    const std::size_t ns = sources.size() / dz;
    const std::size_t nt = targets.size() / dz;
    if (weights.size() != ns) throw DimensionError("direct_sum: weight count");
    if (ns != 0 && nt > cap / ns) throw SizeCapExceeded("direct_sum: n * m exceeds the size cap");
    std::vector<double> out(nt, 0.0);
    for (std::size_t i = 0; i < nt; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < ns; ++j) acc += weights[j] * k(detail::distance_between(targets, i, sources, j, dim));
        out[i] = acc;
    }
    return out;
}

/// Affine map x -> scale * (x - center) that places both clouds in |x| <= L/2.
struct GeometryMap {
    int dim = 1;
    double scale = 1.0;
    std::array<double, 3> center{0.0, 0.0, 0.0};

    std::vector<double> apply(std::span<const double> pts) const {
        std::vector<double> out(pts.size());
        const auto dz = static_cast<std::size_t>(dim);
        for (std::size_t i = 0; i < pts.size(); ++i) out[i] = scale * (pts[i] - center[i % dz]);
        return out;
    }

    /// lambda' such that exp(-lambda |x-y|^r) = exp(-lambda' |x'-y'|^r).
    double effective_lambda(double lambda, int order) const { return lambda * std::pow(scale, -order); }
};

enum class ScalePolicy {
    fit,             // always center and stretch to fill |x| <= L/2
    keep_if_inside,  // identity when the data already fits
};

struct ScaledClouds {
    std::vector<double> a;
    std::vector<double> b;
    GeometryMap map;
};

inline GeometryMap geometry_map(std::span<const double> pa, std::span<const double> pb, int dim, double L,
                                ScalePolicy policy = ScalePolicy::fit) {
    if (dim < 1 || dim > 3) throw DimensionError("scale_to_geometry: dimension must be 1, 2 or 3");
    const auto dz = static_cast<std::size_t>(dim);
    GeometryMap map;
    map.dim = dim;
    auto radius_about = [&](const std::array<double, 3>& c) {
        double r = 0.0;
        for (auto pts : {pa, pb})
            for (std::size_t i = 0; i < pts.size() / dz; ++i) {
                double s = 0.0;
                for (std::size_t d = 0; d < dz; ++d) {
                    const double v = pts[i * dz + d] - c[d];
                    s += v * v;
                }
                r = std::max(r, std::sqrt(s));
            }
        return r;
    };
    if (policy == ScalePolicy::keep_if_inside && radius_about({0.0, 0.0, 0.0}) <= 0.5 * L) return map;

    std::array<double, 3> lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (auto pts : {pa, pb})
        for (std::size_t i = 0; i < pts.size(); ++i) {
            lo[i % dz] = std::min(lo[i % dz], pts[i]);
            hi[i % dz] = std::max(hi[i % dz], pts[i]);
        }
    for (std::size_t d = 0; d < dz; ++d) map.center[d] = std::isfinite(lo[d]) ? 0.5 * (lo[d] + hi[d]) : 0.0;
    const double r = radius_about(map.center);
    map.scale = r > 0.0 ? 0.5 * L / r : 1.0;
    // keep rounding from pushing a point past the boundary
    map.scale *= 1.0 - 1e-14;
    return map;
}

inline ScaledClouds scale_to_geometry(std::span<const double> pa, std::span<const double> pb, int dim, double L,
                                      ScalePolicy policy = ScalePolicy::fit) {
    ScaledClouds out;
    out.map = geometry_map(pa, pb, dim, L, policy);
    out.a = out.map.apply(pa);
    out.b = out.map.apply(pb);
    return out;
}

}  // namespace otfs
