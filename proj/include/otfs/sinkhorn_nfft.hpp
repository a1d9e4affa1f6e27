#pragma once

// Sinkhorn's iteration with both kernel products replaced by fast summation.
// Node sets are fixed, so the NFFT plans are built once; the kernel, the
// distance matrix and the plan are never formed. The transport cost of the
// final plan uses one extra pass with lambda |x|^r exp(-lambda |x|^r).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "errors.hpp"
#include "fastsum.hpp"
#include "measures.hpp"
#include "sinkhorn_dense.hpp"

namespace otfs {

struct NfftSinkhornConfig {
    double lambda = 20.0;
    int order = 2;
    double epsilon = 1e-9;
    std::size_t max_iter = 10000;
    RescalePolicy rescale = RescalePolicy::geometric_mean;
    /// Bandwidth per axis; 0 picks the dimension default, raised for sharp
    /// Gaussians when D <= 2 (a 3-D grid at N = 128 already costs 268 MB).
    int bandwidth = 0;
    int smoothness = 10;
    int cutoff = 8;
    double oversampling = 2.0;
    int near_cells = 16;
    ScalePolicy scaling = ScalePolicy::fit;
    std::vector<double> warm_start;
};

/// Smallest bandwidth whose band holds exp(-lambda |x|^2) to double precision:
/// the Fourier transform decays like exp(-pi^2 k^2 / lambda).
inline int gaussian_bandwidth(double lambda) {
    const double k = std::sqrt(38.0 * lambda) / std::numbers::pi;
    int N = 2;
    while (N / 2 < k) N *= 2;
    return N;
}

inline FastsumOptions fastsum_options_for(const NfftSinkhornConfig& cfg, int dim, double scaled_lambda) {
    FastsumOptions o = default_fastsum_options(dim);
    o.geometry.p = cfg.smoothness;
    o.nfft.cutoff = cfg.cutoff;
    o.nfft.oversampling = cfg.oversampling;
    o.near_cells = cfg.near_cells;
    if (cfg.bandwidth > 0) {
        o.geometry.N = cfg.bandwidth;
    } else if (cfg.order == 2 && dim <= 2) {
        o.geometry.N = std::max(o.geometry.N, gaussian_bandwidth(scaled_lambda));
    }
    return o;
}

/// Kernel operator t = K a~ (targets: support of P, sources: support of Q).
class FastKernelOperator {
public:
    FastKernelOperator(const FastSummation& fs, const RegularizedKernel& k) : fs_(fs), k_(k) {}
    std::size_t rows() const { return fs_.target_count(); }
    std::size_t cols() const { return fs_.source_count(); }
    void forward(std::span<const double> at, std::span<double> t) const { fs_.forward(k_, at, t); }
    void transposed(std::span<const double> a, std::span<double> s) const { fs_.transposed(k_, a, s); }

private:
    const FastSummation& fs_;
    const RegularizedKernel& k_;
};

struct DivergencePair {
    double lower = 0.0;
    double upper = 0.0;
};

/// lower = 1/lambda + (1/lambda)(sum p log a + sum p~ log a~ - sum a~ t~) with
/// t~ = K^T a; upper is the supplied transport cost of the plan.
inline DivergencePair divergence_from_state(std::span<const double> a, std::span<const double> at,
                                            std::span<const double> t_tilde, std::span<const double> p,
                                            std::span<const double> pt, double lambda, double transport_cost) {
    double acc = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += p[i] * std::log(a[i]);
    for (std::size_t j = 0; j < at.size(); ++j) acc += pt[j] * std::log(at[j]) - t_tilde[j] * at[j];
    return {acc / lambda, transport_cost};
}

/// Result of the fast path plus the geometry it ran in.
struct NfftSinkhornResult : SinkhornResult {
    double scale = 1.0;          // coordinate scale applied to both clouds
    double scaled_lambda = 0.0;  // lambda in scaled coordinates
    int bandwidth = 0;
    std::size_t near_pairs = 0;
};

inline NfftSinkhornResult nfft_sinkhorn(const DiscreteMeasure& P, const DiscreteMeasure& Q,
                                        const NfftSinkhornConfig& cfg = {}, const IterationObserver& observer = {}) {
    if (P.dim() != Q.dim()) throw DimensionError("measures have different dimensions");
    if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda)) throw DomainError("lambda must be > 0");
    if (!(cfg.epsilon > 0.0)) throw DomainError("epsilon must be > 0");
    if (cfg.order != 1 && cfg.order != 2) throw UnsupportedOrder("nfft path supports r = 1 or 2");
    const int dim = P.dim();

    const double L = KernelGeometry{}.L;
    const GeometryMap map = geometry_map(P.coords(), Q.coords(), dim, L, cfg.scaling);
    const std::vector<double> x = map.apply(P.coords());
    const std::vector<double> y = map.apply(Q.coords());
    const double lambda_s = map.effective_lambda(cfg.lambda, cfg.order);

    FastsumOptions fo = fastsum_options_for(cfg, dim, lambda_s);
    fo.geometry.L = L;
    const FastSummation fs(dim, y, x, fo);
    const RegularizedKernel k(RadialKernel{KernelKind::exponential, lambda_s, cfg.order}, dim, fo);
    const FastKernelOperator op(fs, k);

    SinkhornOptions so;
    so.epsilon = cfg.epsilon;
    so.max_iter = cfg.max_iter;
    so.rescale = cfg.rescale;
    so.warm_start = cfg.warm_start;
    ScalingOutcome o = run_scaling(op, P.weights(), Q.weights(), so, DenominatorGuard::non_positive, observer);

    const RegularizedKernel klog(RadialKernel{KernelKind::log_weighted, lambda_s, cfg.order}, dim, fo);
    const std::vector<double> tl = fs.forward(klog, o.alpha_tilde);
    double weighted = 0.0;
    for (std::size_t i = 0; i < tl.size(); ++i) weighted += o.alpha[i] * tl[i];
    const double cost = weighted / cfg.lambda;

    NfftSinkhornResult r;
    static_cast<SinkhornResult&>(r) = assemble_result(std::move(o), P.weights(), Q.weights(), cfg.lambda, cost);
    r.scale = map.scale;
    r.scaled_lambda = lambda_s;
    r.bandwidth = fo.geometry.N;
    r.near_pairs = fs.near_pair_count();
    return r;
}

}  // namespace otfs
