#pragma once

// Sinkhorn's matrix scaling for the entropic transport problem.
//
// The scaling loop is written against a kernel operator (K a = t, K^T b = s)
// so the dense kernel below and the fast-summation operator share it.
// Iterate Delta = 1, 2, ...: odd steps set alpha = p / (K alpha~), even steps
// set alpha~ = p~ / (K^T alpha). Each step already yields the sums needed for
// the other marginal, so the residual ||pi 1 - p||_1 + ||pi^T 1 - p~||_1 is
// checked every iteration without an extra kernel product.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "exact_ot.hpp"
#include "measures.hpp"
#include "memory.hpp"

namespace otfs {

/// How the column scaling is renormalized before each odd step.
enum class RescalePolicy {
    none,
    max,             // c = 1 / max(alpha~)
    geometric_mean,  // c = 1 / geomean(alpha~)
};

struct SinkhornOptions {
    double epsilon = 1e-9;
    std::size_t max_iter = 10000;
    RescalePolicy rescale = RescalePolicy::none;
    /// Optional starting alpha~ (defaults to all ones).
    std::vector<double> warm_start;
};

/// Snapshot handed to an observer after every update (and once at Delta = 0).
struct IterationState {
    std::size_t delta = 0;
    std::span<const double> alpha;
    std::span<const double> alpha_tilde;
    double residual = std::numeric_limits<double>::quiet_NaN();  // NaN at Delta = 0
};

using IterationObserver = std::function<void(const IterationState&)>;

/// Raw outcome of the scaling loop.
struct ScalingOutcome {
    std::vector<double> alpha;
    std::vector<double> alpha_tilde;
    std::vector<double> row_sums;  // pi 1
    std::vector<double> col_sums;  // pi^T 1
    double mass = 0.0;             // sum of pi
    double residual = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
};

enum class DenominatorGuard {
    underflow,     // below the smallest normal double -> NumericalUnderflow
    non_positive,  // <= 1e-300 -> NonPositiveDenominator
};

inline constexpr double kPositiveFloor = 1e-300;

namespace detail {

inline void check_denominators(std::span<const double> t, DenominatorGuard guard, const char* what) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (guard == DenominatorGuard::underflow) {
            if (!(t[i] >= std::numeric_limits<double>::min()))
                throw NumericalUnderflow(std::string(what) + " sum underflowed at index " + std::to_string(i) +
                                         "; lambda is too large for the dense path");
        } else if (!(t[i] > kPositiveFloor)) {
            throw NonPositiveDenominator(std::string(what) + " sum is " + std::to_string(t[i]) + " at index " +
                                         std::to_string(i) + "; increase the fast-summation bandwidth");
        }
    }
}

inline double rescale_factor(std::span<const double> v, RescalePolicy policy) {
    if (policy == RescalePolicy::max) return 1.0 / *std::max_element(v.begin(), v.end());
    double mean_log = 0.0;
    for (double x : v) mean_log += std::log(x);
    return std::exp(-mean_log / static_cast<double>(v.size()));
}

}  // namespace detail

/// Runs the alternating scaling. Op must provide
///   std::size_t rows() const, cols() const;
///   void forward(std::span<const double> a_tilde, std::span<double> t) const;     // t = K a~
///   void transposed(std::span<const double> a, std::span<double> s) const;        // s = K^T a
template <class Op>
ScalingOutcome run_scaling(const Op& op, std::span<const double> p, std::span<const double> pt,
                           const SinkhornOptions& opts, DenominatorGuard guard,
                           const IterationObserver& observer = {}) {
    const std::size_t n = op.rows();
    const std::size_t m = op.cols();
    if (p.size() != n || pt.size() != m) throw PlanMismatch("sinkhorn: marginal lengths differ from kernel shape");
    if (!(opts.epsilon > 0.0)) throw DomainError("sinkhorn: epsilon must be > 0");

    ScalingOutcome out;
    out.alpha.assign(n, 1.0);
    out.alpha_tilde.assign(m, 1.0);
    if (!opts.warm_start.empty()) {
        if (opts.warm_start.size() != m) throw PlanMismatch("sinkhorn: warm start length");
        for (double v : opts.warm_start)
            if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("sinkhorn: warm start must be positive");
        out.alpha_tilde = opts.warm_start;
    }
    std::vector<double>& a = out.alpha;
    std::vector<double>& at = out.alpha_tilde;
    std::vector<double> t(n);  // K a~
    std::vector<double> s(m);  // K^T a

    if (observer) observer({0, a, at, std::numeric_limits<double>::quiet_NaN()});

    op.forward(at, t);
    bool last_odd = false;
    for (std::size_t delta = 1; delta <= opts.max_iter; ++delta) {
        const bool odd = delta % 2 == 1;
        double res = 0.0;
        if (odd) {
            if (opts.rescale != RescalePolicy::none) {
                const double c = detail::rescale_factor(at, opts.rescale);
                for (double& v : at) v *= c;
                for (double& v : t) v *= c;
            }
            detail::check_denominators(t, guard, "row");
            for (std::size_t i = 0; i < n; ++i) a[i] = p[i] / t[i];
            op.transposed(a, s);
            for (std::size_t j = 0; j < m; ++j) res += std::abs(at[j] * s[j] - pt[j]);
        } else {
            detail::check_denominators(s, guard, "column");
            for (std::size_t j = 0; j < m; ++j) at[j] = pt[j] / s[j];
            op.forward(at, t);
            for (std::size_t i = 0; i < n; ++i) res += std::abs(a[i] * t[i] - p[i]);
        }
        out.iterations = delta;
        out.residual = res;
        last_odd = odd;
        if (observer) observer({delta, a, at, res});
        if (res <= opts.epsilon) {
            out.converged = true;
            break;
        }
    }
    if (out.iterations == 0) {
        // no update performed: plan is diag(a) K diag(a~) with fresh t
        op.transposed(a, s);
        last_odd = false;
        double res = 0.0;
        for (std::size_t i = 0; i < n; ++i) res += std::abs(a[i] * t[i] - p[i]);
        for (std::size_t j = 0; j < m; ++j) res += std::abs(at[j] * s[j] - pt[j]);
        out.residual = res;
    }

    out.row_sums.resize(n);
    out.col_sums.resize(m);
    if (last_odd) {
        // t is K a~ for the current a~, so rows are exact; s is K^T a for the current a
        for (std::size_t i = 0; i < n; ++i) out.row_sums[i] = a[i] * t[i];
        for (std::size_t j = 0; j < m; ++j) out.col_sums[j] = at[j] * s[j];
    } else {
        for (std::size_t i = 0; i < n; ++i) out.row_sums[i] = a[i] * t[i];
        if (out.iterations == 0) {
            for (std::size_t j = 0; j < m; ++j) out.col_sums[j] = at[j] * s[j];
        } else {
            for (std::size_t j = 0; j < m; ++j) out.col_sums[j] = pt[j];
        }
    }
    out.mass = std::accumulate(out.row_sums.begin(), out.row_sums.end(), 0.0);
    return out;
}

struct SinkhornResult {
    double lower = 0.0;       // s: dual value
    double upper = 0.0;       // s~: transport cost of pi^s
    double entropy = 0.0;     // H(pi^s)
    double dual_value = 0.0;  // equal to lower
    double mass = 0.0;        // sum of pi^s
    double residual = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> alpha;
    std::vector<double> alpha_tilde;
    std::optional<TransportPlan> plan;
};

/// Divergences from the final scalings. `transport_cost` is sum pi_ij d_ij^r;
/// `log_scale` is log of the factor the kernel was divided by (0 normally).
inline SinkhornResult assemble_result(ScalingOutcome&& o, std::span<const double> p, std::span<const double> pt,
                                      double lambda, double transport_cost, double log_scale = 0.0) {
    SinkhornResult r;
    double sp = 0.0, spt = 0.0, rows_log = 0.0, cols_log = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double la = std::log(o.alpha[i]);
        sp += p[i] * la;
        rows_log += o.row_sums[i] * la;
    }
    for (std::size_t j = 0; j < pt.size(); ++j) {
        const double la = std::log(o.alpha_tilde[j]);
        spt += pt[j] * la;
        cols_log += o.col_sums[j] * la;
    }
    r.lower = (1.0 + sp + spt - log_scale - o.mass) / lambda;
    r.dual_value = r.lower;
    r.upper = transport_cost;
    // log pi_ij = log a_i + log a~_j - lambda d^r - log_scale
    r.entropy = -rows_log - cols_log + lambda * transport_cost + log_scale * o.mass;
    r.mass = o.mass;
    r.residual = o.residual;
    r.iterations = o.iterations;
    r.converged = o.converged;
    r.alpha = std::move(o.alpha);
    r.alpha_tilde = std::move(o.alpha_tilde);
    return r;
}

inline constexpr std::size_t kDefaultKernelCap = 150'000'000;

/// Dense kernel k_ij = exp(-lambda d_ij^r) / scale, row-major n x m.
class KernelMatrix {
public:
    KernelMatrix(const DiscreteMeasure& P, const DiscreteMeasure& Q, double lambda, double order,
                 std::size_t cap = kDefaultKernelCap)
        : rows_(P.size()), cols_(Q.size()), lambda_(lambda), order_(order) {
        if (P.dim() != Q.dim()) throw DimensionError("measures have different dimensions");
        if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be > 0");
        if (!(order >= 1.0)) throw DomainError("cost order r must be >= 1");
        if (cols_ != 0 && rows_ > cap / cols_)
            throw SizeCapExceeded("dense kernel: n*m = " + std::to_string(rows_ * cols_) + " exceeds cap " +
                                  std::to_string(cap));
        entries_.resize(rows_ * cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                entries_[i * cols_ + j] = std::exp(-lambda * cost_power(P.point(i), Q.point(j), order));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double lambda() const { return lambda_; }
    double order() const { return order_; }
    /// The stored entries equal exp(-lambda d^r) / scale().
    double scale() const { return scale_; }
    double at(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }
    std::span<const double> entries() const { return entries_; }

    void set_threads(unsigned threads) { threads_ = std::max(1u, threads); }

    double sum() const {
        double s = 0.0;
        for (double v : entries_) s += v;
        return s;
    }

    /// Copy scaled so the entries sum to one (used by convergence diagnostics).
    KernelMatrix normalized() const {
        KernelMatrix k(*this);
        const double s = sum();
        for (double& v : k.entries_) v /= s;
        k.scale_ = scale_ * s;
        return k;
    }

    /// t = K a~
    void forward(std::span<const double> at, std::span<double> t) const {
        parallel_for(rows_, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const double* row = entries_.data() + i * cols_;
                double acc = 0.0;
                for (std::size_t j = 0; j < cols_; ++j) acc += row[j] * at[j];
                t[i] = acc;
            }
        });
    }

    /// s = K^T a
    void transposed(std::span<const double> a, std::span<double> s) const {
        parallel_for(cols_, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t j = lo; j < hi; ++j) s[j] = 0.0;
            for (std::size_t i = 0; i < rows_; ++i) {
                const double* row = entries_.data() + i * cols_;
                const double ai = a[i];
                for (std::size_t j = lo; j < hi; ++j) s[j] += row[j] * ai;
            }
        });
    }

    /// sum_ij a_i k_ij a~_j d_ij^r, with d^r recovered from the entries.
    double transport_cost(std::span<const double> a, std::span<const double> at) const {
        const double log_scale = std::log(scale_);
        double total = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            const double* row = entries_.data() + i * cols_;
            double acc = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) {
                const double k = row[j];
                if (k > 0.0) acc += k * at[j] * (-(std::log(k) + log_scale));
            }
            total += a[i] * acc;
        }
        return total / lambda_;
    }

private:
    template <class F>
    void parallel_for(std::size_t count, F&& body) const {
        const std::size_t workers = std::min<std::size_t>(threads_, std::max<std::size_t>(1, count / 64));
        if (workers <= 1) {
            body(0, count);
            return;
        }
        std::vector<std::thread> pool;
        const std::size_t chunk = (count + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk, hi = std::min(count, lo + chunk);
            if (lo < hi) pool.emplace_back([&body, lo, hi] { body(lo, hi); });
        }
        for (auto& th : pool) th.join();
    }

    std::size_t rows_;
    std::size_t cols_;
    double lambda_;
    double order_;
    double scale_ = 1.0;
    unsigned threads_ = 1;
    tracked_vector<double> entries_;
};

inline KernelMatrix build_kernel(const DiscreteMeasure& P, const DiscreteMeasure& Q, double lambda, double order,
                                 std::size_t cap = kDefaultKernelCap) {
    return KernelMatrix(P, Q, lambda, order, cap);
}

/// pi = diag(a) K diag(a~), materialized under the size cap.
inline TransportPlan plan_from_scalings(std::span<const double> a, std::span<const double> at, const KernelMatrix& k,
                                        std::size_t cap = kDefaultKernelCap) {
    if (a.size() != k.rows() || at.size() != k.cols()) throw PlanMismatch("plan: scaling lengths");
    if (k.cols() != 0 && k.rows() > cap / k.cols()) throw SizeCapExceeded("plan: n*m exceeds the size cap");
    TransportPlan plan;
    plan.rows = k.rows();
    plan.cols = k.cols();
    plan.entries.resize(plan.rows * plan.cols);
    for (std::size_t i = 0; i < plan.rows; ++i)
        for (std::size_t j = 0; j < plan.cols; ++j) plan.entries[i * plan.cols + j] = a[i] * k.at(i, j) * at[j];
    return plan;
}

/// ||pi 1 - p||_1 + ||pi^T 1 - p~||_1
inline double residual(const TransportPlan& plan, std::span<const double> p, std::span<const double> pt) {
    if (p.size() != plan.rows || pt.size() != plan.cols) throw PlanMismatch("residual: marginal lengths");
    const std::vector<double> rs = plan.row_sums(), cs = plan.col_sums();
    double e = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i) e += std::abs(rs[i] - p[i]);
    for (std::size_t j = 0; j < cs.size(); ++j) e += std::abs(cs[j] - pt[j]);
    return e;
}

/// 1/lambda + (1/lambda)(sum p log a + sum p~ log a~ - sum a k a~), for the
/// kernel exp(-lambda d^r) (a scaled kernel is accounted for).
inline double dual_value(std::span<const double> a, std::span<const double> at, const KernelMatrix& k,
                         std::span<const double> p, std::span<const double> pt) {
    std::vector<double> t(k.rows());
    k.forward(at, t);
    double mass = 0.0, sp = 0.0, spt = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mass += a[i] * t[i];
        sp += p[i] * std::log(a[i]);
    }
    for (std::size_t j = 0; j < at.size(); ++j) spt += pt[j] * std::log(at[j]);
    return (1.0 + sp + spt - std::log(k.scale()) - mass) / k.lambda();
}

/// sum a_i k_ij a~_j - sum p log a - sum p~ log a~ with the kernel as stored;
/// pass the normalized kernel for the convergence analysis.
inline double objective_f(std::span<const double> a, std::span<const double> at, const KernelMatrix& k,
                          std::span<const double> p, std::span<const double> pt) {
    std::vector<double> t(k.rows());
    k.forward(at, t);
    double f = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) f += a[i] * t[i] - p[i] * std::log(a[i]);
    for (std::size_t j = 0; j < at.size(); ++j) f -= pt[j] * std::log(at[j]);
    return f;
}

struct IterationBoundReport {
    double kappa = 0.0;  // mass of the final plan
    double jmath = 0.0;  // smallest entry of the normalized kernel
    double bound = 0.0;  // 2 eps^-2 log(kappa / jmath)
    std::size_t observed = 0;
    bool holds = false;
};

inline IterationBoundReport iteration_bound(const SinkhornResult& result, const KernelMatrix& k, double epsilon) {
    IterationBoundReport rep;
    const double total = k.sum();
    double mn = std::numeric_limits<double>::infinity();
    for (double v : k.entries()) mn = std::min(mn, v);
    rep.kappa = result.mass;
    rep.jmath = mn / total;
    rep.bound = 2.0 / (epsilon * epsilon) * std::log(rep.kappa / rep.jmath);
    rep.observed = result.iterations;
    rep.holds = static_cast<double>(rep.observed) <= rep.bound;
    return rep;
}

struct DenseSinkhornOptions : SinkhornOptions {
    bool keep_plan = false;
    unsigned threads = 1;
    std::size_t cap = kDefaultKernelCap;
};

/// Sinkhorn on a prebuilt kernel.
inline SinkhornResult sinkhorn_iterate(const KernelMatrix& k, std::span<const double> p, std::span<const double> pt,
                                       const DenseSinkhornOptions& opts = {},
                                       const IterationObserver& observer = {}) {
    ScalingOutcome o = run_scaling(k, p, pt, opts, DenominatorGuard::underflow, observer);
    const double cost = k.transport_cost(o.alpha, o.alpha_tilde);
    SinkhornResult r = assemble_result(std::move(o), p, pt, k.lambda(), cost, std::log(k.scale()));
    if (opts.keep_plan) r.plan = plan_from_scalings(r.alpha, r.alpha_tilde, k, opts.cap);
    return r;
}

/// Builds the kernel from the measures and iterates.
inline SinkhornResult sinkhorn_iterate(const DiscreteMeasure& P, const DiscreteMeasure& Q, double lambda, double order,
                                       const DenseSinkhornOptions& opts = {},
                                       const IterationObserver& observer = {}) {
    KernelMatrix k(P, Q, lambda, order, opts.cap);
    k.set_threads(opts.threads);
    SinkhornResult r = sinkhorn_iterate(k, P.weights(), Q.weights(), opts, observer);
    if (r.plan) {
        r.plan->row_marginal.assign(P.weights().begin(), P.weights().end());
        r.plan->col_marginal.assign(Q.weights().begin(), Q.weights().end());
    }
    return r;
}

struct BoundsReport {
    double lambda = 0.0;
    double exact = 0.0;  // d^r
    double lower = 0.0;
    double upper = 0.0;
    double entropy_sinkhorn = 0.0;  // H(pi^s)
    double entropy_exact = 0.0;     // H(pi^W)
    double entropy_product = 0.0;   // H(p p~^T)
    bool sandwich_applies = false;  // lambda >= (H(P) + H(P~)) / eps
    bool sandwich = false;          // s <= d^r <= s~ + eps
    bool upper_gap = false;         // 0 <= s~ - d^r <= (H(pi^s) - H(pi^W)) / lambda
    bool lower_gap = false;         // 0 <= d^r - s <= H(pi^s)/lambda <= H(p p~^T)/lambda
};

/// Checks the sandwich and gap inequalities of a Sinkhorn run against an exact
/// solution, each with additive slack `tol`.
inline BoundsReport divergence_bounds_check(const DiscreteMeasure& P, const DiscreteMeasure& Q,
                                            const SinkhornResult& s, const ExactResult& exact, double lambda,
                                            double epsilon, double tol = 1e-9) {
    BoundsReport b;
    b.lambda = lambda;
    b.exact = exact.cost;
    b.lower = s.lower;
    b.upper = s.upper;
    b.entropy_sinkhorn = s.entropy;
    b.entropy_exact = entropy(exact.plan.entries);
    b.entropy_product = entropy(P) + entropy(Q);
    b.sandwich_applies = lambda >= b.entropy_product / epsilon;
    b.sandwich = b.lower <= b.exact + tol && b.exact <= b.upper + epsilon + tol;
    const double up = b.upper - b.exact;
    const double lo = b.exact - b.lower;
    b.upper_gap = up >= -tol && up <= (b.entropy_sinkhorn - b.entropy_exact) / lambda + tol;
    b.lower_gap = lo >= -tol && lo <= b.entropy_sinkhorn / lambda + tol &&
                  b.entropy_sinkhorn / lambda <= b.entropy_product / lambda + tol;
    return b;
}

}  // namespace otfs
