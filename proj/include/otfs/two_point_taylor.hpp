#pragma once

// Radial kernels with Taylor expansions, two-point Taylor interpolation, and
// Gauss-Legendre rules on [0,1].

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "errors.hpp"

namespace otfs {

enum class KernelKind {
    exponential,   // exp(-lambda rho^r)
    log_weighted,  // lambda rho^r exp(-lambda rho^r)
};

struct RadialKernel {
    KernelKind kind = KernelKind::exponential;
    double lambda = 1.0;
    int order = 2;  // r in {1, 2}

    double exponent(double rho) const { return lambda * (order == 2 ? rho * rho : rho); }

    double operator()(double rho) const {
        const double g = exponent(rho);
        return kind == KernelKind::exponential ? std::exp(-g) : g * std::exp(-g);
    }

    /// Taylor coefficients f^(k)(rho0)/k!, k = 0..count-1, by power-series
    /// arithmetic on g(t) = lambda (rho0 + t)^r.
    std::vector<double> taylor(double rho0, int count) const {
        const auto n = static_cast<std::size_t>(count);
        std::vector<double> g(n, 0.0);
        if (n > 0) g[0] = exponent(rho0);
        if (order == 2) {
            if (n > 1) g[1] = 2.0 * lambda * rho0;
            if (n > 2) g[2] = lambda;
        } else if (n > 1) {
            g[1] = lambda;
        }
        // E = exp(-G):  k e_k = -sum_{j=1}^{k} j g_j e_{k-j}
        std::vector<double> e(n, 0.0);
        if (n > 0) e[0] = std::exp(-g[0]);
        for (std::size_t k = 1; k < n; ++k) {
            double s = 0.0;
            for (std::size_t j = 1; j <= k && j <= 2; ++j) s += static_cast<double>(j) * g[j] * e[k - j];
            e[k] = -s / static_cast<double>(k);
        }
        if (kind == KernelKind::exponential) return e;
        std::vector<double> out(n, 0.0);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j <= k && j <= 2; ++j) out[k] += g[j] * e[k - j];
        return out;
    }
};

inline void check_kernel(const RadialKernel& k) {
    if (!(k.lambda > 0.0) || !std::isfinite(k.lambda)) throw DomainError("kernel: lambda must be > 0");
    if (k.order != 1 && k.order != 2) throw UnsupportedOrder("kernel: order r must be 1 or 2");
}

/// Hermite interpolant on [a, b] of degree 2q-1 matching q Taylor
/// coefficients at each end, in the two-point Taylor form
///   P(x) = (1-u)^q R(u) + u^q S(1-u),  u = (x-a)/(b-a),
/// where R and S are degree q-1 polynomials evaluated by Horner's rule.
class TwoPointTaylor {
public:
    TwoPointTaylor() = default;

    TwoPointTaylor(double a, double b, std::span<const double> taylor_a, std::span<const double> taylor_b)
        : a_(a), b_(b) {
        if (taylor_a.size() != taylor_b.size() || taylor_a.empty())
            throw DomainError("two-point Taylor: need equal, nonzero numbers of conditions");
        if (!(b > a)) throw DomainError("two-point Taylor: need a < b");
        q_ = taylor_a.size();
        const double w = b - a;
        std::vector<double> A(q_), B(q_);
        double wk = 1.0;
        for (std::size_t k = 0; k < q_; ++k) {
            A[k] = taylor_a[k] * wk;
            B[k] = taylor_b[k] * wk * ((k % 2) ? -1.0 : 1.0);
            wk *= w;
        }
        r_.assign(q_, 0.0);
        s_.assign(q_, 0.0);
        for (std::size_t m = 0; m < q_; ++m) {
            for (std::size_t k = 0; k <= m; ++k) {
                const double c = binomial(q_ - 1 + m - k, m - k);
                r_[m] += c * A[k];
                s_[m] += c * B[k];
            }
        }
    }

    double operator()(double x) const {
        const double u = (x - a_) / (b_ - a_);
        const double v = 1.0 - u;
        return ipow(v, q_) * horner(r_, u) + ipow(u, q_) * horner(s_, v);
    }

    double left() const { return a_; }
    double right() const { return b_; }
    std::size_t conditions() const { return q_; }

private:
    static double binomial(std::size_t n, std::size_t k) {
        double r = 1.0;
        for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
        return r;
    }
    static double ipow(double x, std::size_t e) {
        double r = 1.0;
        for (std::size_t i = 0; i < e; ++i) r *= x;
        return r;
    }
    static double horner(const std::vector<double>& c, double x) {
        double r = 0.0;
        for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
        return r;
    }

    double a_ = 0.0;
    double b_ = 1.0;
    std::size_t q_ = 0;
    std::vector<double> r_;
    std::vector<double> s_;
};

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Legendre rule with `count` points on [0, 1]; exact for degree 2*count-1.
inline QuadratureRule gauss_legendre(int count) {
    QuadratureRule rule;
    const auto n = static_cast<std::size_t>(count);
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[i] = 0.5 * (1.0 - x);
        rule.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

}  // namespace otfs
