#pragma once

// Exact discrete Wasserstein distance.
//
// wasserstein_lp solves the transportation LP with a primal network simplex
// on the complete bipartite graph (sources = atoms of P, sinks = atoms of Q)
// plus an artificial root. The spanning tree is kept strongly feasible, which
// rules out cycling under degeneracy; entering arcs are priced by block
// search. Intended for desk-scale instances, bounded by a cap on n*m.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"
#include "measures.hpp"

namespace otfs {

struct CostSpec {
    /// Order r >= 1 of the cost d(x,y)^r.
    double order = 2.0;
};

/// Dense coupling with its target marginals.
struct TransportPlan {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> entries;  // row-major
    std::vector<double> row_marginal;
    std::vector<double> col_marginal;

    double at(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }

    std::vector<double> row_sums() const {
        std::vector<double> s(rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) s[i] += entries[i * cols + j];
        return s;
    }
    std::vector<double> col_sums() const {
        std::vector<double> s(cols, 0.0);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) s[j] += entries[i * cols + j];
        return s;
    }
};

struct ExactResult {
    double distance = 0.0;  // d_r
    double cost = 0.0;      // d_r^r
    TransportPlan plan;
    std::size_t pivots = 0;
};

inline constexpr std::size_t kDefaultExactCap = 250000;

namespace detail {

class TransportSimplex {
public:
    TransportSimplex(std::span<const double> supply, std::span<const double> demand,
                     std::vector<double> cost)
        : n_(supply.size()), m_(demand.size()), cost_(std::move(cost)) {
        nodes_ = n_ + m_ + 1;
        root_ = n_ + m_;
        real_arcs_ = n_ * m_;
        const std::size_t arcs = real_arcs_ + n_ + m_;
        flow_.assign(arcs, 0.0);
        in_tree_.assign(arcs, 0);

        double max_cost = 0.0;
        for (double c : cost_) max_cost = std::max(max_cost, c);
        art_cost_ = (max_cost + 1.0) * static_cast<double>(nodes_);
        tol_ = 64.0 * std::numeric_limits<double>::epsilon() * art_cost_;

        adj_.assign(nodes_, {});
        for (std::size_t u = 0; u < n_ + m_; ++u) {
            const std::size_t e = real_arcs_ + u;
            flow_[e] = u < n_ ? supply[u] : demand[u - n_];
            in_tree_[e] = 1;
            adj_[u].push_back(e);
            adj_[root_].push_back(e);
        }
        parent_.assign(nodes_, 0);
        pred_.assign(nodes_, 0);
        up_.assign(nodes_, 0);
        depth_.assign(nodes_, 0);
        pi_.assign(nodes_, 0.0);
        rebuild_tree();
        block_ = std::max<std::size_t>(10, static_cast<std::size_t>(std::sqrt(double(real_arcs_))));
    }

    std::size_t solve() {
        std::size_t pivots = 0;
        std::size_t in_arc;
        while (find_entering(in_arc)) {
            pivot(in_arc);
            ++pivots;
        }
        return pivots;
    }

    double flow(std::size_t i, std::size_t j) const { return flow_[i * m_ + j]; }

private:
    std::size_t src(std::size_t e) const {
        if (e < real_arcs_) return e / m_;
        const std::size_t u = e - real_arcs_;
        return u < n_ ? u : root_;
    }
    std::size_t tgt(std::size_t e) const {
        if (e < real_arcs_) return n_ + e % m_;
        const std::size_t u = e - real_arcs_;
        return u < n_ ? root_ : u;
    }
    double cost(std::size_t e) const { return e < real_arcs_ ? cost_[e] : art_cost_; }
    double reduced(std::size_t e) const { return cost(e) + pi_[src(e)] - pi_[tgt(e)]; }

    // Parent pointers, depths and potentials from the current tree arcs.
    void rebuild_tree() {
        order_.clear();
        order_.push_back(root_);
        parent_[root_] = root_;
        depth_[root_] = 0;
        pi_[root_] = 0.0;
        for (std::size_t k = 0; k < order_.size(); ++k) {
            const std::size_t u = order_[k];
            for (std::size_t e : adj_[u]) {
                const std::size_t a = src(e);
                const std::size_t b = tgt(e);
                const std::size_t v = (a == u) ? b : a;
                if (u != root_ && e == pred_[u]) continue;
                parent_[v] = u;
                pred_[v] = e;
                up_[v] = (a == v) ? 1 : 0;  // arc points v -> parent
                depth_[v] = depth_[u] + 1;
                // tree arcs have zero reduced cost
                pi_[v] = up_[v] ? pi_[u] - cost(e) : pi_[u] + cost(e);
                order_.push_back(v);
            }
        }
    }

    bool find_entering(std::size_t& in_arc) {
        double best = -tol_;
        bool found = false;
        std::size_t scanned = 0;
        std::size_t in_block = 0;
        for (std::size_t k = 0; k < real_arcs_; ++k) {
            const std::size_t e = next_arc_;
            next_arc_ = (next_arc_ + 1 == real_arcs_) ? 0 : next_arc_ + 1;
            ++scanned;
            ++in_block;
            if (!in_tree_[e]) {
                const double rc = reduced(e);
                if (rc < best) {
                    best = rc;
                    in_arc = e;
                    found = true;
                }
            }
            if (in_block == block_) {
                if (found) return true;
                in_block = 0;
            }
        }
        return found;
    }

    void pivot(std::size_t in_arc) {
        const std::size_t first = src(in_arc);
        const std::size_t second = tgt(in_arc);
        std::size_t a = first;
        std::size_t b = second;
        while (a != b) {
            if (depth_[a] >= depth_[b])
                a = parent_[a];
            else
                b = parent_[b];
        }
        const std::size_t join = a;

        const double inf = std::numeric_limits<double>::infinity();
        double delta = inf;
        std::size_t u_out = root_;
        for (std::size_t u = first; u != join; u = parent_[u]) {
            const double d = up_[u] ? std::max(0.0, flow_[pred_[u]]) : inf;
            if (d < delta) {
                delta = d;
                u_out = u;
            }
        }
        for (std::size_t u = second; u != join; u = parent_[u]) {
            const double d = up_[u] ? inf : std::max(0.0, flow_[pred_[u]]);
            if (d <= delta) {
                delta = d;
                u_out = u;
            }
        }
        if (u_out == root_) throw Error("transport simplex: unbounded cycle");

        if (delta > 0.0) {
            flow_[in_arc] += delta;
            for (std::size_t u = first; u != join; u = parent_[u])
                flow_[pred_[u]] += up_[u] ? -delta : delta;
            for (std::size_t u = second; u != join; u = parent_[u])
                flow_[pred_[u]] += up_[u] ? delta : -delta;
        }
        const std::size_t out_arc = pred_[u_out];
        flow_[out_arc] = 0.0;
        in_tree_[out_arc] = 0;
        in_tree_[in_arc] = 1;
        erase_adj(src(out_arc), out_arc);
        erase_adj(tgt(out_arc), out_arc);
        adj_[src(in_arc)].push_back(in_arc);
        adj_[tgt(in_arc)].push_back(in_arc);
        rebuild_tree();
    }

    void erase_adj(std::size_t u, std::size_t e) {
        auto& v = adj_[u];
        v.erase(std::find(v.begin(), v.end(), e));
    }

    std::size_t n_, m_, nodes_, root_, real_arcs_;
    std::vector<double> cost_;
    std::vector<double> flow_;
    std::vector<std::uint8_t> in_tree_;
    std::vector<std::vector<std::size_t>> adj_;
    std::vector<std::size_t> parent_, pred_, depth_, order_;
    std::vector<std::uint8_t> up_;
    std::vector<double> pi_;
    double art_cost_ = 0.0;
    double tol_ = 0.0;
    std::size_t block_ = 10;
    std::size_t next_arc_ = 0;
};

inline void check_same_dim(const DiscreteMeasure& P, const DiscreteMeasure& Q) {
    if (P.dim() != Q.dim()) throw DimensionError("measures have different dimensions");
}

}  // namespace detail

inline ExactResult wasserstein_lp(const DiscreteMeasure& P, const DiscreteMeasure& Q,
                                  CostSpec cost = {}, std::size_t cap = kDefaultExactCap) {
    detail::check_same_dim(P, Q);
    if (!(cost.order >= 1.0)) throw DomainError("cost order r must be >= 1");
    const std::size_t n = P.size();
    const std::size_t m = Q.size();
    if (n * m > cap)
        throw SizeCapExceeded("exact solver: n*m = " + std::to_string(n * m) +
                              " exceeds cap " + std::to_string(cap));

    std::vector<double> c(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) c[i * m + j] = cost_power(P.point(i), Q.point(j), cost.order);

    detail::TransportSimplex simplex(P.weights(), Q.weights(), c);
    ExactResult res;
    res.pivots = simplex.solve();

    TransportPlan& plan = res.plan;
    plan.rows = n;
    plan.cols = m;
    plan.entries.resize(n * m);
    plan.row_marginal.assign(P.weights().begin(), P.weights().end());
    plan.col_marginal.assign(Q.weights().begin(), Q.weights().end());
    double total = 0.0;
    for (std::size_t e = 0; e < n * m; ++e) {
        const double f = std::max(0.0, simplex.flow(e / m, e % m));
        plan.entries[e] = f;
        total += f * c[e];
    }
    res.cost = total;
    res.distance = std::pow(total, 1.0 / cost.order);
    return res;
}

/// Monotone (CDF) coupling for D = 1; returns d_r.
inline double wasserstein_1d(const DiscreteMeasure& P, const DiscreteMeasure& Q, double r) {
    if (P.dim() != 1 || Q.dim() != 1) throw DimensionError("wasserstein_1d requires D = 1");
    if (!(r >= 1.0)) throw DomainError("cost order r must be >= 1");
    auto sorted = [](const DiscreteMeasure& M) {
        std::vector<std::size_t> idx(M.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return M.coords()[a] < M.coords()[b]; });
        return idx;
    };
    const auto ip = sorted(P);
    const auto iq = sorted(Q);
    std::size_t a = 0;
    std::size_t b = 0;
    double ra = P.weight(ip[0]);
    double rb = Q.weight(iq[0]);
    double total = 0.0;
    while (a < ip.size() && b < iq.size()) {
        const double mass = std::min(ra, rb);
        const double d = std::abs(P.coords()[ip[a]] - Q.coords()[iq[b]]);
        total += mass * (r == 1.0 ? d : std::pow(d, r));
        ra -= mass;
        rb -= mass;
        // advance whichever side is exhausted; both on ties
        const bool adv_a = ra <= rb;
        const bool adv_b = rb <= ra;
        if (adv_a && ++a < ip.size()) ra = P.weight(ip[a]);
        if (adv_b && ++b < iq.size()) rb = Q.weight(iq[b]);
    }
    return std::pow(total, 1.0 / r);
}

}  // namespace otfs
