#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "otfs/fastsum.hpp"
#include "otfs/random.hpp"

using namespace otfs;

namespace {

std::vector<double> ball_points(Rng& rng, int dim, std::size_t n, double radius) {
    std::vector<double> v(n * static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        double s;
        do {
            s = 0.0;
            for (int d = 0; d < dim; ++d) {
                double& c = v[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)];
                c = rng.uniform(-radius, radius);
                s += c * c;
            }
        } while (std::sqrt(s) > radius);
    }
    return v;
}

std::vector<double> positive_weights(Rng& rng, std::size_t n) {
    std::vector<double> w(n);
    for (auto& x : w) x = rng.uniform(0.1, 1.0);
    return w;
}

double rel_max_error(const std::vector<double>& a, const std::vector<double>& b) {
    double e = 0.0, m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        e = std::max(e, std::abs(a[i] - b[i]));
        m = std::max(m, std::abs(b[i]));
    }
    return e / m;
}

FastsumOptions small_options(int dim, int N) {
    FastsumOptions o = default_fastsum_options(dim);
    o.geometry.N = N;
    return o;
}

}  // namespace

TEST(TwoPointTaylor, ReproducesPolynomialsOfFullDegree) {
    // f(x) = sum c_i x^i of degree 2q-1 is reproduced from q conditions per end
    const int q = 5;
    const std::vector<double> c = {0.3, -1.2, 0.7, 2.0, -0.4, 0.05, 1.1, -0.9, 0.25, 0.6};
    auto taylor_at = [&](double x0) {
        std::vector<double> t(q, 0.0);
        for (int k = 0; k < q; ++k) {
            // f^(k)(x0)/k! = sum_i c_i binom(i,k) x0^(i-k)
            for (int i = k; i < static_cast<int>(c.size()); ++i) {
                double binom = 1.0;
                for (int j = 1; j <= k; ++j) binom = binom * (i - k + j) / j;
                t[static_cast<std::size_t>(k)] += c[static_cast<std::size_t>(i)] * binom * std::pow(x0, i - k);
            }
        }
        return t;
    };
    const double a = -0.4, b = 0.9;
    TwoPointTaylor P(a, b, taylor_at(a), taylor_at(b));
    for (double x = a; x <= b; x += 0.05) {
        double f = 0.0;
        for (std::size_t i = c.size(); i-- > 0;) f = f * x + c[i];
        EXPECT_NEAR(P(x), f, 1e-12) << x;
    }
}

TEST(TwoPointTaylor, MismatchedDataThrows) {
    std::vector<double> a = {1.0, 2.0}, b = {1.0};
    EXPECT_THROW(TwoPointTaylor(0.0, 1.0, a, b), DomainError);
    EXPECT_THROW(TwoPointTaylor(1.0, 0.0, a, a), DomainError);
}

TEST(GaussLegendre, ExactUpToDegree) {
    for (int G : {1, 2, 5, 10}) {
        const QuadratureRule rule = gauss_legendre(G);
        double wsum = 0.0;
        for (double w : rule.weights) wsum += w;
        EXPECT_NEAR(wsum, 1.0, 1e-14);
        for (int k = 0; k <= 2 * G - 1; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], k);
            EXPECT_NEAR(s, 1.0 / (k + 1), 1e-14) << "G=" << G << " k=" << k;
        }
    }
}

TEST(RadialKernel, TaylorSeriesSumsToKernel) {
    for (int r : {1, 2})
        for (KernelKind kind : {KernelKind::exponential, KernelKind::log_weighted}) {
            const RadialKernel k{kind, 7.5, r};
            const double rho0 = 0.2;
            const std::vector<double> t = k.taylor(rho0, 30);
            for (double s : {-0.05, 0.01, 0.04}) {
                double sum = 0.0;
                for (std::size_t i = t.size(); i-- > 0;) sum = sum * s + t[i];
                EXPECT_NEAR(sum, k(rho0 + s), 1e-13) << "r=" << r;
            }
        }
}

TEST(RadialKernel, Validation) {
    EXPECT_THROW(check_kernel(RadialKernel{KernelKind::exponential, 0.0, 2}), DomainError);
    EXPECT_THROW(check_kernel(RadialKernel{KernelKind::exponential, 1.0, 3}), UnsupportedOrder);
}

TEST(BoundaryPolynomial, InterpolationConditionsLaplace) {
    FastsumOptions o = small_options(1, 64);
    RegularizedKernel K = build_regularized_kernel(3.0, 1, 1, o);
    const double L = o.geometry.L;
    EXPECT_NEAR(K.boundary()(L), std::exp(-3.0 * L), 1e-15);
    EXPECT_NEAR(K.boundary().derivative(L), -3.0 * std::exp(-3.0 * L), 1e-14);
    EXPECT_NEAR(K.boundary().derivative(0.5 * o.geometry.h), 0.0, 1e-15);
}

TEST(BoundaryPolynomial, ContactOrderAtBothEnds) {
    // K_B - (Taylor of K at L) = O(s^p) and K_B(h/2 - s) - K_B(h/2) = O(s^p)
    FastsumOptions o = small_options(1, 64);
    o.geometry.p = 4;
    for (int r : {1, 2}) {
        const RadialKernel k{KernelKind::exponential, 5.0, r};
        RegularizedKernel K(k, 1, o);
        const double L = o.geometry.L, H = 0.5 * o.geometry.h;
        const std::vector<double> t = k.taylor(L, o.geometry.p);
        auto left_gap = [&](double s) {
            double taylor = 0.0;
            for (std::size_t i = t.size(); i-- > 0;) taylor = taylor * s + t[i];
            return std::abs(K.boundary()(L + s) - taylor);
        };
        auto right_gap = [&](double s) { return std::abs(K.boundary()(H - s) - K.boundary()(H)); };
        const double order_left = std::log2(left_gap(0.02) / left_gap(0.01));
        const double order_right = std::log2(right_gap(0.02) / right_gap(0.01));
        EXPECT_NEAR(order_left, 4.0, 0.3) << "r=" << r;
        EXPECT_NEAR(order_right, 4.0, 0.3) << "r=" << r;
    }
}

TEST(BoundaryPolynomial, FiniteDifferenceDerivativesMatch) {
    const FastsumOptions o = small_options(1, 64);
    const RegularizedKernel K = build_regularized_kernel(4.0, 2, 1, o);
    const double L = o.geometry.L, H = 0.5 * o.geometry.h, s = 1e-3;
    const RadialKernel& k = K.kernel();
    auto d1 = [&](auto f, double x) { return (f(x + s) - f(x - s)) / (2 * s); };
    auto d2 = [&](auto f, double x) { return (f(x + s) - 2 * f(x) + f(x - s)) / (s * s); };
    auto kb = [&](double x) { return K.boundary()(x); };
    auto kk = [&](double x) { return k(x); };
    EXPECT_NEAR(d1(kb, L) / d1(kk, L), 1.0, 1e-6);
    EXPECT_NEAR(d2(kb, L) / d2(kk, L), 1.0, 1e-6);
    EXPECT_NEAR(d1(kb, H), 0.0, 1e-9);
    EXPECT_NEAR(d2(kb, H), 0.0, 1e-6);
}

TEST(RegularizedKernel, GeometryValidation) {
    FastsumOptions o = small_options(1, 64);
    o.geometry.L = 0.5;
    EXPECT_THROW(build_regularized_kernel(1.0, 2, 1, o), GeometryError);
    o.geometry.L = 0.25;
    o.geometry.p = 1;
    EXPECT_THROW(build_regularized_kernel(1.0, 2, 1, o), GeometryError);
    o.geometry.p = 10;
    o.geometry.N = 63;
    EXPECT_THROW(build_regularized_kernel(1.0, 2, 1, o), GeometryError);
    o.geometry.N = 64;
    EXPECT_THROW(build_regularized_kernel(1.0, 3, 1, o), UnsupportedOrder);
    EXPECT_THROW(build_regularized_kernel(1.0, 2, 4, o), DimensionError);
}

TEST(RegularizedKernel, CoefficientsConjugateSymmetric) {
    for (int dim : {1, 2}) {
        const RegularizedKernel K = build_regularized_kernel(12.0, 2, dim, small_options(dim, 32));
        const auto b = K.coefficients();
        const int N = 32;
        const std::size_t total = b.size();
        for (std::size_t i = 0; i < total; ++i) {
            // index of -k, skipping the unpaired -N/2 rows
            std::size_t rem = i, mirror = 0;
            bool paired = true;
            std::vector<int> ks;
            for (int d = 0; d < dim; ++d) {
                ks.insert(ks.begin(), static_cast<int>(rem % N) - N / 2);
                rem /= N;
            }
            for (int kd : ks) {
                if (kd == -N / 2) paired = false;
                mirror = mirror * N + static_cast<std::size_t>(-kd + N / 2);
            }
            EXPECT_LT(std::abs(b[i].imag()), 1e-14);
            if (paired) {
                EXPECT_NEAR(std::abs(b[i] - std::conj(b[mirror])), 0.0, 1e-15);
            }
        }
    }
}

TEST(RegularizedKernel, FourierSeriesReproducesGaussInsideSupport) {
    const int dim = 2;
    const FastsumOptions o = default_fastsum_options(dim);
    const RegularizedKernel K = build_regularized_kernel(20.0, 2, dim, o);
    Rng rng(11);
    const std::vector<double> x = ball_points(rng, dim, 20, o.geometry.L);
    const std::vector<Complex> b(K.coefficients().begin(), K.coefficients().end());
    const std::vector<Complex> f = ndft_direct(dim, o.geometry.N, b, x);
    for (std::size_t i = 0; i < 20; ++i) {
        const double rho = std::hypot(x[2 * i], x[2 * i + 1]);
        EXPECT_NEAR(f[i].real(), std::exp(-20.0 * rho * rho), 1e-12);
    }
}

TEST(RegularizedKernel, PeriodicUnderIntegerShifts) {
    const RegularizedKernel K = build_regularized_kernel(9.0, 1, 2, small_options(2, 64));
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const std::vector<double> x = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        const std::vector<double> y = {x[0] + 3.0, x[1] - 2.0};
        EXPECT_NEAR(K.periodic(x), K.periodic(y), 1e-14);
    }
}

TEST(RegularizedKernel, RadialProfilePieces) {
    const FastsumOptions o = default_fastsum_options(1);
    const RegularizedKernel K = build_regularized_kernel(6.0, 1, 1, o);
    ASSERT_TRUE(K.has_nearfield());
    const double a = K.nearfield_radius();
    EXPECT_DOUBLE_EQ(a, o.geometry.h * o.near_cells / (o.nfft.oversampling * o.geometry.N));
    EXPECT_NEAR(K.radial(a), std::exp(-6.0 * a), 1e-14);
    EXPECT_DOUBLE_EQ(K.radial(0.2), std::exp(-6.0 * 0.2));
    EXPECT_DOUBLE_EQ(K.radial(0.6), K.radial(0.5));
    EXPECT_EQ(K.nearfield_difference(a * 1.01), 0.0);
    EXPECT_NEAR(K.radial(0.0) + K.nearfield_difference(0.0), 1.0, 1e-15);
    EXPECT_FALSE(build_regularized_kernel(6.0, 2, 1, o).has_nearfield());
}

TEST(Fastsum, SingleSourceGivesKernel) {
    const int dim = 2;
    const FastsumOptions o = default_fastsum_options(dim);
    Rng rng(5);
    const std::vector<double> y = {0.03, -0.02};
    const std::vector<double> x = ball_points(rng, dim, 40, 0.125);
    for (int r : {1, 2}) {
        const RegularizedKernel K = build_regularized_kernel(10.0, r, dim, o);
        const std::vector<double> w = {1.0};
        const std::vector<double> t = fastsum_apply(K, y, w, x);
        for (std::size_t i = 0; i < 40; ++i) {
            const double rho = std::hypot(x[2 * i] - y[0], x[2 * i + 1] - y[1]);
            EXPECT_NEAR(t[i], std::exp(-10.0 * std::pow(rho, r)), r == 2 ? 1e-12 : 1e-8);
        }
    }
}

TEST(Fastsum, ZeroWeightsGiveZero) {
    Rng rng(8);
    const FastsumOptions o = small_options(2, 64);
    const RegularizedKernel K = build_regularized_kernel(3.0, 1, 2, o);
    const std::vector<double> y = ball_points(rng, 2, 30, 0.125), x = ball_points(rng, 2, 25, 0.125);
    const std::vector<double> t = fastsum_apply(K, y, std::vector<double>(30, 0.0), x);
    for (double v : t) EXPECT_EQ(v, 0.0);
}

TEST(Fastsum, GaussD2MatchesDirectSum) {
    Rng rng(2024);
    const int dim = 2;
    const std::vector<double> y = ball_points(rng, dim, 64, 0.125), x = ball_points(rng, dim, 64, 0.125);
    const std::vector<double> w = positive_weights(rng, 64);
    const RegularizedKernel K = build_regularized_kernel(10.0, 2, dim, default_fastsum_options(dim));
    EXPECT_LE(rel_max_error(fastsum_apply(K, y, w, x), direct_sum(K.kernel(), dim, y, w, x)), 1e-9);
}

TEST(Fastsum, RandomInstancesMatchDirectSum) {
    Rng rng(99);
    for (int inst = 0; inst < 16; ++inst) {
        const int dim = 1 + inst % 2;
        const int r = 1 + (inst / 2) % 2;
        const double lambda = rng.uniform(1.0, 50.0);
        const std::size_t n = 1 + rng.below(256), m = 1 + rng.below(256);
        const std::vector<double> y = ball_points(rng, dim, m, 0.125), x = ball_points(rng, dim, n, 0.125);
        const std::vector<double> w = positive_weights(rng, m);
        const RegularizedKernel K = build_regularized_kernel(lambda, r, dim, default_fastsum_options(dim));
        const double err = rel_max_error(fastsum_apply(K, y, w, x), direct_sum(K.kernel(), dim, y, w, x));
        EXPECT_LE(err, r == 2 ? 1e-9 : 1e-6) << "dim=" << dim << " r=" << r << " lambda=" << lambda;
    }
}

TEST(Fastsum, ThreeDimensionalDefaults) {
    Rng rng(31);
    const int dim = 3;
    const std::vector<double> y = ball_points(rng, dim, 100, 0.125), x = ball_points(rng, dim, 90, 0.125);
    const std::vector<double> w = positive_weights(rng, 100);
    for (int r : {1, 2}) {
        const RegularizedKernel K = build_regularized_kernel(8.0, r, dim, default_fastsum_options(dim));
        EXPECT_LE(rel_max_error(fastsum_apply(K, y, w, x), direct_sum(K.kernel(), dim, y, w, x)),
                  r == 2 ? 1e-9 : 1e-6);
    }
}

TEST(Fastsum, TransposedMatchesSwappedDirectSum) {
    Rng rng(77);
    for (int r : {1, 2}) {
        const int dim = 2;
        const FastsumOptions o = default_fastsum_options(dim);
        const std::vector<double> y = ball_points(rng, dim, 70, 0.125), x = ball_points(rng, dim, 50, 0.125);
        const std::vector<double> wx = positive_weights(rng, 50);
        const RegularizedKernel K = build_regularized_kernel(25.0, r, dim, o);
        FastSummation fs(dim, y, x, o);
        const std::vector<double> s = fs.transposed(K, wx);
        EXPECT_LE(rel_max_error(s, direct_sum(K.kernel(), dim, x, wx, y)), r == 2 ? 1e-9 : 1e-6);
    }
}

TEST(Fastsum, LinearInWeights) {
    Rng rng(12);
    const int dim = 1;
    const FastsumOptions o = default_fastsum_options(dim);
    const std::vector<double> y = ball_points(rng, dim, 40, 0.125), x = ball_points(rng, dim, 30, 0.125);
    const std::vector<double> u = positive_weights(rng, 40), v = positive_weights(rng, 40);
    std::vector<double> comb(40);
    for (std::size_t j = 0; j < 40; ++j) comb[j] = 2.0 * u[j] - 0.5 * v[j];
    for (int r : {1, 2}) {
        const RegularizedKernel K = build_regularized_kernel(15.0, r, dim, o);
        FastSummation fs(dim, y, x, o);
        const std::vector<double> tu = fs.forward(K, u), tv = fs.forward(K, v), tc = fs.forward(K, comb);
        for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(tc[i], 2.0 * tu[i] - 0.5 * tv[i], 1e-12);
    }
}

TEST(Fastsum, PositiveForPositiveWeights) {
    Rng rng(13);
    for (int dim : {1, 2}) {
        const FastsumOptions o = default_fastsum_options(dim);
        const std::vector<double> y = ball_points(rng, dim, 200, 0.125), x = ball_points(rng, dim, 200, 0.125);
        const std::vector<double> w = positive_weights(rng, 200);
        for (int r : {1, 2}) {
            const RegularizedKernel K = build_regularized_kernel(50.0, r, dim, o);
            for (double t : fastsum_apply(K, y, w, x)) EXPECT_GT(t, 0.0);
        }
    }
}

TEST(Fastsum, ErrorDecreasesWithBandwidth) {
    Rng rng(21);
    const int dim = 1;
    const std::vector<double> y = ball_points(rng, dim, 100, 0.125), x = ball_points(rng, dim, 100, 0.125);
    const std::vector<double> w = positive_weights(rng, 100);
    const RadialKernel k{KernelKind::exponential, 30.0, 2};
    const std::vector<double> exact = direct_sum(k, dim, y, w, x);
    double previous = 1.0;
    for (int N : {16, 32, 64, 128, 256}) {
        const FastsumOptions o = small_options(dim, N);
        const double err = rel_max_error(fastsum_apply(RegularizedKernel(k, dim, o), y, w, x), exact);
        EXPECT_TRUE(err < previous || err < 1e-13) << "N=" << N << " err=" << err;
        previous = err;
    }
    EXPECT_LT(previous, 1e-12);
}

TEST(Fastsum, LogWeightedKernelMatchesDirectSum) {
    Rng rng(41);
    const int dim = 2;
    const std::vector<double> y = ball_points(rng, dim, 80, 0.125), x = ball_points(rng, dim, 60, 0.125);
    const std::vector<double> w = positive_weights(rng, 80);
    for (int r : {1, 2}) {
        const RadialKernel k{KernelKind::log_weighted, 20.0, r};
        const RegularizedKernel K(k, dim, default_fastsum_options(dim));
        EXPECT_LE(rel_max_error(fastsum_apply(K, y, w, x), direct_sum(k, dim, y, w, x)), r == 2 ? 1e-9 : 1e-6);
    }
}

TEST(Fastsum, PointsOutsideBoxRejected) {
    const FastsumOptions o = small_options(2, 32);
    const RegularizedKernel K = build_regularized_kernel(1.0, 2, 2, o);
    const std::vector<double> inside = {0.0, 0.0}, outside = {0.2, 0.0};
    const std::vector<double> w = {1.0};
    EXPECT_THROW(fastsum_apply(K, outside, w, inside), GeometryViolation);
    EXPECT_THROW(fastsum_apply(K, inside, w, outside), GeometryViolation);
}

TEST(Fastsum, KernelPlanMismatch) {
    const FastsumOptions o = small_options(1, 32);
    const std::vector<double> y = {0.0}, w = {1.0, 2.0};
    FastSummation fs(1, y, y, o);
    EXPECT_THROW(fs.forward(build_regularized_kernel(1.0, 2, 1, small_options(1, 64)), std::vector<double>{1.0}),
                 PlanMismatch);
    EXPECT_THROW(fs.forward(build_regularized_kernel(1.0, 2, 1, o), w), PlanMismatch);
}

TEST(NearPairs, MatchesBruteForce) {
    Rng rng(17);
    for (int dim : {1, 2, 3}) {
        const std::vector<double> a = ball_points(rng, dim, 150, 0.125), b = ball_points(rng, dim, 120, 0.125);
        const double radius = 0.03;
        const std::vector<NearPair> pairs = near_pairs(a, b, dim, radius, 0.125);
        std::size_t brute = 0;
        for (std::size_t i = 0; i < 150; ++i)
            for (std::size_t j = 0; j < 120; ++j) {
                double s = 0.0;
                for (int d = 0; d < dim; ++d) {
                    const double diff = a[i * dim + d] - b[j * dim + d];
                    s += diff * diff;
                }
                if (std::sqrt(s) < radius) ++brute;
            }
        EXPECT_EQ(pairs.size(), brute) << "dim=" << dim;
        for (const NearPair& p : pairs) EXPECT_LT(p.distance, radius);
    }
}

TEST(ScaleToGeometry, IdentityWhenInside) {
    const std::vector<double> a = {0.01, -0.02, 0.05, 0.0}, b = {-0.1, 0.03};
    const ScaledClouds s = scale_to_geometry(a, b, 2, 0.25, ScalePolicy::keep_if_inside);
    EXPECT_EQ(s.map.scale, 1.0);
    EXPECT_EQ(s.a, a);
    EXPECT_EQ(s.b, b);
    EXPECT_EQ(s.map.effective_lambda(7.0, 2), 7.0);
}

TEST(ScaleToGeometry, EffectiveLambdaPreservesSums) {
    Rng rng(4);
    std::vector<double> a(2 * 50), b(2 * 40);
    for (auto& v : a) v = rng.uniform(0.0, 10.0);
    for (auto& v : b) v = rng.uniform(0.0, 10.0);
    const std::vector<double> w = positive_weights(rng, 40);
    const ScaledClouds s = scale_to_geometry(a, b, 2, 0.25);
    for (const auto* pts : {&s.a, &s.b})
        for (std::size_t i = 0; i < pts->size() / 2; ++i)
            EXPECT_LE(std::hypot((*pts)[2 * i], (*pts)[2 * i + 1]), 0.125);
    for (int r : {1, 2}) {
        const double lambda = 0.05;
        const std::vector<double> orig = direct_sum({KernelKind::exponential, lambda, r}, 2, b, w, a);
        const std::vector<double> mapped =
            direct_sum({KernelKind::exponential, s.map.effective_lambda(lambda, r), r}, 2, s.b, w, s.a);
        EXPECT_LE(rel_max_error(mapped, orig), 1e-12);
    }
}

TEST(ScaleToGeometry, SinglePointCloud) {
    const std::vector<double> a = {3.0, 4.0}, b = {3.0, 4.0};
    const ScaledClouds s = scale_to_geometry(a, b, 2, 0.25);
    EXPECT_EQ(s.a[0], 0.0);
    EXPECT_EQ(s.a[1], 0.0);
    const std::vector<double> w = {2.0};
    const RegularizedKernel K = build_regularized_kernel(5.0, 2, 2, default_fastsum_options(2));
    EXPECT_NEAR(fastsum_apply(K, s.b, w, s.a)[0], 2.0, 1e-12);
}

TEST(DirectSum, SizeCap) {
    const std::vector<double> a(10, 0.0), w(10, 1.0);
    EXPECT_THROW(direct_sum({KernelKind::exponential, 1.0, 2}, 1, a, w, a, 50), SizeCapExceeded);
}
