// Command-line front end: distance, sweep-lambda, bench, selftest.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "otfs/otfs.hpp"

using json = nlohmann::ordered_json;

namespace {

constexpr int kExitNumerical = 2;
constexpr int kExitValidation = 3;

struct InputArgs {
    std::string a_csv;
    std::string b_csv;
    std::string a_pgm;
    std::string b_pgm;
    bool weighted = false;
    std::size_t synthetic = 0;
    int dim = 2;
    std::uint64_t seed = 1;
};

struct SolverArgs {
    std::string method = "nfft-sinkhorn";
    double r = 2.0;
    double lambda = 20.0;
    double eps = 1e-9;
    std::size_t max_iter = 10000;
    int bandwidth = 0;
    int cutoff = 8;
    int taylor_order = 10;
    int near_cells = 16;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::size_t cap = otfs::kDefaultKernelCap;
    std::size_t exact_cap = otfs::kDefaultExactCap;
    std::string format = "json";
};

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void add_input_options(CLI::App& cmd, InputArgs& in) {
    cmd.add_option("--a", in.a_csv, "CSV point cloud for the first measure")->envname("OTFS_A");
    cmd.add_option("--b", in.b_csv, "CSV point cloud for the second measure")->envname("OTFS_B");
    cmd.add_option("--image-a", in.a_pgm, "PGM image for the first measure")->envname("OTFS_IMAGE_A");
    cmd.add_option("--image-b", in.b_pgm, "PGM image for the second measure")->envname("OTFS_IMAGE_B");
    cmd.add_flag("--weighted", in.weighted, "headerless CSV: last column is the weight");
    cmd.add_option("--synthetic", in.synthetic, "use two uniform random clouds of this size instead of files");
    cmd.add_option("--dim", in.dim, "dimension of synthetic clouds")->check(CLI::Range(1, 3));
    cmd.add_option("--seed", in.seed, "seed for synthetic data")->envname("OTFS_SEED");
}

void add_solver_options(CLI::App& cmd, SolverArgs& s, bool with_method) {
    if (with_method)
        cmd.add_option("--method", s.method, "exact | sinkhorn | nfft-sinkhorn")
            ->check(CLI::IsMember({"exact", "sinkhorn", "nfft-sinkhorn"}))
            ->envname("OTFS_METHOD");
    cmd.add_option("--r", s.r, "cost exponent r")->envname("OTFS_R");
    cmd.add_option("--lambda", s.lambda, "entropic regularization lambda")->envname("OTFS_LAMBDA");
    cmd.add_option("--eps", s.eps, "stopping tolerance on the l1 marginal residual")->envname("OTFS_EPS");
    cmd.add_option("--max-iter", s.max_iter, "iteration limit")->envname("OTFS_MAX_ITER");
    cmd.add_option("--bandwidth", s.bandwidth, "fast summation bandwidth N (0 = automatic)")
        ->envname("OTFS_BANDWIDTH");
    cmd.add_option("--cutoff", s.cutoff, "NFFT window cutoff m")->envname("OTFS_CUTOFF");
    cmd.add_option("--taylor-order", s.taylor_order, "smoothness p of the kernel regularization")
        ->envname("OTFS_TAYLOR_ORDER");
    cmd.add_option("--near-cells", s.near_cells, "nearfield radius in oversampled grid cells (r = 1)")
        ->envname("OTFS_NEAR_CELLS");
    cmd.add_option("--threads", s.threads, "worker threads for dense kernel products")->envname("OTFS_THREADS");
    cmd.add_option("--cap", s.cap, "maximum n*m entries for the dense kernel")->envname("OTFS_CAP");
    cmd.add_option("--exact-cap", s.exact_cap, "maximum n*m for the exact solver")->envname("OTFS_EXACT_CAP");
    cmd.add_option("--format", s.format, "json | csv")->check(CLI::IsMember({"json", "csv"}))->envname("OTFS_FORMAT");
}

std::pair<otfs::DiscreteMeasure, otfs::DiscreteMeasure> load_inputs(const InputArgs& in) {
    if (in.synthetic > 0) {
        otfs::Rng rng(in.seed);
        otfs::DiscreteMeasure a = otfs::uniform_cloud(rng, in.dim, in.synthetic);
        otfs::DiscreteMeasure b = otfs::uniform_cloud(rng, in.dim, in.synthetic);
        return {std::move(a), std::move(b)};
    }
    auto one = [&](const std::string& csv, const std::string& pgm, const char* which) {
        if (!csv.empty() && !pgm.empty())
            throw otfs::DomainError(std::string("give either a CSV or an image for measure ") + which);
        if (!pgm.empty()) return otfs::measure_from_image(otfs::io::read_pgm(pgm));
        if (!csv.empty()) return otfs::io::read_csv_measure(csv, {.weight_column = in.weighted});
        throw otfs::DomainError(std::string("missing input for measure ") + which);
    };
    return {one(in.a_csv, in.a_pgm, "a"), one(in.b_csv, in.b_pgm, "b")};
}

otfs::NfftSinkhornConfig nfft_config(const SolverArgs& s) {
    otfs::NfftSinkhornConfig c;
    c.lambda = s.lambda;
    if (s.r != 1.0 && s.r != 2.0) throw otfs::UnsupportedOrder("nfft-sinkhorn supports r = 1 or r = 2");
    c.order = static_cast<int>(s.r);
    c.epsilon = s.eps;
    c.max_iter = s.max_iter;
    c.bandwidth = s.bandwidth;
    c.cutoff = s.cutoff;
    c.smoothness = s.taylor_order;
    c.near_cells = s.near_cells;
    return c;
}

otfs::DenseSinkhornOptions dense_options(const SolverArgs& s) {
    otfs::DenseSinkhornOptions o;
    o.epsilon = s.eps;
    o.max_iter = s.max_iter;
    o.threads = s.threads;
    o.cap = s.cap;
    return o;
}

void fill_divergence(json& j, const otfs::SinkhornResult& r) {
    j["lower"] = r.lower;
    j["upper"] = r.upper;
    j["entropy"] = r.entropy;
    j["iterations"] = r.iterations;
    j["residual"] = r.residual;
    j["converged"] = r.converged;
}

/// Flattens nested objects into dotted keys.
void flatten(const json& j, const std::string& prefix, json& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object())
            flatten(*it, key, out);
        else
            out[key] = *it;
    }
}

std::string csv_cell(const json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

void emit(const std::vector<json>& rows, const std::string& format, std::ostream& out) {
    if (format == "json") {
        for (const json& r : rows) out << r.dump() << '\n';
        return;
    }
    std::vector<json> flat;
    for (const json& r : rows) {
        json f = json::object();
        flatten(r, "", f);
        flat.push_back(std::move(f));
    }
    if (flat.empty()) return;
    bool first = true;
    for (auto it = flat[0].begin(); it != flat[0].end(); ++it) {
        out << (first ? "" : ",") << it.key();
        first = false;
    }
    out << '\n';
    for (const json& f : flat) {
        first = true;
        for (auto it = flat[0].begin(); it != flat[0].end(); ++it) {
            out << (first ? "" : ",") << (f.contains(it.key()) ? csv_cell(f[it.key()]) : "");
            first = false;
        }
        out << '\n';
    }
}

int cmd_distance(const InputArgs& in, const SolverArgs& s) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto [P, Q] = load_inputs(in);
    const double load_ms = ms_since(t0);

    json report;
    report["method"] = s.method;
    report["inputs"] = {{"n", P.size()}, {"n_tilde", Q.size()}, {"dim", P.dim()},
                        {"r", s.r},      {"lambda", s.lambda}, {"eps", s.eps}};
    otfs::MemoryTracker tracker;
    bool converged = true;
    const auto t1 = std::chrono::steady_clock::now();
    {
        otfs::ScopedTracking scope(tracker);
        if (s.method == "exact") {
            const otfs::ExactResult r = otfs::wasserstein_lp(P, Q, {s.r}, s.exact_cap);
            report["distance"] = r.distance;
            report["d_r_pow_r"] = r.cost;
            report["pivots"] = r.pivots;
        } else if (s.method == "sinkhorn") {
            const otfs::SinkhornResult r = otfs::sinkhorn_iterate(P, Q, s.lambda, s.r, dense_options(s));
            fill_divergence(report, r);
            converged = r.converged;
        } else {
            const otfs::NfftSinkhornResult r = otfs::nfft_sinkhorn(P, Q, nfft_config(s));
            fill_divergence(report, r);
            report["fastsum"] = {{"bandwidth", r.bandwidth},
                                 {"scale", r.scale},
                                 {"scaled_lambda", r.scaled_lambda},
                                 {"near_pairs", r.near_pairs}};
            converged = r.converged;
        }
    }
    const double solve_ms = ms_since(t1);
    report["timings_ms"] = {{"load", load_ms}, {"solve", solve_ms}, {"total", ms_since(t0)}};
    report["memory"] = {{"peak_bytes", tracker.peak_bytes},
                        {"largest_array_elements", tracker.largest_elements}};
    emit({report}, s.format, std::cout);
    if (!converged) {
        std::cerr << "otfs: iteration limit reached before the residual met --eps\n";
        return kExitNumerical;
    }
    return 0;
}

int cmd_sweep(const InputArgs& in, const SolverArgs& s, const std::vector<double>& lambdas) {
    const auto [P, Q] = load_inputs(in);
    std::optional<double> exact;
    if (P.size() * Q.size() <= s.exact_cap) exact = otfs::wasserstein_lp(P, Q, {s.r}, s.exact_cap).cost;
    std::vector<json> rows;
    bool all_converged = true;
    for (double lam : lambdas) {
        SolverArgs sl = s;
        sl.lambda = lam;
        otfs::SinkhornResult r;
        if (s.method == "sinkhorn")
            r = otfs::sinkhorn_iterate(P, Q, lam, s.r, dense_options(sl));
        else
            r = otfs::nfft_sinkhorn(P, Q, nfft_config(sl));
        json row;
        row["lambda"] = lam;
        row["lower"] = r.lower;
        row["upper"] = r.upper;
        row["exact"] = exact ? json(*exact) : json(nullptr);
        row["iterations"] = r.iterations;
        row["converged"] = r.converged;
        all_converged = all_converged && r.converged;
        rows.push_back(std::move(row));
    }
    emit(rows, s.format, std::cout);
    return all_converged ? 0 : kExitNumerical;
}

/// 1-D: quantizer of U[0,1] against an empirical sample; 2-D/3-D: two uniform clouds.
std::pair<otfs::DiscreteMeasure, otfs::DiscreteMeasure> bench_instance(int dim, std::size_t n, std::uint64_t seed) {
    otfs::Rng rng(seed + n);
    if (dim == 1) {
        otfs::DiscreteMeasure q = otfs::quantile_quantizer([](double u) { return u; }, [](double x) {
            return std::clamp(x, 0.0, 1.0);
        }, static_cast<int>(n));
        std::vector<double> samples(n);
        for (double& x : samples) x = rng.uniform();
        return {std::move(q), otfs::empirical_measure(1, samples)};
    }
    otfs::DiscreteMeasure a = otfs::uniform_cloud(rng, dim, n);
    otfs::DiscreteMeasure b = otfs::uniform_cloud(rng, dim, n);
    return {std::move(a), std::move(b)};
}

int cmd_bench(const SolverArgs& s, int dim, std::uint64_t seed, const std::vector<std::size_t>& sizes,
              const std::vector<std::string>& methods, std::size_t iterations) {
    std::vector<json> rows;
    for (std::size_t n : sizes) {
        const auto [P, Q] = bench_instance(dim, n, seed);
        for (const std::string& method : methods) {
            json row;
            row["n"] = n;
            row["dim"] = dim;
            row["method"] = method;
            SolverArgs sb = s;
            sb.eps = 1e-300;  // fixed iteration budget
            sb.max_iter = iterations;
            otfs::MemoryTracker tracker;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                otfs::ScopedTracking scope(tracker);
                otfs::SinkhornResult r;
                if (method == "sinkhorn") {
                    if (P.size() * Q.size() > s.cap) throw otfs::SizeCapExceeded("cap");
                    r = otfs::sinkhorn_iterate(P, Q, s.lambda, s.r, dense_options(sb));
                } else {
                    r = otfs::nfft_sinkhorn(P, Q, nfft_config(sb));
                }
                row["wall_ms"] = ms_since(t0);
                row["peak_bytes"] = tracker.peak_bytes;
                row["iterations"] = r.iterations;
                row["lower"] = r.lower;
                row["upper"] = r.upper;
                row["status"] = "ok";
            } catch (const otfs::SizeCapExceeded&) {
                row["wall_ms"] = nullptr;
                row["peak_bytes"] = nullptr;
                row["iterations"] = nullptr;
                row["lower"] = nullptr;
                row["upper"] = nullptr;
                row["status"] = "skipped: cap";
            } catch (const otfs::NumericalError& e) {
                row["wall_ms"] = ms_since(t0);
                row["peak_bytes"] = tracker.peak_bytes;
                row["iterations"] = nullptr;
                row["lower"] = nullptr;
                row["upper"] = nullptr;
                row["status"] = std::string("failed: ") + e.what();
            }
            rows.push_back(std::move(row));
            std::cout << std::flush;
        }
    }
    emit(rows, s.format, std::cout);
    return 0;
}

double max_rel_error(const std::vector<std::complex<double>>& a, const std::vector<std::complex<double>>& b) {
    double e = 0.0, m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        e = std::max(e, std::abs(a[i] - b[i]));
        m = std::max(m, std::abs(b[i]));
    }
    return e / m;
}

double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double e = 0.0, m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        e = std::max(e, std::abs(a[i] - b[i]));
        m = std::max(m, std::abs(b[i]));
    }
    return e / m;
}

int cmd_selftest(std::uint64_t seed) {
    otfs::Rng rng(seed);
    int failures = 0;
    auto report = [&](const char* name, bool ok, double value, double limit) {
        std::printf("%s %-28s %.3e (limit %.1e)\n", ok ? "PASS" : "FAIL", name, value, limit);
        failures += ok ? 0 : 1;
    };
    auto nodes = [&](int dim, std::size_t n, double half) {
        std::vector<double> v(n * static_cast<std::size_t>(dim));
        for (double& x : v) x = rng.uniform(-half, half);
        return v;
    };

    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        const int dim = 1 + t % 2;
        const int N = 16;
        const std::vector<double> x = nodes(dim, 50, 0.5);
        std::vector<std::complex<double>> c(static_cast<std::size_t>(dim == 1 ? N : N * N));
        for (auto& v : c) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const otfs::NfftPlan plan(dim, N, x);
        worst = std::max(worst, max_rel_error(plan.trafo(c), otfs::ndft_direct(dim, N, c, x)));
    }
    report("nfft vs ndft", worst <= 1e-10, worst, 1e-10);

    worst = 0.0;
    double worst_r1 = 0.0;
    for (int t = 0; t < 8; ++t) {
        const int dim = 1 + t % 2;
        const int r = 1 + (t / 2) % 2;
        const std::vector<double> y = nodes(dim, 100, 0.088), x = nodes(dim, 90, 0.088);
        std::vector<double> w(100);
        for (double& v : w) v = rng.uniform(0.1, 1.0);
        const otfs::RegularizedKernel K =
            otfs::build_regularized_kernel(rng.uniform(1, 50), r, dim, otfs::default_fastsum_options(dim));
        const double e = max_rel_error(otfs::fastsum_apply(K, y, w, x), otfs::direct_sum(K.kernel(), dim, y, w, x));
        (r == 2 ? worst : worst_r1) = std::max(r == 2 ? worst : worst_r1, e);
    }
    report("fastsum vs direct (r=2)", worst <= 1e-9, worst, 1e-9);
    report("fastsum vs direct (r=1)", worst_r1 <= 1e-6, worst_r1, 1e-6);

    {
        const otfs::DiscreteMeasure P = otfs::random_weighted_cloud(rng, 2, 200);
        const otfs::DiscreteMeasure Q = otfs::random_weighted_cloud(rng, 2, 180);
        otfs::DenseSinkhornOptions d;
        d.epsilon = 1e-10;
        otfs::NfftSinkhornConfig c;
        c.epsilon = 1e-10;
        const otfs::SinkhornResult a = otfs::sinkhorn_iterate(P, Q, 20.0, 2.0, d);
        const otfs::NfftSinkhornResult b = otfs::nfft_sinkhorn(P, Q, c);
        const double diff = std::max(std::abs(a.lower - b.lower), std::abs(a.upper - b.upper));
        report("dense vs nfft sinkhorn", diff <= 1e-8, diff, 1e-8);
    }

    double violation = 0.0;
    for (int t = 0; t < 10; ++t) {
        const otfs::DiscreteMeasure P = otfs::random_weighted_cloud(rng, 2, 5 + rng.below(30));
        const otfs::DiscreteMeasure Q = otfs::random_weighted_cloud(rng, 2, 5 + rng.below(30));
        const double eps = 0.1;
        const double lambda = (otfs::entropy(P) + otfs::entropy(Q)) / eps;
        otfs::DenseSinkhornOptions d;
        d.epsilon = 1e-12;
        const otfs::SinkhornResult s = otfs::sinkhorn_iterate(P, Q, lambda, 2.0, d);
        const double w = otfs::wasserstein_lp(P, Q).cost;
        violation = std::max({violation, s.lower - w, w - (s.upper + eps)});
    }
    report("sandwich s <= d^r <= s~ + eps", violation <= 1e-7, std::max(violation, 0.0), 1e-7);
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wasserstein distances and Sinkhorn divergences with NFFT fast summation"};
    app.require_subcommand(1);

    InputArgs din;
    SolverArgs dsol;
    CLI::App* distance = app.add_subcommand("distance", "distance between two measures (JSON report)");
    add_input_options(*distance, din);
    add_solver_options(*distance, dsol, true);

    InputArgs sin;
    SolverArgs ssol;
    ssol.format = "csv";
    std::vector<double> lambdas = {5, 10, 15, 20, 25};
    CLI::App* sweep = app.add_subcommand("sweep-lambda", "lower/upper divergences over a lambda grid (CSV)");
    add_input_options(*sweep, sin);
    add_solver_options(*sweep, ssol, true);
    sweep->add_option("--lambdas", lambdas, "lambda values")->delimiter(',');

    SolverArgs bsol;
    bsol.format = "csv";
    int bdim = 1;
    std::uint64_t bseed = 1;
    std::size_t biters = 50;
    std::vector<std::size_t> sizes = {1000, 10000};
    std::vector<std::string> methods = {"sinkhorn", "nfft-sinkhorn"};
    CLI::App* bench = app.add_subcommand("bench", "timing and memory over problem sizes (CSV)");
    add_solver_options(*bench, bsol, false);
    bench->add_option("--sizes", sizes, "problem sizes n = n~")->delimiter(',');
    bench->add_option("--dim", bdim, "1: quantizer vs empirical sample; 2, 3: uniform clouds")->check(CLI::Range(1, 3));
    bench->add_option("--seed", bseed, "instance seed")->envname("OTFS_SEED");
    bench->add_option("--iterations", biters, "fixed iteration budget per run");
    bench->add_option("--methods", methods, "methods to time")
        ->delimiter(',')
        ->check(CLI::IsMember({"sinkhorn", "nfft-sinkhorn"}));

    std::uint64_t tseed = 7;
    CLI::App* selftest = app.add_subcommand("selftest", "run the oracle checks at desk scale");
    selftest->add_option("--seed", tseed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*distance) return cmd_distance(din, dsol);
        if (*sweep) {
            if (ssol.method == "exact") throw otfs::DomainError("sweep-lambda needs --method sinkhorn or nfft-sinkhorn");
            return cmd_sweep(sin, ssol, lambdas);
        }
        if (*bench) return cmd_bench(bsol, bdim, bseed, sizes, methods, biters);
        if (*selftest) return cmd_selftest(tseed);
    } catch (const otfs::NumericalError& e) {
        std::cerr << "otfs: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const otfs::ValidationError& e) {
        std::cerr << "otfs: invalid input: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
