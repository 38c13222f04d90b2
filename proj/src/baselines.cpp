#include "sbmtest/baselines.hpp"

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "sbmtest/errors.hpp"
#include "sbmtest/math_util.hpp"
#include "sbmtest/parallel.hpp"
#include "sbmtest/rng.hpp"

namespace sbmtest {

namespace {

double plugin_density(const Graph& g) {
    if (g.node_count() < 3) throw parameter_error("baseline statistics need at least 3 nodes");
    const double p = g.edge_density();
    if (!(p > 0.0 && p < 1.0))
        throw data_error("degenerate input: plug-in edge density must lie strictly in (0,1)");
    return p;
}

} // namespace

double spectral_statistic(const Graph& g) {
    const double p = plugin_density(g);
    const int n = g.node_count();
    const double scale = std::sqrt((n - 1) * p * (1.0 - p));

    // Gershgorin bound on the centered operator, used as a diagonal shift
    // so power iteration converges to the algebraically largest eigenvalue
    // rather than the largest in magnitude.
    double shift = 0.0;
    for (int v = 0; v < n; ++v) {
        const double row = (g.degree(v) * (1.0 - p) + (n - 1 - g.degree(v)) * p) / scale;
        shift = std::max(shift, row);
    }

    // Deterministic pseudo-random start; any start with a component along
    // the top eigenvector works, and eigenvalues are relabeling-invariant
    // up to the iteration tolerance.
    RngStream rng(derive_seed(0x9d2c5680u, static_cast<std::uint64_t>(n) << 32 | g.edge_count(), "power-start"));
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& xi : x) xi = rng.normal();
    std::vector<double> y(static_cast<std::size_t>(n));

    const double tol = 1e-10;
    const long max_iters = 10'000L * n;
    double lambda = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (long iter = 0; iter < max_iters; ++iter) {
        double norm = 0.0;
        for (double xi : x) norm += xi * xi;
        norm = std::sqrt(norm);
        for (auto& xi : x) xi /= norm;

        // y = ((A - p (J - I)) / scale + shift I) x
        double total = 0.0;
        for (double xi : x) total += xi;
        for (int v = 0; v < n; ++v) {
            double acc = 0.0;
            for (std::uint32_t u : g.neighbors(v)) acc += x[u];
            y[static_cast<std::size_t>(v)] =
                (acc - p * (total - x[static_cast<std::size_t>(v)])) / scale + shift * x[static_cast<std::size_t>(v)];
        }
        double rayleigh = 0.0;
        for (int v = 0; v < n; ++v) rayleigh += x[static_cast<std::size_t>(v)] * y[static_cast<std::size_t>(v)];
        lambda = rayleigh;
        x.swap(y);
        if (std::abs(lambda - prev) <= tol * std::max(1.0, std::abs(lambda))) break;
        prev = lambda;
    }
    return lambda - shift;
}

double subgraph_statistic(const Graph& g) {
    const int n = g.node_count();
    if (n < 3) throw parameter_error("baseline statistics need at least 3 nodes");
    const double p = g.edge_density();
    const auto triangles = static_cast<double>(count_cycles(g, 3));
    const double triples = static_cast<double>(n) * (n - 1) * (n - 2) / 6.0;
    const double quads = n >= 4 ? static_cast<double>(n) * (n - 1) * (n - 2) * (n - 3) / 24.0 : 0.0;
    const double mean = triples * p * p * p;
    // Null variance of the triangle count in G(n,p): same-triple terms plus
    // the 6 C(n,4) pairs of triangles sharing one edge.
    const double var = triples * p * p * p * (1.0 - p * p * p) + 6.0 * quads * std::pow(p, 5) * (1.0 - p);
    if (var <= 0.0) return 0.0; // p in {0,1}: count equals its null mean
    return (triangles - mean) / std::sqrt(var);
}

double baseline_statistic(const Graph& g, BaselineKind kind) {
    return kind == BaselineKind::spectral ? spectral_statistic(g) : subgraph_statistic(g);
}

BaselineResult bootstrap_test(const Graph& g, BaselineKind kind, double alpha, int num_bootstrap,
                              std::uint64_t seed, int threads) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw parameter_error("alpha must lie in (0,1)");
    if (num_bootstrap < kMinBootstrap)
        throw parameter_error("need at least " + std::to_string(kMinBootstrap) + " bootstrap replicates");
    const double p = plugin_density(g);
    const int n = g.node_count();

    BaselineResult result;
    result.kind = kind;
    result.alpha = alpha;
    result.num_bootstrap = num_bootstrap;
    result.seed = seed;
    result.statistic = baseline_statistic(g, kind);

    std::vector<double> stats(static_cast<std::size_t>(num_bootstrap));
    parallel_for(static_cast<std::uint64_t>(num_bootstrap), threads, [&](std::uint64_t rep) {
        RngStream rng(seed, rep, "bootstrap-graph");
        const Graph gb = sample_gnp(n, p, rng);
        // A resampled graph can land on density 0 or 1 even when the input
        // did not; score such draws at the null center instead of failing
        // the whole calibration.
        const double pb = gb.edge_density();
        stats[rep] = (pb > 0.0 && pb < 1.0) ? baseline_statistic(gb, kind) : 0.0;
    });
    result.bootstrap_null_quantile = empirical_quantile(std::move(stats), 1.0 - alpha);
    result.reject = result.statistic > result.bootstrap_null_quantile;
    return result;
}

nlohmann::json to_json(const BaselineResult& result) {
    return nlohmann::json{
        {"kind", result.kind == BaselineKind::spectral ? "spectral" : "subgraph-count"},
        {"statistic", result.statistic},
        {"quantile", result.bootstrap_null_quantile},
        {"alpha", result.alpha},
        {"B", result.num_bootstrap},
        {"decision", result.reject ? "reject" : "retain"},
        {"seed", result.seed},
    };
}

} // namespace sbmtest
