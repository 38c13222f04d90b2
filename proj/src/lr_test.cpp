#include "sbmtest/lr_test.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>

#include <nlohmann/json.hpp>

#include "sbmtest/errors.hpp"
#include "sbmtest/math_util.hpp"
#include "sbmtest/parallel.hpp"

namespace sbmtest {

std::vector<std::string> EpsilonConfig::violated_conditions() const {
    std::vector<std::string> out;
    if (!epsilon_valid) out.emplace_back("epsilon-validity");
    if (!alt_limit_ok) out.emplace_back("alt-limit-law");
    if (!mc_alt_ok) out.emplace_back("mc-under-alternative");
    return out;
}

EpsilonConfig make_epsilon_config(double a, double b, double epsilon) {
    if (!(epsilon > 0.0)) throw parameter_error("epsilon must be positive");
    if (!(b > 0.0) || !(a > b)) throw parameter_error("rates must satisfy a > b > 0");
    EpsilonConfig cfg;
    cfg.a = a;
    cfg.b = b;
    cfg.epsilon = epsilon;
    cfg.a_reg = a - epsilon;
    cfg.b_reg = b + epsilon;
    const double sum = a + b;
    const double diff = a - b;
    const double diff_reg = cfg.a_reg - cfg.b_reg; // = a - b - 2 eps
    cfg.snr = diff * diff / (2.0 * sum);
    cfg.snr_reg = diff_reg * diff_reg / (2.0 * sum);
    cfg.snr_cross = diff * diff_reg / (2.0 * sum);
    cfg.epsilon_valid = epsilon < diff / 2.0 && cfg.snr_reg < 1.0;
    cfg.alt_limit_ok = diff * diff_reg < 2.0 * sum / 3.0;
    cfg.mc_alt_ok = diff * diff_reg < sum;
    return cfg;
}

double auto_epsilon(double a, double b) {
    if (!(b > 0.0) || !(a > b)) throw parameter_error("rates must satisfy a > b > 0");
    double margin = 0.01 * (a - b);
    for (int i = 0; i < 200; ++i) {
        const double eps = 0.5 * (a - b) - margin;
        const double snr_reg = 2.0 * margin * margin / (a + b);
        if (eps > 0.0 && snr_reg < 1.0) return eps;
        margin *= 0.5;
    }
    throw parameter_error("no valid epsilon found for these rates");
}

namespace {

// Log weights of the four pair classes (edge/non-edge crossed with
// within/across labels); g factorizes over pairs into these.
struct GWeights {
    double edge_in;
    double edge_out;
    double gap_in;
    double gap_out;
};

GWeights make_weights(const Graph& g, const ModelParams& params, const EpsilonConfig& cfg) {
    if (params.a != cfg.a || params.b != cfg.b)
        throw parameter_error("model params and epsilon config disagree on (a, b)");
    if (params.n != g.node_count())
        throw parameter_error("model params node count does not match the graph");
    const int n = params.n;
    if (n < 1) throw parameter_error("graph must have at least one node");
    const double p0 = params.edge_rate();
    if (!(p0 > 0.0 && p0 < 1.0)) throw parameter_error("edge rate (a+b)/(2n) must lie in (0,1)");
    if (!(cfg.a_reg > 0.0)) throw parameter_error("epsilon too large: a - eps must stay positive");
    if (!(cfg.a_reg < n) || !(cfg.b_reg < n))
        throw parameter_error("regularized rates must stay below the node count");
    const double q0 = 1.0 - p0;
    return {std::log(cfg.a_reg / (n * p0)), std::log(cfg.b_reg / (n * p0)),
            std::log((1.0 - cfg.a_reg / n) / q0), std::log((1.0 - cfg.b_reg / n) / q0)};
}

double combine(const GWeights& w, std::uint64_t edges_in, std::uint64_t edges_out, std::uint64_t pairs_in,
               std::uint64_t pairs_out) {
    return static_cast<double>(edges_in) * w.edge_in + static_cast<double>(edges_out) * w.edge_out +
           static_cast<double>(pairs_in - edges_in) * w.gap_in +
           static_cast<double>(pairs_out - edges_out) * w.gap_out;
}

std::uint64_t pairs_within(std::uint64_t n_plus, std::uint64_t n_minus) {
    return n_plus * (n_plus - 1) / 2 + n_minus * (n_minus - 1) / 2;
}

// Joint tally of (within-edge count, plus-label count) over visited
// configurations. g depends on the labels only through this pair, so
// identical cells share one log-sum-exp term; the tally is merged with
// exact integer adds, which keeps results independent of scheduling.
class ConfigHistogram {
public:
    ConfigHistogram(std::size_t max_edges, std::size_t n)
        : n_(n), counts_((max_edges + 1) * (n + 1), 0) {}

    void tally(std::uint64_t edges_in, std::uint64_t n_plus) { ++counts_[edges_in * (n_ + 1) + n_plus]; }

    void add(const ConfigHistogram& other) {
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    }

    // Log-sum-exp of scale * log g over all tallied configurations.
    double log_sum(const GWeights& w, std::uint64_t total_edges, std::uint64_t n, double scale) const {
        LogSumExp lse;
        for (std::size_t e_in = 0; e_in * (n_ + 1) < counts_.size(); ++e_in) {
            for (std::size_t n_plus = 0; n_plus <= n_; ++n_plus) {
                const std::uint64_t c = counts_[e_in * (n_ + 1) + n_plus];
                if (c == 0) continue;
                const std::uint64_t n_minus = n - n_plus;
                const std::uint64_t p_in = pairs_within(n_plus, n_minus);
                const std::uint64_t p_out = n_plus * n_minus;
                const double v = combine(w, e_in, total_edges - e_in, p_in, p_out);
                lse.add_weighted(scale * v, static_cast<double>(c), c);
            }
        }
        return lse.log_sum();
    }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto c : counts_) t += c;
        return t;
    }

private:
    std::size_t n_;
    std::vector<std::uint64_t> counts_;
};

} // namespace

PairCounts count_pairs(const Graph& g, const CommunityLabels& labels) {
    labels.validate(g.node_count());
    PairCounts counts;
    for (const auto& [u, v] : g.edges()) {
        if (labels.sigma[u] == labels.sigma[v]) ++counts.edges_in;
        else ++counts.edges_out;
    }
    std::uint64_t n_plus = 0;
    for (std::int8_t s : labels.sigma) n_plus += s > 0;
    const std::uint64_t n_minus = static_cast<std::uint64_t>(labels.size()) - n_plus;
    counts.pairs_in = pairs_within(n_plus, n_minus);
    counts.pairs_out = n_plus * n_minus;
    return counts;
}

double log_g(const Graph& g, const CommunityLabels& labels, const ModelParams& params, const EpsilonConfig& cfg) {
    const GWeights w = make_weights(g, params, cfg);
    const PairCounts c = count_pairs(g, labels);
    return combine(w, c.edges_in, c.edges_out, c.pairs_in, c.pairs_out);
}

double exact_log_y(const Graph& g, const ModelParams& params, const EpsilonConfig& cfg, const ExactOptions& options) {
    const int n = g.node_count();
    if (options.cap < 1 || options.cap > 40) throw parameter_error("exact enumeration cap must lie in [1,40]");
    if (n > options.cap)
        throw capacity_error("exact path supports n <= " + std::to_string(options.cap) + " (got n = " +
                             std::to_string(n) + "); use the Monte Carlo path");
    const GWeights w = make_weights(g, params, cfg);
    const std::uint64_t n_edges = g.edge_count();
    if (n == 1) return 0.0; // single empty configuration

    // Per-node neighbor masks are cheap at these sizes.
    std::vector<std::uint64_t> nbr_mask(static_cast<std::size_t>(n), 0);
    for (const auto& [u, v] : g.edges()) {
        nbr_mask[u] |= 1ULL << v;
        nbr_mask[v] |= 1ULL << u;
    }

    const std::uint64_t total = 1ULL << (n - 1);
    int chunk_bits = 0;
    while ((total >> chunk_bits) > (1ULL << 16) && chunk_bits < 9) ++chunk_bits;
    const std::uint64_t n_chunks = 1ULL << chunk_bits;
    const std::uint64_t per_chunk = total >> chunk_bits;

    ConfigHistogram hist(n_edges, static_cast<std::size_t>(n));
    std::mutex merge_mutex;

    parallel_for(n_chunks, options.threads, [&](std::uint64_t chunk) {
        ConfigHistogram local(n_edges, static_cast<std::size_t>(n));
        const std::uint64_t begin = chunk * per_chunk;
        const std::uint64_t end = begin + per_chunk;

        // Configuration at Gray index t: bit v of (gray(t) << 1) is 1 when
        // node v carries label -1; node 0 stays pinned at +1.
        std::uint64_t mask = (begin ^ (begin >> 1)) << 1;
        std::uint64_t n_plus = static_cast<std::uint64_t>(n) - static_cast<std::uint64_t>(std::popcount(mask));
        std::uint64_t e_in = 0;
        for (const auto& [u, v] : g.edges()) e_in += ((mask >> u) & 1) == ((mask >> v) & 1);
        local.tally(e_in, n_plus);

        for (std::uint64_t t = begin + 1; t < end; ++t) {
            const int v = std::countr_zero(t) + 1; // Gray transition flips this node
            const std::uint64_t bit = (mask >> v) & 1;
            const std::uint64_t same_pattern = bit ? ~std::uint64_t{0} : 0;
            const std::uint64_t same =
                static_cast<std::uint64_t>(std::popcount(nbr_mask[static_cast<std::size_t>(v)] & ~(mask ^ same_pattern)));
            e_in += static_cast<std::uint64_t>(g.degree(v)) - 2 * same;
            n_plus += bit ? 1 : -1;
            mask ^= 1ULL << v;
            local.tally(e_in, n_plus);
        }

        std::scoped_lock lock(merge_mutex);
        hist.add(local);
    });

    return hist.log_sum(w, n_edges, static_cast<std::uint64_t>(n), 1.0) -
           static_cast<double>(n - 1) * std::log(2.0);
}

namespace {

constexpr std::uint64_t kMcChunk = 1ULL << 14;

} // namespace

McEstimate mc_log_y(const Graph& g, const ModelParams& params, const EpsilonConfig& cfg, std::uint64_t samples,
                    std::uint64_t seed, const McOptions& options) {
    if (samples < 1) throw parameter_error("sample count must be at least 1");
    const GWeights w = make_weights(g, params, cfg);
    const int n = g.node_count();
    const std::uint64_t n_edges = g.edge_count();
    const std::size_t n_words = (static_cast<std::size_t>(n) + 63) / 64;
    const std::uint64_t last_mask = (n % 64 == 0) ? ~std::uint64_t{0} : ((1ULL << (n % 64)) - 1);

    const std::uint64_t n_chunks = (samples + kMcChunk - 1) / kMcChunk;
    ConfigHistogram hist(n_edges, static_cast<std::size_t>(n));
    std::mutex merge_mutex;

    parallel_for(n_chunks, options.threads, [&](std::uint64_t chunk) {
        ConfigHistogram local(n_edges, static_cast<std::size_t>(n));
        RngStream rng(seed, chunk, "mc-config");
        const std::uint64_t count = std::min(kMcChunk, samples - chunk * kMcChunk);
        std::vector<std::uint64_t> words(n_words);
        for (std::uint64_t i = 0; i < count; ++i) {
            std::uint64_t minus = 0;
            for (std::size_t k = 0; k < n_words; ++k) {
                words[k] = rng.next_u64();
                if (k + 1 == n_words) words[k] &= last_mask;
                minus += static_cast<std::uint64_t>(std::popcount(words[k]));
            }
            std::uint64_t e_in = 0;
            for (const auto& [u, v] : g.edges())
                e_in += ((words[u >> 6] >> (u & 63)) & 1) == ((words[v >> 6] >> (v & 63)) & 1);
            local.tally(e_in, static_cast<std::uint64_t>(n) - minus);
        }
        std::scoped_lock lock(merge_mutex);
        hist.add(local);
    });

    const double log_m = std::log(static_cast<double>(samples));
    const double log_s1 = hist.log_sum(w, n_edges, static_cast<std::uint64_t>(n), 1.0);
    McEstimate est;
    est.samples = samples;
    est.log_value = log_s1 - log_m;
    if (samples < 2) {
        est.se = std::numeric_limits<double>::infinity();
        return est;
    }
    // Delta method: se(log mean) = se(mean) / mean, from the log-domain
    // sums of g and g^2.
    const double log_s2 = hist.log_sum(w, n_edges, static_cast<std::uint64_t>(n), 2.0);
    const double diff = 2.0 * log_s1 - log_m - log_s2; // log(S1^2/M) - log(S2) <= 0
    if (diff >= 0.0) {
        est.se = 0.0; // all sampled g equal, up to rounding
        return est;
    }
    const double log_var = log_s2 + std::log1p(-std::exp(diff)) - std::log(static_cast<double>(samples - 1));
    const double log_se_mean = 0.5 * (log_var - log_m);
    est.se = std::exp(log_se_mean - est.log_value);
    return est;
}

McBudget default_mc_samples(int n, const EpsilonConfig& cfg, std::uint64_t cap) {
    if (n <= 0) throw parameter_error("node count must be positive");
    if (cap == 0) throw parameter_error("sample cap must be positive");
    if (!cfg.epsilon_valid)
        throw parameter_error("default sample budget needs a valid regularization "
                              "(0 < eps < (a-b)/2 and snr_reg < 1); pass an explicit sample count");
    const double nd = static_cast<double>(n);
    const double log_raw = std::log(100.0) + 3.0 * std::log(nd) + 0.5 * nd * cfg.snr_reg;
    if (log_raw >= std::log(static_cast<double>(cap))) return {cap, true};
    const double raw = std::ceil(100.0 * nd * nd * nd * std::exp(0.5 * nd * cfg.snr_reg));
    const auto samples = static_cast<std::uint64_t>(raw);
    if (samples > cap) return {cap, true};
    return {samples, false};
}

double TestResult::statistic() const { return std::exp(log_statistic); }

TestResult run_test(const Graph& g, const ModelParams& params, const EpsilonConfig& cfg, double alpha,
                    const CriticalValueSource& critical_value_source, const RunOptions& options) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw parameter_error("alpha must lie in (0,1)");
    if (!critical_value_source) throw parameter_error("critical value source is required");

    TestResult result;
    result.alpha = alpha;
    result.seed = options.seed;
    result.warnings = cfg.violated_conditions();

    const bool use_exact = options.policy == StatisticPolicy::exact_only ||
                           (options.policy == StatisticPolicy::automatic && g.node_count() <= options.exact_cap);
    if (use_exact) {
        ExactOptions exact_opts;
        exact_opts.cap = options.exact_cap;
        exact_opts.threads = options.threads;
        result.log_statistic = exact_log_y(g, params, cfg, exact_opts);
        result.method = Method::exact;
    } else {
        std::uint64_t m;
        if (options.mc_samples) {
            m = *options.mc_samples;
        } else {
            const McBudget budget = default_mc_samples(g.node_count(), cfg, options.mc_cap);
            m = budget.samples;
            if (budget.capped) result.warnings.emplace_back("mc-budget-capped");
        }
        McOptions mc_opts;
        mc_opts.threads = options.threads;
        const McEstimate est = mc_log_y(g, params, cfg, m, options.seed, mc_opts);
        result.log_statistic = est.log_value;
        result.se = est.se;
        result.mc_samples = m;
        result.method = Method::monte_carlo;
    }
    result.critical_value_log = critical_value_source(params, cfg, alpha);
    result.reject = result.log_statistic >= result.critical_value_log;
    return result;
}

nlohmann::json to_json(const TestResult& result) {
    nlohmann::json j{
        {"log_statistic", result.log_statistic},
        {"critical_value_log", result.critical_value_log},
        {"alpha", result.alpha},
        {"decision", result.reject ? "reject" : "retain"},
        {"method", result.method == Method::exact ? "exact" : "monte-carlo"},
        {"warnings", result.warnings},
        {"seed", result.seed},
    };
    if (result.method == Method::monte_carlo) {
        j["M"] = result.mc_samples;
        j["log_statistic_se"] = result.se;
    }
    return j;
}

} // namespace sbmtest
