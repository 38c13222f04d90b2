#include "sbmtest/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>

#include <nlohmann/json.hpp>

#include "sbmtest/errors.hpp"
#include "sbmtest/parallel.hpp"

namespace sbmtest {

std::string method_name(TestMethodKind kind) {
    switch (kind) {
        case TestMethodKind::epsilon_lr: return "epsilon-lr";
        case TestMethodKind::spectral: return "spectral";
        case TestMethodKind::subgraph_count: return "subgraph";
    }
    throw parameter_error("unknown method kind");
}

TestMethodKind method_from_name(const std::string& name) {
    if (name == "epsilon-lr") return TestMethodKind::epsilon_lr;
    if (name == "spectral") return TestMethodKind::spectral;
    if (name == "subgraph") return TestMethodKind::subgraph_count;
    throw parameter_error("unknown method '" + name + "' (expected epsilon-lr, spectral, or subgraph)");
}

void ExperimentConfig::validate() const {
    if (grid.empty()) throw parameter_error("experiment grid is empty");
    if (replicates < 1) throw parameter_error("replicates must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw parameter_error("alpha must lie in (0,1)");
    if (m_policy == MPolicy::explicit_samples && explicit_m == 0)
        throw parameter_error("explicit M policy needs a positive sample count");
    for (const GridPoint& point : grid) {
        const auto [a, b] = rates_for(point);
        ModelParams{a, b, point.n}.validate();
        if (method == TestMethodKind::epsilon_lr) make_epsilon_config(a, b, point.epsilon);
    }
}

std::pair<double, double> ExperimentConfig::rates_for(const GridPoint& point) const {
    if (explicit_ab) return *explicit_ab;
    return {2.5 + point.c, 2.5 - point.c};
}

namespace {

MPolicy m_policy_from_json(const nlohmann::json& j, std::uint64_t& explicit_m) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "paper-default") return MPolicy::paper_default;
        if (s == "exact-when-feasible") return MPolicy::exact_when_feasible;
        throw parameter_error("unknown M_policy '" + s + "'");
    }
    if (j.is_object() && j.contains("explicit")) {
        explicit_m = j.at("explicit").get<std::uint64_t>();
        return MPolicy::explicit_samples;
    }
    throw parameter_error("M_policy must be \"paper-default\", \"exact-when-feasible\", or {\"explicit\": M}");
}

} // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig config;
    try {
        config.method = method_from_name(j.at("method").get<std::string>());
        for (const auto& cell : j.at("grid")) {
            GridPoint point;
            point.c = cell.value("c", 0.0);
            point.epsilon = cell.value("epsilon", 0.0);
            point.n = cell.at("n").get<int>();
            config.grid.push_back(point);
        }
        if (j.contains("base") && !j.at("base").is_string()) {
            const auto& base = j.at("base");
            config.explicit_ab = std::make_pair(base.at("a").get<double>(), base.at("b").get<double>());
        }
        config.replicates = j.value("replicates", config.replicates);
        config.alpha = j.value("alpha", config.alpha);
        if (j.contains("master_seed")) config.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("M_policy")) config.m_policy = m_policy_from_json(j.at("M_policy"), config.explicit_m);
        config.allow_capped_m = j.value("allow_capped_m", config.allow_capped_m);
        config.exact_cap = j.value("exact_cap", config.exact_cap);
        config.m_cap = j.value("m_cap", config.m_cap);
        config.bootstrap_count = j.value("bootstrap_count", config.bootstrap_count);
        config.cv_samples = j.value("cv_samples", config.cv_samples);
        config.cv_tolerance = j.value("cv_tolerance", config.cv_tolerance);
        config.threads = j.value("threads", config.threads);
        if (j.contains("cache")) config.cache_path = j.at("cache").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw parameter_error(std::string("bad experiment config: ") + e.what());
    }
    return config;
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& config) {
    nlohmann::json grid = nlohmann::json::array();
    for (const GridPoint& point : config.grid)
        grid.push_back({{"c", point.c}, {"epsilon", point.epsilon}, {"n", point.n}});
    nlohmann::json j{
        {"method", method_name(config.method)},
        {"grid", grid},
        {"replicates", config.replicates},
        {"alpha", config.alpha},
        {"master_seed", config.master_seed},
        {"allow_capped_m", config.allow_capped_m},
        {"exact_cap", config.exact_cap},
        {"m_cap", config.m_cap},
        {"bootstrap_count", config.bootstrap_count},
        {"cv_samples", config.cv_samples},
        {"cv_tolerance", config.cv_tolerance},
        {"threads", config.threads},
    };
    if (config.explicit_ab)
        j["base"] = {{"a", config.explicit_ab->first}, {"b", config.explicit_ab->second}};
    else
        j["base"] = "c-convention";
    switch (config.m_policy) {
        case MPolicy::paper_default: j["M_policy"] = "paper-default"; break;
        case MPolicy::exact_when_feasible: j["M_policy"] = "exact-when-feasible"; break;
        case MPolicy::explicit_samples: j["M_policy"] = {{"explicit", config.explicit_m}}; break;
    }
    if (config.cache_path) j["cache"] = *config.cache_path;
    return j;
}

namespace {

std::string cell_label(const GridPoint& point) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "(c=%g, epsilon=%g, n=%d)", point.c, point.epsilon, point.n);
    return buf;
}

// Resolved statistic plan for one epsilon-LR grid cell.
struct CellPlan {
    StatisticPolicy policy = StatisticPolicy::exact_only;
    std::optional<std::uint64_t> mc_samples;
};

CellPlan plan_cell(const ExperimentConfig& config, const GridPoint& point, const EpsilonConfig& cfg) {
    CellPlan plan;
    const bool exact_ok = point.n <= config.exact_cap;
    if (config.m_policy == MPolicy::exact_when_feasible && exact_ok) {
        plan.policy = StatisticPolicy::exact_only;
        return plan;
    }
    plan.policy = StatisticPolicy::monte_carlo;
    if (config.m_policy == MPolicy::explicit_samples) {
        plan.mc_samples = config.explicit_m;
        return plan;
    }
    McBudget budget;
    try {
        budget = default_mc_samples(point.n, cfg, config.m_cap);
    } catch (const parameter_error& e) {
        throw parameter_error("grid cell " + cell_label(point) + ": " + e.what());
    }
    if (budget.capped && !config.allow_capped_m) {
        const double required = 100.0 * std::pow(point.n, 3) * std::exp(0.5 * point.n * cfg.snr_reg);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.3g", required);
        throw capacity_error("grid cell " + cell_label(point) + " needs M = " + buf + " > cap " +
                             std::to_string(config.m_cap) +
                             "; pass an explicit M, raise m_cap, or set allow_capped_m");
    }
    plan.mc_samples = budget.samples;
    return plan;
}

} // namespace

std::vector<std::string> runtime_estimates(const ExperimentConfig& config) {
    std::vector<std::string> lines;
    if (config.method != TestMethodKind::epsilon_lr) return lines;
    for (const GridPoint& point : config.grid) {
        if (config.m_policy == MPolicy::exact_when_feasible && point.n <= config.exact_cap) continue;
        const auto [a, b] = config.rates_for(point);
        const EpsilonConfig cfg = make_epsilon_config(a, b, point.epsilon);
        std::uint64_t m = config.explicit_m;
        if (config.m_policy != MPolicy::explicit_samples) m = default_mc_samples(point.n, cfg, config.m_cap).samples;
        // Rough per-evaluation cost: one pass over expected edges plus
        // label-word handling.
        const double per_eval = 2e-9 * (point.n * (a + b) / 4.0 + point.n / 8.0) + 3e-8;
        const double seconds = static_cast<double>(m) * per_eval * 2.0 * config.replicates;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "cell %s: M=%llu, estimated %.1f core-hours", cell_label(point).c_str(),
                      static_cast<unsigned long long>(m), seconds / 3600.0);
        lines.emplace_back(buf);
    }
    return lines;
}

SimulationTable run_experiment(const ExperimentConfig& config) {
    config.validate();
    const int threads = resolve_threads(config.threads);
    std::unique_ptr<CriticalValueCache> cache;
    if (config.cache_path) cache = std::make_unique<CriticalValueCache>(*config.cache_path);

    SimulationTable table;
    for (std::size_t cell_index = 0; cell_index < config.grid.size(); ++cell_index) {
        const GridPoint& point = config.grid[cell_index];
        const auto t0 = std::chrono::steady_clock::now();
        const auto [a, b] = config.rates_for(point);
        const ModelParams params{a, b, point.n};
        const std::uint64_t seed_cell = derive_seed(config.master_seed, cell_index, "cell");

        std::atomic<std::uint64_t> null_rejects{0};
        std::atomic<std::uint64_t> alt_rejects{0};

        if (config.method == TestMethodKind::epsilon_lr) {
            const EpsilonConfig cfg = make_epsilon_config(a, b, point.epsilon);
            const CellPlan plan = plan_cell(config, point, cfg);
            const CriticalValueResult cv = cached_critical_value(
                cfg, config.alpha, config.cv_tolerance, config.cv_samples,
                derive_seed(config.master_seed, 0, "critical-value"), threads, cache.get());
            const CriticalValueSource source = [&cv](const ModelParams&, const EpsilonConfig&, double) {
                return cv.w_log;
            };
            parallel_for(static_cast<std::uint64_t>(config.replicates), threads, [&](std::uint64_t rep) {
                RunOptions opts;
                opts.policy = plan.policy;
                opts.exact_cap = config.exact_cap;
                opts.mc_samples = plan.mc_samples;
                opts.threads = 1;

                RngStream g0_rng(seed_cell, rep, "null-graph");
                const Graph g0 = sample_er(params, g0_rng);
                opts.seed = derive_seed(seed_cell, rep, "null-mc");
                if (run_test(g0, params, cfg, config.alpha, source, opts).reject) ++null_rejects;

                RngStream g1_rng(seed_cell, rep, "alt-graph");
                const Graph g1 = sample_sbm(params, g1_rng).first;
                opts.seed = derive_seed(seed_cell, rep, "alt-mc");
                if (run_test(g1, params, cfg, config.alpha, source, opts).reject) ++alt_rejects;
            });
        } else {
            const BaselineKind kind =
                config.method == TestMethodKind::spectral ? BaselineKind::spectral : BaselineKind::subgraph_count;
            parallel_for(static_cast<std::uint64_t>(config.replicates), threads, [&](std::uint64_t rep) {
                RngStream g0_rng(seed_cell, rep, "null-graph");
                const Graph g0 = sample_er(params, g0_rng);
                if (bootstrap_test(g0, kind, config.alpha, config.bootstrap_count,
                                   derive_seed(seed_cell, rep, "null-bootstrap"), 1)
                        .reject)
                    ++null_rejects;

                RngStream g1_rng(seed_cell, rep, "alt-graph");
                const Graph g1 = sample_sbm(params, g1_rng).first;
                if (bootstrap_test(g1, kind, config.alpha, config.bootstrap_count,
                                   derive_seed(seed_cell, rep, "alt-bootstrap"), 1)
                        .reject)
                    ++alt_rejects;
            });
        }

        SimulationRow row;
        row.method = method_name(config.method);
        row.c = point.c;
        row.epsilon = point.epsilon;
        row.kappa = (a - b) * (a - b) / (2.0 * (a + b));
        row.n = point.n;
        row.replicates = config.replicates;
        row.power = static_cast<double>(alt_rejects.load()) / config.replicates;
        row.size = static_cast<double>(null_rejects.load()) / config.replicates;
        row.seed = config.master_seed;
        row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string table_to_csv(const SimulationTable& table, bool zero_runtime) {
    std::string out = "method,c,epsilon,kappa,n,replicates,power,size,seed,runtime_s\n";
    char buf[256];
    for (const SimulationRow& row : table.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%.6g,%d,%d,%.6f,%.6f,%llu,%.3f\n", row.method.c_str(), row.c,
                      row.epsilon, row.kappa, row.n, row.replicates, row.power, row.size,
                      static_cast<unsigned long long>(row.seed), zero_runtime ? 0.0 : row.runtime_s);
        out += buf;
    }
    return out;
}

nlohmann::json table_to_json(const SimulationTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const SimulationRow& row : table.rows) {
        rows.push_back({{"method", row.method},
                        {"c", row.c},
                        {"epsilon", row.epsilon},
                        {"kappa", row.kappa},
                        {"n", row.n},
                        {"replicates", row.replicates},
                        {"power", row.power},
                        {"size", row.size},
                        {"seed", row.seed},
                        {"runtime_s", row.runtime_s}});
    }
    return rows;
}

std::pair<double, double> mle_ab(const Graph& g, const CommunityLabels& labels) {
    const PairCounts counts = count_pairs(g, labels);
    if (counts.pairs_in == 0 || counts.pairs_out == 0)
        throw parameter_error("degenerate labels: need at least one within pair and one across pair");
    const double n = g.node_count();
    return {n * static_cast<double>(counts.edges_in) / static_cast<double>(counts.pairs_in),
            n * static_cast<double>(counts.edges_out) / static_cast<double>(counts.pairs_out)};
}

namespace {

std::vector<int> draw_without_replacement(const std::vector<int>& pool, int k, RngStream& rng) {
    std::vector<int> copy = pool;
    for (int i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(copy.size() - static_cast<std::size_t>(i)));
        std::swap(copy[static_cast<std::size_t>(i)], copy[j]);
    }
    copy.resize(static_cast<std::size_t>(k));
    return copy;
}

} // namespace

double combination_protocol(const Graph& g, const std::vector<std::vector<int>>& communities,
                            std::pair<int, int> regime, int sample_size, int repeats, const MethodSpec& method,
                            double alpha, std::uint64_t seed) {
    if (repeats < 1) throw parameter_error("repeats must be at least 1");
    if (sample_size < 1) throw parameter_error("sample size must be at least 1");
    std::vector<char> seen(static_cast<std::size_t>(g.node_count()), 0);
    for (const auto& community : communities) {
        for (int v : community) {
            if (v < 0 || v >= g.node_count())
                throw parameter_error("community node " + std::to_string(v) + " out of range");
            if (seen[static_cast<std::size_t>(v)]) throw parameter_error("communities must be disjoint");
            seen[static_cast<std::size_t>(v)] = 1;
        }
    }
    const auto community_at = [&](int id) -> const std::vector<int>& {
        if (id < 0 || static_cast<std::size_t>(id) >= communities.size())
            throw parameter_error("regime community id " + std::to_string(id) + " out of range");
        return communities[static_cast<std::size_t>(id)];
    };
    const auto& first = community_at(regime.first);
    const auto& second = community_at(regime.second);
    const bool same_community = regime.first == regime.second;
    if (same_community) {
        if (static_cast<int>(first.size()) < 2 * sample_size)
            throw parameter_error("community too small to draw two disjoint halves");
    } else if (static_cast<int>(first.size()) < sample_size || static_cast<int>(second.size()) < sample_size) {
        throw parameter_error("sample size exceeds a regime community");
    }

    std::optional<EpsilonConfig> cfg;
    double w_log = 0.0;
    if (method.kind == TestMethodKind::epsilon_lr) {
        cfg = make_epsilon_config(method.a, method.b, method.epsilon);
        w_log = cached_critical_value(*cfg, alpha, method.cv_tolerance, method.cv_samples,
                                      derive_seed(seed, 0, "combination-cv"), method.threads, nullptr)
                    .w_log;
    }

    std::atomic<std::uint64_t> rejects{0};
    parallel_for(static_cast<std::uint64_t>(repeats), method.threads, [&](std::uint64_t rep) {
        RngStream rng(seed, rep, "combination-draw");
        std::vector<int> nodes;
        if (same_community) {
            nodes = draw_without_replacement(first, 2 * sample_size, rng);
        } else {
            nodes = draw_without_replacement(first, sample_size, rng);
            const std::vector<int> other = draw_without_replacement(second, sample_size, rng);
            nodes.insert(nodes.end(), other.begin(), other.end());
        }
        const Graph sub = induced_subgraph(g, nodes);

        bool reject;
        if (method.kind == TestMethodKind::epsilon_lr) {
            const ModelParams params{method.a, method.b, sub.node_count()};
            RunOptions opts;
            opts.policy = method.policy;
            opts.exact_cap = method.exact_cap;
            opts.mc_samples = method.mc_samples;
            opts.mc_cap = method.m_cap;
            opts.seed = derive_seed(seed, rep, "combination-mc");
            opts.threads = 1;
            const CriticalValueSource source = [w_log](const ModelParams&, const EpsilonConfig&, double) {
                return w_log;
            };
            reject = run_test(sub, params, *cfg, alpha, source, opts).reject;
        } else {
            const BaselineKind kind =
                method.kind == TestMethodKind::spectral ? BaselineKind::spectral : BaselineKind::subgraph_count;
            reject = bootstrap_test(sub, kind, alpha, method.bootstrap_count,
                                    derive_seed(seed, rep, "combination-bootstrap"), 1)
                         .reject;
        }
        if (reject) ++rejects;
    });
    return static_cast<double>(rejects.load()) / repeats;
}

} // namespace sbmtest
