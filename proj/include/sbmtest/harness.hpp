#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sbmtest/baselines.hpp"
#include "sbmtest/graph.hpp"
#include "sbmtest/limit_law.hpp"
#include "sbmtest/lr_test.hpp"

namespace sbmtest {

enum class TestMethodKind { epsilon_lr, spectral, subgraph_count };

std::string method_name(TestMethodKind kind);
TestMethodKind method_from_name(const std::string& name);

struct GridPoint {
    double c = 0.0;       // a = 2.5 + c, b = 2.5 - c under the offset convention
    double epsilon = 0.0; // ignored by the baseline methods
    int n = 0;
};

enum class MPolicy { paper_default, explicit_samples, exact_when_feasible };

// Full description of one size/power experiment. Mirrors the JSON config
// accepted by the CLI. Desk-scale defaults: 200 replicates, exact statistic
// wherever feasible.
struct ExperimentConfig {
    TestMethodKind method = TestMethodKind::epsilon_lr;
    std::vector<GridPoint> grid;
    std::optional<std::pair<double, double>> explicit_ab; // default: a = 2.5 + c, b = 2.5 - c
    int replicates = 200;
    double alpha = 0.05;
    std::uint64_t master_seed = 0;
    MPolicy m_policy = MPolicy::exact_when_feasible;
    std::uint64_t explicit_m = 0;
    bool allow_capped_m = false; // without this, a capped paper budget is a capacity error
    int exact_cap = kDefaultExactCap;
    std::uint64_t m_cap = kDefaultMcCap;
    int bootstrap_count = 500;
    std::uint64_t cv_samples = 1'000'000;
    double cv_tolerance = kDefaultTailTolerance;
    int threads = 1;
    std::optional<std::string> cache_path;

    void validate() const;
    std::pair<double, double> rates_for(const GridPoint& point) const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

struct SimulationRow {
    std::string method;
    double c = 0.0;
    double epsilon = 0.0;
    double kappa = 0.0; // recomputed signal-to-noise (a-b)^2/(2(a+b))
    int n = 0;
    int replicates = 0;
    double power = 0.0;
    double size = 0.0;
    std::uint64_t seed = 0;
    double runtime_s = 0.0;
};

struct SimulationTable {
    std::vector<SimulationRow> rows;
};

// CSV with the fixed header
// method,c,epsilon,kappa,n,replicates,power,size,seed,runtime_s.
// zero_runtime replaces wall-clock runtimes with 0.000 so two runs of the
// same config are byte-identical.
std::string table_to_csv(const SimulationTable& table, bool zero_runtime = false);
nlohmann::json table_to_json(const SimulationTable& table);

// Estimated Monte Carlo cost per grid cell, printed by the CLI before
// expensive launches. Empty when every cell uses the exact path.
std::vector<std::string> runtime_estimates(const ExperimentConfig& config);

// For each grid point: size = rejection fraction over replicates of null
// draws, power = rejection fraction over replicates of two-community
// draws. Critical values are computed once per (a,b,epsilon,alpha) and
// shared; everything is deterministic given master_seed.
SimulationTable run_experiment(const ExperimentConfig& config);

// Binomial maximum-likelihood rates given labels: a_hat = n E_in / P_in,
// b_hat = n E_out / P_out.
std::pair<double, double> mle_ab(const Graph& g, const CommunityLabels& labels);

// Test configuration for the subnetwork-combination protocol.
struct MethodSpec {
    TestMethodKind kind = TestMethodKind::epsilon_lr;
    double a = 0.0;
    double b = 0.0;
    double epsilon = 0.0;
    StatisticPolicy policy = StatisticPolicy::automatic;
    std::optional<std::uint64_t> mc_samples;
    int exact_cap = kDefaultExactCap;
    std::uint64_t m_cap = kDefaultMcCap;
    int bootstrap_count = 500;
    std::uint64_t cv_samples = 1'000'000;
    double cv_tolerance = kDefaultTailTolerance;
    int threads = 1;
};

// Repeats times: draw sample_size nodes uniformly without replacement from
// each of the two regime communities (2 x sample_size from one community
// when the regime names it twice), form the induced subgraph, run the
// chosen test, and return the rejection fraction.
double combination_protocol(const Graph& g, const std::vector<std::vector<int>>& communities,
                            std::pair<int, int> regime, int sample_size, int repeats, const MethodSpec& method,
                            double alpha, std::uint64_t seed);

} // namespace sbmtest
