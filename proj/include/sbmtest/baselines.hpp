#pragma once

#include <cstdint>

#include <nlohmann/json_fwd.hpp>

#include "sbmtest/graph.hpp"

namespace sbmtest {

enum class BaselineKind { spectral, subgraph_count };

// Largest eigenvalue of the centered, scaled adjacency operator
// (A - p_hat (J - I)) / sqrt((n-1) p_hat (1-p_hat)), where p_hat is the
// plug-in edge density. Computed by shifted power iteration on the
// implicit operator; matrix-vector products cost O(edges + n) and the
// dense centered matrix is never materialized.
double spectral_statistic(const Graph& g);

// Standardized triangle count (T - T0_hat) / s0_hat against the plug-in
// null mean and standard deviation. The bootstrap calibration below makes
// the exact standardization immaterial to the decision.
double subgraph_statistic(const Graph& g);

double baseline_statistic(const Graph& g, BaselineKind kind);

struct BaselineResult {
    BaselineKind kind = BaselineKind::spectral;
    double statistic = 0.0;
    double bootstrap_null_quantile = 0.0;
    double alpha = 0.0;
    int num_bootstrap = 0;
    bool reject = false; // statistic strictly above the bootstrap quantile
    std::uint64_t seed = 0;
};

inline constexpr int kMinBootstrap = 200;

// Parametric bootstrap under the plug-in null: simulates B graphs from
// G(n, p_hat), computes the statistic on each, and rejects iff the
// observed statistic exceeds the empirical (1-alpha) bootstrap quantile.
// Calibration is always by resampling, never by asymptotic quantiles;
// those approximations break down at bounded degree.
BaselineResult bootstrap_test(const Graph& g, BaselineKind kind, double alpha, int num_bootstrap,
                              std::uint64_t seed, int threads = 1);

nlohmann::json to_json(const BaselineResult& result);

} // namespace sbmtest
