#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbmtest/lr_test.hpp"
#include "sbmtest/rng.hpp"

namespace sbmtest {

enum class Hypothesis { null_model, alternative_model };

// One truncated index of the limiting infinite product. The Poisson count
// and its compensator are never split apart: the separate pieces grow
// without bound while the combined contribution stays summable.
struct LawTerm {
    int index = 0;            // cycle length m
    bool poisson = false;     // exact Poisson draw vs Gaussian approximation
    double poisson_mean = 0.0;
    double log_gain = 0.0;    // log(1 + delta_m) of the regularized ratio
    double mean_offset = 0.0; // compensator (Poisson path)
    double gauss_mean = 0.0;  // combined term mean (Gaussian path)
    double gauss_sd = 0.0;
};

// Truncated description of the limiting distribution of the log-statistic
// under one hypothesis. Immutable and shareable across threads.
struct LimitLawSpec {
    Hypothesis hypothesis = Hypothesis::null_model;
    double a = 0.0;
    double b = 0.0;
    double epsilon = 0.0;
    double tolerance = 0.0;
    double normal_approx_threshold = 0.0;
    int truncation_k = 0; // last simulated index
    std::vector<LawTerm> terms;
};

inline constexpr double kDefaultTailTolerance = 1e-8;
inline constexpr double kDefaultNormalApproxThreshold = 1e6;

// Chooses the minimal truncation whose tail mean and tail variance both
// fall below the tolerance (the tails decay geometrically), and
// precomputes the per-index sampling plan. Requires snr_reg < 1; the
// alternative additionally requires snr_cross < 1 (otherwise the limit
// degenerates to +infinity).
LimitLawSpec build_law(const EpsilonConfig& cfg, Hypothesis hypothesis, double tolerance = kDefaultTailTolerance,
                       double normal_approx_threshold = kDefaultNormalApproxThreshold);

// One draw of the limiting log-statistic.
double sample_log_w(const LimitLawSpec& spec, RngStream& rng);

// count draws with per-draw substreams of seed; output is independent of
// the thread count.
std::vector<double> sample_log_w_many(const LimitLawSpec& spec, std::uint64_t count, std::uint64_t seed,
                                      int threads = 1);

struct CriticalValueResult {
    double w_log = 0.0;       // log critical value
    double half_width = 0.0;  // bootstrap confidence half-width of w_log
    double alpha = 0.0;
    std::uint64_t num_samples = 0;
    std::uint64_t seed = 0;
};

inline constexpr std::uint64_t kMinCriticalValueSamples = 10'000;

// Empirical (1-alpha) quantile of the null log-statistic samples, with a
// bootstrap half-width (1.96 x bootstrap sd over resampled quantiles).
CriticalValueResult critical_value(const LimitLawSpec& null_law, double alpha, std::uint64_t num_samples,
                                   std::uint64_t seed, int threads = 1, int bootstrap_reps = 100);

// Fraction of alternative-law draws at or above the null critical value.
// Both laws must share (a, b, epsilon).
double simulated_power(const LimitLawSpec& null_law, const LimitLawSpec& alt_law, double alpha,
                       std::uint64_t num_samples, std::uint64_t seed, int threads = 1);

struct PowerLimitInputs {
    double k1 = 0.0; // limit of snr_reg, in (0,1)
    double k2 = 0.0; // limit of snr_cross, in (0,1)
    double alpha = 0.0;
};

// Closed-form growing-degree limit of the test power:
// Phi(sigma2^2 / sigma1 - z_{1-alpha}) with sigma_l^2 = sum_{m>=3} k_l^m/(2m).
double limit_power(const PowerLimitInputs& inputs);

// On-disk critical-value store: JSON lines, one record per key.
struct CriticalValueKey {
    double a = 0.0;
    double b = 0.0;
    double epsilon = 0.0;
    double alpha = 0.0;
    double tolerance = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t num_samples = 0;

    bool operator==(const CriticalValueKey&) const = default;
};

class CriticalValueCache {
public:
    // Loads existing records; a missing file is an empty cache.
    explicit CriticalValueCache(std::string path);

    std::optional<CriticalValueResult> find(const CriticalValueKey& key) const;
    void store(const CriticalValueKey& key, const CriticalValueResult& value);

    const std::string& path() const { return path_; }
    std::size_t size() const { return records_.size(); }

private:
    std::string path_;
    std::vector<std::pair<CriticalValueKey, CriticalValueResult>> records_;
};

// Cache-aware helper: builds the null law, looks the key up, computes and
// stores on a miss. cache may be null.
CriticalValueResult cached_critical_value(const EpsilonConfig& cfg, double alpha, double tolerance,
                                          std::uint64_t num_samples, std::uint64_t seed, int threads,
                                          CriticalValueCache* cache);

} // namespace sbmtest
