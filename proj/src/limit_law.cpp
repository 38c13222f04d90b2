#include "sbmtest/limit_law.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>

#include "sbmtest/errors.hpp"
#include "sbmtest/math_util.hpp"
#include "sbmtest/parallel.hpp"

namespace sbmtest {

LimitLawSpec build_law(const EpsilonConfig& cfg, Hypothesis hypothesis, double tolerance,
                       double normal_approx_threshold) {
    if (!(tolerance > 0.0)) throw parameter_error("tail tolerance must be positive");
    if (!(normal_approx_threshold >= 10.0)) throw parameter_error("normal approximation threshold too small");
    if (!(cfg.snr_reg < 1.0))
        throw parameter_error("limit law diverges: snr_reg = " + std::to_string(cfg.snr_reg) + " >= 1");
    if (!(cfg.a_reg > cfg.b_reg)) throw parameter_error("regularized rates must satisfy a - eps > b + eps");
    const bool alt = hypothesis == Hypothesis::alternative_model;
    if (alt && !(cfg.snr_cross < 1.0))
        throw parameter_error("alternative limit degenerates: snr_cross = " + std::to_string(cfg.snr_cross) +
                              " >= 1");

    const double sum = cfg.a + cfg.b;
    const double avg = sum / 2.0;
    const double reg_frac = (cfg.a_reg - cfg.b_reg) / sum; // in (0,1)
    const double alt_frac = (cfg.a - cfg.b) / sum;         // in (0,1)
    const double log_avg = std::log(avg);
    const double log_threshold = std::log(normal_approx_threshold);

    // Geometric decay ratio of the tail mean/variance terms.
    const double tail_ratio = alt ? std::max(cfg.snr_reg, cfg.snr_cross) : cfg.snr_reg;

    LimitLawSpec spec;
    spec.hypothesis = hypothesis;
    spec.a = cfg.a;
    spec.b = cfg.b;
    spec.epsilon = cfg.epsilon;
    spec.tolerance = tolerance;
    spec.normal_approx_threshold = normal_approx_threshold;

    constexpr int kMaxIndex = 100'000;
    for (int m = 3; m <= kMaxIndex; ++m) {
        const double log_lambda = m * log_avg - std::log(2.0 * m);
        const double delta = std::pow(reg_frac, m);
        const double log_gain = std::log1p(delta);
        const double delta_alt = alt ? std::pow(alt_frac, m) : 0.0;
        const double log_pois_mean = log_lambda + (alt ? std::log1p(delta_alt) : 0.0);

        LawTerm term;
        term.index = m;
        term.log_gain = log_gain;

        // Combined term mean: pois_mean * log(1+delta) - lambda * delta.
        // The null part is -lambda * (delta - log1p(delta)); the
        // alternative adds lambda * delta_alt * log1p(delta). Both factor
        // through bounded log-domain products even where lambda alone
        // overflows.
        const double dml = x_minus_log1p(delta);
        double mean = dml > 0.0 ? -std::exp(log_lambda + std::log(dml)) : 0.0;
        if (alt && delta_alt > 0.0 && log_gain > 0.0)
            mean += std::exp(log_lambda + m * std::log(alt_frac) + std::log(log_gain));
        term.gauss_mean = mean;
        term.gauss_sd = log_gain > 0.0 ? std::exp(0.5 * log_pois_mean + std::log(log_gain)) : 0.0;

        if (log_pois_mean <= log_threshold) {
            term.poisson = true;
            term.poisson_mean = std::exp(log_pois_mean);
            term.mean_offset = delta > 0.0 ? -std::exp(log_lambda + m * std::log(reg_frac)) : 0.0;
        }
        spec.terms.push_back(term);

        // Tail bounds from the next term: geometric with ratio tail_ratio.
        if (m >= 5) {
            const double next_lambda = (m + 1) * log_avg - std::log(2.0 * (m + 1));
            const double next_delta = std::pow(reg_frac, m + 1);
            const double next_dml = x_minus_log1p(next_delta);
            const double next_gain = std::log1p(next_delta);
            double next_mean = next_dml > 0.0 ? std::exp(next_lambda + std::log(next_dml)) : 0.0;
            if (alt && next_gain > 0.0)
                next_mean += std::exp(next_lambda + (m + 1) * std::log(alt_frac) + std::log(next_gain));
            const double next_pois = next_lambda + (alt ? std::log1p(std::pow(alt_frac, m + 1)) : 0.0);
            const double next_var = next_gain > 0.0 ? std::exp(next_pois + 2.0 * std::log(next_gain)) : 0.0;
            const double tail_mean = next_mean / (1.0 - tail_ratio);
            const double tail_var = next_var / (1.0 - tail_ratio);
            if (tail_mean < tolerance && tail_var < tolerance) break;
        }
        if (m == kMaxIndex)
            throw parameter_error("truncation did not converge; the configuration is too close to divergence");
    }
    spec.truncation_k = spec.terms.back().index;
    return spec;
}

double sample_log_w(const LimitLawSpec& spec, RngStream& rng) {
    double total = 0.0;
    for (const LawTerm& term : spec.terms) {
        if (term.poisson) {
            total += static_cast<double>(rng.poisson(term.poisson_mean)) * term.log_gain + term.mean_offset;
        } else {
            total += term.gauss_mean + term.gauss_sd * rng.normal();
        }
    }
    return total;
}

std::vector<double> sample_log_w_many(const LimitLawSpec& spec, std::uint64_t count, std::uint64_t seed,
                                      int threads) {
    std::vector<double> out(count);
    constexpr std::uint64_t kChunk = 4096;
    const std::uint64_t n_chunks = (count + kChunk - 1) / kChunk;
    parallel_for(n_chunks, threads, [&](std::uint64_t chunk) {
        const std::uint64_t begin = chunk * kChunk;
        const std::uint64_t end = std::min(begin + kChunk, count);
        for (std::uint64_t i = begin; i < end; ++i) {
            RngStream rng(seed, i, "law-draw");
            out[i] = sample_log_w(spec, rng);
        }
    });
    return out;
}

CriticalValueResult critical_value(const LimitLawSpec& null_law, double alpha, std::uint64_t num_samples,
                                   std::uint64_t seed, int threads, int bootstrap_reps) {
    if (null_law.hypothesis != Hypothesis::null_model)
        throw parameter_error("critical values come from the null law");
    if (!(alpha > 0.0 && alpha < 1.0)) throw parameter_error("alpha must lie in (0,1)");
    if (num_samples < kMinCriticalValueSamples)
        throw parameter_error("need at least " + std::to_string(kMinCriticalValueSamples) +
                              " samples for a critical value");
    if (bootstrap_reps < 2) throw parameter_error("need at least 2 bootstrap replicates");

    const std::vector<double> samples = sample_log_w_many(null_law, num_samples, seed, threads);
    const double q = 1.0 - alpha;

    CriticalValueResult result;
    result.alpha = alpha;
    result.num_samples = num_samples;
    result.seed = seed;
    result.w_log = empirical_quantile(samples, q);

    // Bootstrap the quantile to report its Monte Carlo uncertainty.
    std::vector<double> boot(static_cast<std::size_t>(bootstrap_reps));
    parallel_for(static_cast<std::uint64_t>(bootstrap_reps), threads, [&](std::uint64_t rep) {
        RngStream rng(seed, rep, "cv-bootstrap");
        std::vector<double> resample(samples.size());
        for (auto& x : resample) x = samples[rng.below(samples.size())];
        boot[rep] = empirical_quantile(std::move(resample), q);
    });
    result.half_width = 1.96 * std::sqrt(variance_of(boot));
    return result;
}

double simulated_power(const LimitLawSpec& null_law, const LimitLawSpec& alt_law, double alpha,
                       std::uint64_t num_samples, std::uint64_t seed, int threads) {
    if (null_law.hypothesis != Hypothesis::null_model || alt_law.hypothesis != Hypothesis::alternative_model)
        throw parameter_error("simulated_power expects (null law, alternative law)");
    if (null_law.a != alt_law.a || null_law.b != alt_law.b || null_law.epsilon != alt_law.epsilon)
        throw parameter_error("null and alternative laws must share (a, b, epsilon)");
    const CriticalValueResult cv =
        critical_value(null_law, alpha, num_samples, derive_seed(seed, 0, "power-null"), threads);
    const std::vector<double> alt_samples =
        sample_log_w_many(alt_law, num_samples, derive_seed(seed, 1, "power-alt"), threads);
    std::uint64_t above = 0;
    for (double x : alt_samples) above += x >= cv.w_log;
    return static_cast<double>(above) / static_cast<double>(num_samples);
}

double limit_power(const PowerLimitInputs& inputs) {
    if (!(inputs.k1 > 0.0 && inputs.k1 < 1.0)) throw parameter_error("k1 must lie in (0,1)");
    if (!(inputs.k2 > 0.0 && inputs.k2 < 1.0)) throw parameter_error("k2 must lie in (0,1)");
    if (!(inputs.alpha > 0.0 && inputs.alpha < 1.0)) throw parameter_error("alpha must lie in (0,1)");
    const double sigma1_sq = half_log_series(inputs.k1);
    const double sigma2_sq = half_log_series(inputs.k2);
    return normal_cdf(sigma2_sq / std::sqrt(sigma1_sq) - normal_quantile(1.0 - inputs.alpha));
}

namespace {

nlohmann::json record_to_json(const CriticalValueKey& key, const CriticalValueResult& value) {
    return nlohmann::json{
        {"a", key.a},
        {"b", key.b},
        {"epsilon", key.epsilon},
        {"alpha", key.alpha},
        {"tolerance", key.tolerance},
        {"seed", key.seed},
        {"num_samples", key.num_samples},
        {"w_log", value.w_log},
        {"half_width", value.half_width},
    };
}

} // namespace

CriticalValueCache::CriticalValueCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            CriticalValueKey key{j.at("a"), j.at("b"), j.at("epsilon"),       j.at("alpha"),
                                 j.at("tolerance"),    j.at("seed"),          j.at("num_samples")};
            CriticalValueResult value;
            value.w_log = j.at("w_log");
            value.half_width = j.at("half_width");
            value.alpha = key.alpha;
            value.num_samples = key.num_samples;
            value.seed = key.seed;
            records_.emplace_back(key, value);
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(path_, line_no, std::string("bad cache record: ") + e.what());
        }
    }
}

std::optional<CriticalValueResult> CriticalValueCache::find(const CriticalValueKey& key) const {
    for (const auto& [k, v] : records_)
        if (k == key) return v;
    return std::nullopt;
}

void CriticalValueCache::store(const CriticalValueKey& key, const CriticalValueResult& value) {
    records_.emplace_back(key, value);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw data_error("cannot write critical-value cache: " + path_);
    out << record_to_json(key, value).dump() << "\n";
}

CriticalValueResult cached_critical_value(const EpsilonConfig& cfg, double alpha, double tolerance,
                                          std::uint64_t num_samples, std::uint64_t seed, int threads,
                                          CriticalValueCache* cache) {
    const CriticalValueKey key{cfg.a, cfg.b, cfg.epsilon, alpha, tolerance, seed, num_samples};
    if (cache) {
        if (auto hit = cache->find(key)) return *hit;
    }
    const LimitLawSpec null_law = build_law(cfg, Hypothesis::null_model, tolerance);
    const CriticalValueResult result = critical_value(null_law, alpha, num_samples, seed, threads);
    if (cache) cache->store(key, result);
    return result;
}

} // namespace sbmtest
