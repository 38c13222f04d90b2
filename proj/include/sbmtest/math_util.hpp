#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace sbmtest {

// Streaming log-sum-exp accumulator. Addition and merge order must be fixed
// by the caller when bit-reproducible results are required.
class LogSumExp {
public:
    // Adds a term exp(log_x). Weighted variant adds weight * exp(log_x).
    void add(double log_x) { add_weighted(log_x, 1.0, 1); }

    void add_weighted(double log_x, double weight, std::uint64_t n_terms) {
        if (log_x == -inf_ || weight == 0.0) return;
        if (log_x <= max_) {
            sum_ += weight * std::exp(log_x - max_);
        } else {
            sum_ = sum_ * std::exp(max_ - log_x) + weight;
            max_ = log_x;
        }
        count_ += n_terms;
    }

    void merge(const LogSumExp& o) {
        if (o.count_ == 0) return;
        if (o.max_ <= max_) {
            sum_ += o.sum_ * std::exp(o.max_ - max_);
        } else {
            sum_ = sum_ * std::exp(max_ - o.max_) + o.sum_;
            max_ = o.max_;
        }
        count_ += o.count_;
    }

    double log_sum() const { return count_ == 0 ? -inf_ : max_ + std::log(sum_); }
    std::uint64_t count() const { return count_; }

private:
    static constexpr double inf_ = std::numeric_limits<double>::infinity();
    double max_ = -inf_;
    double sum_ = 0.0;
    std::uint64_t count_ = 0;
};

// sum_{m>=3} x^m / (2m) in closed form, for |x| < 1.
inline double half_log_series(double x) {
    return -0.5 * (std::log1p(-x) + x + 0.5 * x * x);
}

// x - log1p(x) for x > -1, stable near zero.
inline double x_minus_log1p(double x) {
    if (std::abs(x) < 1e-4) {
        // x^2/2 - x^3/3 + x^4/4 - x^5/5
        return x * x * (0.5 + x * (-1.0 / 3.0 + x * (0.25 - 0.2 * x)));
    }
    return x - std::log1p(x);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Inverse of normal_cdf on (0,1).
double normal_quantile(double p);

// Order statistic index used for empirical quantiles: smallest k (0-based)
// with (k+1)/n >= q.
inline std::size_t quantile_index(std::size_t n, double q) {
    if (n == 0) return 0;
    const double raw = std::ceil(q * static_cast<double>(n)) - 1.0;
    const auto k = static_cast<long long>(raw);
    return static_cast<std::size_t>(std::clamp<long long>(k, 0, static_cast<long long>(n) - 1));
}

// Empirical q-quantile; takes the values by copy since nth_element reorders.
inline double empirical_quantile(std::vector<double> values, double q) {
    const std::size_t k = quantile_index(values.size(), q);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return values[k];
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Unbiased sample variance.
inline double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

} // namespace sbmtest
