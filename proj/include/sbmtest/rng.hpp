#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sbmtest {

// SplitMix64 finalizer (bijective 64-bit mix).
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a over a purpose tag, so distinct purposes get distinct streams.
constexpr std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Child seed from (base seed, index, purpose tag). Identical inputs yield
// the identical stream on every platform; derivations can be chained to
// build (master, cell, replicate, purpose) hierarchies.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::string_view tag) {
    return mix64(mix64(base ^ 0x517cc1b727220a95ULL) ^ mix64(index + 0x2545f4914f6cdd1dULL) ^ hash_tag(tag));
}

// Deterministic random stream: std::mt19937_64 engine with hand-rolled
// variate transforms. The <random> distribution classes are
// implementation-defined, so their output differs between standard
// libraries; the transforms below pin the exact sequence instead.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : eng_(mix64(seed)) {}

    RngStream(std::uint64_t base, std::uint64_t index, std::string_view tag)
        : RngStream(derive_seed(base, index, tag)) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform on [0,1) with 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform on (0,1); never returns 0, safe inside log().
    double uniform_pos() {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return u;
    }

    // Unbiased integer in [0, n); rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n);

    double normal();

    std::uint64_t poisson(double mean);

private:
    std::mt19937_64 eng_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

} // namespace sbmtest
