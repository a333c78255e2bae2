#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "detnas/rng.hpp"
#include "detnas/searchspace.hpp"
#include "detnas/tensor.hpp"

namespace detnas::test {

// Small custom spaces for fast desk-scale runs.
inline SearchSpaceSpec toy_space_8() {
    SearchSpaceSpec s;
    s.name = "custom";
    s.stem_channels = 8;
    s.stages = {{16, 2, 2}, {32, 3, 2}, {64, 3, 2}};
    s.input_resolution = {224, 224};
    return s;
}

inline SearchSpaceSpec toy_space_3() {
    SearchSpaceSpec s;
    s.name = "custom";
    s.stem_channels = 4;
    s.stages = {{8, 1, 2}, {16, 1, 2}, {32, 1, 2}};
    s.input_resolution = {224, 224};
    return s;
}

inline SearchSpaceSpec toy_space_2() {
    SearchSpaceSpec s;
    s.name = "custom";
    s.stem_channels = 4;
    s.stages = {{8, 1, 2}, {16, 1, 2}};
    s.input_resolution = {224, 224};
    return s;
}

inline SearchSpaceSpec one_block_space() {
    SearchSpaceSpec s;
    s.name = "custom";
    s.stem_channels = 4;
    s.stages = {{8, 1, 2}};
    s.input_resolution = {224, 224};
    return s;
}

// Enumerates every architecture of a small space in lexicographic order.
inline std::vector<Architecture> enumerate_space(const SearchSpaceSpec& space) {
    const int n = space.total_blocks();
    std::vector<Architecture> out;
    Architecture cur;
    cur.choices.assign(static_cast<size_t>(n), ChoiceKind::kShuffle3x3);
    std::function<void(int)> rec = [&](int pos) {
        if (pos == n) {
            out.push_back(cur);
            return;
        }
        for (int c = 0; c < kNumChoices; ++c) {
            cur.choices[static_cast<size_t>(pos)] = static_cast<ChoiceKind>(c);
            rec(pos + 1);
        }
    };
    rec(0);
    return out;
}

// Deterministic pseudo-random value in [0,1) from an architecture and seed.
inline double hash_fitness(const Architecture& arch, uint64_t seed) {
    uint64_t h = seed * 0x9E3779B97F4A7C15ull + 0x2545F4914F6CDD1Dull;
    for (const auto c : arch.choices) {
        h ^= static_cast<uint64_t>(c) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        h *= 0xBF58476D1CE4E5B9ull;
    }
    h ^= h >> 31;
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Smooth tabular fitness: per-position agreement with a hidden target
// architecture (weighted), plus small deterministic noise.
struct TabularFitness {
    Architecture target;
    std::vector<double> weights;
    double noise_amp;
    uint64_t seed;

    TabularFitness(const SearchSpaceSpec& space, uint64_t seed_in, double noise = 0.02)
        : noise_amp(noise), seed(seed_in) {
        Rng rng(Rng::derive(seed_in, 77));
        target = random_architecture(space, rng);
        weights.resize(target.choices.size());
        double total = 0;
        for (auto& w : weights) {
            w = 0.5 + rng.uniform_double();
            total += w;
        }
        for (auto& w : weights) w /= total;
    }

    double operator()(const Architecture& arch) const {
        double score = 0;
        for (size_t i = 0; i < arch.choices.size(); ++i) {
            const int d = std::abs(static_cast<int>(arch.choices[i]) -
                                   static_cast<int>(target.choices[i]));
            score += weights[i] * (3 - d) / 3.0;
        }
        return score + noise_amp * (hash_fitness(arch, seed) - 0.5);
    }
};

// Kendall tau-a over two fitness vectors.
inline double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = a.size();
    int concordant = 0, discordant = 0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            const double pa = a[i] - a[j], pb = b[i] - b[j];
            const double s = pa * pb;
            if (s > 0) ++concordant;
            else if (s < 0) ++discordant;
        }
    }
    const double pairs = static_cast<double>(n) * (n - 1) / 2.0;
    return (concordant - discordant) / pairs;
}

// Exact two-sided binomial sign test p-value for `wins` out of `n` paired
// comparisons (ties already removed).
inline double sign_test_p(int wins, int n) {
    const int k = std::max(wins, n - wins);
    double tail = 0;
    for (int i = k; i <= n; ++i) {
        double log_c = 0;
        for (int j = 0; j < i; ++j) log_c += std::log(static_cast<double>(n - j) / (i - j));
        tail += std::exp(log_c - n * std::log(2.0));
    }
    return std::min(1.0, 2.0 * tail);
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline bool files_identical(const std::string& a, const std::string& b) {
    const std::string ca = slurp(a), cb = slurp(b);
    return !ca.empty() && ca == cb;
}

inline uint64_t tensor_checksum(const Tensor& t) {
    uint64_t h = 0xcbf29ce484222325ull;
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
    for (size_t i = 0; i < t.numel() * sizeof(float); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detnas::test
