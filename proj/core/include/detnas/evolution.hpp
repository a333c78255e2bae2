#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "detnas/flops.hpp"
#include "detnas/rng.hpp"
#include "detnas/searchspace.hpp"

namespace detnas {

struct Individual {
    Architecture arch;
    double fitness = 0.0;
    bool evaluated = false;
};

struct EvolutionConfig {
    int population_size = 50;
    int parent_size = 10;
    int iterations = 20;
    double mutation_prob = 0.1;  // per-position flip to a different choice
    int max_resample_attempts = 100;
    Constraint constraint;

    int total_evaluations() const { return population_size * iterations; }
    void validate() const;
};

enum class ControllerKind { kEvolution, kRandom };

ControllerKind controller_from_name(const std::string& name);
const char* controller_name(ControllerKind kind);

struct SearchLogRow {
    int iteration = 0;  // 1-based
    int index = 0;      // position within the iteration
    Architecture arch;
    uint64_t flops = 0;
    double fitness = 0.0;
    double best_so_far = 0.0;
    bool memo_hit = false;
};

struct SearchResult {
    Architecture best_architecture;
    double best_fitness = 0.0;
    std::vector<SearchLogRow> log;
    int total_evaluations = 0;
    int unique_evaluations = 0;
};

using FitnessFn = std::function<double(const Architecture&)>;
using LogSink = std::function<void(const SearchLogRow&)>;

// population_size individuals, each satisfying the constraint, resampled
// uniformly until they do. Fails fast when the minimum-FLOPs path already
// violates the budget.
std::vector<Individual> initialize_population(const SearchSpaceSpec& space,
                                              const EvolutionConfig& config,
                                              const FlopsTable& flops, Rng& rng);

// k highest-fitness individuals; ties broken by earlier evaluation order.
std::vector<Individual> select_topk(const std::vector<Individual>& population, int k);

// ceil(|P|/2) mutation children and floor(|P|/2) crossover children, each
// resampled until it satisfies the constraint.
std::vector<Architecture> make_children(const std::vector<Individual>& parents,
                                        const EvolutionConfig& config, const FlopsTable& flops,
                                        Rng& rng);

// Algorithm: evaluate the population, select top-k parents, regenerate by
// mutation/crossover half by half, repeat for `iterations` generations while
// tracking the global best. The random controller draws the same total
// number of constraint-satisfying architectures uniformly. Duplicate
// architectures are served from a memo table and logged as memo hits.
SearchResult run_search(const SearchSpaceSpec& space, const EvolutionConfig& config,
                        ControllerKind controller, const FitnessFn& fitness, Rng& rng,
                        const LogSink* sink = nullptr);

// Per-stage histogram of choices over a set of architectures.
struct PatternReport {
    std::vector<std::array<int, kNumChoices>> stage_counts;
};

PatternReport pattern_report(const std::vector<Architecture>& archs, const SearchSpaceSpec& space);
std::string pattern_report_csv(const PatternReport& report, const SearchSpaceSpec& space);
// One row per architecture, blocks as symbols, stages separated by '|'.
std::string pattern_diagram(const std::vector<Architecture>& archs, const SearchSpaceSpec& space);

}  // namespace detnas
