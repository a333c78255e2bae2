#include "detnas/evolution.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "detnas/errors.hpp"

namespace detnas {

void EvolutionConfig::validate() const {
    if (population_size <= 0) throw ConfigError("evolution: population_size must be positive");
    if (parent_size <= 0 || parent_size > population_size)
        throw ConfigError("evolution: parent_size must be in [1, population_size]");
    if (iterations < 1) throw ConfigError("evolution: iterations must be at least 1");
    if (mutation_prob < 0.0 || mutation_prob > 1.0)
        throw ConfigError("evolution: mutation_prob must be in [0,1]");
    if (max_resample_attempts <= 0)
        throw ConfigError("evolution: max_resample_attempts must be positive");
}

ControllerKind controller_from_name(const std::string& name) {
    if (name == "evolution") return ControllerKind::kEvolution;
    if (name == "random") return ControllerKind::kRandom;
    throw ConfigError("unknown controller '" + name + "' (expected \"evolution\" or \"random\")");
}

const char* controller_name(ControllerKind kind) {
    return kind == ControllerKind::kEvolution ? "evolution" : "random";
}

namespace {

void check_feasible(const SearchSpaceSpec& space, const Constraint& constraint,
                    const FlopsTable& flops) {
    if (!constraint.satisfies(flops.min_macs()))
        throw ConstraintError("constraint " + std::to_string(constraint.max_flops) +
                              " MACs is below the minimum achievable " +
                              std::to_string(flops.min_macs()) + " MACs of space '" + space.name +
                              "'");
}

Architecture sample_satisfying(const SearchSpaceSpec& space, const EvolutionConfig& config,
                               const FlopsTable& flops, Rng& rng) {
    for (int attempt = 0; attempt < config.max_resample_attempts; ++attempt) {
        Architecture arch = random_architecture(space, rng);
        if (config.constraint.satisfies(flops.architecture_macs(arch))) return arch;
    }
    throw ConstraintError("constrained sampling failed after " +
                          std::to_string(config.max_resample_attempts) + " attempts");
}

}  // namespace

std::vector<Individual> initialize_population(const SearchSpaceSpec& space,
                                              const EvolutionConfig& config,
                                              const FlopsTable& flops, Rng& rng) {
    config.validate();
    check_feasible(space, config.constraint, flops);
    std::vector<Individual> population;
    population.reserve(static_cast<size_t>(config.population_size));
    for (int i = 0; i < config.population_size; ++i)
        population.push_back({sample_satisfying(space, config, flops, rng), 0.0, false});
    return population;
}

std::vector<Individual> select_topk(const std::vector<Individual>& population, int k) {
    if (k > static_cast<int>(population.size()))
        throw ConfigError("select_topk: k=" + std::to_string(k) + " exceeds population size " +
                          std::to_string(population.size()));
    for (const auto& ind : population)
        if (!ind.evaluated) throw ConfigError("select_topk: population has unevaluated individuals");
    std::vector<size_t> order(population.size());
    std::iota(order.begin(), order.end(), size_t{0});
    // Stable sort keeps evaluation order among equal fitnesses.
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return population[a].fitness > population[b].fitness;
    });
    std::vector<Individual> parents;
    parents.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) parents.push_back(population[order[static_cast<size_t>(i)]]);
    return parents;
}

namespace {

Architecture mutate(const Architecture& parent, double prob, Rng& rng) {
    Architecture child = parent;
    for (auto& choice : child.choices) {
        if (rng.uniform_double() < prob) {
            // Flip to one of the three other choices, uniformly.
            const int offset = 1 + rng.uniform_int(kNumChoices - 1);
            choice = static_cast<ChoiceKind>((static_cast<int>(choice) + offset) % kNumChoices);
        }
    }
    return child;
}

Architecture crossover(const Architecture& a, const Architecture& b, Rng& rng) {
    Architecture child;
    child.choices.resize(a.choices.size());
    for (size_t i = 0; i < a.choices.size(); ++i)
        child.choices[i] = rng.uniform_int(2) == 0 ? a.choices[i] : b.choices[i];
    return child;
}

}  // namespace

std::vector<Architecture> make_children(const std::vector<Individual>& parents,
                                        const EvolutionConfig& config, const FlopsTable& flops,
                                        Rng& rng) {
    if (parents.empty()) throw ConfigError("make_children: parents must be non-empty");
    const int n_parents = static_cast<int>(parents.size());
    const int n_mutation = (config.population_size + 1) / 2;
    const int n_crossover = config.population_size / 2;

    std::vector<Architecture> children;
    children.reserve(static_cast<size_t>(config.population_size));
    auto constrained = [&](auto&& generate) {
        for (int attempt = 0; attempt < config.max_resample_attempts; ++attempt) {
            Architecture child = generate();
            if (config.constraint.satisfies(flops.architecture_macs(child))) return child;
        }
        throw ConstraintError("child generation failed the constraint after " +
                              std::to_string(config.max_resample_attempts) + " attempts");
    };

    for (int i = 0; i < n_mutation; ++i)
        children.push_back(constrained([&] {
            const auto& parent = parents[static_cast<size_t>(rng.uniform_int(n_parents))];
            return mutate(parent.arch, config.mutation_prob, rng);
        }));
    for (int i = 0; i < n_crossover; ++i)
        children.push_back(constrained([&] {
            const int a = rng.uniform_int(n_parents);
            int b = a;
            if (n_parents > 1)
                while (b == a) b = rng.uniform_int(n_parents);
            return crossover(parents[static_cast<size_t>(a)].arch,
                             parents[static_cast<size_t>(b)].arch, rng);
        }));
    return children;
}

SearchResult run_search(const SearchSpaceSpec& space, const EvolutionConfig& config,
                        ControllerKind controller, const FitnessFn& fitness, Rng& rng,
                        const LogSink* sink) {
    config.validate();
    const FlopsTable flops(space);
    check_feasible(space, config.constraint, flops);

    SearchResult result;
    result.best_fitness = 0.0;
    std::unordered_map<std::string, double> memo;

    auto evaluate_logged = [&](const Architecture& arch, int iteration, int index) {
        const std::string key = format_architecture(arch);
        const auto it = memo.find(key);
        const bool memo_hit = it != memo.end();
        const double f = memo_hit ? it->second : fitness(arch);
        if (!memo_hit) memo.emplace(key, f);
        if (result.log.empty() || f > result.best_fitness) {
            result.best_fitness = f;
            result.best_architecture = arch;
        }
        SearchLogRow row{iteration, index, arch, flops.architecture_macs(arch), f,
                         result.best_fitness, memo_hit};
        if (sink) (*sink)(row);
        result.log.push_back(std::move(row));
        return f;
    };

    if (controller == ControllerKind::kEvolution) {
        std::vector<Individual> population = initialize_population(space, config, flops, rng);
        for (int iter = 1; iter <= config.iterations; ++iter) {
            for (size_t i = 0; i < population.size(); ++i) {
                population[i].fitness =
                    evaluate_logged(population[i].arch, iter, static_cast<int>(i));
                population[i].evaluated = true;
            }
            if (iter < config.iterations) {
                const auto parents = select_topk(population, config.parent_size);
                const auto children = make_children(parents, config, flops, rng);
                population.clear();
                for (const auto& child : children) population.push_back({child, 0.0, false});
            }
        }
    } else {
        const int total = config.total_evaluations();
        for (int e = 0; e < total; ++e) {
            const Architecture arch = sample_satisfying(space, config, flops, rng);
            evaluate_logged(arch, e / config.population_size + 1, e % config.population_size);
        }
    }

    result.total_evaluations = static_cast<int>(result.log.size());
    result.unique_evaluations = static_cast<int>(memo.size());
    return result;
}

PatternReport pattern_report(const std::vector<Architecture>& archs, const SearchSpaceSpec& space) {
    if (archs.empty()) throw ConfigError("pattern_report: empty architecture list");
    const int blocks = space.total_blocks();
    for (const auto& arch : archs)
        if (static_cast<int>(arch.size()) != blocks)
            throw ConfigError("pattern_report: architecture with " + std::to_string(arch.size()) +
                              " choices does not belong to space '" + space.name + "' (" +
                              std::to_string(blocks) + " blocks)");
    PatternReport report;
    report.stage_counts.assign(space.stages.size(), {});
    for (const auto& arch : archs)
        for (int b = 0; b < blocks; ++b)
            ++report.stage_counts[static_cast<size_t>(space.stage_of_block(b))]
                                 [static_cast<size_t>(arch.choices[static_cast<size_t>(b)])];
    return report;
}

std::string pattern_report_csv(const PatternReport& report, const SearchSpaceSpec& space) {
    std::ostringstream out;
    out << "stage,blocks,shuffle_3x3,shuffle_5x5,shuffle_7x7,xception_3x3\n";
    for (size_t s = 0; s < report.stage_counts.size(); ++s) {
        out << (s + 1) << "," << space.stages[s].num_blocks;
        for (int c = 0; c < kNumChoices; ++c) out << "," << report.stage_counts[s][static_cast<size_t>(c)];
        out << "\n";
    }
    return out.str();
}

std::string pattern_diagram(const std::vector<Architecture>& archs, const SearchSpaceSpec& space) {
    pattern_report(archs, space);  // validates inputs
    static constexpr const char* kSymbol[kNumChoices] = {"3", "5", "7", "X"};
    std::ostringstream out;
    for (size_t a = 0; a < archs.size(); ++a) {
        out << "path " << (a + 1) << ": ";
        int b = 0;
        for (size_t s = 0; s < space.stages.size(); ++s) {
            if (s) out << "| ";
            for (int i = 0; i < space.stages[s].num_blocks; ++i, ++b)
                out << kSymbol[static_cast<size_t>(archs[a].choices[static_cast<size_t>(b)])] << " ";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace detnas
