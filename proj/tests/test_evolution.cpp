#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "detnas/errors.hpp"
#include "detnas/evolution.hpp"
#include "test_util.hpp"

using namespace detnas;

namespace {

EvolutionConfig tiny_config(int pop, int parents, int iters, uint64_t eta = UINT64_MAX) {
    EvolutionConfig cfg;
    cfg.population_size = pop;
    cfg.parent_size = parents;
    cfg.iterations = iters;
    cfg.constraint.max_flops = eta;
    return cfg;
}

Individual ind(const Architecture& a, double f) { return {a, f, true}; }

}  // namespace

TEST_SUITE_BEGIN("evolution");

TEST_CASE("select_topk picks the highest fitnesses") {
    const auto space = test::toy_space_3();
    Rng rng(1);
    std::vector<Individual> pop = {ind(random_architecture(space, rng), 0.1),
                                   ind(random_architecture(space, rng), 0.5),
                                   ind(random_architecture(space, rng), 0.3)};
    const auto top = select_topk(pop, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0].fitness == 0.5);
    CHECK(top[1].fitness == 0.3);
}

TEST_CASE("select_topk breaks ties by evaluation order") {
    const auto space = test::toy_space_3();
    Rng rng(2);
    std::vector<Individual> pop;
    for (int i = 0; i < 4; ++i) pop.push_back(ind(random_architecture(space, rng), 0.7));
    const auto top = select_topk(pop, 2);
    CHECK(top[0].arch == pop[0].arch);
    CHECK(top[1].arch == pop[1].arch);

    const auto whole = select_topk(pop, 4);
    CHECK(whole.size() == 4);
    CHECK_THROWS_AS(select_topk(pop, 5), ConfigError);
    pop[1].evaluated = false;
    CHECK_THROWS_AS(select_topk(pop, 2), ConfigError);
}

TEST_CASE("zero mutation probability reproduces the parent") {
    const auto space = test::toy_space_8();
    const FlopsTable flops(space);
    Rng rng(3);
    std::vector<Individual> parents = {ind(random_architecture(space, rng), 1.0)};
    EvolutionConfig cfg = tiny_config(6, 1, 1);
    cfg.mutation_prob = 0.0;
    const auto children = make_children(parents, cfg, flops, rng);
    REQUIRE(children.size() == 6);
    for (const auto& child : children) CHECK(child == parents[0].arch);
}

TEST_CASE("probability-one mutation flips every position") {
    const auto space = test::toy_space_8();
    const FlopsTable flops(space);
    Rng rng(4);
    std::vector<Individual> parents = {ind(random_architecture(space, rng), 1.0)};
    EvolutionConfig cfg = tiny_config(8, 1, 1);
    cfg.mutation_prob = 1.0;
    const auto children = make_children(parents, cfg, flops, rng);
    // First ceil(8/2)=4 children come from mutation.
    for (int i = 0; i < 4; ++i)
        for (size_t p = 0; p < parents[0].arch.size(); ++p)
            CHECK(children[static_cast<size_t>(i)].choices[p] != parents[0].arch.choices[p]);
}

TEST_CASE("crossover of identical parents is a fixed point") {
    const auto space = test::toy_space_8();
    const FlopsTable flops(space);
    Rng rng(5);
    const Architecture a = random_architecture(space, rng);
    std::vector<Individual> parents = {ind(a, 1.0), ind(a, 0.9)};
    EvolutionConfig cfg = tiny_config(6, 2, 1);
    cfg.mutation_prob = 0.0;
    const auto children = make_children(parents, cfg, flops, rng);
    for (const auto& child : children) CHECK(child == a);
}

TEST_CASE("children satisfy the constraint") {
    const auto space = test::toy_space_8();
    const FlopsTable flops(space);
    const uint64_t eta = (flops.min_macs() + flops.max_macs()) / 2;
    Rng rng(6);
    EvolutionConfig cfg = tiny_config(12, 3, 1, eta);
    auto pop = initialize_population(space, cfg, flops, rng);
    for (auto& i : pop) {
        i.fitness = 0.5;
        i.evaluated = true;
    }
    const auto children = make_children(select_topk(pop, 3), cfg, flops, rng);
    for (const auto& child : children) CHECK(flops.architecture_macs(child) <= eta);
}

TEST_CASE("unsatisfiable constraints fail fast") {
    const auto space = test::toy_space_8();
    const FlopsTable flops(space);
    Rng rng(7);
    EvolutionConfig cfg = tiny_config(4, 2, 1, flops.min_macs() - 1);
    CHECK_THROWS_AS(initialize_population(space, cfg, flops, rng), ConstraintError);
    int calls = 0;
    const FitnessFn fitness = [&](const Architecture&) { ++calls; return 0.0; };
    CHECK_THROWS_AS(run_search(space, cfg, ControllerKind::kEvolution, fitness, rng), ConstraintError);
    CHECK(calls == 0);
}

TEST_CASE("population at the 30th-percentile budget stays feasible") {
    const auto space = small_space();
    const FlopsTable flops(space);
    Rng sampler(8);
    std::vector<uint64_t> macs(10000);
    for (auto& m : macs) m = flops.architecture_macs(random_architecture(space, sampler));
    std::sort(macs.begin(), macs.end());
    const uint64_t eta = macs[3000];

    Rng rng(9);
    EvolutionConfig cfg = tiny_config(50, 10, 1, eta);
    const auto pop = initialize_population(space, cfg, flops, rng);
    REQUIRE(pop.size() == 50);
    for (const auto& i : pop) CHECK(flops.architecture_macs(i.arch) <= eta);
}

TEST_CASE("vacuous constraint is plain uniform sampling") {
    const auto space = test::toy_space_3();
    const FlopsTable flops(space);
    Rng a(10), b(10);
    EvolutionConfig cfg = tiny_config(20, 5, 1);
    const auto pop = initialize_population(space, cfg, flops, a);
    for (size_t i = 0; i < pop.size(); ++i)
        CHECK(pop[i].arch == random_architecture(space, b));
}

TEST_CASE("memoization never recomputes a fitness") {
    const auto space = test::one_block_space();  // 4 architectures, forced duplicates
    int calls = 0;
    const FitnessFn fitness = [&](const Architecture& arch) {
        ++calls;
        return test::hash_fitness(arch, 1);
    };
    Rng rng(11);
    const auto result = run_search(space, tiny_config(8, 2, 3), ControllerKind::kEvolution, fitness, rng);
    CHECK(result.log.size() == 24);
    CHECK(result.unique_evaluations <= 4);
    CHECK(calls == result.unique_evaluations);
    int memo_hits = 0;
    for (const auto& row : result.log) memo_hits += row.memo_hit ? 1 : 0;
    CHECK(memo_hits == 24 - calls);
}

TEST_CASE("best-so-far is non-decreasing and matches the log maximum") {
    const auto space = test::toy_space_3();
    const FitnessFn fitness = [](const Architecture& arch) { return test::hash_fitness(arch, 5); };
    for (const auto controller : {ControllerKind::kEvolution, ControllerKind::kRandom}) {
        Rng rng(12);
        const auto result = run_search(space, tiny_config(10, 3, 5), controller, fitness, rng);
        CHECK(result.log.size() == 50);
        double best = result.log.front().fitness;
        double max_f = best;
        for (const auto& row : result.log) {
            CHECK(row.best_so_far >= best);
            best = row.best_so_far;
            max_f = std::max(max_f, row.fitness);
        }
        CHECK(result.best_fitness == best);
        CHECK(result.best_fitness == max_f);
        CHECK(result.total_evaluations == 50);
    }
}

TEST_CASE("identical seeds give identical logs") {
    const auto space = test::toy_space_8();
    const FitnessFn fitness = [](const Architecture& arch) { return test::hash_fitness(arch, 9); };
    auto run = [&] {
        Rng rng(13);
        std::ostringstream out;
        const auto result = run_search(space, tiny_config(10, 3, 4), ControllerKind::kEvolution,
                                       fitness, rng);
        for (const auto& row : result.log)
            out << row.iteration << "," << row.index << "," << format_architecture(row.arch) << ","
                << row.flops << "," << row.fitness << "," << row.best_so_far << "," << row.memo_hit
                << "\n";
        return out.str();
    };
    CHECK(run() == run());
}

TEST_CASE("evolution finds the optimum of an enumerable space") {
    const auto space = test::toy_space_3();
    const auto all = test::enumerate_space(space);
    REQUIRE(all.size() == 64);
    const test::TabularFitness fitness(space, 99, 0.0);
    double best = -1;
    for (const auto& a : all) best = std::max(best, fitness(a));

    Rng rng(14);
    const auto result = run_search(space, tiny_config(20, 4, 10), ControllerKind::kEvolution,
                                   [&](const Architecture& a) { return fitness(a); }, rng);
    CHECK(result.best_fitness == doctest::Approx(best));
}

TEST_CASE("children are valid members of the space") {
    const auto space = test::toy_space_8();
    const FlopsTable flops(space);
    Rng rng(15);
    std::vector<Individual> parents;
    for (int i = 0; i < 5; ++i) parents.push_back(ind(random_architecture(space, rng), i * 0.1));
    const auto children = make_children(parents, tiny_config(20, 5, 1), flops, rng);
    for (const auto& child : children) {
        CHECK(child.size() == static_cast<size_t>(space.total_blocks()));
        for (const auto c : child.choices) CHECK(static_cast<int>(c) < kNumChoices);
    }
}

TEST_CASE("pattern report histograms") {
    const auto space = test::toy_space_8();
    const Architecture all7 = uniform_architecture(space, ChoiceKind::kShuffle7x7);
    const auto report = pattern_report({all7}, space);
    REQUIRE(report.stage_counts.size() == 3);
    for (size_t s = 0; s < 3; ++s) {
        CHECK(report.stage_counts[s][2] == space.stages[s].num_blocks);
        CHECK(report.stage_counts[s][0] == 0);
    }

    CHECK_THROWS_AS(pattern_report({}, space), ConfigError);
    Architecture wrong;
    wrong.choices = {ChoiceKind::kShuffle3x3};
    CHECK_THROWS_AS(pattern_report({all7, wrong}, space), ConfigError);

    const std::string csv = pattern_report_csv(report, space);
    CHECK(csv.find("stage,blocks,shuffle_3x3,shuffle_5x5,shuffle_7x7,xception_3x3") == 0);
    const std::string diagram = pattern_diagram({all7}, space);
    CHECK(diagram.find("path 1: 7 7 | 7 7 7 | 7 7 7") != std::string::npos);
}

TEST_CASE("uniform paths give near-uniform per-stage frequencies") {
    const auto space = small_space();
    Rng rng(16);
    std::vector<Architecture> archs;
    for (int i = 0; i < 100; ++i) archs.push_back(random_architecture(space, rng));
    const auto report = pattern_report(archs, space);
    for (size_t s = 0; s < report.stage_counts.size(); ++s) {
        const int total = space.stages[s].num_blocks * 100;
        for (int c = 0; c < kNumChoices; ++c) {
            const double freq = static_cast<double>(report.stage_counts[s][static_cast<size_t>(c)]) / total;
            CHECK(freq >= 0.15);
            CHECK(freq <= 0.35);
        }
    }
}

TEST_SUITE_END();
