#include <benchmark/benchmark.h>

#include "detnas/evolution.hpp"
#include "detnas/flops.hpp"
#include "detnas/nn_ops.hpp"
#include "detnas/rng.hpp"
#include "detnas/supernet.hpp"
#include "detnas/tasks.hpp"

namespace {

using namespace detnas;

Tensor random_input(std::vector<int> dims, uint64_t seed) {
    Rng rng(seed);
    Tensor t(std::move(dims));
    for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal_f(1.0f);
    return t;
}

void bm_conv2d_pointwise(benchmark::State& state) {
    const Tensor x = random_input({16, 64, 14, 14}, 1);
    const Tensor w = random_input({64, 64, 1, 1}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, w, 1, 1));
    state.SetItemsProcessed(state.iterations() * 16 * 64 * 64 * 14 * 14);
}
BENCHMARK(bm_conv2d_pointwise);

void bm_conv2d_depthwise(benchmark::State& state) {
    const Tensor x = random_input({16, 64, 14, 14}, 3);
    const Tensor w = random_input({64, 1, 3, 3}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, w, 1, 64));
    state.SetItemsProcessed(state.iterations() * 16 * 64 * 9 * 14 * 14);
}
BENCHMARK(bm_conv2d_depthwise);

void bm_conv2d_backward(benchmark::State& state) {
    const Tensor x = random_input({8, 32, 14, 14}, 5);
    const Tensor w = random_input({32, 32, 1, 1}, 6);
    const Tensor gy = random_input({8, 32, 14, 14}, 7);
    for (auto _ : state) {
        Tensor gx, gw;
        nn::conv2d_backward(x, w, 1, 1, gy, gx, gw);
        benchmark::DoNotOptimize(gx);
    }
}
BENCHMARK(bm_conv2d_backward);

void bm_batch_norm_train(benchmark::State& state) {
    const Tensor x = random_input({32, 64, 8, 8}, 8);
    Tensor scale({64}), shift({64});
    scale.fill(1.0f);
    for (auto _ : state) {
        std::vector<float> mean, var;
        benchmark::DoNotOptimize(
            nn::batch_norm_train<float>(x, scale, shift, 1e-5f, nullptr, mean, var));
    }
}
BENCHMARK(bm_batch_norm_train);

void bm_architecture_flops(benchmark::State& state) {
    const auto space = small_space();
    Rng rng(9);
    const Architecture arch = random_architecture(space, rng);
    for (auto _ : state) benchmark::DoNotOptimize(architecture_flops(arch, space));
}
BENCHMARK(bm_architecture_flops);

void bm_flops_table_lookup(benchmark::State& state) {
    const auto space = small_space();
    const FlopsTable table(space);
    Rng rng(10);
    const Architecture arch = random_architecture(space, rng);
    for (auto _ : state) benchmark::DoNotOptimize(table.architecture_macs(arch));
}
BENCHMARK(bm_flops_table_lookup);

void bm_evolution_generation(benchmark::State& state) {
    const auto space = small_space();
    const FlopsTable table(space);
    EvolutionConfig config;
    config.constraint.max_flops = UINT64_MAX;
    Rng rng(11);
    auto population = initialize_population(space, config, table, rng);
    for (auto& ind : population) {
        ind.fitness = static_cast<double>(table.architecture_macs(ind.arch));
        ind.evaluated = true;
    }
    for (auto _ : state) {
        const auto parents = select_topk(population, config.parent_size);
        benchmark::DoNotOptimize(make_children(parents, config, table, rng));
    }
}
BENCHMARK(bm_evolution_generation);

void bm_path_forward_eval(benchmark::State& state) {
    SearchSpaceSpec space;
    space.name = "custom";
    space.stem_channels = 8;
    space.stages = {{16, 2, 2}, {32, 3, 2}, {64, 3, 2}};
    SupernetWeights weights(space, 4, 12);
    Rng rng(13);
    const Architecture arch = random_architecture(space, rng);
    PathNetwork net(weights, arch, HeadKind::kClassification, BnStatsMode::kPrivate);
    const Tensor batch = random_input({32, 3, 32, 32}, 14);
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(batch, ForwardMode::kEval));
}
BENCHMARK(bm_path_forward_eval);

}  // namespace

BENCHMARK_MAIN();
