#pragma once

#include <cstdint>
#include <string>

#include "detnas/evolution.hpp"
#include "detnas/searchspace.hpp"
#include "detnas/supernet.hpp"

namespace detnas {

// Flat `key = value` configuration with dotted section prefixes. A
// serialized config reproduces the run exactly under the same seed.
struct RunConfig {
    RunConfig() { evolution.constraint.max_flops = 300000000; }  // pairs with the small preset

    uint64_t seed = 1;
    std::string output_dir = "out";

    std::string space_preset = "small";  // "small" | "large" | "custom"
    SearchSpaceSpec space = small_space();

    // task parameters
    int classes = 4;
    int task_resolution = 32;
    int cls_train = 8000;
    int cls_val = 1000;
    int loc_train = 6000;
    int loc_search_val = 1000;
    int loc_test = 1000;
    int calibration = 500;
    double noise = 0.1;

    TrainingSchedule schedule;
    EvolutionConfig evolution;  // carries the FLOPs constraint

    void validate() const;

    TaskSpec classification_spec() const { return {TaskKind::kClassification, task_resolution, classes}; }
    TaskSpec localization_spec() const { return {TaskKind::kLocalization, task_resolution, 0}; }

    // Derived per-purpose seeds, all functions of `seed`.
    uint64_t init_seed() const;
    uint64_t pretrain_seed() const;
    uint64_t finetune_seed() const;
    uint64_t search_seed() const;
    uint64_t cls_data_seed() const;
    uint64_t loc_data_seed() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
// `key = value`; throws ConfigError for unknown keys or bad values.
void apply_config_override(RunConfig& config, const std::string& key, const std::string& value);
std::string serialize_config(const RunConfig& config);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace detnas
