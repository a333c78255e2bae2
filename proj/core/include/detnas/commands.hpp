#pragma once

#include <string>
#include <vector>

#include "detnas/config.hpp"

namespace detnas {

// Every command creates the output directory, writes its resolved config
// beside its outputs, and returns the paths it wrote. Reruns with the same
// config and seed reproduce checkpoints and CSVs bit-exactly.

struct PretrainOutputs {
    std::string checkpoint;
    std::string loss_csv;
    std::string config_file;
    double final_loss = 0.0;
};

struct FinetuneOutputs {
    std::string checkpoint;
    std::string loss_csv;
    std::string config_file;
    double final_loss = 0.0;
    int iterations_run = 0;
};

struct SearchOutputs {
    std::vector<std::string> log_csvs;  // one per controller
    std::string curve_svg;
    std::string result_file;
    std::string config_file;
    std::string best_architecture;
    double best_fitness = 0.0;
    int evaluations = 0;
};

struct RetrainOutputs {
    std::string report_file;
    std::string config_file;
    double accuracy = 0.0;
    double mean_iou = 0.0;
    uint64_t flops = 0;
};

struct EvalOutputs {
    std::string result_file;
    std::string config_file;
    double fitness = 0.0;
};

struct FlopsOutputs {
    std::string report_file;
    std::string histogram_csv;  // empty when an architecture was given
    std::string config_file;
};

struct PatternOutputs {
    std::string csv_file;
    std::string diagram_file;
    std::string config_file;
};

PretrainOutputs cmd_pretrain(const RunConfig& config);

// from_scratch = true skips the pretrained checkpoint and doubles the
// finetune iteration budget.
FinetuneOutputs cmd_finetune(const RunConfig& config, const std::string& checkpoint_path,
                             bool from_scratch = false);

// controllers: "evolution", "random" or "both".
SearchOutputs cmd_search(const RunConfig& config, const std::string& checkpoint_path,
                         const std::string& controllers = "evolution");

RetrainOutputs cmd_retrain(const RunConfig& config, const std::string& architecture_text);

EvalOutputs cmd_eval(const RunConfig& config, const std::string& checkpoint_path,
                     const std::string& architecture_text);

// Empty architecture: space report (cardinality, min/max MACs, histogram).
FlopsOutputs cmd_flops(const RunConfig& config, const std::string& architecture_text = "");

PatternOutputs cmd_report_patterns(const RunConfig& config, const std::string& archs_file);

}  // namespace detnas
