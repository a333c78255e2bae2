// detnas: one-shot supernet NAS pipeline over a ShuffleNetv2-style choice
// space. Subcommands cover the three pipeline steps (pretrain, finetune,
// search) plus stand-alone retraining, path evaluation, FLOPs reporting and
// architecture pattern reports.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "detnas/commands.hpp"
#include "detnas/errors.hpp"

namespace {

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> overrides;  // key=value
    std::string output_dir;
    int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "Configuration file (key = value lines)");
    cmd->add_option("--set", args.overrides, "Override a config key, e.g. --set evolution.iterations=5");
    cmd->add_option("--out", args.output_dir, "Output directory (overrides run.output_dir)");
    cmd->add_option("--seed", args.seed, "Seed (overrides run.seed)");
}

detnas::RunConfig resolve_config(const CommonArgs& args) {
    detnas::RunConfig config;
    if (!args.config_file.empty()) config = detnas::load_config_file(args.config_file);
    for (const auto& kv : args.overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw detnas::ConfigError("--set expects key=value, got '" + kv + "'");
        detnas::apply_config_override(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!args.output_dir.empty()) config.output_dir = args.output_dir;
    if (args.seed >= 0) config.seed = static_cast<uint64_t>(args.seed);
    if (const char* env_seed = std::getenv("DETNAS_SEED"))
        detnas::apply_config_override(config, "run.seed", env_seed);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DetNAS-style backbone search: supernet pretraining, supernet fine-tuning and "
                 "FLOPs-constrained evolutionary search on synthetic tasks"};
    app.require_subcommand(1);

    CommonArgs pretrain_args;
    auto* pretrain = app.add_subcommand("pretrain", "Train the supernet on the classification task");
    add_common(pretrain, pretrain_args);

    CommonArgs finetune_args;
    std::string finetune_ckpt;
    bool from_scratch = false;
    auto* finetune = app.add_subcommand("finetune", "Fine-tune a pretrained supernet on the localization task");
    add_common(finetune, finetune_args);
    finetune->add_option("--ckpt", finetune_ckpt, "Pretrained checkpoint");
    finetune->add_flag("--from-scratch", from_scratch,
                       "Start from random weights (doubles the finetune iterations)");

    CommonArgs search_args;
    std::string search_ckpt, controller = "evolution";
    auto* search = app.add_subcommand("search", "Evolutionary search on a finetuned supernet");
    add_common(search, search_args);
    search->add_option("--ckpt", search_ckpt, "Finetuned checkpoint")->required();
    search->add_option("--controller", controller, "evolution | random | both");

    CommonArgs retrain_args;
    std::string retrain_arch;
    auto* retrain = app.add_subcommand("retrain", "Train one architecture stand-alone (pretrain then finetune)");
    add_common(retrain, retrain_args);
    retrain->add_option("--arch", retrain_arch, "Architecture (\"0,2,1,...\" or \"3x3,7x7,...\")")->required();

    CommonArgs eval_args;
    std::string eval_ckpt, eval_arch;
    auto* eval = app.add_subcommand("eval", "Evaluate one path with inherited weights");
    add_common(eval, eval_args);
    eval->add_option("--ckpt", eval_ckpt, "Finetuned checkpoint")->required();
    eval->add_option("--arch", eval_arch, "Architecture to evaluate")->required();

    CommonArgs flops_args;
    std::string flops_arch;
    auto* flops = app.add_subcommand("flops", "FLOPs report for a space or one architecture");
    add_common(flops, flops_args);
    flops->add_option("--arch", flops_arch, "Architecture (omit for a space-level report)");

    CommonArgs patterns_args;
    std::string archs_file;
    auto* patterns = app.add_subcommand("report-patterns", "Per-stage choice histogram for a list of architectures");
    add_common(patterns, patterns_args);
    patterns->add_option("--archs", archs_file, "File with one architecture per line")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (pretrain->parsed()) {
            const auto out = detnas::cmd_pretrain(resolve_config(pretrain_args));
            std::cout << "checkpoint: " << out.checkpoint << "\nfinal loss: " << out.final_loss << "\n";
        } else if (finetune->parsed()) {
            if (!from_scratch && finetune_ckpt.empty())
                throw detnas::ConfigError("finetune: --ckpt is required unless --from-scratch is given");
            const auto out = detnas::cmd_finetune(resolve_config(finetune_args), finetune_ckpt, from_scratch);
            std::cout << "checkpoint: " << out.checkpoint << "\nfinal loss: " << out.final_loss
                      << "\niterations: " << out.iterations_run << "\n";
        } else if (search->parsed()) {
            const auto out = detnas::cmd_search(resolve_config(search_args), search_ckpt, controller);
            std::cout << "best architecture: " << out.best_architecture
                      << "\nbest fitness: " << out.best_fitness
                      << "\nevaluations: " << out.evaluations << "\nresult: " << out.result_file << "\n";
        } else if (retrain->parsed()) {
            const auto out = detnas::cmd_retrain(resolve_config(retrain_args), retrain_arch);
            std::cout << "report: " << out.report_file << "\naccuracy: " << out.accuracy
                      << "\nmean IoU: " << out.mean_iou << "\n";
        } else if (eval->parsed()) {
            const auto out = detnas::cmd_eval(resolve_config(eval_args), eval_ckpt, eval_arch);
            std::cout << "fitness: " << out.fitness << "\nresult: " << out.result_file << "\n";
        } else if (flops->parsed()) {
            const auto out = detnas::cmd_flops(resolve_config(flops_args), flops_arch);
            std::cout << detnas::read_text_file(out.report_file);
        } else if (patterns->parsed()) {
            const auto out = detnas::cmd_report_patterns(resolve_config(patterns_args), archs_file);
            std::cout << detnas::read_text_file(out.csv_file);
        }
    } catch (const detnas::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const detnas::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const detnas::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const detnas::ConstraintError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const detnas::PhaseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const detnas::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
