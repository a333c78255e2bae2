#include "detnas/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "detnas/checkpoint.hpp"
#include "detnas/errors.hpp"
#include "detnas/svg.hpp"

namespace detnas {

namespace {

namespace fs = std::filesystem;

std::string out_path(const RunConfig& config, const std::string& name) {
    return (fs::path(config.output_dir) / name).string();
}

void prepare_output_dir(const RunConfig& config) {
    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + config.output_dir + "': " + ec.message());
}

std::string write_resolved_config(const RunConfig& config, const std::string& command) {
    const std::string path = out_path(config, command + "_config.txt");
    write_text_file(path, serialize_config(config));
    return path;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string loss_log_csv(const std::vector<LossLogRow>& log) {
    std::ostringstream out;
    out << "step,lr,loss\n";
    for (const auto& row : log) out << row.step << "," << fmt(row.lr) << "," << fmt(row.loss) << "\n";
    return out.str();
}

std::string search_row_csv(const SearchLogRow& row) {
    std::ostringstream out;
    out << row.iteration << "," << row.index << ",\"" << format_architecture(row.arch) << "\","
        << row.flops << "," << fmt(row.fitness) << "," << fmt(row.best_so_far) << ","
        << (row.memo_hit ? 1 : 0) << "\n";
    return out.str();
}

constexpr const char* kSearchCsvHeader = "iteration,index,architecture,flops,fitness,best_so_far,memo_hit\n";

SupernetWeights load_tagged_checkpoint(const RunConfig& config, const std::string& path,
                                       Phase required, const std::string& command) {
    SupernetWeights weights = load_checkpoint(path, config.space, config.classes);
    if (weights.phase() != required)
        throw PhaseError(command + ": checkpoint '" + path + "' is tagged '" +
                         phase_name(weights.phase()) + "', expected '" + phase_name(required) + "'");
    return weights;
}

}  // namespace

PretrainOutputs cmd_pretrain(const RunConfig& config) {
    config.validate();
    prepare_output_dir(config);
    PretrainOutputs out;
    out.config_file = write_resolved_config(config, "pretrain");

    const ClassificationData data =
        make_classification_data(config.classes, config.cls_train, config.cls_val,
                                 config.task_resolution, config.noise, config.cls_data_seed());
    SupernetWeights weights(config.space, config.classes, config.seed);
    Rng rng(config.pretrain_seed());
    const auto log = train_supernet(weights, config.schedule, {Phase::kPretrained, nullptr, false, 0},
                                    data.train, data.spec, rng);

    out.checkpoint = out_path(config, "supernet_pretrained.ckpt");
    save_checkpoint(out.checkpoint, weights);
    out.loss_csv = out_path(config, "pretrain_loss.csv");
    write_text_file(out.loss_csv, loss_log_csv(log));
    out.final_loss = log.back().loss;
    return out;
}

FinetuneOutputs cmd_finetune(const RunConfig& config, const std::string& checkpoint_path,
                             bool from_scratch) {
    config.validate();
    prepare_output_dir(config);
    FinetuneOutputs out;
    out.config_file = write_resolved_config(config, "finetune");

    SupernetWeights weights =
        from_scratch ? SupernetWeights(config.space, config.classes, config.seed)
                     : load_tagged_checkpoint(config, checkpoint_path, Phase::kPretrained, "finetune");

    const LocalizationData data = make_localization_data(
        config.loc_train, config.loc_search_val, config.loc_test, config.calibration,
        config.task_resolution, config.noise, config.loc_data_seed());

    TrainOptions options;
    options.phase = Phase::kFinetuned;
    options.from_scratch = from_scratch;
    // Doubled budget compensates for the missing pretraining.
    options.iterations_override = from_scratch ? 2 * config.schedule.finetune_iterations : 0;

    Rng rng(config.finetune_seed());
    const auto log = train_supernet(weights, config.schedule, options, data.train, data.spec, rng);

    out.checkpoint = out_path(config, "supernet_finetuned.ckpt");
    save_checkpoint(out.checkpoint, weights);
    out.loss_csv = out_path(config, "finetune_loss.csv");
    write_text_file(out.loss_csv, loss_log_csv(log));
    out.final_loss = log.back().loss;
    out.iterations_run = static_cast<int>(log.size());
    return out;
}

SearchOutputs cmd_search(const RunConfig& config, const std::string& checkpoint_path,
                         const std::string& controllers) {
    config.validate();
    if (controllers != "evolution" && controllers != "random" && controllers != "both")
        throw ConfigError("search: controller must be evolution, random or both, got '" + controllers +
                          "'");
    prepare_output_dir(config);
    SearchOutputs out;
    out.config_file = write_resolved_config(config, "search");

    SupernetWeights weights =
        load_tagged_checkpoint(config, checkpoint_path, Phase::kFinetuned, "search");
    const LocalizationData data = make_localization_data(
        config.loc_train, config.loc_search_val, config.loc_test, config.calibration,
        config.task_resolution, config.noise, config.loc_data_seed());

    const FitnessFn fitness = [&](const Architecture& arch) {
        return evaluate_path(weights, arch, data.spec, data.calibration, data.search_val);
    };

    std::vector<ControllerKind> kinds;
    if (controllers == "evolution" || controllers == "both") kinds.push_back(ControllerKind::kEvolution);
    if (controllers == "random" || controllers == "both") kinds.push_back(ControllerKind::kRandom);

    const auto start = std::chrono::steady_clock::now();
    std::vector<SvgCurve> curves;
    SearchResult primary;
    for (const ControllerKind kind : kinds) {
        const std::string csv_path =
            out_path(config, std::string("search_") + controller_name(kind) + ".csv");
        std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
        if (!csv) throw IoError("cannot open '" + csv_path + "' for writing");
        csv << kSearchCsvHeader;
        const LogSink sink = [&csv](const SearchLogRow& row) {
            csv << search_row_csv(row);
            csv.flush();  // log is written incrementally
        };
        Rng rng(Rng::derive(config.search_seed(), static_cast<uint64_t>(kind)));
        SearchResult result = run_search(config.space, config.evolution, kind, fitness, rng, &sink);
        out.log_csvs.push_back(csv_path);

        SvgCurve curve;
        curve.label = controller_name(kind);
        curve.color = kind == ControllerKind::kEvolution ? "#d62728" : "#1f77b4";
        for (size_t i = 0; i < result.log.size(); ++i) {
            curve.xs.push_back(static_cast<double>(i + 1));
            curve.ys.push_back(result.log[i].best_so_far);
        }
        curves.push_back(std::move(curve));
        if (kind == kinds.front()) primary = std::move(result);
    }
    const double wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    out.curve_svg = out_path(config, "search_curve.svg");
    write_text_file(out.curve_svg,
                    render_line_chart("Best fitness so far", "evaluations", "fitness", curves));

    std::ostringstream result_txt;
    result_txt << "controller = " << controller_name(kinds.front()) << "\n";
    result_txt << "best_architecture = " << format_architecture(primary.best_architecture) << "\n";
    result_txt << "best_architecture_symbolic = "
               << format_architecture_symbolic(primary.best_architecture) << "\n";
    result_txt << "best_fitness = " << fmt(primary.best_fitness) << "\n";
    result_txt << "total_evaluations = " << primary.total_evaluations << "\n";
    result_txt << "unique_evaluations = " << primary.unique_evaluations << "\n";
    result_txt << "wall_time_seconds = " << fmt(wall_seconds) << "\n";
    out.result_file = out_path(config, "search_result.txt");
    write_text_file(out.result_file, result_txt.str());

    out.best_architecture = format_architecture(primary.best_architecture);
    out.best_fitness = primary.best_fitness;
    out.evaluations = primary.total_evaluations;
    return out;
}

RetrainOutputs cmd_retrain(const RunConfig& config, const std::string& architecture_text) {
    config.validate();
    prepare_output_dir(config);
    RetrainOutputs out;
    out.config_file = write_resolved_config(config, "retrain");

    const Architecture arch = parse_architecture(architecture_text, config.space);
    const uint64_t macs = architecture_flops(arch, config.space);
    if (!config.evolution.constraint.satisfies(macs))
        std::cerr << "warning: architecture exceeds the search constraint (" << macs << " > "
                  << config.evolution.constraint.max_flops
                  << " MACs); retraining proceeds, the constraint only bounds search\n";

    const ClassificationData cls =
        make_classification_data(config.classes, config.cls_train, config.cls_val,
                                 config.task_resolution, config.noise, config.cls_data_seed());
    const LocalizationData loc = make_localization_data(
        config.loc_train, config.loc_search_val, config.loc_test, config.calibration,
        config.task_resolution, config.noise, config.loc_data_seed());

    SupernetWeights weights(config.space, config.classes, config.seed);
    Rng pre_rng(config.pretrain_seed());
    const auto pre_log = train_supernet(weights, config.schedule,
                                        {Phase::kPretrained, &arch, false, 0}, cls.train, cls.spec,
                                        pre_rng);
    Rng fine_rng(config.finetune_seed());
    const auto fine_log = train_supernet(weights, config.schedule,
                                         {Phase::kFinetuned, &arch, false, 0}, loc.train, loc.spec,
                                         fine_rng);
    write_text_file(out_path(config, "retrain_pretrain_loss.csv"), loss_log_csv(pre_log));
    write_text_file(out_path(config, "retrain_finetune_loss.csv"), loss_log_csv(fine_log));

    // BN recalibration before each evaluation, as in search.
    const int cls_calib = std::min(config.calibration, config.cls_train);
    std::vector<int> calib_idx(static_cast<size_t>(cls_calib));
    for (int i = 0; i < cls_calib; ++i) calib_idx[static_cast<size_t>(i)] = i;
    DatasetSplit cls_calibration;
    cls_calibration.role = SplitRole::kBnCalibration;
    cls_calibration.images = gather_images(cls.train, calib_idx);
    cls_calibration.labels = gather_labels(cls.train, calib_idx);
    out.accuracy = evaluate_path(weights, arch, cls.spec, cls_calibration, cls.val);
    out.mean_iou = evaluate_path(weights, arch, loc.spec, loc.calibration, loc.test);
    out.flops = macs;

    std::ostringstream report;
    report << "architecture = " << format_architecture(arch) << "\n";
    report << "architecture_symbolic = " << format_architecture_symbolic(arch) << "\n";
    report << "flops_224 = " << macs << "\n";
    report << "flops_task_resolution = "
           << architecture_flops(arch, config.space, {},
                                 {config.task_resolution, config.task_resolution})
           << "\n";
    report << "accuracy = " << fmt(out.accuracy) << "\n";
    report << "mean_iou = " << fmt(out.mean_iou) << "\n";
    out.report_file = out_path(config, "retrain_report.txt");
    write_text_file(out.report_file, report.str());
    return out;
}

EvalOutputs cmd_eval(const RunConfig& config, const std::string& checkpoint_path,
                     const std::string& architecture_text) {
    config.validate();
    prepare_output_dir(config);
    EvalOutputs out;
    out.config_file = write_resolved_config(config, "eval");

    SupernetWeights weights =
        load_tagged_checkpoint(config, checkpoint_path, Phase::kFinetuned, "eval");
    const Architecture arch = parse_architecture(architecture_text, config.space);
    const LocalizationData data = make_localization_data(
        config.loc_train, config.loc_search_val, config.loc_test, config.calibration,
        config.task_resolution, config.noise, config.loc_data_seed());
    out.fitness = evaluate_path(weights, arch, data.spec, data.calibration, data.search_val);

    std::ostringstream result;
    result << "architecture = " << format_architecture(arch) << "\n";
    result << "architecture_symbolic = " << format_architecture_symbolic(arch) << "\n";
    result << "flops_224 = " << architecture_flops(arch, config.space) << "\n";
    result << "fitness = " << fmt(out.fitness) << "\n";
    out.result_file = out_path(config, "eval_result.txt");
    write_text_file(out.result_file, result.str());
    return out;
}

FlopsOutputs cmd_flops(const RunConfig& config, const std::string& architecture_text) {
    config.validate();
    prepare_output_dir(config);
    FlopsOutputs out;
    out.config_file = write_resolved_config(config, "flops");

    std::ostringstream report;
    if (!architecture_text.empty()) {
        const Architecture arch = parse_architecture(architecture_text, config.space);
        report << "architecture = " << format_architecture(arch) << "\n";
        report << "macs_224 = " << architecture_flops(arch, config.space, {}, {224, 224}) << "\n";
        report << "macs_task_resolution = "
               << architecture_flops(arch, config.space, {},
                                     {config.task_resolution, config.task_resolution})
               << "\n";
    } else {
        const BigUint card = cardinality(config.space);
        const FlopsTable table(config.space);
        report << "space = " << config.space.name << "\n";
        report << "blocks = " << config.space.total_blocks() << "\n";
        report << "cardinality = 4^" << config.space.total_blocks() << " = " << card.to_string()
               << " ~ " << card.to_scientific(4) << "\n";
        report << "min_macs = " << table.min_macs() << "\n";
        report << "max_macs = " << table.max_macs() << "\n";

        // Sampled FLOPs histogram over 10k uniform paths.
        const int samples = 10000, bins = 20;
        Rng rng(Rng::derive(config.seed, 20));
        std::vector<uint64_t> values(samples);
        for (auto& v : values) v = table.architecture_macs(random_architecture(config.space, rng));
        const uint64_t lo = *std::min_element(values.begin(), values.end());
        const uint64_t hi = *std::max_element(values.begin(), values.end());
        const double width = hi > lo ? static_cast<double>(hi - lo) / bins : 1.0;
        std::vector<int> counts(static_cast<size_t>(bins), 0);
        for (uint64_t v : values) {
            int b = hi > lo ? static_cast<int>(static_cast<double>(v - lo) / width) : 0;
            if (b >= bins) b = bins - 1;
            ++counts[static_cast<size_t>(b)];
        }
        std::ostringstream hist;
        hist << "bin_low_macs,bin_high_macs,count\n";
        for (int b = 0; b < bins; ++b)
            hist << static_cast<uint64_t>(lo + b * width) << ","
                 << static_cast<uint64_t>(lo + (b + 1) * width) << ","
                 << counts[static_cast<size_t>(b)] << "\n";
        out.histogram_csv = out_path(config, "flops_hist.csv");
        write_text_file(out.histogram_csv, hist.str());
        report << "histogram = flops_hist.csv (" << samples << " samples)\n";
    }
    out.report_file = out_path(config, "flops_report.txt");
    write_text_file(out.report_file, report.str());
    return out;
}

PatternOutputs cmd_report_patterns(const RunConfig& config, const std::string& archs_file) {
    config.validate();
    prepare_output_dir(config);
    PatternOutputs out;
    out.config_file = write_resolved_config(config, "patterns");

    std::istringstream in(read_text_file(archs_file));
    std::vector<Architecture> archs;
    std::string line;
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r\n");
        archs.push_back(parse_architecture(line.substr(first, last - first + 1), config.space));
    }
    const PatternReport report = pattern_report(archs, config.space);

    out.csv_file = out_path(config, "patterns.csv");
    write_text_file(out.csv_file, pattern_report_csv(report, config.space));
    out.diagram_file = out_path(config, "patterns.txt");
    write_text_file(out.diagram_file, pattern_diagram(archs, config.space));
    return out;
}

}  // namespace detnas
