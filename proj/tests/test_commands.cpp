#include <doctest.h>

#include <filesystem>

#include "detnas/checkpoint.hpp"
#include "detnas/commands.hpp"
#include "detnas/errors.hpp"
#include "test_util.hpp"

using namespace detnas;
namespace fs = std::filesystem;

namespace {

// Minute-scale pipeline configuration on a 2-block space.
RunConfig tiny_config(const std::string& dir, uint64_t seed = 1) {
    RunConfig c;
    c.seed = seed;
    c.output_dir = dir;
    c.space_preset = "custom";
    c.space = test::toy_space_2();
    c.classes = 3;
    c.task_resolution = 16;
    c.cls_train = 96;
    c.cls_val = 48;
    c.loc_train = 96;
    c.loc_search_val = 32;
    c.loc_test = 32;
    c.calibration = 32;
    c.noise = 0.05;
    c.schedule.pretrain_iterations = 10;
    c.schedule.finetune_iterations = 6;
    c.schedule.set_batch_size(8);
    c.evolution.population_size = 6;
    c.evolution.parent_size = 2;
    c.evolution.iterations = 2;
    c.evolution.constraint.max_flops = UINT64_MAX;
    return c;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

int count_lines(const std::string& text) {
    int n = 0;
    for (char ch : text) n += ch == '\n';
    return n;
}

}  // namespace

TEST_SUITE_BEGIN("commands");

TEST_CASE("pretrain writes a tagged checkpoint and is bit-reproducible") {
    TempDir dir("detnas_cmd_pretrain");
    const auto out1 = cmd_pretrain(tiny_config(dir.sub("a")));
    CHECK(peek_checkpoint_phase(out1.checkpoint) == Phase::kPretrained);
    CHECK(fs::exists(out1.loss_csv));
    CHECK(fs::exists(out1.config_file));
    CHECK(count_lines(test::slurp(out1.loss_csv)) == 11);  // header + 10 iterations

    const auto out2 = cmd_pretrain(tiny_config(dir.sub("b")));
    CHECK(test::files_identical(out1.checkpoint, out2.checkpoint));
    CHECK(test::files_identical(out1.loss_csv, out2.loss_csv));

    // rerunning from the emitted resolved config reproduces the run
    RunConfig from_file = load_config_file(out1.config_file);
    from_file.output_dir = dir.sub("c");
    const auto out3 = cmd_pretrain(from_file);
    CHECK(test::files_identical(out1.checkpoint, out3.checkpoint));
}

TEST_CASE("finetune enforces the phase state machine") {
    TempDir dir("detnas_cmd_finetune");
    const RunConfig config = tiny_config(dir.sub("run"));
    const auto pre = cmd_pretrain(config);
    const auto fine = cmd_finetune(config, pre.checkpoint);
    CHECK(peek_checkpoint_phase(fine.checkpoint) == Phase::kFinetuned);
    CHECK(fine.iterations_run == 6);

    // a finetuned checkpoint cannot be finetuned again
    CHECK_THROWS_AS(cmd_finetune(config, fine.checkpoint), PhaseError);
    // nor searched from a pretrained one
    CHECK_THROWS_AS(cmd_search(config, pre.checkpoint), PhaseError);
}

TEST_CASE("from-scratch finetuning doubles the iteration budget") {
    TempDir dir("detnas_cmd_scratch");
    const RunConfig config = tiny_config(dir.sub("run"));
    const auto fine = cmd_finetune(config, "", true);
    CHECK(fine.iterations_run == 12);
    CHECK(peek_checkpoint_phase(fine.checkpoint) == Phase::kFinetuned);
}

TEST_CASE("search produces the budgeted log and satisfies the constraint") {
    TempDir dir("detnas_cmd_search");
    RunConfig config = tiny_config(dir.sub("run"));
    const auto pre = cmd_pretrain(config);
    const auto fine = cmd_finetune(config, pre.checkpoint);

    const auto search = cmd_search(config, fine.checkpoint, "both");
    REQUIRE(search.log_csvs.size() == 2);
    for (const auto& csv : search.log_csvs) {
        const std::string text = test::slurp(csv);
        CHECK(count_lines(text) == 1 + config.evolution.total_evaluations());
    }
    CHECK(search.evaluations == 12);
    const std::string svg = test::slurp(search.curve_svg);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("evolution") != std::string::npos);
    CHECK(svg.find("random") != std::string::npos);
    const std::string result = test::slurp(search.result_file);
    CHECK(result.find("best_architecture = ") != std::string::npos);
    CHECK(result.find("wall_time_seconds = ") != std::string::npos);

    // determinism: same seed, fresh directory, identical CSV logs
    RunConfig rerun = config;
    rerun.output_dir = dir.sub("rerun");
    const auto search2 = cmd_search(rerun, fine.checkpoint, "both");
    CHECK(test::files_identical(search.log_csvs[0], search2.log_csvs[0]));
    CHECK(test::files_identical(search.log_csvs[1], search2.log_csvs[1]));
}

TEST_CASE("infeasible constraints fail before any evaluation") {
    TempDir dir("detnas_cmd_infeasible");
    RunConfig config = tiny_config(dir.sub("run"));
    const auto pre = cmd_pretrain(config);
    const auto fine = cmd_finetune(config, pre.checkpoint);
    config.evolution.constraint.max_flops = 1;
    CHECK_THROWS_AS(cmd_search(config, fine.checkpoint), ConstraintError);
}

TEST_CASE("retrain reports metrics and reproduces bit-exactly") {
    TempDir dir("detnas_cmd_retrain");
    const RunConfig config = tiny_config(dir.sub("a"), 3);
    const auto out = cmd_retrain(config, "0,1");
    const std::string report = test::slurp(out.report_file);
    CHECK(report.find("architecture = 0,1") != std::string::npos);
    CHECK(report.find("flops_224 = ") != std::string::npos);
    CHECK(report.find("accuracy = ") != std::string::npos);
    CHECK(report.find("mean_iou = ") != std::string::npos);
    CHECK(out.accuracy >= 0.0);
    CHECK(out.accuracy <= 1.0);
    CHECK(out.mean_iou >= 0.0);
    CHECK(out.mean_iou <= 1.0);

    RunConfig again = tiny_config(dir.sub("b"), 3);
    const auto out2 = cmd_retrain(again, "0,1");
    CHECK(test::files_identical(out.report_file, out2.report_file));
}

TEST_CASE("eval scores one architecture with inherited weights") {
    TempDir dir("detnas_cmd_eval");
    const RunConfig config = tiny_config(dir.sub("run"));
    const auto pre = cmd_pretrain(config);
    const auto fine = cmd_finetune(config, pre.checkpoint);
    const auto out = cmd_eval(config, fine.checkpoint, "3,3");
    CHECK(out.fitness >= 0.0);
    CHECK(out.fitness <= 1.0);
    CHECK(test::slurp(out.result_file).find("fitness = ") != std::string::npos);
}

TEST_CASE("flops command reports space statistics and histograms") {
    TempDir dir("detnas_cmd_flops");
    RunConfig config = tiny_config(dir.sub("run"));
    const auto out = cmd_flops(config);
    const std::string report = test::slurp(out.report_file);
    CHECK(report.find("cardinality = 4^2 = 16 ~ 1.600e1") != std::string::npos);
    CHECK(report.find("min_macs = ") != std::string::npos);
    const std::string hist = test::slurp(out.histogram_csv);
    CHECK(hist.find("bin_low_macs,bin_high_macs,count") == 0);
    int total = 0;
    std::istringstream lines(hist);
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) total += std::stoi(line.substr(line.rfind(',') + 1));
    CHECK(total == 10000);

    const auto with_arch = cmd_flops(config, "0,0");
    const std::string arch_report = test::slurp(with_arch.report_file);
    CHECK(arch_report.find("macs_224 = ") != std::string::npos);
    CHECK(arch_report.find("macs_task_resolution = ") != std::string::npos);
}

TEST_CASE("pattern report command") {
    TempDir dir("detnas_cmd_patterns");
    RunConfig config = tiny_config(dir.sub("run"));
    const std::string archs_path = dir.sub("archs.txt");
    write_text_file(archs_path, "0,1\n2,3\n# comment\n3x3,xcep\n");
    const auto out = cmd_report_patterns(config, archs_path);
    const std::string csv = test::slurp(out.csv_file);
    CHECK(csv.find("stage,blocks,") == 0);
    const std::string diagram = test::slurp(out.diagram_file);
    CHECK(diagram.find("path 3: 3 | X") != std::string::npos);
}

TEST_CASE("config validation errors surface before any work") {
    TempDir dir("detnas_cmd_validate");
    RunConfig config = tiny_config(dir.sub("run"));
    config.schedule.pretrain_iterations = 0;
    CHECK_THROWS_AS(cmd_pretrain(config), ConfigError);
}

TEST_SUITE_END();
