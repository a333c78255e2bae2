#include "detnas/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "detnas/errors.hpp"

namespace detnas {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& value) {
    int out = 0;
    const std::string v = trim(value);
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config: '" + key + "' expects an integer, got '" + value + "'");
    return out;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    uint64_t out = 0;
    const std::string v = trim(value);
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config: '" + key + "' expects an unsigned integer, got '" + value + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    try {
        size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
    }
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

uint64_t RunConfig::init_seed() const { return Rng::derive(seed, 1); }
uint64_t RunConfig::pretrain_seed() const { return Rng::derive(seed, 2); }
uint64_t RunConfig::finetune_seed() const { return Rng::derive(seed, 3); }
uint64_t RunConfig::search_seed() const { return Rng::derive(seed, 4); }
uint64_t RunConfig::cls_data_seed() const { return Rng::derive(seed, 10); }
uint64_t RunConfig::loc_data_seed() const { return Rng::derive(seed, 11); }

void RunConfig::validate() const {
    space.validate();
    if (classes < 2) throw ConfigError("config: task.classes must be at least 2");
    if (task_resolution < 16) throw ConfigError("config: task.resolution must be at least 16");
    if (cls_train <= 0 || cls_val <= 0 || loc_train <= 0 || loc_search_val <= 0 || loc_test <= 0)
        throw ConfigError("config: dataset sizes must be positive");
    if (calibration <= 0 || calibration > loc_train)
        throw ConfigError("config: task.calibration must be in [1, task.loc_train]");
    if (noise < 0) throw ConfigError("config: task.noise must be non-negative");
    schedule.validate();
    evolution.validate();
}

void apply_config_override(RunConfig& c, const std::string& raw_key, const std::string& value) {
    const std::string key = trim(raw_key);
    if (key == "run.seed") c.seed = parse_u64(key, value);
    else if (key == "run.output_dir") c.output_dir = trim(value);
    else if (key == "space.preset") {
        const std::string v = trim(value);
        if (v == "small" || v == "large") {
            c.space_preset = v;
            c.space = space_preset(v);
        } else if (v == "custom") {
            c.space_preset = v;
            c.space.name = "custom";
        } else {
            throw ConfigError("config: space.preset must be small, large or custom, got '" + v + "'");
        }
    } else if (key == "space.file") {
        c.space = parse_space(read_text_file(trim(value)));
        c.space_preset = "custom";
    } else if (key == "space.stem_channels") {
        c.space.stem_channels = parse_int(key, value);
        c.space_preset = "custom";
        c.space.name = "custom";
    } else if (key == "space.stages") {
        c.space.stages = parse_space("stem_channels = 2\nstages = " + value).stages;
        c.space_preset = "custom";
        c.space.name = "custom";
    } else if (key == "space.resolution") {
        const int r = parse_int(key, value);
        c.space.input_resolution = {r, r};
    } else if (key == "task.classes") c.classes = parse_int(key, value);
    else if (key == "task.resolution") c.task_resolution = parse_int(key, value);
    else if (key == "task.cls_train") c.cls_train = parse_int(key, value);
    else if (key == "task.cls_val") c.cls_val = parse_int(key, value);
    else if (key == "task.loc_train") c.loc_train = parse_int(key, value);
    else if (key == "task.loc_search_val") c.loc_search_val = parse_int(key, value);
    else if (key == "task.loc_test") c.loc_test = parse_int(key, value);
    else if (key == "task.calibration") c.calibration = parse_int(key, value);
    else if (key == "task.noise") c.noise = parse_double(key, value);
    else if (key == "schedule.pretrain_iterations") c.schedule.pretrain_iterations = parse_int(key, value);
    else if (key == "schedule.finetune_iterations") c.schedule.finetune_iterations = parse_int(key, value);
    else if (key == "schedule.batch_size") c.schedule.set_batch_size(parse_int(key, value));
    else if (key == "schedule.pretrain_batch") c.schedule.pretrain_batch = parse_int(key, value);
    else if (key == "schedule.finetune_batch") c.schedule.finetune_batch = parse_int(key, value);
    else if (key == "schedule.pretrain_lr") c.schedule.pretrain_lr = parse_double(key, value);
    else if (key == "schedule.finetune_lr") c.schedule.finetune_lr = parse_double(key, value);
    else if (key == "schedule.momentum") c.schedule.momentum = parse_double(key, value);
    else if (key == "schedule.pretrain_weight_decay") c.schedule.pretrain_weight_decay = parse_double(key, value);
    else if (key == "schedule.finetune_weight_decay") c.schedule.finetune_weight_decay = parse_double(key, value);
    else if (key == "evolution.population_size") c.evolution.population_size = parse_int(key, value);
    else if (key == "evolution.parent_size") c.evolution.parent_size = parse_int(key, value);
    else if (key == "evolution.iterations") c.evolution.iterations = parse_int(key, value);
    else if (key == "evolution.mutation_prob") c.evolution.mutation_prob = parse_double(key, value);
    else if (key == "evolution.max_resample_attempts") c.evolution.max_resample_attempts = parse_int(key, value);
    else if (key == "constraint.max_flops") {
        const std::string v = trim(value);
        c.evolution.constraint.max_flops = (v == "none") ? UINT64_MAX : parse_u64(key, value);
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) + " is not 'key = value': '" +
                              line + "'");
        apply_config_override(config, line.substr(0, eq), line.substr(eq + 1));
    }
    return config;
}

RunConfig load_config_file(const std::string& path) { return parse_config_text(read_text_file(path)); }

std::string serialize_config(const RunConfig& c) {
    std::ostringstream out;
    out << "run.seed = " << c.seed << "\n";
    out << "run.output_dir = " << c.output_dir << "\n";
    out << "space.preset = " << c.space_preset << "\n";
    if (c.space_preset == "custom") {
        out << "space.stem_channels = " << c.space.stem_channels << "\n";
        out << "space.stages = ";
        for (size_t i = 0; i < c.space.stages.size(); ++i) {
            if (i) out << ", ";
            out << c.space.stages[i].out_channels << ":" << c.space.stages[i].num_blocks;
        }
        out << "\n";
        out << "space.resolution = " << c.space.input_resolution.first << "\n";
    }
    out << "task.classes = " << c.classes << "\n";
    out << "task.resolution = " << c.task_resolution << "\n";
    out << "task.cls_train = " << c.cls_train << "\n";
    out << "task.cls_val = " << c.cls_val << "\n";
    out << "task.loc_train = " << c.loc_train << "\n";
    out << "task.loc_search_val = " << c.loc_search_val << "\n";
    out << "task.loc_test = " << c.loc_test << "\n";
    out << "task.calibration = " << c.calibration << "\n";
    out << "task.noise = " << format_double(c.noise) << "\n";
    out << "schedule.pretrain_iterations = " << c.schedule.pretrain_iterations << "\n";
    out << "schedule.finetune_iterations = " << c.schedule.finetune_iterations << "\n";
    out << "schedule.pretrain_batch = " << c.schedule.pretrain_batch << "\n";
    out << "schedule.finetune_batch = " << c.schedule.finetune_batch << "\n";
    out << "schedule.pretrain_lr = " << format_double(c.schedule.pretrain_lr) << "\n";
    out << "schedule.finetune_lr = " << format_double(c.schedule.finetune_lr) << "\n";
    out << "schedule.momentum = " << format_double(c.schedule.momentum) << "\n";
    out << "schedule.pretrain_weight_decay = " << format_double(c.schedule.pretrain_weight_decay) << "\n";
    out << "schedule.finetune_weight_decay = " << format_double(c.schedule.finetune_weight_decay) << "\n";
    out << "evolution.population_size = " << c.evolution.population_size << "\n";
    out << "evolution.parent_size = " << c.evolution.parent_size << "\n";
    out << "evolution.iterations = " << c.evolution.iterations << "\n";
    out << "evolution.mutation_prob = " << format_double(c.evolution.mutation_prob) << "\n";
    out << "evolution.max_resample_attempts = " << c.evolution.max_resample_attempts << "\n";
    if (c.evolution.constraint.unbounded())
        out << "constraint.max_flops = none\n";
    else
        out << "constraint.max_flops = " << c.evolution.constraint.max_flops << "\n";
    return out.str();
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace detnas
