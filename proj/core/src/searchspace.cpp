#include "detnas/searchspace.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "detnas/errors.hpp"

namespace detnas {

int choice_kernel(ChoiceKind kind) {
    switch (kind) {
        case ChoiceKind::kShuffle3x3: return 3;
        case ChoiceKind::kShuffle5x5: return 5;
        case ChoiceKind::kShuffle7x7: return 7;
        case ChoiceKind::kXception3x3: return 3;
    }
    throw Error("unreachable choice kind");
}

const char* choice_token(ChoiceKind kind) {
    switch (kind) {
        case ChoiceKind::kShuffle3x3: return "3x3";
        case ChoiceKind::kShuffle5x5: return "5x5";
        case ChoiceKind::kShuffle7x7: return "7x7";
        case ChoiceKind::kXception3x3: return "xcep";
    }
    throw Error("unreachable choice kind");
}

int SearchSpaceSpec::total_blocks() const {
    int n = 0;
    for (const auto& s : stages) n += s.num_blocks;
    return n;
}

int SearchSpaceSpec::stage_of_block(int b) const {
    int acc = 0;
    for (size_t i = 0; i < stages.size(); ++i) {
        acc += stages[i].num_blocks;
        if (b < acc) return static_cast<int>(i);
    }
    throw ConfigError("block index " + std::to_string(b) + " out of range for space with " +
                      std::to_string(total_blocks()) + " blocks");
}

void SearchSpaceSpec::validate() const {
    if (stem_channels <= 0) throw ConfigError("space: stem_channels must be positive");
    if (stages.empty()) throw ConfigError("space: at least one stage required");
    for (size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        if (s.out_channels <= 0 || s.out_channels % 2 != 0)
            throw ConfigError("space: stage " + std::to_string(i + 1) +
                              " out_channels must be positive and even, got " +
                              std::to_string(s.out_channels));
        if (s.num_blocks <= 0)
            throw ConfigError("space: stage " + std::to_string(i + 1) + " num_blocks must be positive");
        if (s.first_block_stride != 1 && s.first_block_stride != 2)
            throw ConfigError("space: stage " + std::to_string(i + 1) + " stride must be 1 or 2");
    }
    if (input_resolution.first <= 0 || input_resolution.second <= 0)
        throw ConfigError("space: input resolution must be positive");
}

SearchSpaceSpec large_space() {
    SearchSpaceSpec s;
    s.name = "large";
    s.stem_channels = 48;
    s.stages = {{96, 8, 2}, {240, 8, 2}, {480, 16, 2}, {960, 8, 2}};
    s.input_resolution = {224, 224};
    return s;
}

SearchSpaceSpec small_space() {
    SearchSpaceSpec s;
    s.name = "small";
    s.stem_channels = 16;
    s.stages = {{64, 4, 2}, {160, 4, 2}, {320, 8, 2}, {640, 4, 2}};
    s.input_resolution = {224, 224};
    return s;
}

SearchSpaceSpec space_preset(const std::string& name) {
    if (name == "large") return large_space();
    if (name == "small") return small_space();
    throw ConfigError("unknown space preset '" + name + "' (expected \"large\" or \"small\")");
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

int parse_positive_int(const std::string& tok, const std::string& what) {
    const std::string t = trim(tok);
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw ParseError("space: expected a positive integer for " + what + ", got '" + tok + "'");
    return std::stoi(t);
}

}  // namespace

SearchSpaceSpec parse_space(const std::string& text) {
    SearchSpaceSpec s;
    s.name = "custom";
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("space: expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "stem_channels") {
            s.stem_channels = parse_positive_int(value, "stem_channels");
        } else if (key == "resolution") {
            const int r = parse_positive_int(value, "resolution");
            s.input_resolution = {r, r};
        } else if (key == "stages") {
            s.stages.clear();
            for (const auto& item : split(value, ',')) {
                const auto parts = split(trim(item), ':');
                if (parts.size() != 2)
                    throw ParseError("space: stage entry must be 'channels:blocks', got '" + item + "'");
                StageSpec st;
                st.out_channels = parse_positive_int(parts[0], "stage channels");
                st.num_blocks = parse_positive_int(parts[1], "stage blocks");
                st.first_block_stride = 2;
                s.stages.push_back(st);
            }
        } else {
            throw ParseError("space: unknown key '" + key + "'");
        }
    }
    s.validate();
    return s;
}

std::string format_space(const SearchSpaceSpec& space) {
    std::ostringstream out;
    out << "stem_channels = " << space.stem_channels << "\n";
    out << "resolution = " << space.input_resolution.first << "\n";
    out << "stages = ";
    for (size_t i = 0; i < space.stages.size(); ++i) {
        if (i) out << ", ";
        out << space.stages[i].out_channels << ":" << space.stages[i].num_blocks;
    }
    out << "\n";
    return out.str();
}

std::string format_architecture(const Architecture& arch) {
    std::string out;
    for (size_t i = 0; i < arch.choices.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(static_cast<int>(arch.choices[i]));
    }
    return out;
}

std::string format_architecture_symbolic(const Architecture& arch) {
    std::string out;
    for (size_t i = 0; i < arch.choices.size(); ++i) {
        if (i) out += ',';
        out += choice_token(arch.choices[i]);
    }
    return out;
}

Architecture parse_architecture(const std::string& text, const SearchSpaceSpec& space) {
    const auto tokens = split(text, ',');
    const int expected = space.total_blocks();
    if (static_cast<int>(tokens.size()) != expected)
        throw ParseError("architecture has " + std::to_string(tokens.size()) + " entries, space '" +
                         space.name + "' needs " + std::to_string(expected));
    Architecture arch;
    arch.choices.reserve(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        const std::string tok = trim(tokens[i]);
        const std::string pos = "position " + std::to_string(i + 1);
        if (tok.empty()) throw ParseError("architecture: empty token at " + pos);
        if (std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) {
            const int tag = std::stoi(tok);
            if (tag < 0 || tag >= kNumChoices)
                throw ParseError("architecture: choice tag " + tok + " out of range [0,3] at " + pos);
            arch.choices.push_back(static_cast<ChoiceKind>(tag));
        } else if (tok == "3x3") {
            arch.choices.push_back(ChoiceKind::kShuffle3x3);
        } else if (tok == "5x5") {
            arch.choices.push_back(ChoiceKind::kShuffle5x5);
        } else if (tok == "7x7") {
            arch.choices.push_back(ChoiceKind::kShuffle7x7);
        } else if (tok == "xcep" || tok == "xception") {
            arch.choices.push_back(ChoiceKind::kXception3x3);
        } else {
            throw ParseError("architecture: unknown token '" + tok + "' at " + pos);
        }
    }
    return arch;
}

Architecture random_architecture(const SearchSpaceSpec& space, Rng& rng) {
    Architecture arch;
    const int n = space.total_blocks();
    arch.choices.reserve(n);
    for (int i = 0; i < n; ++i) arch.choices.push_back(static_cast<ChoiceKind>(rng.uniform_int(kNumChoices)));
    return arch;
}

Architecture uniform_architecture(const SearchSpaceSpec& space, ChoiceKind kind) {
    Architecture arch;
    arch.choices.assign(static_cast<size_t>(space.total_blocks()), kind);
    return arch;
}

BigUint cardinality(const SearchSpaceSpec& space) {
    return BigUint::pow(kNumChoices, static_cast<uint32_t>(space.total_blocks()));
}

}  // namespace detnas
