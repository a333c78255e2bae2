#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "detnas/bigint.hpp"
#include "detnas/rng.hpp"

namespace detnas {

// The four block variants available at every searchable position. Integer
// encodings 0..3 follow the declaration order and are the canonical text form.
enum class ChoiceKind : uint8_t {
    kShuffle3x3 = 0,
    kShuffle5x5 = 1,
    kShuffle7x7 = 2,
    kXception3x3 = 3,
};

inline constexpr int kNumChoices = 4;

// Kernel size of the depthwise convolutions inside the choice.
int choice_kernel(ChoiceKind kind);
// Canonical symbolic token: "3x3", "5x5", "7x7", "xcep".
const char* choice_token(ChoiceKind kind);

struct StageSpec {
    int out_channels = 0;       // even, required by channel split
    int num_blocks = 0;
    int first_block_stride = 2; // stride-2 first block downsamples the stage
};

struct SearchSpaceSpec {
    std::string name;           // "large", "small" or "custom"
    int stem_channels = 0;
    std::vector<StageSpec> stages;
    std::pair<int, int> input_resolution{224, 224};  // (h, w), for FLOPs reporting

    int total_blocks() const;
    // Stage index owning global block index b (0-based).
    int stage_of_block(int b) const;
    // Throws ConfigError when any invariant is violated.
    void validate() const;
};

SearchSpaceSpec large_space();
SearchSpaceSpec small_space();

// Custom-space structured text: `key = value` lines with keys
//   stem_channels = 16
//   stages = 64:4, 160:4, 320:8, 640:4     (out_channels:num_blocks per stage)
//   resolution = 224                        (optional)
SearchSpaceSpec parse_space(const std::string& text);
SearchSpaceSpec space_preset(const std::string& name);  // "large" | "small"
std::string format_space(const SearchSpaceSpec& space);

struct Architecture {
    std::vector<ChoiceKind> choices;

    bool operator==(const Architecture& other) const { return choices == other.choices; }
    size_t size() const { return choices.size(); }
};

// Comma-separated integer tags, e.g. "0,2,1".
std::string format_architecture(const Architecture& arch);
// Comma-separated symbolic tokens, e.g. "3x3,7x7,5x5".
std::string format_architecture_symbolic(const Architecture& arch);

// Accepts integer tags and symbolic tokens (mixable); errors name the
// 1-based offending position and enforce the space's block count.
Architecture parse_architecture(const std::string& text, const SearchSpaceSpec& space);

// All positions drawn independently and uniformly from the four choices.
Architecture random_architecture(const SearchSpaceSpec& space, Rng& rng);

Architecture uniform_architecture(const SearchSpaceSpec& space, ChoiceKind kind);

// 4^total_blocks.
BigUint cardinality(const SearchSpaceSpec& space);

// Hard FLOPs budget (multiply-accumulate operations) for constraint eta.
struct Constraint {
    uint64_t max_flops = UINT64_MAX;

    bool satisfies(uint64_t flops) const { return flops <= max_flops; }
    bool unbounded() const { return max_flops == UINT64_MAX; }
};

}  // namespace detnas
