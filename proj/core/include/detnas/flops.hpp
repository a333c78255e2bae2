#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "detnas/searchspace.hpp"

namespace detnas {

// One convolution inside a block, always followed by BN and optionally ReLU.
// groups is either 1 (dense) or in_channels (depthwise).
struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int groups = 1;
    bool relu = false;
};

// ShuffleNetv2-unit wiring for one choice block. Stride-1 blocks split the
// input channels in half (left half passes through); stride-2 blocks run
// both branches on the full input. Branch outputs are concatenated and
// channel-shuffled with 2 groups.
struct BlockPlan {
    bool split = false;               // stride-1: channel split, left passthrough
    std::vector<ConvSpec> left;       // empty when split
    std::vector<ConvSpec> right;
};

BlockPlan block_plan(ChoiceKind choice, int in_channels, int out_channels, int stride);

// Output spatial size of a same-padded convolution (pad = kernel/2).
std::pair<int, int> conv_output_hw(const ConvSpec& conv, int in_h, int in_w);

// Multiply-accumulate count: (c_in/groups) * c_out * k_h * k_w * H_out * W_out.
uint64_t conv_macs(const ConvSpec& conv, int in_h, int in_w);

// MACs of all convolutions in one choice block. BN, ReLU, pooling and
// channel shuffle count zero.
uint64_t block_flops(ChoiceKind choice, int in_channels, int out_channels, int stride,
                     std::pair<int, int> in_resolution);

// Optional classifier head: global average pool -> fully connected.
struct HeadSpec {
    int classes = 0;  // 0 = no head attached
};

// Stem conv plus all blocks (and the head FC when attached), tracking
// resolution through the strides. Resolution defaults to the space's
// canonical reporting resolution.
uint64_t architecture_flops(const Architecture& arch, const SearchSpaceSpec& space,
                            HeadSpec head = {}, std::pair<int, int> resolution = {0, 0});

// Per-block per-choice MAC table at a fixed resolution; architecture cost
// is stem + sum of table entries, used for O(blocks) constraint checks.
class FlopsTable {
  public:
    FlopsTable(const SearchSpaceSpec& space, std::pair<int, int> resolution = {0, 0});

    uint64_t stem_macs() const { return stem_macs_; }
    uint64_t block_macs(int block, ChoiceKind choice) const;
    uint64_t architecture_macs(const Architecture& arch) const;
    uint64_t min_macs() const { return min_macs_; }
    uint64_t max_macs() const { return max_macs_; }

  private:
    uint64_t stem_macs_ = 0;
    uint64_t min_macs_ = 0;
    uint64_t max_macs_ = 0;
    std::vector<std::array<uint64_t, kNumChoices>> table_;
};

}  // namespace detnas
