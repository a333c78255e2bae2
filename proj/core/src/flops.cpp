#include "detnas/flops.hpp"

#include <algorithm>

#include "detnas/errors.hpp"

namespace detnas {

namespace {

ConvSpec pointwise(int in_ch, int out_ch, bool relu) {
    return ConvSpec{in_ch, out_ch, 1, 1, 1, relu};
}

ConvSpec depthwise(int channels, int kernel, int stride) {
    return ConvSpec{channels, channels, kernel, stride, channels, false};
}

}  // namespace

BlockPlan block_plan(ChoiceKind choice, int in_channels, int out_channels, int stride) {
    if (stride != 1 && stride != 2)
        throw ConfigError("block stride must be 1 or 2, got " + std::to_string(stride));
    if (out_channels % 2 != 0)
        throw ConfigError("block out_channels must be even, got " + std::to_string(out_channels));

    const int k = choice_kernel(choice);
    BlockPlan plan;
    if (stride == 1) {
        if (in_channels != out_channels)
            throw ConfigError("stride-1 block must preserve channels (" + std::to_string(in_channels) +
                              " != " + std::to_string(out_channels) + ")");
        if (in_channels % 2 != 0)
            throw ConfigError("stride-1 block needs an even channel count for the split, got " +
                              std::to_string(in_channels));
        const int half = in_channels / 2;
        plan.split = true;
        if (choice == ChoiceKind::kXception3x3) {
            for (int rep = 0; rep < 3; ++rep) {
                plan.right.push_back(depthwise(half, 3, 1));
                plan.right.push_back(pointwise(half, half, true));
            }
        } else {
            plan.right.push_back(pointwise(half, half, true));
            plan.right.push_back(depthwise(half, k, 1));
            plan.right.push_back(pointwise(half, half, true));
        }
    } else {
        const int half_out = out_channels / 2;
        plan.split = false;
        plan.left.push_back(depthwise(in_channels, k, 2));
        plan.left.push_back(pointwise(in_channels, half_out, true));
        if (choice == ChoiceKind::kXception3x3) {
            plan.right.push_back(depthwise(in_channels, 3, 2));
            plan.right.push_back(pointwise(in_channels, half_out, true));
            for (int rep = 0; rep < 2; ++rep) {
                plan.right.push_back(depthwise(half_out, 3, 1));
                plan.right.push_back(pointwise(half_out, half_out, true));
            }
        } else {
            plan.right.push_back(pointwise(in_channels, half_out, true));
            plan.right.push_back(depthwise(half_out, k, 2));
            plan.right.push_back(pointwise(half_out, half_out, true));
        }
    }
    return plan;
}

std::pair<int, int> conv_output_hw(const ConvSpec& conv, int in_h, int in_w) {
    const int pad = conv.kernel / 2;
    const int out_h = (in_h + 2 * pad - conv.kernel) / conv.stride + 1;
    const int out_w = (in_w + 2 * pad - conv.kernel) / conv.stride + 1;
    return {out_h, out_w};
}

uint64_t conv_macs(const ConvSpec& conv, int in_h, int in_w) {
    const auto [out_h, out_w] = conv_output_hw(conv, in_h, in_w);
    return static_cast<uint64_t>(conv.in_channels / conv.groups) * conv.out_channels *
           conv.kernel * conv.kernel * out_h * out_w;
}

namespace {

uint64_t branch_macs(const std::vector<ConvSpec>& branch, int in_h, int in_w) {
    uint64_t total = 0;
    int h = in_h, w = in_w;
    for (const auto& conv : branch) {
        total += conv_macs(conv, h, w);
        std::tie(h, w) = conv_output_hw(conv, h, w);
    }
    return total;
}

}  // namespace

uint64_t block_flops(ChoiceKind choice, int in_channels, int out_channels, int stride,
                     std::pair<int, int> in_resolution) {
    const BlockPlan plan = block_plan(choice, in_channels, out_channels, stride);
    return branch_macs(plan.left, in_resolution.first, in_resolution.second) +
           branch_macs(plan.right, in_resolution.first, in_resolution.second);
}

uint64_t architecture_flops(const Architecture& arch, const SearchSpaceSpec& space,
                            HeadSpec head, std::pair<int, int> resolution) {
    space.validate();
    if (static_cast<int>(arch.size()) != space.total_blocks())
        throw ConfigError("invalid architecture: has " + std::to_string(arch.size()) +
                          " choices, space '" + space.name + "' needs " +
                          std::to_string(space.total_blocks()));
    if (resolution.first <= 0) resolution = space.input_resolution;

    const ConvSpec stem{3, space.stem_channels, 3, 2, 1, true};
    uint64_t total = conv_macs(stem, resolution.first, resolution.second);
    auto [h, w] = conv_output_hw(stem, resolution.first, resolution.second);

    int block = 0;
    int in_ch = space.stem_channels;
    for (const auto& stage : space.stages) {
        for (int i = 0; i < stage.num_blocks; ++i, ++block) {
            const int stride = (i == 0) ? stage.first_block_stride : 1;
            const int cin = (i == 0) ? in_ch : stage.out_channels;
            total += block_flops(arch.choices[block], cin, stage.out_channels, stride, {h, w});
            if (stride == 2) {
                h = (h + 1) / 2;
                w = (w + 1) / 2;
            }
        }
        in_ch = stage.out_channels;
    }
    if (head.classes > 0) total += static_cast<uint64_t>(in_ch) * head.classes;
    return total;
}

FlopsTable::FlopsTable(const SearchSpaceSpec& space, std::pair<int, int> resolution) {
    space.validate();
    if (resolution.first <= 0) resolution = space.input_resolution;

    const ConvSpec stem{3, space.stem_channels, 3, 2, 1, true};
    stem_macs_ = conv_macs(stem, resolution.first, resolution.second);
    auto [h, w] = conv_output_hw(stem, resolution.first, resolution.second);

    min_macs_ = stem_macs_;
    max_macs_ = stem_macs_;
    int in_ch = space.stem_channels;
    for (const auto& stage : space.stages) {
        for (int i = 0; i < stage.num_blocks; ++i) {
            const int stride = (i == 0) ? stage.first_block_stride : 1;
            const int cin = (i == 0) ? in_ch : stage.out_channels;
            std::array<uint64_t, kNumChoices> row{};
            for (int c = 0; c < kNumChoices; ++c)
                row[static_cast<size_t>(c)] =
                    block_flops(static_cast<ChoiceKind>(c), cin, stage.out_channels, stride, {h, w});
            table_.push_back(row);
            min_macs_ += *std::min_element(row.begin(), row.end());
            max_macs_ += *std::max_element(row.begin(), row.end());
            if (stride == 2) {
                h = (h + 1) / 2;
                w = (w + 1) / 2;
            }
        }
        in_ch = stage.out_channels;
    }
}

uint64_t FlopsTable::block_macs(int block, ChoiceKind choice) const {
    return table_.at(static_cast<size_t>(block))[static_cast<size_t>(choice)];
}

uint64_t FlopsTable::architecture_macs(const Architecture& arch) const {
    if (arch.size() != table_.size())
        throw ConfigError("invalid architecture: has " + std::to_string(arch.size()) +
                          " choices, table covers " + std::to_string(table_.size()) + " blocks");
    uint64_t total = stem_macs_;
    for (size_t b = 0; b < table_.size(); ++b)
        total += table_[b][static_cast<size_t>(arch.choices[b])];
    return total;
}

}  // namespace detnas
