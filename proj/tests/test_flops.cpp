#include <doctest.h>

#include "detnas/errors.hpp"
#include "detnas/flops.hpp"
#include "test_util.hpp"

using namespace detnas;

TEST_SUITE_BEGIN("flops");

TEST_CASE("bare convolution MAC counts") {
    // 1x1 conv, 16 -> 32 channels, 8x8 output: 16*32*8*8
    CHECK(conv_macs(ConvSpec{16, 32, 1, 1, 1, false}, 8, 8) == 32768);
    // depthwise 3x3, 8 channels, 4x4 output: 8*9*16
    CHECK(conv_macs(ConvSpec{8, 8, 3, 1, 8, false}, 4, 4) == 1152);
}

TEST_CASE("shuffle 3x3 stride-1 block matches a layer-by-layer hand count") {
    // Independent enumeration of the right branch at C=64, 16x16 input:
    // split halves -> 32 channels; 1x1 (32*32*256), dw 3x3 (32*9*256),
    // 1x1 (32*32*256); the left half passes through at zero cost.
    const uint64_t pw = 32ull * 32 * 16 * 16;
    const uint64_t dw = 32ull * 9 * 16 * 16;
    const uint64_t expected = pw + dw + pw;
    CHECK(expected == 598016);
    CHECK(block_flops(ChoiceKind::kShuffle3x3, 64, 64, 1, {16, 16}) == expected);
}

TEST_CASE("stride-2 block counts every branch convolution") {
    // Hand count for shuffle 3x3, 16 -> 64, 32x32 input (16x16 output):
    // left: dw3x3 on 16 @16x16 + 1x1 16->32 @16x16
    // right: 1x1 16->32 @32x32 + dw3x3 on 32 @16x16 + 1x1 32->32 @16x16
    const uint64_t left = 16ull * 9 * 256 + 16ull * 32 * 256;
    const uint64_t right = 16ull * 32 * 1024 + 32ull * 9 * 256 + 32ull * 32 * 256;
    CHECK(block_flops(ChoiceKind::kShuffle3x3, 16, 64, 2, {32, 32}) == left + right);
}

TEST_CASE("odd channels cannot be split") {
    CHECK_THROWS_AS(block_flops(ChoiceKind::kShuffle3x3, 15, 15, 1, {8, 8}), ConfigError);
}

TEST_CASE("all-3x3 three-block toy space equals the full layer-sum hand count") {
    // stem 4 / stages 8:1, 16:1, 32:1 at 224x224; every layer enumerated.
    const uint64_t stem = 3ull * 4 * 9 * 112 * 112;
    const uint64_t block0 = 4ull * 9 * 56 * 56 + 4ull * 4 * 56 * 56            // left: dw, pw
                            + 4ull * 4 * 112 * 112 + 4ull * 9 * 56 * 56        // right: pw, dw
                            + 4ull * 4 * 56 * 56;                              // right: pw
    const uint64_t block1 = 8ull * 9 * 28 * 28 + 8ull * 8 * 28 * 28
                            + 8ull * 8 * 56 * 56 + 8ull * 9 * 28 * 28
                            + 8ull * 8 * 28 * 28;
    const uint64_t block2 = 16ull * 9 * 14 * 14 + 16ull * 16 * 14 * 14
                            + 16ull * 16 * 28 * 28 + 16ull * 9 * 14 * 14
                            + 16ull * 16 * 14 * 14;
    const auto space = test::toy_space_3();
    const Architecture arch = uniform_architecture(space, ChoiceKind::kShuffle3x3);
    CHECK(architecture_flops(arch, space) == stem + block0 + block1 + block2);
}

TEST_CASE("plan shape walk: stride-1 preserves, stride-2 halves") {
    // right-branch resolution chain of each plan, by the same same-padding
    // arithmetic the network uses
    for (const auto choice : {ChoiceKind::kShuffle3x3, ChoiceKind::kShuffle5x5,
                              ChoiceKind::kShuffle7x7, ChoiceKind::kXception3x3}) {
        const BlockPlan s1 = block_plan(choice, 32, 32, 1);
        int h = 14, w = 14, c = 16;  // split half
        for (const auto& conv : s1.right) {
            CHECK(conv.in_channels == c);
            std::tie(h, w) = conv_output_hw(conv, h, w);
            c = conv.out_channels;
        }
        CHECK(h == 14);
        CHECK(w == 14);
        CHECK(c == 16);  // concat with the kept half restores 32

        const BlockPlan s2 = block_plan(choice, 32, 48, 2);
        int lh = 14, lw = 14;
        for (const auto& conv : s2.left) std::tie(lh, lw) = conv_output_hw(conv, lh, lw);
        int rh = 14, rw = 14, rc = 32;
        for (const auto& conv : s2.right) {
            std::tie(rh, rw) = conv_output_hw(conv, rh, rw);
            rc = conv.out_channels;
        }
        CHECK(lh == 7);
        CHECK(rh == 7);
        CHECK(rw == lw);
        CHECK(s2.left.back().out_channels + rc == 48);
    }
}

TEST_CASE("preset paths land in the published FLOPs bands") {
    const Architecture small_all3 = uniform_architecture(small_space(), ChoiceKind::kShuffle3x3);
    const uint64_t small_macs = architecture_flops(small_all3, small_space());
    CHECK(small_macs >= 240000000);
    CHECK(small_macs <= 360000000);

    const Architecture large_all3 = uniform_architecture(large_space(), ChoiceKind::kShuffle3x3);
    const uint64_t large_macs = architecture_flops(large_all3, large_space());
    CHECK(large_macs >= 1000000000);
    CHECK(large_macs <= 1600000000);
}

TEST_CASE("kernel-size monotonicity per position") {
    const auto space = test::toy_space_8();
    Rng rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        Architecture arch = uniform_architecture(space, ChoiceKind::kShuffle3x3);
        const int pos = rng.uniform_int(space.total_blocks());
        const uint64_t base = architecture_flops(arch, space);
        arch.choices[static_cast<size_t>(pos)] = ChoiceKind::kShuffle5x5;
        const uint64_t with5 = architecture_flops(arch, space);
        arch.choices[static_cast<size_t>(pos)] = ChoiceKind::kShuffle7x7;
        const uint64_t with7 = architecture_flops(arch, space);
        CHECK(base < with5);
        CHECK(with5 < with7);
    }
}

TEST_CASE("all-xception path costs at least the all-3x3 path") {
    for (const auto& space : {small_space(), large_space(), test::toy_space_8()}) {
        const uint64_t all3 = architecture_flops(uniform_architecture(space, ChoiceKind::kShuffle3x3), space);
        const uint64_t allx = architecture_flops(uniform_architecture(space, ChoiceKind::kXception3x3), space);
        CHECK(allx >= all3);
    }
}

TEST_CASE("halving the input resolution roughly quarters the count") {
    Rng rng(5);
    for (const auto& space : {small_space(), large_space()}) {
        for (int trial = 0; trial < 5; ++trial) {
            const Architecture arch = random_architecture(space, rng);
            const uint64_t full = architecture_flops(arch, space, {}, {224, 224});
            const uint64_t half = architecture_flops(arch, space, {}, {112, 112});
            const double ratio = static_cast<double>(half) / full;
            CHECK(ratio >= 0.25);  // ceil rounding only ever adds spatial cells
            CHECK(ratio <= 0.30);
        }
    }
}

TEST_CASE("flops table agrees with the direct walk") {
    const auto space = test::toy_space_8();
    const FlopsTable table(space);
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Architecture arch = random_architecture(space, rng);
        CHECK(table.architecture_macs(arch) == architecture_flops(arch, space));
    }
    CHECK(table.min_macs() <= table.architecture_macs(uniform_architecture(space, ChoiceKind::kShuffle3x3)));
    CHECK(table.max_macs() >= table.architecture_macs(uniform_architecture(space, ChoiceKind::kXception3x3)));
}

TEST_CASE("classifier head adds its fully connected MACs") {
    const auto space = test::toy_space_3();
    const Architecture arch = uniform_architecture(space, ChoiceKind::kShuffle3x3);
    const uint64_t without = architecture_flops(arch, space);
    const uint64_t with_head = architecture_flops(arch, space, HeadSpec{10});
    CHECK(with_head - without == static_cast<uint64_t>(space.stages.back().out_channels) * 10);
}

TEST_CASE("length mismatch is rejected") {
    Architecture arch;
    arch.choices = {ChoiceKind::kShuffle3x3};
    CHECK_THROWS_AS(architecture_flops(arch, small_space()), ConfigError);
}

TEST_SUITE_END();
