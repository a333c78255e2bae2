#pragma once

#include <string>
#include <vector>

#include "detnas/nn_ops.hpp"
#include "gradcheck.hpp"

namespace detnas::test {

struct GradcheckResult {
    std::string op;
    int runs = 0;
    double worst = 0.0;
};

// Finite-difference checks for every tensor primitive, on double
// instantiations of the kernels, >= 20 random shapes/seeds per op at h=1e-3.
inline std::vector<GradcheckResult> run_all_gradchecks() {
    std::vector<GradcheckResult> results;
    auto record = [&](const std::string& op, double err) {
        for (auto& r : results) {
            if (r.op == op) {
                r.runs += 1;
                r.worst = std::max(r.worst, err);
                return;
            }
        }
        results.push_back({op, 1, err});
    };

    // conv2d: dense/depthwise, strides 1 and 2, kernels 1/3/5, vs x and w.
    struct ConvCase { int cin, cout, k, stride, groups, h, w; };
    const ConvCase conv_cases[] = {
        {3, 4, 3, 1, 1, 5, 5}, {3, 4, 3, 2, 1, 6, 6}, {4, 6, 1, 1, 1, 4, 4},
        {4, 4, 3, 1, 4, 5, 5}, {6, 6, 5, 2, 6, 8, 8},
    };
    for (const auto& c : conv_cases) {
        for (uint64_t seed = 0; seed < 5; ++seed) {
            Rng rng(Rng::derive(1000 + seed, static_cast<uint64_t>(c.k * 10 + c.stride)));
            DTensor x = random_tensor({2, c.cin, c.h, c.w}, rng);
            DTensor w = random_tensor({c.cout, c.cin / c.groups, c.k, c.k}, rng);
            auto forward = [&] { return nn::conv2d(x, w, c.stride, c.groups); };
            const DTensor r = random_tensor(forward().dims(), rng);
            DTensor gx, gw;
            nn::conv2d_backward(x, w, c.stride, c.groups, r, gx, gw);
            record("conv2d", max_fd_error(x, forward, r, gx));
            record("conv2d", max_fd_error(w, forward, r, gw));
        }
    }

    // batch_norm (training mode) vs x, scale, shift.
    for (uint64_t seed = 0; seed < 7; ++seed) {
        Rng rng(Rng::derive(2000, seed));
        const int c = 2 + static_cast<int>(seed % 3);
        DTensor x = random_tensor({3, c, 3, 3}, rng);
        DTensor scale = random_tensor({c}, rng, 0.5);
        for (size_t i = 0; i < scale.numel(); ++i) scale[i] += 1.0;
        DTensor shift = random_tensor({c}, rng, 0.5);
        auto forward = [&] {
            std::vector<double> m, v;
            return nn::batch_norm_train<double>(x, scale, shift, 1e-5, nullptr, m, v);
        };
        const DTensor r = random_tensor(forward().dims(), rng);
        DTensor xhat;
        std::vector<double> mean, var;
        nn::batch_norm_train<double>(x, scale, shift, 1e-5, &xhat, mean, var);
        DTensor gx, gscale, gshift;
        nn::batch_norm_train_backward<double>(xhat, var, scale, 1e-5, r, gx, gscale, gshift);
        record("batch_norm", max_fd_error(x, forward, r, gx));
        record("batch_norm", max_fd_error(scale, forward, r, gscale));
        record("batch_norm", max_fd_error(shift, forward, r, gshift));
    }

    // relu, away from the kink.
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(Rng::derive(3000, seed));
        DTensor x = random_tensor({2, 3, 4, 4}, rng);
        enforce_margin(x, 0.05);
        auto forward = [&] { return nn::relu(x); };
        const DTensor r = random_tensor(x.dims(), rng);
        record("relu", max_fd_error(x, forward, r, nn::relu_backward(x, r)));
    }

    // sigmoid.
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(Rng::derive(4000, seed));
        DTensor x = random_tensor({3, 5}, rng, 2.0);
        auto forward = [&] { return nn::sigmoid(x); };
        const DTensor r = random_tensor(x.dims(), rng);
        record("sigmoid", max_fd_error(x, forward, r, nn::sigmoid_backward(nn::sigmoid(x), r)));
    }

    // channel_split: loss = a.ra + b.rb; gradient is the channel concat.
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(Rng::derive(5000, seed));
        DTensor x = random_tensor({2, 6, 3, 3}, rng);
        DTensor ra = random_tensor({2, 3, 3, 3}, rng);
        DTensor rb = random_tensor({2, 3, 3, 3}, rng);
        auto forward_scalar = [&] {
            auto [a, b] = nn::channel_split(x);
            return scalar_loss(a, ra) + scalar_loss(b, rb);
        };
        const DTensor analytic = nn::concat_channels(ra, rb);
        record("channel_split", max_fd_error_scalar(x, forward_scalar, analytic));
    }

    // concat_channels vs both inputs; gradient is the split of upstream.
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(Rng::derive(6000, seed));
        DTensor a = random_tensor({2, 2, 3, 3}, rng);
        DTensor b = random_tensor({2, 4, 3, 3}, rng);
        const DTensor r = random_tensor({2, 6, 3, 3}, rng);
        auto forward = [&] { return nn::concat_channels(a, b); };
        DTensor ga({2, 2, 3, 3}), gb({2, 4, 3, 3});
        // split of r at a's channel count
        for (int n = 0; n < 2; ++n) {
            for (size_t i = 0; i < 2 * 9; ++i) ga[static_cast<size_t>(n) * 18 + i] = r[static_cast<size_t>(n) * 54 + i];
            for (size_t i = 0; i < 4 * 9; ++i) gb[static_cast<size_t>(n) * 36 + i] = r[static_cast<size_t>(n) * 54 + 18 + i];
        }
        record("concat", max_fd_error(a, forward, r, ga));
        record("concat", max_fd_error(b, forward, r, gb));
    }

    // channel_shuffle: gradient is the inverse shuffle.
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(Rng::derive(7000, seed));
        const int groups = (seed % 2 == 0) ? 2 : 4;
        DTensor x = random_tensor({2, 8, 2, 2}, rng);
        auto forward = [&] { return nn::channel_shuffle(x, groups); };
        const DTensor r = random_tensor(x.dims(), rng);
        const DTensor analytic = nn::channel_shuffle(r, 8 / groups);
        record("channel_shuffle", max_fd_error(x, forward, r, analytic));
    }

    // max_pool: small h keeps finite differences away from argmax flips.
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(Rng::derive(8000, seed));
        const int k = (seed % 2 == 0) ? 2 : 3;
        DTensor x = random_tensor({2, 2, 6, 6}, rng);
        auto forward = [&] { return nn::max_pool<double>(x, k, 2, nullptr); };
        const DTensor r = random_tensor(forward().dims(), rng);
        nn::MaxPoolCache cache;
        nn::max_pool(x, k, 2, &cache);
        const DTensor analytic = nn::max_pool_backward<double>(cache, r);
        record("max_pool", max_fd_error(x, forward, r, analytic, 1e-5));
    }

    // global_avg_pool.
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(Rng::derive(9000, seed));
        DTensor x = random_tensor({2, 3, 4, 4}, rng);
        auto forward = [&] { return nn::global_avg_pool(x); };
        const DTensor r = random_tensor({2, 3}, rng);
        record("global_avg_pool",
               max_fd_error(x, forward, r, nn::global_avg_pool_backward<double>(x.dims(), r)));
    }

    // fully_connected vs x, w, b.
    for (uint64_t seed = 0; seed < 7; ++seed) {
        Rng rng(Rng::derive(10000, seed));
        DTensor x = random_tensor({3, 6}, rng);
        DTensor w = random_tensor({4, 6}, rng);
        DTensor b = random_tensor({4}, rng);
        auto forward = [&] { return nn::fully_connected(x, w, b); };
        const DTensor r = random_tensor({3, 4}, rng);
        DTensor gx, gw, gb;
        nn::fully_connected_backward(x, w, r, gx, gw, gb);
        record("fully_connected", max_fd_error(x, forward, r, gx));
        record("fully_connected", max_fd_error(w, forward, r, gw));
        record("fully_connected", max_fd_error(b, forward, r, gb));
    }

    // softmax_cross_entropy: the loss is already scalar.
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(Rng::derive(11000, seed));
        const int k = 3 + static_cast<int>(seed % 4);
        DTensor logits = random_tensor({4, k}, rng, 2.0);
        std::vector<int> labels(4);
        for (auto& l : labels) l = rng.uniform_int(k);
        auto forward = [&] { return static_cast<double>(nn::softmax_cross_entropy<double>(logits, labels, nullptr)); };
        DTensor probs;
        nn::softmax_cross_entropy<double>(logits, labels, &probs);
        const DTensor analytic = nn::softmax_cross_entropy_backward(probs, labels);
        record("softmax_cross_entropy", max_fd_error_scalar(logits, forward, analytic));
    }

    // smooth_l1, residuals away from the |d| = 1 kink.
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(Rng::derive(12000, seed));
        DTensor target = random_tensor({4, 4}, rng, 0.5);
        DTensor pred(target.dims());
        for (size_t i = 0; i < pred.numel(); ++i) {
            const double d = rng.uniform_double() < 0.5 ? (rng.uniform_double() * 1.8 - 0.9)
                                                        : (1.2 + rng.uniform_double());
            pred[i] = target[i] + (rng.uniform_double() < 0.5 ? d : -d);
        }
        auto forward = [&] { return static_cast<double>(nn::smooth_l1(pred, target)); };
        const DTensor analytic = nn::smooth_l1_backward(pred, target);
        record("smooth_l1", max_fd_error_scalar(pred, forward, analytic));
    }

    return results;
}

}  // namespace detnas::test
