#include <doctest.h>

#include "gradcheck_suite.hpp"

TEST_SUITE_BEGIN("gradcheck");

TEST_CASE("every primitive matches central finite differences") {
    const auto results = detnas::test::run_all_gradchecks();
    CHECK(results.size() >= 12);
    for (const auto& r : results) {
        INFO(r.op, ": worst relative error ", r.worst, " over ", r.runs, " runs");
        CHECK(r.runs >= 20);
        CHECK(r.worst < 1e-3);
    }
}

TEST_CASE("conv2d on the reference 2x3x5x5 input at h=1e-3") {
    using namespace detnas;
    using namespace detnas::test;
    Rng rng(20250808);
    DTensor x = random_tensor({2, 3, 5, 5}, rng);
    DTensor w = random_tensor({4, 3, 3, 3}, rng);
    auto forward = [&] { return nn::conv2d(x, w, 1, 1); };
    const DTensor r = random_tensor(forward().dims(), rng);
    DTensor gx, gw;
    nn::conv2d_backward(x, w, 1, 1, r, gx, gw);
    CHECK(max_fd_error(x, forward, r, gx, 1e-3) < 1e-3);
    CHECK(max_fd_error(w, forward, r, gw, 1e-3) < 1e-3);
}

TEST_SUITE_END();
