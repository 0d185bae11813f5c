#include <doctest.h>

#include <cmath>

#include "bgreplace/rng.hpp"
#include "bgreplace/scheduler.hpp"
#include "bgreplace/toy_backends.hpp"
#include "../support.hpp"

using namespace bgreplace;

namespace {

// Independent recomputation: betas from the sqrt-domain linspace, product in long double.
std::vector<long double> alpha_bar_oracle(int n, long double b0, long double b1) {
    std::vector<long double> ab(n + 1, 1.0L);
    const long double lo = std::sqrt(b0), hi = std::sqrt(b1);
    for (int s = 1; s <= n; ++s) {
        const long double r = lo + (hi - lo) * static_cast<long double>(s - 1) / static_cast<long double>(n - 1);
        ab[s] = ab[s - 1] * (1.0L - r * r);
    }
    return ab;
}

}  // namespace

TEST_CASE("alpha_bar table matches the cumulative product oracle") {
    const NoiseSchedule s = make_schedule();
    const auto oracle = alpha_bar_oracle(1000, 0.00085L, 0.012L);
    REQUIRE(s.alpha_bar_table().size() == 1001);
    double worst = 0.0;
    for (int t = 0; t <= 1000; ++t) worst = std::max(worst, std::abs(s.alpha_bar(t) - static_cast<double>(oracle[t])));
    CHECK(worst <= 1e-12);
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.betas().front() == doctest::Approx(0.00085).epsilon(1e-12));
    CHECK(s.betas().back() == doctest::Approx(0.012).epsilon(1e-12));
}

TEST_CASE("alpha_bar is strictly decreasing") {
    const NoiseSchedule s = make_schedule();
    for (int t = 1; t <= 1000; ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
}

TEST_CASE("inference ladder for T = 20") {
    const NoiseSchedule s = make_schedule(1000, 20);
    std::vector<int> expected;
    for (int k = 20; k >= 1; --k) expected.push_back(50 * k);
    CHECK(s.inference_steps() == expected);
    CHECK(s.timestep_for_remaining(20) == 1000);
    CHECK(s.timestep_for_remaining(14) == 700);
    CHECK(s.timestep_for_remaining(8) == 400);
    CHECK(s.timestep_for_remaining(1) == 50);
    CHECK(s.timestep_for_remaining(0) == 0);
    CHECK(s.previous_timestep(1000) == 950);
    CHECK(s.previous_timestep(50) == 0);
    CHECK_THROWS_AS(s.timestep_for_remaining(21), Error);
    CHECK_THROWS_AS(s.previous_timestep(975), Error);
    CHECK_THROWS_AS(s.alpha_bar(1001), Error);
    CHECK_THROWS_AS(s.alpha_bar(-1), Error);
}

TEST_CASE("preset step counts round to the nearest step") {
    CHECK(steps_from_fraction(0.7, 20) == 14);
    CHECK(steps_from_fraction(0.4, 20) == 8);
    CHECK(steps_from_fraction(0.0, 20) == 0);
    CHECK(steps_from_fraction(1.0, 20) == 20);
    CHECK_THROWS_AS(steps_from_fraction(1.5, 20), Error);
}

TEST_CASE("make_schedule rejects bad parameters") {
    CHECK_THROWS_AS(make_schedule(1000, 0), Error);
    CHECK_THROWS_AS(make_schedule(10, 20), Error);
    CHECK_THROWS_AS(make_schedule(1000, 20, 0.0, 0.01), Error);
    CHECK_THROWS_AS(make_schedule(1000, 20, 0.02, 0.01), Error);
}

TEST_CASE("pred_x0 inverts add_noise on every inference timestep") {
    const NoiseSchedule s = make_schedule();
    const Shape4 shape{2, 4, 6, 3};
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const LatentTensor x0(testing::random_doubles(shape, 100 + trial, -2.0, 2.0));
        const LatentTensor eps(gaussian_noise(shape, 5000 + trial));
        for (int t : s.inference_steps()) {
            const LatentTensor back = pred_x0(add_noise(x0, eps, t, s), eps, t, s);
            worst = std::max(worst, max_abs_diff(back.data(), x0.data()));
        }
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("add_noise at t = 0 is the identity") {
    const NoiseSchedule s = make_schedule();
    const LatentTensor x0(testing::random_doubles({1, 3, 3, 3}, 1));
    const LatentTensor eps(gaussian_noise({1, 3, 3, 3}, 2));
    CHECK(max_abs_diff(add_noise(x0, eps, 0, s).data(), x0.data()) == 0.0);
}

TEST_CASE("pred_x0 refuses a degenerate timestep") {
    // beta close to 1 drives alpha_bar under the floor after a few steps
    const NoiseSchedule s = make_schedule(100, 10, 0.9, 0.9);
    const LatentTensor x(testing::random_doubles({1, 2, 2, 3}, 3));
    CHECK(s.alpha_bar(100) < kAlphaBarFloor);
    CHECK_THROWS_AS(pred_x0(x, x, 100, s), Error);
}

TEST_CASE("ddim step to t_prev = 0 returns the clean estimate") {
    const NoiseSchedule s = make_schedule();
    const LatentTensor x0(testing::random_doubles({1, 3, 3, 3}, 4));
    const LatentTensor eps(gaussian_noise({1, 3, 3, 3}, 5));
    CHECK(max_abs_diff(ddim_step(x0, eps, 0, s).data(), x0.data()) == 0.0);
}

TEST_CASE("ddim step evaluates the update formula") {
    const NoiseSchedule s = make_schedule();
    const LatentTensor x0(Array4<double>({1, 1, 1, 1}, std::vector<double>{0.3}));
    const LatentTensor eps(Array4<double>({1, 1, 1, 1}, std::vector<double>{-1.2}));
    const double ab = s.alpha_bar(650);
    const double expected = std::sqrt(ab) * 0.3 + std::sqrt(1.0 - ab) * -1.2;
    CHECK(ddim_step(x0, eps, 650, s)[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("20-step DDIM with the oracle noise lands on the target") {
    const NoiseSchedule s = make_schedule();
    const Shape4 shape{2, 5, 7, 3};
    const LatentTensor target(testing::random_doubles(shape, 77, -1.0, 1.0));
    double worst = 0.0;
    for (int init = 0; init < 10; ++init) {
        LatentTensor x(gaussian_noise(shape, 900 + init));
        for (int t : s.inference_steps()) {
            const LatentTensor eps = oracle_eps(x, target, t, s);
            x = ddim_step(pred_x0(x, eps, t, s), eps, s.previous_timestep(t), s);
        }
        worst = std::max(worst, max_abs_diff(x.data(), target.data()));
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("latent tensors reject non-finite values") {
    Array4<double> a({1, 1, 1, 1});
    a[0] = std::nan("");
    CHECK_THROWS_AS(LatentTensor{a}, Error);
}
