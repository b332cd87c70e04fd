#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "aclink/frames.hpp"

using namespace aclink;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs_diff(const ThreePhase& x, const ThreePhase& y) {
    return std::max({std::abs(x.a - y.a), std::abs(x.b - y.b), std::abs(x.c - y.c)});
}

double angle_diff(double a, double b) {
    double d = std::fmod(a - b, 2.0 * kPi);
    if (d > kPi) d -= 2.0 * kPi;
    if (d < -kPi) d += 2.0 * kPi;
    return d;
}

}  // namespace

TEST_CASE("zero maps to zero") {
    const DqPair dq = abc_to_dq(ThreePhase{}, 1.234);
    REQUIRE(dq.d == 0.0);
    REQUIRE(dq.q == 0.0);
    const ThreePhase abc = dq_to_abc(DqPair{}, 0.5);
    REQUIRE(abc.a == 0.0);
    REQUIRE(abc.b == 0.0);
    REQUIRE(abc.c == 0.0);
}

TEST_CASE("aligned balanced set maps onto the q axis") {
    for (double theta : {0.0, 0.3, 1.7, 4.0, 6.2}) {
        const DqPair dq = abc_to_dq(balanced(2.5, theta), theta);
        CHECK(dq.d == Approx(0.0).margin(1e-12));
        CHECK(dq.q == Approx(2.5).epsilon(1e-12));
    }
}

TEST_CASE("a quarter-period lag lands on the d axis") {
    // current lagging the voltage by 90 degrees: pure reactive
    const double theta = 0.8;
    const DqPair dq = abc_to_dq(balanced(1.0, theta - kPi / 2.0), theta);
    CHECK(dq.q == Approx(0.0).margin(1e-12));
    CHECK(std::abs(dq.d) == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("round trip over random zero-sum sets") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    std::uniform_real_distribution<double> ang(-20.0, 20.0);
    double worst = 0.0;
    for (int n = 0; n < 1000; ++n) {
        const double a = u(rng);
        const double b = u(rng);
        const ThreePhase x{a, b, -a - b};
        const double theta = ang(rng);
        const ThreePhase back = dq_to_abc(abc_to_dq(x, theta), theta);
        worst = std::max(worst, max_abs_diff(x, back) / 100.0);
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("dq to abc is zero-sum and inverts abc to dq") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int n = 0; n < 1000; ++n) {
        const DqPair x{u(rng), u(rng)};
        const double theta = u(rng);
        const ThreePhase abc = dq_to_abc(x, theta);
        CHECK(std::abs(abc.sum()) < 1e-12);
        const DqPair back = abc_to_dq(abc, theta);
        CHECK(std::abs(back.d - x.d) < 1e-12);
        CHECK(std::abs(back.q - x.q) < 1e-12);
    }
}

TEST_CASE("transforms are linear") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int n = 0; n < 200; ++n) {
        const ThreePhase x{u(rng), u(rng), u(rng)};
        const ThreePhase y{u(rng), u(rng), u(rng)};
        const double k = u(rng);
        const double theta = u(rng);
        const DqPair lhs = abc_to_dq(x + k * y, theta);
        const DqPair rhs = abc_to_dq(x, theta) + k * abc_to_dq(y, theta);
        CHECK(lhs.d == Approx(rhs.d).margin(1e-12));
        CHECK(lhs.q == Approx(rhs.q).margin(1e-12));
    }
}

TEST_CASE("zero sequence is ignored by the forward transform") {
    const ThreePhase x = balanced(3.0, 0.4);
    const ThreePhase shifted = x + ThreePhase{1.5, 1.5, 1.5};
    const DqPair a = abc_to_dq(x, 0.4);
    const DqPair b = abc_to_dq(shifted, 0.4);
    CHECK(a.d == Approx(b.d).margin(1e-12));
    CHECK(a.q == Approx(b.q).margin(1e-12));
    CHECK(zero_sequence(shifted) == Approx(1.5).margin(1e-12));
}

TEST_CASE("wrap_angle stays in range") {
    for (double x : {-1e-18, -7.0, 0.0, 2.0 * kPi, 13.0, 1e6}) {
        const double w = wrap_angle(x);
        CHECK(w >= 0.0);
        CHECK(w < 2.0 * kPi);
        CHECK(std::abs(angle_diff(w, x)) < 1e-9);
    }
}

TEST_CASE("PLL acquires lock from rest") {
    const double amp = 80.0 * std::sqrt(2.0 / 3.0);
    const double omega = 2.0 * kPi * 60.0;
    const double dt = 50e-6;
    const PllGains g = PllGains::from_bandwidth(60.0, 20.0, 0.707);
    PllState s;
    double t = 0.0;
    double prev = s.theta;
    for (int k = 0; k < static_cast<int>(0.2 / dt); ++k) {
        s = pll_step(balanced(amp, omega * t + 1.0), s, dt, g);
        t += dt;
        // the wrapped angle advances by omega*dt modulo 2 pi
        CHECK(std::abs(angle_diff(s.theta, prev) - s.omega * dt) < 1e-9);
        prev = s.theta;
    }
    CHECK(std::abs(s.omega - omega) < 0.1);
    CHECK(std::abs(angle_diff(s.theta, omega * t + 1.0)) < 1e-3);

    SECTION("locked error stays small") {
        for (int k = 0; k < 100; ++k) {
            CHECK(std::abs(pll_error(balanced(amp, omega * t + 1.0), s.theta)) < 1e-3);
            s = pll_step(balanced(amp, omega * t + 1.0), s, dt, g);
            t += dt;
        }
    }

    SECTION("phase jump re-converges within five cycles") {
        const double jump = 5.0 * kPi / 180.0;
        for (int k = 0; k < static_cast<int>(5.0 / 60.0 / dt); ++k) {
            s = pll_step(balanced(amp, omega * t + 1.0 + jump), s, dt, g);
            t += dt;
        }
        CHECK(std::abs(angle_diff(s.theta, omega * t + 1.0 + jump)) < 0.05 * jump);
        CHECK(std::abs(s.omega - omega) < 0.5);
    }
}
