#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "aclink/errors.hpp"
#include "aclink/spectrum.hpp"

using namespace aclink;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> sampled(double fs, double duration, auto&& f) {
    const auto n = static_cast<std::size_t>(std::llround(fs * duration));
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = f(static_cast<double>(i) / fs);
    return x;
}

}  // namespace

TEST_CASE("pure sinusoid has no distortion") {
    const auto x = sampled(20e3, 0.1, [](double t) { return 3.0 * std::sin(2.0 * kPi * 60.0 * t + 0.3); });
    const ThdReport r = thd_report(x, 20e3, 60.0, 50);
    CHECK(r.thd_percent < 0.01);
    CHECK(r.fundamental == Approx(3.0).epsilon(1e-9));
}

TEST_CASE("square wave distortion") {
    // midpoint samples avoid the discontinuity; every harmonic up to Nyquist counts
    const int per = 4096;
    std::vector<double> x(per);
    for (int i = 0; i < per; ++i) x[static_cast<std::size_t>(i)] = (i < per / 2) ? 1.0 : -1.0;
    const double fs = 60.0 * per;
    const double expected = 100.0 * std::sqrt(kPi * kPi / 8.0 - 1.0);
    CHECK(expected == Approx(48.34).margin(0.01));
    CHECK(thd(x, fs, 60.0, per / 2 - 1) == Approx(expected).margin(0.1));
}

TEST_CASE("distortion is scale invariant") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> noise(0.0, 0.1);
    const auto x = sampled(20e3, 0.1, [&](double t) {
        return std::sin(2.0 * kPi * 60.0 * t) + 0.2 * std::sin(2.0 * kPi * 300.0 * t) + noise(rng);
    });
    const double base = thd(x, 20e3, 60.0, 50);
    for (double k : {1e-3, 7.0, 1e4}) {
        std::vector<double> y(x);
        for (double& v : y) v *= k;
        CHECK(std::abs(thd(y, 20e3, 60.0, 50) - base) <= 1e-12 * base);
    }
}

TEST_CASE("one-sided spectrum satisfies Parseval") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto x = sampled(6000.0, 1.0, [&](double t) { return 0.5 + std::cos(2.0 * kPi * 60.0 * t) + noise(rng); });
    const Spectrum s = amplitude_spectrum(x, 6000.0, 60.0);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    double sum = 0.0;
    for (std::size_t k = 1; k < s.amplitude.size(); ++k) sum += s.amplitude[k] * s.amplitude[k];
    CHECK(sum == Approx(2.0 * var).epsilon(0.01));
    CHECK(s.amplitude[0] == Approx(mean).epsilon(1e-12));
}

TEST_CASE("interharmonic content is counted and reported separately") {
    const auto x = sampled(20e3, 1.0, [](double t) {
        return std::sin(2.0 * kPi * 60.0 * t) + 0.3 * std::sin(2.0 * kPi * 629.0 * t);
    });
    const ThdReport r = thd_report(x, 20e3, 60.0, 50);
    CHECK(r.thd_percent == Approx(30.0).epsilon(1e-6));
    CHECK(r.harmonic_thd_percent < 1e-6);
    CHECK(r.interharmonic_residual == Approx(0.3).epsilon(1e-6));
    CHECK(r.dominant_frequency == Approx(629.0));
}

TEST_CASE("harmonic amplitudes") {
    const auto x = sampled(20e3, 0.1, [](double t) {
        return 2.0 * std::cos(2.0 * kPi * 60.0 * t) + 0.1 * std::cos(2.0 * kPi * 300.0 * t) +
               0.05 * std::cos(2.0 * kPi * 420.0 * t);
    });
    const ThdReport r = thd_report(x, 20e3, 60.0, 50);
    CHECK(r.harmonics[5] == Approx(0.1).epsilon(1e-9));
    CHECK(r.harmonics[7] == Approx(0.05).epsilon(1e-9));
    CHECK(r.harmonic_thd_percent == Approx(100.0 * std::hypot(0.1, 0.05) / 2.0).epsilon(1e-9));
}

TEST_CASE("spectrum input errors") {
    const auto third = sampled(20e3, 0.1, [](double t) { return std::sin(2.0 * kPi * 180.0 * t); });
    CHECK_THROWS_AS(thd(third, 20e3, 60.0, 50), NoFundamental);
    const std::vector<double> zeros(2000, 0.0);
    CHECK_THROWS_AS(thd(zeros, 20e3, 60.0, 50), NoFundamental);
    const auto partial = sampled(20e3, 0.105, [](double t) { return std::sin(2.0 * kPi * 60.0 * t); });
    CHECK_THROWS_AS(amplitude_spectrum(partial, 20e3, 60.0), DomainError);
    const auto fine = sampled(20e3, 0.1, [](double t) { return std::sin(2.0 * kPi * 60.0 * t); });
    CHECK_THROWS_AS(thd(fine, 20e3, 60.0, 200), DomainError);
}
