#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "aclink/analysis.hpp"
#include "aclink/errors.hpp"

using namespace aclink;
using Catch::Approx;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

double peak_db(const TransferFunction& tf, double f_lo, double f_hi) {
    double best = -1e300;
    for (const BodePoint& pt : bode(tf, f_lo, f_hi, 20001)) best = std::max(best, pt.magnitude_db);
    return best;
}

// Roots from the companion matrix, independent of the library's solver.
std::vector<cd> companion_roots(const std::vector<double>& ascending) {
    const int n = static_cast<int>(ascending.size()) - 1;
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) c(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) c(i, n - 1) = -ascending[static_cast<std::size_t>(i)] / ascending.back();
    Eigen::EigenSolver<Eigen::MatrixXd> es(c);
    std::vector<cd> out;
    for (int i = 0; i < n; ++i) out.push_back(es.eigenvalues()[i]);
    return out;
}

}  // namespace

TEST_CASE("filter plant DC gain is one") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int n = 0; n < 50; ++n) {
        const TransferFunction g = gp_tf(u(rng) * 1e-3, u(rng) * 1e-5, u(rng) * 0.1);
        CHECK(std::abs(g(cd(0.0, 0.0))) == Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("filter plant resonance peak") {
    const TransferFunction g = gp_tf(1.6e-3, 40e-6, 0.1);
    const std::vector<BodePoint> b = bode(g, 10.0, 10e3, 601);
    std::size_t imax = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i].magnitude_db > b[imax].magnitude_db) imax = i;
    }
    const double spacing = b[imax].f * (std::pow(1000.0, 1.0 / 600.0) - 1.0);
    CHECK(std::abs(b[imax].f - 629.0) <= spacing + 0.5);
    CHECK(peak_db(g, 600.0, 660.0) == Approx(36.0).margin(0.2));
}

TEST_CASE("lossless filter flags the pole on the axis") {
    const TransferFunction g = gp_tf(1.6e-3, 40e-6, 0.0);
    const double f_res = 1.0 / (2.0 * kPi * std::sqrt(1.6e-3 * 40e-6));
    const std::vector<BodePoint> b = bode(g, f_res, 2.0 * f_res, 2);
    CHECK(b[0].pole_on_axis);
    CHECK_FALSE(b[1].pole_on_axis);
}

TEST_CASE("invalid plant and sweep arguments") {
    CHECK_THROWS_AS(gp_tf(0.0, 40e-6, 0.1), DomainError);
    CHECK_THROWS_AS(gp_tf(1e-3, 40e-6, -1.0), DomainError);
    CHECK_THROWS_AS(hpf_tf(1.0, 0.0), DomainError);
    const TransferFunction g = gp_tf(1.6e-3, 40e-6, 0.1);
    CHECK_THROWS_AS(bode(g, 0.0, 10.0, 5), DomainError);
    CHECK_THROWS_AS(bode(g, 10.0, 1.0, 5), DomainError);
    CHECK_THROWS_AS(bode(g, 1.0, 10.0, 1), DomainError);
}

TEST_CASE("high-pass damping filter") {
    const double wc = 2.0 * kPi * 3000.0;
    const TransferFunction h = hpf_tf(3e-4, wc);
    CHECK(std::abs(h(cd(0.0, 0.0))) == 0.0);
    CHECK(std::abs(h.frequency_response(1e8)) == Approx(3e-4 * wc).epsilon(1e-6));
    const cd at_corner = h.frequency_response(3000.0);
    CHECK(std::abs(at_corner) == Approx(3e-4 * wc / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(std::arg(at_corner) * 180.0 / kPi == Approx(45.0).margin(1e-9));
}

TEST_CASE("damping gain and ratio") {
    CHECK(damping_gain(0.5, 1.6e-3, 40e-6) == Approx(2.53e-4).epsilon(1e-3));
    CHECK(damping_gain(0.593, 1.6e-3, 40e-6) == Approx(3e-4).margin(1e-6));
    CHECK(damping_ratio(3e-4, 1.6e-3, 40e-6) == Approx(0.593).margin(1e-3));
    CHECK(damping_gain(1.0, 1.6e-3, 40e-6) == Approx(2.0 * damping_gain(0.5, 1.6e-3, 40e-6)));
    CHECK_THROWS_AS(damping_gain(-0.1, 1.6e-3, 40e-6), DomainError);
    CHECK_THROWS_AS(damping_gain(0.5, 0.0, 40e-6), DomainError);
}

TEST_CASE("closed inner loop") {
    const TransferFunction gp = gp_tf(1.6e-3, 40e-6, 0.1);
    const double wc = 2.0 * kPi * 3000.0;

    SECTION("zero gain returns the plant") {
        const TransferFunction g = closed_inner_loop(gp, hpf_tf(0.0, wc));
        CHECK(g.numerator().isApprox(gp.numerator()));
        CHECK(g.denominator().isApprox(gp.denominator()));
    }

    SECTION("design gain suppresses the resonance") {
        const TransferFunction g = closed_inner_loop(gp, hpf_tf(3e-4, wc));
        CHECK(peak_db(gp, 10.0, 10e3) - peak_db(g, 10.0, 10e3) > 20.0);
        for (const cd& p : g.poles()) CHECK(p.real() < 0.0);

        // characteristic cubic (L C s^2 + r C s + 1)(1 + s / wc) + k s, expanded by hand
        const double L = 1.6e-3;
        const double C = 40e-6;
        const double r = 0.1;
        const double k = 3e-4;
        const std::vector<double> den{1.0, r * C + 1.0 / wc + k, L * C + r * C / wc, L * C / wc};
        const std::vector<cd> oracle = companion_roots(den);
        std::vector<cd> lib = g.poles();
        REQUIRE(lib.size() == oracle.size());
        for (const cd& p : oracle) {
            CHECK(p.real() < 0.0);
            double nearest = 1e300;
            for (const cd& q : lib) nearest = std::min(nearest, std::abs(p - q));
            CHECK(nearest <= 1e-6 * std::abs(p));
        }
    }

    SECTION("matches gp / (1 + gp hpf) pointwise") {
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> u(0.2, 5.0);
        std::uniform_real_distribution<double> lf(0.0, 5.0);
        for (int n = 0; n < 50; ++n) {
            const TransferFunction g1 = gp_tf(1.6e-3 * u(rng), 40e-6 * u(rng), 0.1 * u(rng));
            const TransferFunction h1 = hpf_tf(3e-4 * u(rng), wc * u(rng));
            const TransferFunction closed = closed_inner_loop(g1, h1);
            const double f = std::pow(10.0, lf(rng));
            const cd a = g1.frequency_response(f);
            const cd b = h1.frequency_response(f);
            const cd expect = a / (1.0 + a * b);
            CHECK(std::abs(closed.frequency_response(f) - expect) <= 1e-9 * std::abs(expect));
        }
    }

    SECTION("identically zero denominator is degenerate") {
        CHECK_THROWS_AS(closed_inner_loop(TransferFunction::constant(1.0), TransferFunction::constant(-1.0)),
                        DegenerateSystem);
    }
}

TEST_CASE("rational functions normalize and cancel") {
    using V = TransferFunction::Vector;
    const TransferFunction t((V(2) << 2.0, 2.0).finished(), (V(3) << 4.0, 6.0, 2.0).finished());
    CHECK(t.denominator()[0] == 1.0);
    const TransferFunction r = t.reduced();
    REQUIRE(r.denominator().size() == 2);
    CHECK(r.numerator().size() == 1);
    CHECK(std::abs(r.frequency_response(50.0) - t.frequency_response(50.0)) < 1e-12);
    CHECK(std::abs(r(cd(-2.0, 0.0))) > 1e6);
    CHECK_THROWS_AS(TransferFunction(V::Ones(1), V::Zero(2)), DegenerateSystem);
}

TEST_CASE("outer loop has integral action and the bandwidth rule holds") {
    const ConverterParams p = resolve_defaults(table_one());
    const LoopDesign d = design(p);
    CHECK(std::abs(d.loop.frequency_response(1e-4)) > 1e4);
    CHECK(std::abs(d.gi_closed.frequency_response(1e-3)) == Approx(1.0).epsilon(1e-6));
    const BandwidthCheck b = bandwidth_check(p);
    CHECK(b.loop_crossover > 0.0);
    CHECK(b.inner_crossover > 0.0);
    CHECK(b.satisfies_rule);
    CHECK(b.loop_crossover <= b.inner_crossover / 5.0);
    CHECK(b.phase_margin > 45.0);
    // the crossover really is a unit-magnitude point
    CHECK(std::abs(d.loop.frequency_response(b.loop_crossover)) == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("Bode sweeps") {
    SECTION("constant gain") {
        for (const BodePoint& pt : bode(TransferFunction::constant(1.0), 1.0, 1e4, 50)) {
            CHECK(pt.magnitude_db == Approx(0.0).margin(1e-12));
            CHECK(pt.phase_deg == Approx(0.0).margin(1e-12));
        }
    }
    SECTION("integrator slope") {
        using V = TransferFunction::Vector;
        const TransferFunction integ((V(1) << 1.0).finished(), (V(2) << 0.0, 1.0).finished());
        const std::vector<BodePoint> b = bode(integ, 1.0, 1e4, 5);
        for (std::size_t i = 1; i < b.size(); ++i) {
            CHECK(b[i].magnitude_db - b[i - 1].magnitude_db == Approx(-20.0).margin(0.1));
            CHECK(b[i].phase_deg == Approx(-90.0).margin(1e-9));
        }
    }
    SECTION("unwrapped phase is continuous through the resonance") {
        const std::vector<BodePoint> b = bode(gp_tf(1.6e-3, 40e-6, 0.1), 10.0, 10e3, 2001);
        for (std::size_t i = 1; i < b.size(); ++i) {
            CHECK(b[i].phase_deg <= b[i - 1].phase_deg + 1e-9);
            CHECK(std::abs(b[i].phase_deg - b[i - 1].phase_deg) < 90.0);
        }
        CHECK(b.back().phase_deg == Approx(-180.0).margin(1.0));
    }
}

TEST_CASE("predicted settling time") {
    CHECK(predicted_settling_time(100.0, 2.0, 4.0, 0.05) == Approx(std::log(10.0) / (2.0 * kPi * 100.0)));
    CHECK(predicted_settling_time(100.0, 0.1, 4.0, 0.05) == 0.0);
    CHECK_THROWS_AS(predicted_settling_time(0.0, 1.0, 1.0), DomainError);
}
