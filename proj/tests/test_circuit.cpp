#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "aclink/circuit.hpp"
#include "aclink/errors.hpp"

using namespace aclink;
using Catch::Approx;
namespace si = aclink::state_index;

namespace {

constexpr double kPi = std::numbers::pi;

double filter_energy(const StateVector& x, const ConverterParams& p) {
    double e = 0.0;
    for (int k = 0; k < 3; ++k) {
        e += 0.5 * p.L_f * x[si::i_lf + k] * x[si::i_lf + k];
        e += 0.5 * p.C_f * x[si::v_cf + k] * x[si::v_cf + k];
    }
    return e;
}

GateSet gate(std::initializer_list<SwitchId> ids) {
    GateSet g;
    for (SwitchId id : ids) g.set(bit(id));
    return g;
}

}  // namespace

TEST_CASE("resonance frequencies of the two tanks") {
    CHECK(resonance_frequency(1.6e-3, 40e-6) == Approx(629.0).margin(0.5));
    CHECK(resonance_frequency(425e-6, 100e-9) == Approx(24.41e3).margin(10.0));
    const double f = resonance_frequency(1e-3, 1e-6);
    CHECK(resonance_frequency(4e-3, 1e-6) == Approx(f / 2.0).epsilon(1e-14));
    CHECK_THROWS_AS(resonance_frequency(0.0, 1e-6), DomainError);
    CHECK_THROWS_AS(resonance_frequency(1e-3, -1e-6), DomainError);
}

TEST_CASE("line-line voltages") {
    const ThreePhase v = line_line_voltages(ThreePhase{100.0, -50.0, -50.0});
    CHECK(v.a == 150.0);
    CHECK(v.b == 0.0);
    CHECK(v.c == -150.0);
    CHECK(line_line_voltages(ThreePhase{}).a == 0.0);

    // balanced 80 V line-line RMS set never exceeds the line-line peak
    const double amp = 80.0 * std::sqrt(2.0 / 3.0);
    for (int k = 0; k < 360; ++k) {
        const ThreePhase ll = line_line_voltages(balanced(amp, k * kPi / 180.0));
        const double m = std::max({std::abs(ll.a), std::abs(ll.b), std::abs(ll.c)});
        CHECK(m <= 80.0 * std::sqrt(2.0) + 1e-9);
    }
}

TEST_CASE("link energy") {
    const ConverterParams p = table_one();
    CircuitState s;
    s.x[si::v_link] = 160.0;
    CHECK(link_energy(s, p) == Approx(1.28e-3).epsilon(1e-12));
    s.x[si::v_link] = 0.0;
    s.x[si::i_link] = 2.0;
    CHECK(link_energy(s, p) == Approx(0.5 * 425e-6 * 4.0).epsilon(1e-12));
}

TEST_CASE("free link resonance, quarter period") {
    const ConverterParams p = table_one();
    const PowerStage stage(p, GridSource{});
    CircuitState s;
    s.x[si::v_link] = 100.0;
    const double quarter = 0.25 / resonance_frequency(p.L_m, p.C_link);
    CHECK(quarter == Approx(10.24e-6).epsilon(1e-3));

    const double e0 = link_energy(s, p);
    while (s.t < quarter - 1e-15) {
        const StepResult r = stage.step(s, GateSet{}, std::min(p.dt, quarter - s.t));
        REQUIRE(r.events.empty());
        s = r.state;
        CHECK(std::abs(link_energy(s, p) - e0) <= 1e-9 * e0);
    }
    const double i_peak = 100.0 * std::sqrt(p.C_link / p.L_m);
    CHECK(i_peak == Approx(1.534).epsilon(1e-3));
    CHECK(std::abs(s.v_link()) < 0.01);
    CHECK(std::abs(s.i_link()) == Approx(i_peak).epsilon(1e-4));
}

TEST_CASE("zero state with a dead grid stays zero") {
    const ConverterParams p = table_one();
    const PowerStage stage(p, GridSource{});
    CircuitState s;
    for (int k = 0; k < 1000; ++k) s = stage.step(s, GateSet{}, p.dt).state;
    CHECK(s.x.isZero(0.0));
}

TEST_CASE("filter energy balance per step") {
    const ConverterParams p = table_one();
    const GridSource grid = GridSource::from_params(p);
    const PowerStage stage(p, grid);
    CircuitState s;  // filter starts discharged, so the grid drives a transient
    const ThreePhase inject{0.5, -0.2, -0.3};
    double worst = 0.0;
    for (int k = 0; k < 20000; ++k) {
        const StepResult r = stage.step(s, GateSet{}, p.dt, {}, inject);
        const StateVector& x0 = s.x;
        const StateVector& x1 = r.state.x;
        const ThreePhase e0 = grid.voltage(s.t);
        const ThreePhase e1 = grid.voltage(r.state.t);
        double supplied = 0.0;
        double loss = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double i_mid = 0.5 * (x0[si::i_lf + j] + x1[si::i_lf + j]);
            const double v_mid = 0.5 * (x0[si::v_cf + j] + x1[si::v_cf + j]);
            supplied += 0.5 * (e0[j] + e1[j]) * i_mid - inject[j] * v_mid;
            loss += p.r_s * i_mid * i_mid;
        }
        const double de = filter_energy(x1, p) - filter_energy(x0, p);
        const double budget = p.dt * (supplied - loss);
        const double scale = std::abs(de) + p.dt * (std::abs(supplied) + loss) + 1e-300;
        worst = std::max(worst, std::abs(de - budget) / scale);
        s = r.state;
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("bridge blocks reverse voltage and conducts forward") {
    ConverterParams p = resolve_defaults(table_one());
    const GridSource grid = GridSource::from_params(p);
    const PowerStage stage(p, grid);
    CircuitState s = initial_state(p, grid);
    const GateSet g = gate({SwitchId::q1a, SwitchId::q2b});
    const double tol = 1e-6 * p.v_link_peak;

    bool saw_on = false;
    bool saw_off = false;
    for (int k = 0; k < 400000 && !saw_off; ++k) {
        const StepResult r = stage.step(s, g, p.dt);
        s = r.state;
        const double v_ab = s.v_cf().a - s.v_cf().b;
        if (!s.conduction.input()) {
            CHECK(v_ab - s.v_link() <= tol);
        } else {
            const ThreePhase i = stage.switch_currents(s);
            CHECK(i.a >= -1e-9);
            CHECK(i.b <= 1e-9);
            CHECK(std::abs(i.sum()) < 1e-9);
            CHECK(std::abs(v_ab - s.v_link()) <= tol);
        }
        for (const SwitchEvent& e : r.events) {
            CHECK(std::abs(e.v_across) <= p.eps_zvs);
            if (e.edge == Edge::on) saw_on = true;
            if (e.edge == Edge::off && saw_on) saw_off = true;
        }
    }
    CHECK(saw_on);
    CHECK(saw_off);
}

TEST_CASE("ungated devices never conduct") {
    ConverterParams p = resolve_defaults(table_one());
    const GridSource grid = GridSource::from_params(p);
    const PowerStage stage(p, grid);
    CircuitState s = initial_state(p, grid);
    for (int k = 0; k < 2000; ++k) {
        const StepResult r = stage.step(s, gate({SwitchId::q1a}), p.dt);
        CHECK(r.events.empty());
        s = r.state;
        CHECK_FALSE(s.conduction.input());
    }
}

TEST_CASE("identical inputs give identical trajectories") {
    ConverterParams p = resolve_defaults(table_one());
    const GridSource grid = GridSource::from_params(p);
    const PowerStage a(p, grid);
    const PowerStage b(p, grid);
    CircuitState sa = initial_state(p, grid);
    CircuitState sb = sa;
    const GateSet g = gate({SwitchId::q1a, SwitchId::q2b, SwitchId::q2c});
    for (int k = 0; k < 500; ++k) {
        sa = a.step(sa, g, p.dt).state;
        sb = b.step(sb, g, p.dt).state;
        REQUIRE(sa.t == sb.t);
        REQUIRE((sa.x.array() == sb.x.array()).all());
    }
}

TEST_CASE("non-finite state is reported") {
    const ConverterParams p = table_one();
    const PowerStage stage(p, GridSource{});
    CircuitState s;
    s.x[si::v_link] = std::nan("");
    CHECK_THROWS_AS(stage.step(s, GateSet{}, p.dt), NonFiniteState);
}
