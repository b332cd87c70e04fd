#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "aclink/circuit.hpp"
#include "aclink/errors.hpp"
#include "aclink/sequencer.hpp"
#include "aclink/simulation.hpp"

using namespace aclink;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

struct OpenLoopRun {
    std::vector<CycleDiagnostics> cycles;
    std::vector<ModeTransition> transitions;
    std::vector<SwitchEvent> events;
    int conduction_violations = 0;
    double m4_peak_current = 0.0;
    double m4_v_at_peak = 0.0;
};

// Sequencer and power stage driven by a fixed unity-PF reference, no control loop.
OpenLoopRun drive(ConverterParams p, double amplitude, double duration) {
    p = resolve_defaults(p);
    const GridSource grid = GridSource::from_params(p);
    const PowerStage stage(p, grid);
    CircuitState s = initial_state(p, grid);
    Sequencer seq(p);
    seq.set_record_events(true);
    auto ref = [&](double t) { return balanced(amplitude, p.grid_omega() * t); };

    OpenLoopRun out;
    GateSet gates = seq.start(s, ref(s.t)).gates;
    while (s.t < duration) {
        const Mode before = seq.mode();
        const StepResult r = stage.step(s, gates, p.dt, seq.guards());
        s = r.state;
        gates = seq.step(s, ref(s.t), r.events, r.guard_hit).gates;
        if (seq.mode() == before && r.events.empty() && r.guard_hit < 0) {
            const bool idle = before == Mode::m2 || before == Mode::m4 || before == Mode::m6;
            if (idle && (s.conduction.input() || s.conduction.output)) ++out.conduction_violations;
            if (before == Mode::m4 && std::abs(s.i_link()) > out.m4_peak_current) {
                out.m4_peak_current = std::abs(s.i_link());
                out.m4_v_at_peak = s.v_link();
            }
        }
    }
    out.cycles = seq.cycles();
    out.transitions = seq.transitions();
    out.events = seq.event_log();
    return out;
}

}  // namespace

TEST_CASE("conduction set for a positive-dominant reference") {
    const ConductionPlan plan = select_conduction_set({1.0, -0.5, -0.5}, {100.0, 20.0, -50.0});
    CHECK(plan.shared == 0);
    CHECK(plan.side[0] == SwitchSide::top);
    CHECK(plan.side[1] == SwitchSide::bottom);
    CHECK(plan.side[2] == SwitchSide::bottom);
    // V_ac = 150 V exceeds V_ab = 80 V, so the a-c pair is reached first
    CHECK(plan.minority[0] == 2);
    CHECK(plan.minority[1] == 1);
    const GateSet g = plan.gates();
    CHECK(g[bit(SwitchId::q1a)]);
    CHECK(g[bit(SwitchId::q2b)]);
    CHECK(g[bit(SwitchId::q2c)]);
    CHECK(g.count() == 3);
}

TEST_CASE("negated references flip every switch") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
    for (int n = 0; n < 200; ++n) {
        const double th = u(rng);
        const ThreePhase i = balanced(1.0, th);
        const ThreePhase v = balanced(65.0, th + 0.1);
        if (std::min({std::abs(i.a), std::abs(i.b), std::abs(i.c)}) < 1e-2) continue;
        const ConductionPlan a = select_conduction_set(i, v);
        const ConductionPlan b = select_conduction_set(-i, -v);
        CHECK(a.shared == b.shared);
        CHECK(a.minority == b.minority);
        for (int k = 0; k < 3; ++k) {
            CHECK(a.side[k] != SwitchSide::none);
            CHECK(a.side[k] != b.side[k]);
        }
        // the shared phase is alone on its rail
        for (int k = 0; k < 3; ++k) {
            if (k != a.shared) CHECK(a.side[k] != a.side[a.shared]);
        }
        const ConductionPlan c = select_conduction_set(-i, v);
        CHECK(c.shared == a.shared);
    }
}

TEST_CASE("degenerate references are rejected") {
    CHECK_THROWS_AS(select_conduction_set({1.0, -1.0, 0.0}, {}), DegenerateReference);
    CHECK_THROWS_AS(select_conduction_set({0.0, 0.0, 0.0}, {}), AllZeroReference);
}

TEST_CASE("charge targets") {
    const ThreePhase q = charge_targets({1.0, -0.5, -0.5}, 100e-6);
    CHECK(q.a == Approx(100e-6));
    CHECK(q.b == Approx(-50e-6));
    CHECK(q.c == Approx(-50e-6));

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int n = 0; n < 100; ++n) {
        const ThreePhase i = balanced(u(rng), u(rng));
        const double t = std::abs(u(rng)) * 1e-4;
        CHECK(std::abs(charge_targets(i, t).sum()) < 1e-15);
        const ThreePhase twice = charge_targets(2.0 * i, t);
        const ThreePhase once = charge_targets(i, t);
        CHECK(twice.a == Approx(2.0 * once.a).margin(1e-18));
    }
}

TEST_CASE("cycle duration estimate is physical") {
    const ConverterParams p = resolve_defaults(table_one());
    const double t_res = kPi * std::sqrt(p.L_m * p.C_link);
    const double t = estimate_cycle_duration(p, balanced(2.0, 0.0), balanced(p.grid_phase_amplitude(), 0.0));
    CHECK(t > t_res);
    CHECK(t < p.max_cycle_duration);
    const double t_hi = estimate_cycle_duration(p, balanced(4.0, 0.0), balanced(p.grid_phase_amplitude(), 0.0));
    CHECK(t_hi > t);
}

TEST_CASE("open-loop sequencing keeps its invariants") {
    const ConverterParams p = resolve_defaults(table_one());
    const OpenLoopRun r = drive(table_one(), 2.0, 0.02);
    REQUIRE(r.cycles.size() > 100);
    CHECK(mode_order_is_cyclic(r.transitions));
    CHECK(r.conduction_violations == 0);

    double worst_charge = 0.0;
    double worst_peak = 0.0;
    double worst_energy = 0.0;
    for (const CycleDiagnostics& c : r.cycles) {
        worst_charge = std::max({worst_charge, c.charge_error.a, c.charge_error.b, c.charge_error.c});
        worst_peak = std::max(worst_peak, c.peak_error);
        worst_energy = std::max(worst_energy, c.energy_drift);
        CHECK(c.worst_zvs <= p.eps_zvs);
        CHECK(c.skipped_outputs == 0);
    }
    CHECK(worst_charge < 0.02);
    CHECK(worst_peak < 0.02);
    CHECK(worst_energy < 1e-6);

    for (const SwitchEvent& e : r.events) {
        if (is_input_switch(e.id)) CHECK(std::abs(e.v_across) <= p.eps_zvs);
    }

    // free resonance in M4: the current peaks where the link voltage crosses zero
    // (to the resolution of one step, over which v moves by i dt / C)
    CHECK(r.m4_peak_current > 0.0);
    CHECK(std::abs(r.m4_v_at_peak) <= r.m4_peak_current * p.dt / p.C_link);
}

TEST_CASE("guard timeout carries the fault time") {
    ConverterParams p = table_one();
    p.max_cycle_duration = 1e-6;
    try {
        drive(p, 2.0, 1e-3);
        FAIL("expected a guard timeout");
    } catch (const GuardTimeout& e) {
        CHECK(e.time() > 1e-6);
        CHECK(e.time() < 1e-5);
    }
}

TEST_CASE("mode order check") {
    std::vector<ModeTransition> ok{{0.0, Mode::m6, Mode::m1}, {1.0, Mode::m1, Mode::m2}, {2.0, Mode::m2, Mode::m3}};
    CHECK(mode_order_is_cyclic(ok));
    std::vector<ModeTransition> bad{{0.0, Mode::m6, Mode::m1}, {1.0, Mode::m1, Mode::m3}};
    CHECK_FALSE(mode_order_is_cyclic(bad));
}
