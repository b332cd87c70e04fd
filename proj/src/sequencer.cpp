#include "aclink/sequencer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "aclink/errors.hpp"

namespace aclink {

GateSet ConductionPlan::gates() const {
    GateSet g;
    auto gate_phase = [&](int phase) {
        if (phase < 0) return;
        if (side[phase] == SwitchSide::top) g.set(bit(top_switch(phase)));
        if (side[phase] == SwitchSide::bottom) g.set(bit(bottom_switch(phase)));
    };
    if (pair_count() > 0) {
        gate_phase(shared);
        gate_phase(minority[0]);
        gate_phase(minority[1]);
    }
    return g;
}

namespace {

/// Voltage the link must fall to before the pair (shared, minority) conducts.
double plan_pair_voltage(const ConductionPlan& plan, int minority, const ThreePhase& v_cf) {
    return plan.side[plan.shared] == SwitchSide::top ? v_cf[plan.shared] - v_cf[minority]
                                                     : v_cf[minority] - v_cf[plan.shared];
}

ConductionPlan make_plan(const ThreePhase& i_ref, const ThreePhase& v_cf, double zero_ratio, bool allow_degenerate) {
    const double largest = std::max({std::abs(i_ref.a), std::abs(i_ref.b), std::abs(i_ref.c)});
    if (!(largest > 1e-12)) throw AllZeroReference("all three current references are zero");

    ConductionPlan plan;
    int shared = 0;
    for (int k = 0; k < 3; ++k) {
        if (std::abs(i_ref[k]) > std::abs(i_ref[shared])) shared = k;
    }
    plan.shared = shared;

    std::array<int, 2> others{};
    int n = 0;
    for (int k = 0; k < 3; ++k) {
        if (k == shared) continue;
        if (std::abs(i_ref[k]) <= zero_ratio * largest) {
            if (!allow_degenerate) throw DegenerateReference("one current reference is zero");
            continue;
        }
        others[static_cast<std::size_t>(n++)] = k;
    }
    for (int k = 0; k < 3; ++k) {
        if (std::abs(i_ref[k]) > zero_ratio * largest) {
            plan.side[k] = i_ref[k] > 0.0 ? SwitchSide::top : SwitchSide::bottom;
        }
    }
    if (n == 0) throw AllZeroReference("only one non-zero current reference");
    if (n == 1) {
        plan.minority = {others[0], -1};
        return plan;
    }
    const double v0 = plan_pair_voltage(plan, others[0], v_cf);
    const double v1 = plan_pair_voltage(plan, others[1], v_cf);
    plan.minority = v0 >= v1 ? std::array<int, 2>{others[0], others[1]} : std::array<int, 2>{others[1], others[0]};
    return plan;
}

}  // namespace

ConductionPlan select_conduction_set(const ThreePhase& i_ref, const ThreePhase& v_cf, double zero_ratio) {
    return make_plan(i_ref, v_cf, zero_ratio, false);
}

ThreePhase charge_targets(const ThreePhase& i_ref, double t_cycle) { return t_cycle * i_ref; }

double estimate_cycle_duration(const ConverterParams& p, const ThreePhase& i_ref, const ThreePhase& v_cf) {
    const double power = std::max(0.0, v_cf.a * i_ref.a + v_cf.b * i_ref.b + v_cf.c * i_ref.c);
    const double v_in = 1.5 * p.grid_phase_amplitude();
    const double v_out = p.output_model == OutputModel::source ? p.v_out_dc : std::max(p.v_out_init, 1.0);
    const double t_res = std::numbers::pi * std::sqrt(p.L_m * p.C_link);
    const double e0 = p.peak_link_energy();
    double t = 2.0 * t_res;
    for (int iter = 0; iter < 50; ++iter) {
        const double i_peak = std::sqrt(2.0 * (e0 + power * t) / p.L_m);
        t = t_res + p.L_m * i_peak * (1.0 / v_in + 1.0 / v_out);
    }
    return t;
}

Sequencer::Sequencer(const ConverterParams& params) : params_(params) {}

void Sequencer::enter(Mode m, const CircuitState& s) {
    if (record_transitions_) transitions_.push_back({s.t, mode_, m});
    mode_ = m;
}

void Sequencer::track_energy(const CircuitState& s, bool leaving) {
    const double e = link_energy(s, params_);
    if (!leaving) {
        energy_at_entry_ = e;
        return;
    }
    if (energy_at_entry_ > 0.0) {
        current_.energy_drift = std::max(current_.energy_drift, std::abs(e - energy_at_entry_) / energy_at_entry_);
    }
}

void Sequencer::set_charge_guard(int phase) {
    if (phase < 0) return;
    const double target = targets_[phase];
    guards_[n_guards_++] = Guard{Guard::Kind::charge, phase, target, target >= 0.0 ? 1 : -1};
}

void Sequencer::set_energy_guard() {
    clear_guards();
    guards_[n_guards_++] =
        Guard{Guard::Kind::link_energy, 0, params_.peak_link_energy() + params_.eps_energy, -1};
}

void Sequencer::set_peak_guard() {
    clear_guards();
    guards_[n_guards_++] = Guard{Guard::Kind::link_current, 0, 0.0, 1};
}

GateCommand Sequencer::start(CircuitState& state, const ThreePhase& i_ref) {
    mode_ = Mode::m6;
    cycles_.clear();
    transitions_.clear();
    event_log_.clear();
    last_duration_ = 0.0;
    begin_cycle(state, i_ref);
    state.mode = mode_;
    return {gates_, mode_};
}

void Sequencer::begin_cycle(CircuitState& s, const ThreePhase& i_ref) {
    t_cycle_estimate_ = last_duration_ > 0.0 ? last_duration_ : estimate_cycle_duration(params_, i_ref, s.v_cf());
    s.reset_cycle_charge();
    cycle_start_ = s.t;
    in_cycle_ = true;

    current_ = CycleDiagnostics{};
    current_.index = static_cast<int>(cycles_.size());
    current_.t_start = s.t;
    current_.t_cycle_estimate = t_cycle_estimate_;

    plan_ = ConductionPlan{};
    try {
        plan_ = make_plan(i_ref, s.v_cf(), params_.degenerate_ratio, true);
        current_.degenerate = plan_.pair_count() == 1;
    } catch (const AllZeroReference&) {
        current_.degenerate = true;
    }

    // pairs the falling link voltage cannot usefully reach are skipped
    if (plan_.pair_count() > 0) {
        std::array<int, 2> kept{-1, -1};
        int n = 0;
        for (int m : plan_.minority) {
            if (m < 0) continue;
            if (plan_pair_voltage(plan_, m, s.v_cf()) < params_.min_pair_voltage) {
                ++current_.skipped_pairs;
                continue;
            }
            kept[static_cast<std::size_t>(n++)] = m;
        }
        plan_.minority = kept;
    }

    targets_ = charge_targets(i_ref, t_cycle_estimate_);
    current_.charge_target = targets_;
    active_minority_ = -1;
    pending_minority_ = -1;

    enter(Mode::m1, s);
    clear_guards();
    if (plan_.pair_count() == 0) {
        gates_.reset();
        enter(Mode::m2, s);
        enter(Mode::m3, s);
        enter_m4(s);
        return;
    }
    gates_ = plan_.gates();
    set_charge_guard(plan_.minority[0]);
    set_charge_guard(plan_.minority[1]);
}

void Sequencer::enter_m2(const CircuitState& s) {
    enter(Mode::m2, s);
    track_energy(s, false);
    clear_guards();
    set_charge_guard(pending_minority_);
}

void Sequencer::enter_m4(const CircuitState& s) {
    enter(Mode::m4, s);
    track_energy(s, false);
    clear_guards();
    for (int k = 0; k < 6; ++k) gates_.reset(static_cast<std::size_t>(k));
    gates_.set(bit(SwitchId::output));
}

double Sequencer::link_swing(const CircuitState& s) const {
    return std::sqrt(s.v_link() * s.v_link() + params_.L_m / params_.C_link * s.i_link() * s.i_link());
}

void Sequencer::enter_m6(const CircuitState& s) {
    gates_.reset(bit(SwitchId::output));
    enter(Mode::m6, s);
    track_energy(s, false);
    set_peak_guard();
}

void Sequencer::finish_cycle(const CircuitState& s) {
    track_energy(s, true);
    current_.duration = s.t - cycle_start_;
    current_.charge = s.cycle_charge();
    const double scale = std::sqrt(2.0) * params_.i_rated * current_.duration;
    for (int k = 0; k < 3; ++k) {
        current_.charge_error[k] = std::abs(current_.charge[k] - current_.charge_target[k]) / scale;
    }
    current_.realized_peak = s.v_link();
    current_.peak_error = std::abs(s.v_link() - params_.v_link_peak) / params_.v_link_peak;
    cycles_.push_back(current_);
    last_duration_ = current_.duration;
    in_cycle_ = false;
}

void Sequencer::check_timeout(double t) const {
    if (in_cycle_ && t - cycle_start_ > params_.max_cycle_duration) {
        std::ostringstream msg;
        msg << "sequencer guard not reached in mode M" << mode_number(mode_) << " within "
            << params_.max_cycle_duration << " s (cycle started at t = " << cycle_start_ << " s)";
        throw GuardTimeout(msg.str(), t);
    }
}

GateCommand Sequencer::step(CircuitState& s, const ThreePhase& i_ref, std::span<const SwitchEvent> events,
                            int guard_hit) {
    check_timeout(s.t);

    bool output_on = false;
    bool output_off = false;
    for (const SwitchEvent& e : events) {
        if (record_events_) event_log_.push_back(e);
        if (is_input_switch(e.id)) {
            current_.worst_zvs = std::max(current_.worst_zvs, std::abs(e.v_across));
        } else if (e.edge == Edge::on) {
            output_on = true;
        } else {
            output_off = true;
        }
    }
    const int hit_phase = guard_hit >= 0 ? guards_[static_cast<std::size_t>(guard_hit)].phase : -1;
    const auto conducts = [&](int phase) {
        if (phase < 0) return false;
        const SwitchId id = plan_.side[phase] == SwitchSide::top ? top_switch(phase) : bottom_switch(phase);
        return s.conduction.conducts(id);
    };

    switch (mode_) {
        case Mode::m1: {
            for (int m : plan_.minority) {
                if (conducts(m)) active_minority_ = m;
            }
            const bool ended = active_minority_ >= 0 && !s.conduction.input();
            if (guard_hit >= 0 || ended) {
                const int done = guard_hit >= 0 ? hit_phase : active_minority_;
                const int other = plan_.minority[0] == done ? plan_.minority[1] : plan_.minority[0];
                if (plan_.side[done] == SwitchSide::top) gates_.reset(bit(top_switch(done)));
                if (plan_.side[done] == SwitchSide::bottom) gates_.reset(bit(bottom_switch(done)));
                active_minority_ = done;
                pending_minority_ = other;
                enter_m2(s);
                if (other < 0) {
                    track_energy(s, true);
                    enter(Mode::m3, s);
                    enter_m4(s);
                }
            }
            break;
        }
        case Mode::m2:
            // the completed minority's gate is removed on the next circuit step
            if (conducts(pending_minority_) && !conducts(active_minority_)) {
                track_energy(s, true);
                enter(Mode::m3, s);
                active_minority_ = pending_minority_;
            }
            break;
        case Mode::m3:
            if (guard_hit >= 0 || !s.conduction.input()) enter_m4(s);
            break;
        case Mode::m4:
            if (!s.conduction.output && !s.conduction.input() && link_swing(s) < s.v_out()) {
                // the free resonance cannot forward-bias the output switch
                track_energy(s, true);
                enter(Mode::m5, s);
                enter_m6(s);
                ++current_.skipped_outputs;
            } else if (output_on || s.conduction.output) {
                track_energy(s, true);
                enter(Mode::m5, s);
                set_energy_guard();
                if (link_energy(s, params_) <= guards_[0].level) enter_m6(s);
            }
            break;
        case Mode::m5:
            if (guard_hit >= 0 || output_off || !s.conduction.output) enter_m6(s);
            break;
        case Mode::m6:
            if (guard_hit >= 0) {
                finish_cycle(s);
                begin_cycle(s, i_ref);
            }
            break;
    }
    s.mode = mode_;
    return {gates_, mode_};
}

}  // namespace aclink
