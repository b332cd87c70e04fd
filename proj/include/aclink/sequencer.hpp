#pragma once

// Six-mode switch controller. Each link cycle starts at the positive link
// voltage peak:
//
//   M1  gates the selected switch of every phase; the pair with the highest
//       line-line voltage starts conducting when the falling link voltage
//       reaches it, and its minority phase is turned off once its cycle
//       charge meets its target.
//   M2  partial resonance down to the second pair voltage.
//   M3  second pair conducts until the remaining charge targets are met.
//   M4  partial resonance through zero; the output switch is armed.
//   M5  output conducts until the link energy falls to the residual level.
//   M6  partial resonance back up to the positive peak.
//
// "Average current equals its reference" is implemented as charge
// accounting: the target of each phase is i_ref * t_cycle, where t_cycle is
// the duration of the previous cycle.

#include <array>
#include <span>
#include <vector>

#include "aclink/circuit.hpp"
#include "aclink/frames.hpp"
#include "aclink/params.hpp"

namespace aclink {

enum class SwitchSide : std::uint8_t { none, top, bottom };

struct ConductionPlan {
    std::array<SwitchSide, 3> side{SwitchSide::none, SwitchSide::none, SwitchSide::none};
    int shared = -1;                  ///< phase conducting in both M1 and M3
    std::array<int, 2> minority{-1, -1};  ///< [0] pairs with `shared` first, [1] second; -1 when absent

    GateSet gates() const;
    int pair_count() const { return (minority[0] >= 0 ? 1 : 0) + (minority[1] >= 0 ? 1 : 0); }
};

/// Top switch for positive (into the link) references, bottom for negative;
/// the shared phase is the one with the largest |reference|; the first pair is
/// the one with the larger line-line voltage, which the falling link voltage
/// reaches first. Throws DegenerateReference if one reference is zero and
/// AllZeroReference if all are.
ConductionPlan select_conduction_set(const ThreePhase& i_ref, const ThreePhase& v_cf, double zero_ratio = 1e-3);

/// Per-phase charge targets i_ref * t_cycle.
ThreePhase charge_targets(const ThreePhase& i_ref, double t_cycle);

/// Initial cycle-duration estimate from link resonance and energy throughput.
double estimate_cycle_duration(const ConverterParams& p, const ThreePhase& i_ref, const ThreePhase& v_cf);

struct CycleDiagnostics {
    int index = 0;
    double t_start = 0.0;
    double duration = 0.0;
    double t_cycle_estimate = 0.0;
    ThreePhase charge_target{};
    ThreePhase charge{};
    ThreePhase charge_error{};   ///< |charge - target| / (sqrt(2) i_rated duration)
    double realized_peak = 0.0;  ///< link voltage at the closing M6 -> M1 transition
    double peak_error = 0.0;     ///< |realized_peak - v_link_peak| / v_link_peak
    double worst_zvs = 0.0;      ///< largest |v_across| over input-switch edges
    double energy_drift = 0.0;   ///< largest relative link-energy change over M2, M4, M6
    int skipped_pairs = 0;
    int skipped_outputs = 0;  ///< M5 collapsed: the link could not reach -v_out
    bool degenerate = false;
};

struct ModeTransition {
    double t = 0.0;
    Mode from = Mode::m6;
    Mode to = Mode::m1;
};

struct GateCommand {
    GateSet gates;
    Mode mode = Mode::m1;
};

class Sequencer {
public:
    explicit Sequencer(const ConverterParams& params);

    /// Begin the first link cycle at the current instant; the link is
    /// expected to sit at its positive peak with zero current.
    GateCommand start(CircuitState& state, const ThreePhase& i_ref);

    /// React to the events and guard hit of the last circuit step. Resets the
    /// state's cycle-charge accumulators when a new cycle begins. Throws
    /// GuardTimeout when the current cycle exceeds max_cycle_duration.
    GateCommand step(CircuitState& state, const ThreePhase& i_ref, std::span<const SwitchEvent> events, int guard_hit);

    /// Throws GuardTimeout if the running cycle is older than the limit.
    void check_timeout(double t) const;

    std::span<const Guard> guards() const { return {guards_.data(), n_guards_}; }
    Mode mode() const { return mode_; }
    GateSet gates() const { return gates_; }
    const ConductionPlan& plan() const { return plan_; }
    const ThreePhase& targets() const { return targets_; }

    const std::vector<CycleDiagnostics>& cycles() const { return cycles_; }
    const std::vector<ModeTransition>& transitions() const { return transitions_; }
    const std::vector<SwitchEvent>& event_log() const { return event_log_; }
    void set_record_events(bool on) { record_events_ = on; }
    void set_record_transitions(bool on) { record_transitions_ = on; }

private:
    void begin_cycle(CircuitState& s, const ThreePhase& i_ref);
    void finish_cycle(const CircuitState& s);
    void enter(Mode m, const CircuitState& s);
    void enter_m2(const CircuitState& s);
    void enter_m4(const CircuitState& s);
    void enter_m6(const CircuitState& s);
    /// Peak link voltage of the free L_m/C_link resonance from the present state.
    double link_swing(const CircuitState& s) const;
    void set_charge_guard(int phase);
    void set_energy_guard();
    void set_peak_guard();
    void clear_guards() { n_guards_ = 0; }
    void track_energy(const CircuitState& s, bool leaving);

    ConverterParams params_;
    Mode mode_ = Mode::m6;
    GateSet gates_;
    ConductionPlan plan_;
    ThreePhase targets_{};
    std::array<Guard, 2> guards_{};
    std::size_t n_guards_ = 0;
    int active_minority_ = -1;
    int pending_minority_ = -1;

    double cycle_start_ = 0.0;
    double last_duration_ = 0.0;
    double t_cycle_estimate_ = 0.0;
    double energy_at_entry_ = 0.0;
    CycleDiagnostics current_;
    bool in_cycle_ = false;

    std::vector<CycleDiagnostics> cycles_;
    std::vector<ModeTransition> transitions_;
    std::vector<SwitchEvent> event_log_;
    bool record_events_ = false;
    bool record_transitions_ = true;
};

}  // namespace aclink
