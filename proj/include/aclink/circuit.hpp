#pragma once

// Piecewise-linear model of the power stage: grid source, series L_f/r_s, star
// filter capacitors C_f (star point tied to the grid neutral), reverse-blocking
// bridge, resonant link (L_m parallel C_link) and the output stage.
//
// Each conduction topology is a linear ODE x' = A x + B u advanced with the
// trapezoidal rule. Bias changes, natural commutations and caller-supplied
// guards are localized inside a step by regula falsi on re-integrated partial
// steps; the step stops at the first such event.

#include <Eigen/Dense>
#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aclink/frames.hpp"
#include "aclink/params.hpp"

namespace aclink {

enum class Mode : std::uint8_t { m1 = 1, m2, m3, m4, m5, m6 };

constexpr Mode next_mode(Mode m) { return m == Mode::m6 ? Mode::m1 : static_cast<Mode>(static_cast<int>(m) + 1); }
constexpr int mode_number(Mode m) { return static_cast<int>(m); }

/// Q_1x connect phase x to the positive link rail, Q_2x the negative rail to
/// phase x; `output` connects the link to the output stage.
enum class SwitchId : std::uint8_t { q1a, q1b, q1c, q2a, q2b, q2c, output };

inline constexpr int kSwitchCount = 7;
using GateSet = std::bitset<kSwitchCount>;

constexpr SwitchId top_switch(int phase) { return static_cast<SwitchId>(phase); }
constexpr SwitchId bottom_switch(int phase) { return static_cast<SwitchId>(3 + phase); }
constexpr std::size_t bit(SwitchId id) { return static_cast<std::size_t>(id); }
constexpr bool is_input_switch(SwitchId id) { return id != SwitchId::output; }
const char* switch_name(SwitchId id);

enum class Edge : std::uint8_t { on, off };

struct SwitchEvent {
    double t = 0.0;
    SwitchId id = SwitchId::q1a;
    Edge edge = Edge::on;
    double v_across = 0.0;  ///< blocking voltage seen at the localized instant
    double i_through = 0.0;
    Mode mode_at_event = Mode::m1;
};

/// Which devices currently carry current. Bit k of `top` (`bottom`) is set
/// while Q1k (Q2k) conducts. Input current flows only when both sides are
/// non-empty; two switches on one side conduct together when their phase
/// voltages coincide.
struct Conduction {
    std::uint8_t top = 0;
    std::uint8_t bottom = 0;
    bool output = false;

    bool input() const { return top != 0 && bottom != 0; }
    bool conducts(SwitchId id) const;
    int key() const { return ((top | (bottom << 3)) << 1) | (output ? 1 : 0); }
    friend bool operator==(const Conduction&, const Conduction&) = default;
};

inline constexpr int kTopologyCount = 128;

inline constexpr int kStateSize = 12;
using StateVector = Eigen::Matrix<double, kStateSize, 1>;

namespace state_index {
inline constexpr int v_cf = 0;
inline constexpr int i_lf = 3;
inline constexpr int v_link = 6;
inline constexpr int i_link = 7;
inline constexpr int v_out = 8;
inline constexpr int charge = 9;
}  // namespace state_index

struct CircuitState {
    double t = 0.0;
    StateVector x = StateVector::Zero();
    Mode mode = Mode::m6;
    GateSet gates;
    Conduction conduction;

    ThreePhase v_cf() const { return segment(state_index::v_cf); }
    ThreePhase i_lf() const { return segment(state_index::i_lf); }
    double v_link() const { return x[state_index::v_link]; }
    double i_link() const { return x[state_index::i_link]; }
    double v_out() const { return x[state_index::v_out]; }
    /// Switch charge accumulated per phase since the sequencer last reset it.
    ThreePhase cycle_charge() const { return segment(state_index::charge); }

    void set_v_cf(const ThreePhase& v) { set_segment(state_index::v_cf, v); }
    void set_i_lf(const ThreePhase& i) { set_segment(state_index::i_lf, i); }
    void reset_cycle_charge() { set_segment(state_index::charge, {}); }

private:
    ThreePhase segment(int i) const { return {x[i], x[i + 1], x[i + 2]}; }
    void set_segment(int i, const ThreePhase& v) {
        x[i] = v.a;
        x[i + 1] = v.b;
        x[i + 2] = v.c;
    }
};

/// Balanced grid e_x(t) = A cos(omega t + phase - phi_x).
struct GridSource {
    double amplitude = 0.0;  ///< line-neutral peak, V
    double omega = 0.0;
    double phase = 0.0;

    static GridSource from_params(const ConverterParams& p) { return {p.grid_phase_amplitude(), p.grid_omega(), 0.0}; }
    ThreePhase voltage(double t) const { return balanced(amplitude, omega * t + phase); }
};

/// Scalar condition watched during integration. An event fires when
/// direction * (value - level) goes from negative to non-negative.
struct Guard {
    enum class Kind : std::uint8_t { charge, link_energy, link_current };
    Kind kind = Kind::charge;
    int phase = 0;
    double level = 0.0;
    int direction = 1;

    double value(const StateVector& x, const ConverterParams& p) const;
};

struct StepResult {
    CircuitState state;
    std::vector<SwitchEvent> events;
    int guard_hit = -1;  ///< index of the guard that stopped the step, -1 if none
    bool interrupted = false;  ///< stopped before the requested dt
};

double link_energy(const CircuitState& s, const ConverterParams& p);

/// 1 / (2 pi sqrt(L C)). Throws DomainError for non-positive arguments.
double resonance_frequency(double L, double C);

/// Sinusoidal steady state of the passive CL filter with no converter current.
ThreePhase no_load_capacitor_voltage(const ConverterParams& p, const GridSource& grid, double t);
ThreePhase no_load_inductor_current(const ConverterParams& p, const GridSource& grid, double t);

/// Filter at no-load steady state, link charged to v_link_peak with zero current.
CircuitState initial_state(const ConverterParams& p, const GridSource& grid);

class PowerStage {
public:
    /// `params` must already be resolved and validated.
    PowerStage(const ConverterParams& params, GridSource grid);

    /// Apply `gates` at the current instant (forced turn-offs, then any turn-on
    /// the new gating forward-biases). If that switched anything the step
    /// returns at once with those events; otherwise it integrates for up to `dt`.
    /// `inject` is an ideal converter current per phase drawn from the filter
    /// capacitor nodes; it is zero for switch-level operation.
    /// Throws NonFiniteState if the state leaves the finite range.
    StepResult step(const CircuitState& state, const GateSet& gates, double dt, std::span<const Guard> guards = {},
                    const ThreePhase& inject = {}) const;

    /// Current drawn by the bridge from each phase node.
    ThreePhase switch_currents(const CircuitState& s) const;
    /// Current delivered into the output stage.
    double output_current(const CircuitState& s) const;
    /// Current entering the positive link rail from the input bridge.
    double input_current(const CircuitState& s) const;

    const ConverterParams& params() const { return params_; }
    const GridSource& grid() const { return grid_; }

private:
    using Matrix = Eigen::Matrix<double, kStateSize, kStateSize>;
    using InputMatrix = Eigen::Matrix<double, kStateSize, 6>;
    using Row = Eigen::Matrix<double, 1, kStateSize>;
    using Input = Eigen::Matrix<double, 6, 1>;

    struct Topology {
        Matrix A;
        std::array<Row, 3> phase_current;  ///< current drawn by the bridge from each phase node
        Row input_current;                 ///< current into the positive rail
        Row output_current;                ///< output current as a function of the state
    };
    struct Discrete {
        Matrix M;
        InputMatrix N;
    };

    const Topology& topology(const Conduction& c) const;
    Discrete discretize(const Topology& topo, double h) const;
    StateVector advance(const StateVector& x, double t, double h, const Conduction& c, const Input& inject) const;
    void apply_gates(CircuitState& s, const GateSet& gates, const Input& inject,
                     std::vector<SwitchEvent>& events) const;
    /// Choose the input conduction set consistent with gating, bias and
    /// current direction; record the edges relative to the present set.
    void resolve_input(CircuitState& s, const Input& inject, std::vector<SwitchEvent>& events) const;
    void resolve_output(CircuitState& s, std::vector<SwitchEvent>& events) const;
    StateVector derivative(const StateVector& x, double t, const Conduction& c, const Input& inject) const;

    ConverterParams params_;
    GridSource grid_;
    InputMatrix B_;
    mutable std::array<std::optional<Topology>, kTopologyCount> topologies_;
    mutable std::array<std::optional<Discrete>, kTopologyCount> nominal_;
};

}  // namespace aclink
