#pragma once

// Synchronous-frame current control with active damping, and the outer
// output-voltage loop that sets the q-axis reference.

#include <limits>

#include "aclink/frames.hpp"
#include "aclink/params.hpp"

namespace aclink {

struct PiState {
    double integrator = 0.0;
    double min = -std::numeric_limits<double>::infinity();
    double max = std::numeric_limits<double>::infinity();
};

struct PiResult {
    double output = 0.0;
    PiState state;
    bool saturated = false;
};

/// output = K_p e + integrator, then integrator += K_i e dt. When the output
/// saturates the integrator is pulled back so that K_p e + integrator sits on
/// the limit.
PiResult pi_step(double error, const PiState& state, double K_p, double K_i, double dt);

/// Transposed direct-form state of a first-order section.
struct HpfState {
    double memory = 0.0;
};

struct HpfResult {
    double output = 0.0;
    HpfState state;
};

/// Bilinear discretization of k s / (1 + s / omega_c).
HpfResult hpf_step(double x, const HpfState& state, double k, double omega_c, double dt);
/// State in which a constant input `x` produces zero output.
HpfState hpf_at_rest(double x, double k, double omega_c, double dt);

struct CurrentControllerState {
    PiState d;
    PiState q;
};

struct CurrentControllerResult {
    DqPair command;
    CurrentControllerState state;
    bool saturated_d = false;
    bool saturated_q = false;
};

/// Independent PI per axis on (i_ref_dq - i_dq).
CurrentControllerResult current_controller_step(const DqPair& i_dq, const DqPair& i_ref_dq,
                                                const CurrentControllerState& state, double K_p, double K_i,
                                                double dt);

struct DampingState {
    HpfState d;
    HpfState q;
};

struct DampingResult {
    DqPair command;
    DqPair damping;  ///< the subtracted high-pass term
    DampingState state;
};

/// ctrl_out - HPF(i_lf_dq) per axis. k = 0 returns ctrl_out unchanged.
DampingResult active_damping_step(const DqPair& i_lf_dq, const DqPair& ctrl_out, const DampingState& state, double k,
                                  double omega_c, double dt);

struct OutputControllerResult {
    double iq_ref = 0.0;
    PiState state;
    bool saturated = false;
};

/// PI on (v_out_ref - v_out) producing I_q*, clamped to +-sqrt(2) i_rated.
OutputControllerResult output_controller_step(double v_out, double v_out_ref, const PiState& state, double K_p,
                                              double K_i, double i_rated, double dt);

/// Per-control-step record.
struct ControlTelemetry {
    double t = 0.0;
    double theta = 0.0;
    DqPair i_dq;
    DqPair i_ref_dq;
    DqPair damping;
    DqPair command;
    double iq_star = 0.0;
    bool saturated_d = false;
    bool saturated_q = false;
    bool saturated_outer = false;
};

/// The full control stack: PLL, outer loop, current PI, active damping and
/// the dq -> abc handoff to the switch controller.
class VoltageOrientedControl {
public:
    VoltageOrientedControl(const ConverterParams& params, bool damping_enabled);

    void set_current_reference(const DqPair& i_ref_dq);
    void set_voltage_reference(double v_out_ref);
    bool voltage_mode() const { return voltage_mode_; }

    /// Lock the PLL to a known angle (skips the acquisition transient).
    void preset_pll(double theta);

    ControlTelemetry update(double t, const ThreePhase& v_grid, const ThreePhase& i_grid, double v_out, double dt);

    /// Converter current reference at time t, extrapolating the synchronous
    /// angle from the last update.
    ThreePhase converter_reference(double t) const;

    const PllState& pll() const { return pll_; }

private:
    ConverterParams params_;
    bool damping_enabled_;
    PllGains pll_gains_;
    PllState pll_;
    CurrentControllerState current_;
    DampingState damping_dq_;
    HpfState damping_abc_[3];
    bool damping_primed_ = false;
    PiState outer_;
    DqPair i_ref_dq_;
    double v_out_ref_ = 0.0;
    bool voltage_mode_ = false;

    double t_update_ = 0.0;
    double theta_update_ = 0.0;
    double omega_update_ = 0.0;
    DqPair command_dq_;     ///< current-controller output before damping
    DqPair damping_dq_term_;
    ThreePhase damping_abc_term_{};
};

}  // namespace aclink
