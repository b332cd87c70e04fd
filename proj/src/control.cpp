#include "aclink/control.hpp"

#include <algorithm>
#include <cmath>

namespace aclink {

PiResult pi_step(double error, const PiState& state, double K_p, double K_i, double dt) {
    PiResult r;
    r.state = state;
    const double unclamped = K_p * error + state.integrator;
    r.output = std::clamp(unclamped, state.min, state.max);
    r.saturated = r.output != unclamped;

    // back-calculation: pull the integrator back so the unclamped output sits
    // on the limit, and never let it leave the output range itself
    const double raw = state.integrator + K_i * error * dt;
    double integrator = std::clamp(raw, state.min - K_p * error, state.max - K_p * error);
    integrator = std::clamp(integrator, state.min, state.max);
    r.state.integrator = integrator;
    r.saturated = r.saturated || integrator != raw;
    return r;
}

HpfResult hpf_step(double x, const HpfState& state, double k, double omega_c, double dt) {
    const double K = 2.0 / dt;
    const double b0 = k * omega_c * K / (K + omega_c);
    const double a1 = (omega_c - K) / (K + omega_c);
    HpfResult r;
    r.output = b0 * x + state.memory;
    r.state.memory = -b0 * x - a1 * r.output;
    return r;
}

HpfState hpf_at_rest(double x, double k, double omega_c, double dt) {
    const double K = 2.0 / dt;
    return {-k * omega_c * K / (K + omega_c) * x};
}

CurrentControllerResult current_controller_step(const DqPair& i_dq, const DqPair& i_ref_dq,
                                                const CurrentControllerState& state, double K_p, double K_i,
                                                double dt) {
    const PiResult d = pi_step(i_ref_dq.d - i_dq.d, state.d, K_p, K_i, dt);
    const PiResult q = pi_step(i_ref_dq.q - i_dq.q, state.q, K_p, K_i, dt);
    return {{d.output, q.output}, {d.state, q.state}, d.saturated, q.saturated};
}

DampingResult active_damping_step(const DqPair& i_lf_dq, const DqPair& ctrl_out, const DampingState& state, double k,
                                  double omega_c, double dt) {
    DampingResult r;
    if (k == 0.0) {
        r.command = ctrl_out;
        r.state = state;
        return r;
    }
    const HpfResult d = hpf_step(i_lf_dq.d, state.d, k, omega_c, dt);
    const HpfResult q = hpf_step(i_lf_dq.q, state.q, k, omega_c, dt);
    r.damping = {d.output, q.output};
    r.command = ctrl_out - r.damping;
    r.state = {d.state, q.state};
    return r;
}

OutputControllerResult output_controller_step(double v_out, double v_out_ref, const PiState& state, double K_p,
                                              double K_i, double i_rated, double dt) {
    PiState clamped = state;
    clamped.max = std::sqrt(2.0) * i_rated;
    clamped.min = -clamped.max;
    const PiResult r = pi_step(v_out_ref - v_out, clamped, K_p, K_i, dt);
    return {r.output, r.state, r.saturated};
}

VoltageOrientedControl::VoltageOrientedControl(const ConverterParams& params, bool damping_enabled)
    : params_(params),
      damping_enabled_(damping_enabled && params.k_damp > 0.0),
      pll_gains_(PllGains::from_bandwidth(params.f_grid, params.pll_bandwidth, params.pll_damping)) {
    current_.d.min = current_.q.min = -params.i_cmd_limit;
    current_.d.max = current_.q.max = params.i_cmd_limit;
    omega_update_ = params.grid_omega();
}

void VoltageOrientedControl::set_current_reference(const DqPair& i_ref_dq) {
    i_ref_dq_ = i_ref_dq;
    voltage_mode_ = false;
}

void VoltageOrientedControl::set_voltage_reference(double v_out_ref) {
    v_out_ref_ = v_out_ref;
    i_ref_dq_.d = 0.0;
    voltage_mode_ = true;
}

void VoltageOrientedControl::preset_pll(double theta) {
    pll_.theta = wrap_angle(theta);
    pll_.omega = pll_gains_.nominal_omega;
    pll_.integrator = 0.0;
}

ControlTelemetry VoltageOrientedControl::update(double t, const ThreePhase& v_grid, const ThreePhase& i_grid,
                                                double v_out, double dt) {
    ControlTelemetry tm;
    tm.t = t;
    tm.theta = pll_.theta;
    tm.i_dq = abc_to_dq(i_grid, pll_.theta);

    if (voltage_mode_) {
        const OutputControllerResult outer =
            output_controller_step(v_out, v_out_ref_, outer_, params_.K_p_v, params_.K_i_v, params_.i_rated, dt);
        outer_ = outer.state;
        i_ref_dq_.q = outer.iq_ref;
        tm.saturated_outer = outer.saturated;
    }
    tm.i_ref_dq = i_ref_dq_;
    tm.iq_star = i_ref_dq_.q;

    const CurrentControllerResult cc =
        current_controller_step(tm.i_dq, i_ref_dq_, current_, params_.K_p, params_.K_i, dt);
    current_ = cc.state;
    tm.saturated_d = cc.saturated_d;
    tm.saturated_q = cc.saturated_q;

    command_dq_ = cc.command;
    tm.command = cc.command;
    if (damping_enabled_) {
        // the filter starts in steady state, so the damping filter does too
        const double k = params_.k_damp;
        const double wc = params_.omega_hpf();
        if (!damping_primed_) {
            damping_dq_ = {hpf_at_rest(tm.i_dq.d, k, wc, dt), hpf_at_rest(tm.i_dq.q, k, wc, dt)};
            for (int j = 0; j < 3; ++j) damping_abc_[j] = hpf_at_rest(i_grid[j], k, wc, dt);
            damping_primed_ = true;
        }
        if (params_.damping_frame == DampingFrame::synchronous) {
            const DampingResult dr = active_damping_step(tm.i_dq, cc.command, damping_dq_, k, wc, dt);
            damping_dq_ = dr.state;
            damping_dq_term_ = dr.damping;
            tm.command = dr.command;
            tm.damping = dr.damping;
        } else {
            ThreePhase out{};
            for (int j = 0; j < 3; ++j) {
                const HpfResult h = hpf_step(i_grid[j], damping_abc_[j], k, wc, dt);
                damping_abc_[j] = h.state;
                out[j] = h.output;
            }
            damping_abc_term_ = out;
            tm.damping = abc_to_dq(out, pll_.theta);
        }
    }

    t_update_ = t;
    theta_update_ = pll_.theta;
    pll_ = pll_step(v_grid, pll_, dt, pll_gains_);
    omega_update_ = pll_.omega;
    return tm;
}

ThreePhase VoltageOrientedControl::converter_reference(double t) const {
    const double tau = t - t_update_;
    const double theta = theta_update_ + omega_update_ * tau;
    if (!damping_enabled_) return dq_to_abc(command_dq_, theta);
    if (params_.damping_frame == DampingFrame::synchronous) {
        return dq_to_abc(command_dq_ - damping_dq_term_, theta);
    }
    return dq_to_abc(command_dq_, theta) - damping_abc_term_;
}

}  // namespace aclink
