#pragma once

#include <span>
#include <string>
#include <string_view>

namespace aclink {

/// Output stage: a stiff DC source, or a capacitor feeding a resistive load.
enum class OutputModel { source, capacitor };

/// Frame in which the active-damping high-pass filter runs.
enum class DampingFrame { synchronous, stationary };

/// Physical constants of the converter plus simulator settings. Field names
/// double as configuration keys; SI base units throughout.
///
/// Fields left at 0 marked "auto" are filled in by resolve_defaults().
struct ConverterParams {
    // grid and rating
    double v_grid_ll_rms = 80.0;
    double f_grid = 60.0;
    double i_rated = 3.6;  ///< per-phase RMS
    double v_out_min = 50.0;
    double v_out_max = 150.0;

    // power stage
    double L_m = 425e-6;
    double C_link = 100e-9;  ///< total effective link capacitance
    double L_f = 1.6e-3;
    double C_f = 40e-6;
    double r_s = 0.1;
    double v_link_peak = 0.0;  ///< auto: 1.3 * max(sqrt(2) * v_ll, output voltage)

    // control
    double k_damp = 3e-4;
    double f_hpf = 3000.0;
    double K_p = 0.1;
    double K_i = 800.0;
    double K_p_v = 0.04;  ///< outer voltage loop
    double K_i_v = 0.8;
    double f_control = 20e3;
    double pll_bandwidth = 20.0;
    double pll_damping = 0.707;
    double i_cmd_limit = 0.0;  ///< auto: 2 * sqrt(2) * i_rated, current-controller output clamp
    DampingFrame damping_frame = DampingFrame::synchronous;

    // output stage
    OutputModel output_model = OutputModel::source;
    double v_out_dc = 120.0;  ///< stiff source voltage
    double C_out = 470e-6;
    double R_load = 72.0;
    double v_out_init = 50.0;  ///< initial capacitor voltage

    // integrator and sequencer
    double dt = 100e-9;
    double eps_zvs = 0.0;     ///< auto: 1% of v_link_peak
    double eps_energy = 0.0;  ///< auto: 0.1% of the peak link energy
    double max_cycle_duration = 2e-3;
    double degenerate_ratio = 1e-3;  ///< |i_x| below this fraction of max|i| counts as zero
    double min_pair_voltage = 0.0;   ///< pairs below this line-line voltage are skipped for the cycle

    double grid_phase_amplitude() const;  ///< line-neutral peak
    double grid_omega() const;
    double filter_resonance() const;  ///< Hz
    double omega_hpf() const;
    double output_voltage_nominal() const;
    double peak_link_energy() const;
    int control_divider() const;  ///< integration steps per control period
};

/// Rated converter values with the simulator defaults, derived fields resolved.
ConverterParams table_one();

/// Fill every "auto" field. Idempotent.
ConverterParams resolve_defaults(ConverterParams p);

/// Throws ConfigError on violated invariants. Expects resolved params.
void validate(const ConverterParams& p);

/// Names of every numeric field, in declaration order.
std::span<const std::string_view> numeric_param_names();

/// Set a field from its textual value. Throws ConfigError on unknown keys or
/// malformed values.
void set_param(ConverterParams& p, std::string_view key, std::string_view value);

/// Read a numeric field by name. Throws ConfigError on unknown keys.
double get_param(const ConverterParams& p, std::string_view key);

bool is_param_key(std::string_view key);

std::string to_string(OutputModel m);
std::string to_string(DampingFrame f);

}  // namespace aclink
