#pragma once

// Scenario runner: composes grid, power stage, sequencer and control into a
// closed-loop simulation and reduces the result to a run report.

#include <optional>
#include <string>
#include <vector>

#include "aclink/circuit.hpp"
#include "aclink/control.hpp"
#include "aclink/params.hpp"
#include "aclink/sequencer.hpp"

namespace aclink {

enum class Fidelity { switch_level, averaged };
enum class ReferenceKind { current, voltage };
/// Frequency-domain presets produce Bode files instead of a simulation.
enum class ScenarioKind { simulation, bode_filter, bode_loop };

struct ScheduleEntry {
    double t = 0.0;
    double i_d = 0.0;  ///< A, current reference mode
    double i_q = 0.0;
    double v_out = 0.0;  ///< V, voltage reference mode
};

struct Scenario {
    std::string name = "custom";
    ScenarioKind kind = ScenarioKind::simulation;
    ConverterParams params;  ///< unresolved; "auto" fields are filled at run time
    Fidelity fidelity = Fidelity::switch_level;
    bool damping = true;
    ReferenceKind reference = ReferenceKind::current;
    std::vector<ScheduleEntry> schedule{{0.0, 0.0, 2.0, 0.0}};
    double duration = 0.2;
    int decimation = 20;  ///< waveform samples per control period, 0 disables the waveform
    double thd_cycles = 6.0;
    double pf_cycles = 10.0;
    int thd_harmonics = 50;
};

/// Throws ConfigError when the scenario or its resolved params are invalid.
void validate(const Scenario& sc);

struct WaveformSample {
    double t = 0.0;
    ThreePhase v{};  ///< grid voltage
    ThreePhase i{};  ///< grid current
    double v_link = 0.0;
    double i_link = 0.0;
    double v_out = 0.0;
    int mode = 0;
    double i_d = 0.0;
    double i_q = 0.0;
};

/// Values captured at every control update.
struct ControlSample {
    double t = 0.0;
    ThreePhase v{};
    ThreePhase i{};
    double v_out = 0.0;
    ControlTelemetry telemetry;
};

struct StepSettling {
    double t_step = 0.0;
    std::string quantity;  ///< "iq" or "vout"
    double initial = 0.0;
    double target = 0.0;
    double final_value = 0.0;  ///< mean over the last part of the interval
    double settling_time = 0.0;  ///< NaN if it never settles inside the interval
};

struct SequencerSummary {
    int cycles = 0;
    double mean_cycle_frequency = 0.0;  ///< Hz
    double worst_zvs = 0.0;
    double worst_charge_error = 0.0;
    double worst_peak_error = 0.0;
    double worst_energy_drift = 0.0;
    int skipped_pairs = 0;
    int skipped_outputs = 0;
    int degenerate_cycles = 0;
    bool mode_order_ok = true;
};

struct RunReport {
    std::string name;
    ThreePhase thd{};  ///< percent
    ThreePhase harmonic_thd{};
    double dominant_distortion_frequency = 0.0;  ///< Hz, phase a
    double power_factor = 0.0;
    double grid_power = 0.0;  ///< W, mean over the PF window
    double id_iq_ratio = 0.0;
    double mean_id = 0.0;
    double mean_iq = 0.0;
    double grid_current_rms = 0.0;  ///< largest phase, over the PF window
    double final_v_out = 0.0;
    double peak_iq_star = 0.0;
    double peak_zero_sequence = 0.0;  ///< A, largest |(ia + ib + ic) / 3| of the grid currents
    SequencerSummary sequencer;
    std::vector<std::string> warnings;
    std::vector<StepSettling> settling;
    double runtime_seconds = 0.0;
};

struct RunOptions {
    bool keep_waveform = true;
    bool record_events = false;
};

struct RunResult {
    RunReport report;
    std::vector<WaveformSample> waveform;
    std::vector<ControlSample> control;
    std::vector<CycleDiagnostics> cycles;
    std::vector<ModeTransition> transitions;
    std::vector<SwitchEvent> events;
};

/// Run a simulation scenario. Propagates SimulationFault subclasses with the
/// time of failure. Identical scenarios give identical results.
RunResult run(const Scenario& sc, const RunOptions& options = {});

/// Reduce a finished run to its report. Exposed for re-analysis of stored
/// control traces.
RunReport summarize(const Scenario& sc, const ConverterParams& resolved, const RunResult& result);

/// Cyclic M1..M6 order over recorded transitions.
bool mode_order_is_cyclic(const std::vector<ModeTransition>& transitions);

/// Settling of x(t) to |x - target| <= band * |target| after t_step, using
/// a moving average of `window` seconds. NaN if never settled before t_end.
double settling_time(const std::vector<double>& t, const std::vector<double>& x, double t_step, double t_end,
                     double target, double band, double window);

struct SweepRow {
    double value = 0.0;
    std::optional<RunReport> report;
    std::string error;
};

/// Independent runs with one parameter replaced; rows are sorted by value.
/// "xi" sets k_damp through damping_gain(). Failures are reported per row.
std::vector<SweepRow> sweep(const Scenario& base, const std::string& param, std::vector<double> values,
                            unsigned workers = 0);

/// Time-domain response of the discrete damped inner loop in the stationary
/// frame: a balanced sinusoidal converter command of frequency f drives the
/// averaged power stage with the grid shorted, the high-pass term of the
/// sampled grid current is subtracted at the control rate, and the ratio of
/// the grid-current fundamental to the command amplitude is returned.
std::vector<double> damped_loop_response(const ConverterParams& params, const std::vector<double>& frequencies);

}  // namespace aclink
