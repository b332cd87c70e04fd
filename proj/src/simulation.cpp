#include "aclink/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

#include "aclink/analysis.hpp"
#include "aclink/errors.hpp"
#include "aclink/report_io.hpp"
#include "aclink/spectrum.hpp"

namespace aclink {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Number of control samples spanning `cycles` grid periods, or 0 if that is
/// not a whole number of samples.
std::size_t window_samples(double cycles, double f_control, double f_grid) {
    const double n = cycles * f_control / f_grid;
    const double whole = std::round(n);
    if (whole < 1.0 || std::abs(n - whole) > 1e-6 * whole) return 0;
    return static_cast<std::size_t>(whole);
}

double mean(std::span<const double> x) {
    return x.empty() ? kNaN : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double rms(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return x.empty() ? kNaN : std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace

void validate(const Scenario& sc) {
    if (sc.kind != ScenarioKind::simulation) return;
    if (!(sc.duration > 0.0)) throw ConfigError("scenario duration must be positive");
    if (sc.decimation < 0) throw ConfigError("decimation must be non-negative");
    if (sc.schedule.empty()) throw ConfigError("reference schedule is empty");
    if (sc.schedule.front().t < 0.0) throw ConfigError("schedule times must be non-negative");
    for (std::size_t i = 1; i < sc.schedule.size(); ++i) {
        if (!(sc.schedule[i].t > sc.schedule[i - 1].t)) {
            throw ConfigError("schedule timestamps must be strictly increasing");
        }
    }
    if (sc.schedule.back().t > sc.duration) throw ConfigError("duration is shorter than the last schedule time");
    if (!(sc.thd_cycles > 0.0) || !(sc.pf_cycles > 0.0) || sc.thd_harmonics < 1) {
        throw ConfigError("analysis windows must be positive");
    }
    const ConverterParams p = resolve_defaults(sc.params);
    validate(p);
    if (sc.reference == ReferenceKind::voltage) {
        if (p.output_model != OutputModel::capacitor) {
            throw ConfigError("voltage reference needs output_model = capacitor");
        }
        for (const auto& e : sc.schedule) {
            if (e.v_out < p.v_out_min || e.v_out > p.v_out_max) {
                throw ConfigError("v_out reference outside [v_out_min, v_out_max]");
            }
        }
    }
}

RunResult run(const Scenario& sc, const RunOptions& options) {
    validate(sc);
    if (sc.kind != ScenarioKind::simulation) throw ConfigError("scenario '" + sc.name + "' is not a simulation");
    const auto wall = std::chrono::steady_clock::now();

    const ConverterParams p = resolve_defaults(sc.params);
    const GridSource grid = GridSource::from_params(p);
    const PowerStage stage(p, grid);
    const bool averaged = sc.fidelity == Fidelity::averaged;

    CircuitState s = initial_state(p, grid);
    if (averaged) {
        s.x[state_index::v_link] = 0.0;
        s.x[state_index::i_link] = 0.0;
    }

    VoltageOrientedControl ctl(p, sc.damping);
    ctl.preset_pll(grid.phase);
    Sequencer seq(p);
    seq.set_record_events(options.record_events);

    RunResult out;
    const double Tc = 1.0 / p.f_control;
    const double Ts = sc.decimation > 0 ? Tc / sc.decimation : std::numeric_limits<double>::infinity();
    const double t_end = sc.duration;
    const double tol = 1e-6 * p.dt;
    out.control.reserve(static_cast<std::size_t>(t_end / Tc) + 2);
    if (options.keep_waveform && sc.decimation > 0) out.waveform.reserve(static_cast<std::size_t>(t_end / Ts) + 2);

    std::size_t next_entry = 0;
    long control_index = 0;
    long sample_index = 0;
    double next_control = 0.0;
    double next_sample = 0.0;
    bool started = false;
    GateSet gates;
    ControlTelemetry tm;

    while (s.t < t_end - tol) {
        if (s.t >= next_control - tol) {
            while (next_entry < sc.schedule.size() && sc.schedule[next_entry].t <= s.t + tol) {
                const ScheduleEntry& e = sc.schedule[next_entry++];
                if (sc.reference == ReferenceKind::voltage) {
                    ctl.set_voltage_reference(e.v_out);
                } else {
                    ctl.set_current_reference({e.i_d, e.i_q});
                }
            }
            const ThreePhase e = grid.voltage(s.t);
            tm = ctl.update(s.t, e, s.i_lf(), s.v_out(), Tc);
            out.control.push_back({s.t, e, s.i_lf(), s.v_out(), tm});
            next_control = static_cast<double>(++control_index) * Tc;
            if (!averaged && !started) {
                gates = seq.start(s, ctl.converter_reference(s.t)).gates;
                started = true;
            }
        }
        if (s.t >= next_sample - tol) {
            if (options.keep_waveform) {
                out.waveform.push_back({s.t, grid.voltage(s.t), s.i_lf(), s.v_link(), s.i_link(), s.v_out(),
                                        averaged ? 0 : mode_number(seq.mode()), tm.i_dq.d, tm.i_dq.q});
            }
            next_sample = static_cast<double>(++sample_index) * Ts;
        }

        const double limit = std::min({next_control, next_sample, t_end});
        double h = p.dt;
        bool snap = false;
        if (s.t + p.dt >= limit - tol) {
            snap = true;
            if (std::abs(limit - s.t - p.dt) > tol) h = limit - s.t;
        }

        const ThreePhase inject = averaged ? ctl.converter_reference(s.t) : ThreePhase{};
        StepResult r = stage.step(s, gates, h, averaged ? std::span<const Guard>{} : seq.guards(), inject);
        s = r.state;
        if (snap && !r.interrupted) s.t = limit;
        if (!averaged) gates = seq.step(s, ctl.converter_reference(s.t), r.events, r.guard_hit).gates;
    }

    if (!averaged) {
        out.cycles = seq.cycles();
        out.transitions = seq.transitions();
        out.events = seq.event_log();
    }
    out.report = summarize(sc, p, out);
    out.report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall).count();
    return out;
}

bool mode_order_is_cyclic(const std::vector<ModeTransition>& transitions) {
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        const ModeTransition& tr = transitions[i];
        if (tr.to != next_mode(tr.from)) return false;
        if (i > 0 && tr.from != transitions[i - 1].to) return false;
    }
    return true;
}

double settling_time(const std::vector<double>& t, const std::vector<double>& x, double t_step, double t_end,
                     double target, double band, double window) {
    const auto first = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), t_step) - t.begin());
    const auto last = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), t_end) - t.begin());
    if (first >= last) return kNaN;
    const double tolerance = band * std::abs(target);
    double settled_at = t[first];
    bool inside = false;
    std::size_t lo = first;
    std::size_t hi = first;
    double sum = 0.0;
    for (std::size_t j = first; j < last; ++j) {
        // centred moving average, truncated at the interval ends
        while (hi < last && t[hi] <= t[j] + 0.5 * window) sum += x[hi++];
        while (lo < hi && t[lo] < t[j] - 0.5 * window) sum -= x[lo++];
        const double y = sum / static_cast<double>(hi - lo);
        const bool ok = std::abs(y - target) <= tolerance;
        if (ok && !inside) settled_at = t[j];
        inside = ok;
    }
    return inside ? settled_at - t_step : kNaN;
}

RunReport summarize(const Scenario& sc, const ConverterParams& p, const RunResult& result) {
    RunReport rep;
    rep.name = sc.name;
    const auto& c = result.control;
    const std::size_t n = c.size();

    rep.thd = {kNaN, kNaN, kNaN};
    rep.harmonic_thd = {kNaN, kNaN, kNaN};
    rep.dominant_distortion_frequency = kNaN;
    const std::size_t n_thd = window_samples(sc.thd_cycles, p.f_control, p.f_grid);
    if (n_thd > 0 && n >= n_thd) {
        for (int k = 0; k < 3; ++k) {
            std::vector<double> x(n_thd);
            for (std::size_t j = 0; j < n_thd; ++j) x[j] = c[n - n_thd + j].i[k];
            try {
                const ThdReport tr = thd_report(x, p.f_control, p.f_grid, sc.thd_harmonics);
                rep.thd[k] = tr.thd_percent;
                rep.harmonic_thd[k] = tr.harmonic_thd_percent;
                if (k == 0) rep.dominant_distortion_frequency = tr.dominant_frequency;
            } catch (const std::exception&) {
                // no fundamental (zero command) or unusable window
            }
        }
    }

    const std::size_t n_pf = std::min(n, std::max<std::size_t>(1, static_cast<std::size_t>(std::round(
                                                                          sc.pf_cycles * p.f_control / p.f_grid))));
    if (n_pf > 0 && n > 0) {
        std::vector<double> power(n_pf);
        std::array<std::vector<double>, 3> v;
        std::array<std::vector<double>, 3> i;
        std::vector<double> id(n_pf);
        std::vector<double> iq(n_pf);
        for (int k = 0; k < 3; ++k) {
            v[k].resize(n_pf);
            i[k].resize(n_pf);
        }
        for (std::size_t j = 0; j < n_pf; ++j) {
            const ControlSample& cs = c[n - n_pf + j];
            power[j] = cs.v.a * cs.i.a + cs.v.b * cs.i.b + cs.v.c * cs.i.c;
            for (int k = 0; k < 3; ++k) {
                v[k][j] = cs.v[k];
                i[k][j] = cs.i[k];
            }
            id[j] = cs.telemetry.i_dq.d;
            iq[j] = cs.telemetry.i_dq.q;
        }
        rep.grid_power = mean(power);
        double apparent = 0.0;
        for (int k = 0; k < 3; ++k) {
            apparent += rms(v[k]) * rms(i[k]);
            rep.grid_current_rms = std::max(rep.grid_current_rms, rms(i[k]));
        }
        rep.power_factor = apparent > 0.0 ? std::clamp(std::abs(rep.grid_power) / apparent, 0.0, 1.0) : 0.0;
        rep.mean_id = mean(id);
        rep.mean_iq = mean(iq);
        rep.id_iq_ratio = rep.mean_iq != 0.0 ? std::abs(rep.mean_id) / std::abs(rep.mean_iq)
                                             : std::numeric_limits<double>::infinity();
        rep.final_v_out = c.back().v_out;
    }
    for (const ControlSample& cs : c) {
        rep.peak_iq_star = std::max(rep.peak_iq_star, std::abs(cs.telemetry.iq_star));
        rep.peak_zero_sequence = std::max(rep.peak_zero_sequence, std::abs(zero_sequence(cs.i)));
    }
    // the three-wire transforms drop the zero sequence
    if (rep.peak_zero_sequence > 1e-6 * std::sqrt(2.0) * p.i_rated) {
        rep.warnings.push_back("grid currents carry a zero-sequence component of up to " +
                               format_double(rep.peak_zero_sequence) + " A, discarded by the dq transform");
    }

    SequencerSummary& sq = rep.sequencer;
    sq.cycles = static_cast<int>(result.cycles.size());
    for (const CycleDiagnostics& cy : result.cycles) {
        sq.worst_zvs = std::max(sq.worst_zvs, cy.worst_zvs);
        for (int k = 0; k < 3; ++k) sq.worst_charge_error = std::max(sq.worst_charge_error, cy.charge_error[k]);
        sq.worst_peak_error = std::max(sq.worst_peak_error, cy.peak_error);
        sq.worst_energy_drift = std::max(sq.worst_energy_drift, cy.energy_drift);
        sq.skipped_pairs += cy.skipped_pairs;
        sq.skipped_outputs += cy.skipped_outputs;
        sq.degenerate_cycles += cy.degenerate ? 1 : 0;
    }
    if (!result.cycles.empty()) {
        const CycleDiagnostics& a = result.cycles.front();
        const CycleDiagnostics& b = result.cycles.back();
        const double span = b.t_start + b.duration - a.t_start;
        sq.mean_cycle_frequency = span > 0.0 ? static_cast<double>(result.cycles.size()) / span : 0.0;
    }
    sq.mode_order_ok = mode_order_is_cyclic(result.transitions);

    // settling of the scheduled quantity after each reference change
    std::vector<double> t(n);
    std::vector<double> x(n);
    const bool voltage = sc.reference == ReferenceKind::voltage;
    for (std::size_t j = 0; j < n; ++j) {
        t[j] = c[j].t;
        x[j] = voltage ? c[j].v_out : c[j].telemetry.i_dq.q;
    }
    const double window = 0.5e-3;
    for (std::size_t e = voltage ? 0 : 1; e < sc.schedule.size(); ++e) {
        StepSettling st;
        st.t_step = sc.schedule[e].t;
        st.quantity = voltage ? "vout" : "iq";
        st.target = voltage ? sc.schedule[e].v_out : sc.schedule[e].i_q;
        const double t_stop = e + 1 < sc.schedule.size() ? sc.schedule[e + 1].t : sc.duration;
        const auto j0 = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), st.t_step) - t.begin());
        st.initial = j0 < n ? x[j0] : kNaN;
        const double tail = std::max(0.2 * (t_stop - st.t_step), 1.0 / p.f_grid);
        const auto jt = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), t_stop - tail) - t.begin());
        const auto je = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), t_stop) - t.begin());
        st.final_value = jt < je ? mean(std::span<const double>(x).subspan(jt, je - jt)) : kNaN;
        st.settling_time = st.target != 0.0 ? settling_time(t, x, st.t_step, t_stop, st.target, 0.05, window) : kNaN;
        rep.settling.push_back(st);
    }
    return rep;
}

std::vector<SweepRow> sweep(const Scenario& base, const std::string& param, std::vector<double> values,
                            unsigned workers) {
    if (param != "xi" && !is_param_key(param)) throw ConfigError("unknown sweep parameter '" + param + "'");
    std::stable_sort(values.begin(), values.end());
    std::vector<SweepRow> rows(values.size());
    if (values.empty()) return rows;

    auto one = [&](std::size_t i) {
        SweepRow& row = rows[i];
        row.value = values[i];
        try {
            Scenario sc = base;
            if (param == "xi") {
                sc.params.k_damp = damping_gain(values[i], sc.params.L_f, sc.params.C_f);
            } else {
                char buf[64];
                const auto res = std::to_chars(buf, buf + sizeof buf, values[i]);
                set_param(sc.params, param, std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)));
            }
            sc.name = base.name + "[" + param + "=" + format_double(values[i]) + "]";
            row.report = run(sc, {.keep_waveform = false}).report;
        } catch (const SimulationFault& e) {
            row.error = std::string(e.what()) + " (t = " + format_double(e.time()) + " s)";
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    };

    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(values.size()));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < values.size(); i = next++) one(i);
        });
    }
    for (auto& th : pool) th.join();
    return rows;
}

std::vector<double> damped_loop_response(const ConverterParams& params, const std::vector<double>& frequencies) {
    ConverterParams p = resolve_defaults(params);
    const double Tc = 1.0 / p.f_control;
    const int substeps = 50;
    p.dt = Tc / substeps;
    const GridSource shorted{0.0, p.grid_omega(), 0.0};
    const PowerStage stage(p, shorted);
    // let the slowest closed-loop mode decay by e^-8 before measuring
    double slowest = std::numeric_limits<double>::infinity();
    for (const auto& pole : design(p).gig.poles()) slowest = std::min(slowest, -pole.real());
    const double settle = slowest > 0.0 ? std::max(0.02, 8.0 / slowest) : 0.02;

    std::vector<double> out;
    out.reserve(frequencies.size());
    for (double f : frequencies) {
        if (!(f > 0.0)) throw DomainError("damped_loop_response: frequencies must be positive");
        const double w = 2.0 * std::numbers::pi * f;
        const double period = 1.0 / f;
        const double t_measure = std::ceil(settle / period) * period;
        const double t_stop = t_measure + std::ceil(0.02 / period) * period;

        CircuitState s;
        std::array<HpfState, 3> hpf{};
        ThreePhase damping{};
        std::complex<double> acc(0.0);
        long step = 0;
        while (s.t < t_stop) {
            if (step % substeps == 0) {
                for (int k = 0; k < 3; ++k) {
                    const HpfResult h = hpf_step(s.i_lf()[k], hpf[k], p.k_damp, p.omega_hpf(), Tc);
                    hpf[k] = h.state;
                    damping[k] = h.output;
                }
            }
            const double t_mid = s.t + 0.5 * p.dt;
            const ThreePhase command = balanced(1.0, w * t_mid) - damping;
            const double i_before = s.i_lf().a;
            const double t_before = s.t;
            s = stage.step(s, GateSet{}, p.dt, {}, command).state;
            s.t = static_cast<double>(++step) * p.dt;
            if (t_before >= t_measure - 0.5 * p.dt && s.t <= t_stop + 0.5 * p.dt) {
                // trapezoidal correlation with the excitation
                const double i_mid = 0.5 * (i_before + s.i_lf().a);
                acc += i_mid * std::exp(std::complex<double>(0.0, -w * t_mid)) * p.dt;
            }
        }
        out.push_back(2.0 * std::abs(acc) / (t_stop - t_measure));
    }
    return out;
}

}  // namespace aclink
