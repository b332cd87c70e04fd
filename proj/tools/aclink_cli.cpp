// aclink: scenario runner and data emitter.
//
//   aclink run <config|preset> [--out DIR]
//   aclink bode <gp|gig|loop|hpf|gi|inner> <config|preset> [--fmin --fmax --points --out]
//   aclink thd <waveform.csv> --f0 60 --n 50 [--column ia] [--cycles K] [--out spectrum.csv]
//   aclink sweep <config|preset> --param k_damp --values 0,1e-4,3e-4 [--workers N] [--out table.csv]
//   aclink show <config|preset>
//
// Exit codes: 0 success, 2 configuration or input error, 3 simulation fault.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "aclink/analysis.hpp"
#include "aclink/config.hpp"
#include "aclink/errors.hpp"
#include "aclink/report_io.hpp"
#include "aclink/simulation.hpp"
#include "aclink/spectrum.hpp"

namespace fs = std::filesystem;
using namespace aclink;

namespace {

Scenario load(const std::string& source) {
    Scenario sc = load_scenario(source);
    apply_environment(sc, process_environment());
    return sc;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    return out;
}

TransferFunction system_tf(const std::string& system, const ConverterParams& p) {
    const LoopDesign d = design(p);
    if (system == "gp") return d.gp;
    if (system == "gig") return d.gig;
    if (system == "loop") return d.loop;
    if (system == "hpf") return d.hpf;
    if (system == "gi") return d.gi;
    if (system == "inner") return d.inner_loop_gain;
    throw ConfigError("unknown system '" + system + "' (gp, gig, loop, hpf, gi, inner)");
}

void write_bode_file(const fs::path& path, const TransferFunction& tf, double f_min, double f_max, int n) {
    std::ofstream out = open_out(path);
    write_bode_csv(out, bode(tf, f_min, f_max, n));
    std::cout << "wrote " << path.string() << '\n';
}

int cmd_run(const std::string& source, const fs::path& dir) {
    const Scenario sc = load(source);
    if (sc.kind != ScenarioKind::simulation) {
        const ConverterParams p = resolve_defaults(sc.params);
        validate(p);
        const LoopDesign d = design(p);
        if (sc.kind == ScenarioKind::bode_filter) {
            write_bode_file(dir / (sc.name + "_gp.csv"), d.gp, 10.0, 10e3, 601);
            write_bode_file(dir / (sc.name + "_gig.csv"), d.gig, 10.0, 10e3, 601);
        } else {
            write_bode_file(dir / (sc.name + "_loop.csv"), d.loop, 1.0, 100e3, 801);
            write_bode_file(dir / (sc.name + "_inner.csv"), d.inner_loop_gain, 1.0, 100e3, 801);
            const BandwidthCheck b = bandwidth_check(p);
            std::cout << "loop_crossover_hz = " << format_double(b.loop_crossover) << '\n'
                      << "inner_crossover_hz = " << format_double(b.inner_crossover) << '\n'
                      << "phase_margin_deg = " << format_double(b.phase_margin) << '\n'
                      << "one_fifth_rule = " << (b.satisfies_rule ? "true" : "false") << '\n';
        }
        return 0;
    }

    const RunResult r = run(sc);
    if (!r.waveform.empty()) {
        std::ofstream out = open_out(dir / (sc.name + "_waveform.csv"));
        write_waveform_csv(out, r.waveform);
    }
    if (!r.cycles.empty()) {
        std::ofstream out = open_out(dir / (sc.name + "_cycles.csv"));
        write_cycles_csv(out, r.cycles);
    }
    const ConverterParams p = resolve_defaults(sc.params);
    const auto n = static_cast<std::size_t>(std::llround(sc.thd_cycles * p.f_control / p.f_grid));
    if (n > 0 && r.control.size() >= n) {
        std::vector<double> ia(n);
        for (std::size_t j = 0; j < n; ++j) ia[j] = r.control[r.control.size() - n + j].i.a;
        try {
            const ThdReport tr = thd_report(ia, p.f_control, p.f_grid, sc.thd_harmonics);
            std::ofstream out = open_out(dir / (sc.name + "_spectrum.csv"));
            write_spectrum_csv(out, tr, sc.thd_harmonics);
        } catch (const NoFundamental&) {
            // null command: nothing to analyse
        }
    }
    for (const std::string& w : r.report.warnings) std::cerr << "warning: " << w << '\n';
    std::ostringstream report;
    write_report(report, r.report);
    std::ofstream out = open_out(dir / (sc.name + "_report.txt"));
    out << report.str();
    std::cout << report.str();
    return 0;
}

int cmd_bode(const std::string& system, const std::string& source, double f_min, double f_max, int n,
             const std::string& out_path) {
    const Scenario sc = load(source);
    const ConverterParams p = resolve_defaults(sc.params);
    validate(p);
    const std::vector<BodePoint> points = bode(system_tf(system, p), f_min, f_max, n);
    if (out_path.empty()) {
        write_bode_csv(std::cout, points);
    } else {
        std::ofstream out = open_out(out_path);
        write_bode_csv(out, points);
    }
    return 0;
}

int cmd_thd(const std::string& file, double f0, int n, const std::string& column, double cycles,
            const std::string& out_path) {
    std::ifstream in(file);
    if (!in) throw FormatError("cannot open '" + file + "'");
    const CsvTable table = read_csv(in);
    const std::vector<double>& t = table.column("t");
    const std::vector<double>& x = table.column(column);
    if (t.size() < 4) throw FormatError(file + ": too few samples");
    const double fs = static_cast<double>(t.size() - 1) / (t.back() - t.front());
    std::size_t count = x.size();
    if (cycles > 0.0) {
        count = static_cast<std::size_t>(std::llround(cycles * fs / f0));
        if (count > x.size()) throw DomainError("record shorter than the requested number of cycles");
    }
    const std::span<const double> window(x.data() + (x.size() - count), count);
    const ThdReport r = thd_report(window, fs, f0, n);
    std::cout << "thd_percent = " << format_double(r.thd_percent) << '\n'
              << "harmonic_thd_percent = " << format_double(r.harmonic_thd_percent) << '\n'
              << "fundamental = " << format_double(r.fundamental) << '\n'
              << "interharmonic_residual = " << format_double(r.interharmonic_residual) << '\n'
              << "dominant_hz = " << format_double(r.dominant_frequency) << '\n';
    for (int h = 2; h <= std::min(n, 15); ++h) {
        std::cout << "h" << h << " = " << format_double(r.harmonics[static_cast<std::size_t>(h)]) << '\n';
    }
    const std::string path = out_path.empty() ? file + ".spectrum.csv" : out_path;
    std::ofstream out = open_out(path);
    write_spectrum_csv(out, r, n);
    std::cout << "wrote " << path << '\n';
    return 0;
}

int cmd_sweep(const std::string& source, const std::string& param, const std::vector<double>& values,
              unsigned workers, const std::string& out_path) {
    const Scenario sc = load(source);
    const std::vector<SweepRow> rows = sweep(sc, param, values, workers);
    if (out_path.empty()) {
        write_sweep_csv(std::cout, param, rows);
    } else {
        std::ofstream out = open_out(out_path);
        write_sweep_csv(out, param, rows);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partial-resonance AC-link rectifier simulator"};
    app.require_subcommand(1);

    std::string source;
    std::string out_dir = "out";
    auto* run_cmd = app.add_subcommand("run", "Run a scenario file or preset");
    run_cmd->add_option("config", source, "scenario file or preset name")->required();
    run_cmd->add_option("--out", out_dir, "output directory");

    std::string system;
    double f_min = 1.0;
    double f_max = 100e3;
    int points = 500;
    std::string out_file;
    auto* bode_cmd = app.add_subcommand("bode", "Bode sweep of a loop transfer function");
    bode_cmd->add_option("system", system, "gp | gig | loop | hpf | gi | inner")->required();
    bode_cmd->add_option("config", source, "scenario file or preset name")->required();
    bode_cmd->add_option("--fmin", f_min, "lowest frequency, Hz");
    bode_cmd->add_option("--fmax", f_max, "highest frequency, Hz");
    bode_cmd->add_option("--points", points, "number of log-spaced points");
    bode_cmd->add_option("--out", out_file, "CSV path (default stdout)");

    std::string wave_file;
    double f0 = 60.0;
    int harmonics = 50;
    std::string column = "ia";
    double cycles = 0.0;
    auto* thd_cmd = app.add_subcommand("thd", "Spectrum and distortion of a waveform column");
    thd_cmd->add_option("file", wave_file, "waveform CSV with a t column")->required();
    thd_cmd->add_option("--f0", f0, "fundamental frequency, Hz");
    thd_cmd->add_option("--n", harmonics, "highest harmonic");
    thd_cmd->add_option("--column", column, "column to analyse");
    thd_cmd->add_option("--cycles", cycles, "analyse only the final K fundamental cycles");
    thd_cmd->add_option("--out", out_file, "spectrum CSV path");

    std::string param;
    std::vector<double> values;
    unsigned workers = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "Repeat a scenario over parameter values");
    sweep_cmd->add_option("config", source, "scenario file or preset name")->required();
    sweep_cmd->add_option("--param", param, "parameter name, or xi for the damping ratio")->required();
    sweep_cmd->add_option("--values", values, "comma-separated values")->delimiter(',');
    sweep_cmd->add_option("--workers", workers, "parallel runs (default: hardware threads)");
    sweep_cmd->add_option("--out", out_file, "CSV path (default stdout)");

    auto* show_cmd = app.add_subcommand("show", "Print a scenario in config form");
    show_cmd->add_option("config", source, "scenario file or preset name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run_cmd) return cmd_run(source, out_dir);
        if (*bode_cmd) return cmd_bode(system, source, f_min, f_max, points, out_file);
        if (*thd_cmd) return cmd_thd(wave_file, f0, harmonics, column, cycles, out_file);
        if (*sweep_cmd) return cmd_sweep(source, param, values, workers, out_file);
        if (*show_cmd) {
            std::cout << to_config(load(source));
            return 0;
        }
    } catch (const SimulationFault& e) {
        std::cerr << "simulation fault at t = " << format_double(e.time()) << " s: " << e.what() << '\n';
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
