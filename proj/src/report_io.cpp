#include "aclink/report_io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "aclink/errors.hpp"

namespace aclink {

std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, res.ptr};
}

namespace {

std::string row(std::initializer_list<double> values) {
    std::string line;
    bool first = true;
    for (double v : values) {
        if (!first) line += ',';
        line += format_double(v);
        first = false;
    }
    line += '\n';
    return line;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

void write_waveform_csv(std::ostream& os, const std::vector<WaveformSample>& w) {
    os << "t,va,vb,vc,ia,ib,ic,vlink,ilink,vout,mode,id,iq\n";
    for (const WaveformSample& s : w) {
        os << row({s.t, s.v.a, s.v.b, s.v.c, s.i.a, s.i.b, s.i.c, s.v_link, s.i_link, s.v_out,
                   static_cast<double>(s.mode), s.i_d, s.i_q});
    }
}

void write_bode_csv(std::ostream& os, const std::vector<BodePoint>& points) {
    os << "f,magnitude_db,phase_deg,pole_on_axis\n";
    for (const BodePoint& p : points) {
        os << row({p.f, p.magnitude_db, p.phase_deg, p.pole_on_axis ? 1.0 : 0.0});
    }
}

void write_spectrum_csv(std::ostream& os, const ThdReport& report, int n_harmonics) {
    os << "f,amplitude,harmonic\n";
    const Spectrum& s = report.spectrum;
    const std::size_t m = s.fundamental_index;
    const std::size_t last = std::min(s.amplitude.size() - 1, m * static_cast<std::size_t>(n_harmonics) + m / 2);
    for (std::size_t k = 0; k <= last; ++k) {
        const double h = (k % m == 0) ? static_cast<double>(k / m) : 0.0;
        os << row({s.frequency[k], s.amplitude[k], h});
    }
}

void write_cycles_csv(std::ostream& os, const std::vector<CycleDiagnostics>& cycles) {
    os << "index,t_start,duration,t_cycle_estimate,charge_error_a,charge_error_b,charge_error_c,"
          "realized_peak,peak_error,worst_zvs,energy_drift,skipped_pairs,skipped_outputs,degenerate\n";
    for (const CycleDiagnostics& c : cycles) {
        os << row({static_cast<double>(c.index), c.t_start, c.duration, c.t_cycle_estimate, c.charge_error.a,
                   c.charge_error.b, c.charge_error.c, c.realized_peak, c.peak_error, c.worst_zvs, c.energy_drift,
                   static_cast<double>(c.skipped_pairs), static_cast<double>(c.skipped_outputs), c.degenerate ? 1.0 : 0.0});
    }
}

void write_sweep_csv(std::ostream& os, const std::string& param, const std::vector<SweepRow>& rows) {
    os << param
       << ",thd_a,thd_b,thd_c,power_factor,grid_power,id_iq_ratio,worst_zvs,worst_charge_error,"
          "worst_peak_error,error\n";
    for (const SweepRow& r : rows) {
        os << format_double(r.value);
        if (r.report) {
            const RunReport& p = *r.report;
            os << ',' << format_double(p.thd.a) << ',' << format_double(p.thd.b) << ',' << format_double(p.thd.c)
               << ',' << format_double(p.power_factor) << ',' << format_double(p.grid_power) << ','
               << format_double(p.id_iq_ratio) << ',' << format_double(p.sequencer.worst_zvs) << ','
               << format_double(p.sequencer.worst_charge_error) << ',' << format_double(p.sequencer.worst_peak_error)
               << ",\n";
        } else {
            std::string msg = r.error;
            for (char& ch : msg) {
                if (ch == ',' || ch == '\n') ch = ';';
            }
            os << ",,,,,,,,,," << msg << '\n';
        }
    }
}

void write_report(std::ostream& os, const RunReport& r) {
    os << "scenario = " << r.name << '\n'
       << "thd_percent = " << format_double(r.thd.a) << ' ' << format_double(r.thd.b) << ' '
       << format_double(r.thd.c) << '\n'
       << "harmonic_thd_percent = " << format_double(r.harmonic_thd.a) << ' ' << format_double(r.harmonic_thd.b)
       << ' ' << format_double(r.harmonic_thd.c) << '\n'
       << "dominant_distortion_hz = " << format_double(r.dominant_distortion_frequency) << '\n'
       << "power_factor = " << format_double(r.power_factor) << '\n'
       << "grid_power_w = " << format_double(r.grid_power) << '\n'
       << "mean_id = " << format_double(r.mean_id) << '\n'
       << "mean_iq = " << format_double(r.mean_iq) << '\n'
       << "id_iq_ratio = " << format_double(r.id_iq_ratio) << '\n'
       << "grid_current_rms = " << format_double(r.grid_current_rms) << '\n'
       << "final_v_out = " << format_double(r.final_v_out) << '\n'
       << "peak_iq_star = " << format_double(r.peak_iq_star) << '\n'
       << "peak_zero_sequence = " << format_double(r.peak_zero_sequence) << '\n';
    const SequencerSummary& s = r.sequencer;
    os << "cycles = " << s.cycles << '\n'
       << "mean_cycle_hz = " << format_double(s.mean_cycle_frequency) << '\n'
       << "worst_zvs_v = " << format_double(s.worst_zvs) << '\n'
       << "worst_charge_error = " << format_double(s.worst_charge_error) << '\n'
       << "worst_peak_error = " << format_double(s.worst_peak_error) << '\n'
       << "worst_energy_drift = " << format_double(s.worst_energy_drift) << '\n'
       << "skipped_pairs = " << s.skipped_pairs << '\n'
       << "skipped_outputs = " << s.skipped_outputs << '\n'
       << "degenerate_cycles = " << s.degenerate_cycles << '\n'
       << "mode_order_ok = " << (s.mode_order_ok ? "true" : "false") << '\n';
    for (const StepSettling& st : r.settling) {
        os << "settling " << st.quantity << " @ " << format_double(st.t_step)
           << " s: target = " << format_double(st.target) << ", final = " << format_double(st.final_value)
           << ", time = " << format_double(st.settling_time) << " s\n";
    }
    os << "runtime_s = " << format_double(r.runtime_seconds) << '\n';
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return columns[i];
    }
    throw FormatError("no column named '" + name + "'");
}

CsvTable read_csv(std::istream& is) {
    CsvTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        const std::vector<std::string_view> cells = split(view);
        if (table.header.empty()) {
            for (auto c : cells) table.header.emplace_back(c);
            table.columns.resize(cells.size());
            continue;
        }
        if (cells.size() != table.header.size()) {
            std::ostringstream msg;
            msg << "line " << line_no << ": expected " << table.header.size() << " fields, found " << cells.size();
            throw FormatError(msg.str());
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            double v = 0.0;
            const auto res = std::from_chars(cells[i].data(), cells[i].data() + cells[i].size(), v);
            if (res.ec != std::errc() || res.ptr != cells[i].data() + cells[i].size()) {
                std::ostringstream msg;
                msg << "line " << line_no << ": field " << i + 1 << " ('" << cells[i] << "') is not a number";
                throw FormatError(msg.str());
            }
            table.columns[i].push_back(v);
        }
    }
    if (table.header.empty()) throw FormatError("line " + std::to_string(line_no) + ": missing header row");
    return table;
}

}  // namespace aclink
