#include "aclink/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>

#include "aclink/errors.hpp"
#include "aclink/report_io.hpp"

extern char** environ;

namespace aclink {

namespace {

constexpr std::array<std::string_view, 11> kPresets{"fig6",  "fig7",  "fig8",  "fig9",  "fig10", "fig11",
                                                    "fig12", "fig13", "fig14", "zero",  "fig10_averaged"};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double number(std::string_view key, std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError("invalid number '" + std::string(text) + "' for '" + std::string(key) + "'");
    }
    return v;
}

bool boolean(std::string_view key, std::string_view text) {
    text = trim(text);
    if (text == "on" || text == "true" || text == "yes" || text == "1") return true;
    if (text == "off" || text == "false" || text == "no" || text == "0") return false;
    throw ConfigError("invalid boolean '" + std::string(text) + "' for '" + std::string(key) + "'");
}

std::vector<ScheduleEntry> parse_schedule(std::string_view text) {
    std::vector<ScheduleEntry> out;
    while (!trim(text).empty()) {
        const auto semi = text.find(';');
        const std::string_view item = trim(text.substr(0, semi));
        text = semi == std::string_view::npos ? std::string_view{} : text.substr(semi + 1);
        if (item.empty()) continue;
        std::vector<double> values;
        std::size_t pos = 0;
        while (pos < item.size()) {
            const auto start = item.find_first_not_of(" \t,", pos);
            if (start == std::string_view::npos) break;
            const auto end = std::min(item.find_first_of(" \t,", start), item.size());
            values.push_back(number("schedule", item.substr(start, end - start)));
            pos = end;
        }
        ScheduleEntry e;
        if (values.size() == 3) {
            e.t = values[0];
            e.i_d = values[1];
            e.i_q = values[2];
        } else if (values.size() == 2) {
            e.t = values[0];
            e.v_out = values[1];
        } else {
            throw ConfigError("schedule entry '" + std::string(item) + "' needs 't i_d i_q' or 't v_out'");
        }
        out.push_back(e);
    }
    return out;
}

bool is_scenario_key(std::string_view key) {
    static constexpr std::array<std::string_view, 11> keys{"name",     "kind",       "fidelity",   "damping",
                                                           "reference", "duration",  "decimation", "schedule",
                                                           "thd_cycles", "pf_cycles", "thd_harmonics"};
    return std::find(keys.begin(), keys.end(), key) != keys.end();
}

Scenario switch_level(std::string name, bool damping) {
    Scenario sc;
    sc.name = std::move(name);
    sc.damping = damping;
    sc.schedule = {{0.0, 0.0, 2.0, 0.0}};
    sc.duration = 0.2;
    return sc;
}

}  // namespace

std::span<const std::string_view> preset_names() { return kPresets; }

Scenario preset(std::string_view name) {
    if (name == "fig6") {
        Scenario sc;
        sc.name = "fig6";
        sc.kind = ScenarioKind::bode_filter;
        return sc;
    }
    if (name == "fig7") {
        Scenario sc;
        sc.name = "fig7";
        sc.kind = ScenarioKind::bode_loop;
        return sc;
    }
    if (name == "fig8" || name == "fig9") return switch_level(std::string(name), false);
    if (name == "fig10" || name == "fig11" || name == "fig12") return switch_level(std::string(name), true);
    if (name == "fig10_averaged") {
        Scenario sc = switch_level("fig10_averaged", true);
        sc.fidelity = Fidelity::averaged;
        return sc;
    }
    if (name == "fig13") {
        Scenario sc = switch_level("fig13", true);
        sc.schedule = {{0.0, 0.0, 2.0, 0.0}, {0.1, 0.0, 4.0, 0.0}};
        sc.duration = 0.3;
        return sc;
    }
    if (name == "fig14") {
        Scenario sc = switch_level("fig14", true);
        sc.reference = ReferenceKind::voltage;
        sc.params.output_model = OutputModel::capacitor;
        sc.schedule = {{0.0, 0.0, 0.0, 120.0}};
        sc.duration = 0.8;
        return sc;
    }
    if (name == "zero") {
        Scenario sc = switch_level("zero", true);
        sc.fidelity = Fidelity::averaged;
        sc.schedule = {{0.0, 0.0, 0.0, 0.0}};
        sc.duration = 0.1;
        return sc;
    }
    throw ConfigError("unknown preset '" + std::string(name) + "'");
}

void set_scenario_key(Scenario& sc, std::string_view key, std::string_view value) {
    const std::string_view v = trim(value);
    if (key == "preset") {
        sc = preset(v);
    } else if (key == "name") {
        sc.name = std::string(v);
    } else if (key == "kind") {
        if (v == "simulation") {
            sc.kind = ScenarioKind::simulation;
        } else if (v == "bode_filter") {
            sc.kind = ScenarioKind::bode_filter;
        } else if (v == "bode_loop") {
            sc.kind = ScenarioKind::bode_loop;
        } else {
            throw ConfigError("kind must be simulation, bode_filter or bode_loop");
        }
    } else if (key == "fidelity") {
        if (v == "switch" || v == "switch_level") {
            sc.fidelity = Fidelity::switch_level;
        } else if (v == "averaged") {
            sc.fidelity = Fidelity::averaged;
        } else {
            throw ConfigError("fidelity must be 'switch' or 'averaged'");
        }
    } else if (key == "damping") {
        sc.damping = boolean(key, v);
    } else if (key == "reference") {
        if (v == "current") {
            sc.reference = ReferenceKind::current;
        } else if (v == "voltage") {
            sc.reference = ReferenceKind::voltage;
        } else {
            throw ConfigError("reference must be 'current' or 'voltage'");
        }
    } else if (key == "duration") {
        sc.duration = number(key, v);
    } else if (key == "decimation") {
        const double d = number(key, v);
        if (d < 0.0 || d != std::floor(d)) throw ConfigError("decimation must be a non-negative integer");
        sc.decimation = static_cast<int>(d);
    } else if (key == "schedule") {
        sc.schedule = parse_schedule(v);
    } else if (key == "thd_cycles") {
        sc.thd_cycles = number(key, v);
    } else if (key == "pf_cycles") {
        sc.pf_cycles = number(key, v);
    } else if (key == "thd_harmonics") {
        const double n = number(key, v);
        if (n < 1.0 || n != std::floor(n)) throw ConfigError("thd_harmonics must be a positive integer");
        sc.thd_harmonics = static_cast<int>(n);
    } else if (is_param_key(key)) {
        set_param(sc.params, key, v);
    } else {
        throw ConfigError("unknown key '" + std::string(key) + "'");
    }
}

Scenario parse_scenario(std::istream& is, std::string_view origin) {
    Scenario sc;
    std::string line;
    std::string section;
    int line_no = 0;
    bool seen_other_key = false;
    while (std::getline(is, line)) {
        ++line_no;
        auto fail = [&](const std::string& what) {
            std::ostringstream msg;
            msg << origin << ":" << line_no << ": " << what;
            throw ConfigError(msg.str());
        };
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty() || view.front() == ';') continue;
        if (view.front() == '[') {
            if (view.back() != ']') fail("unterminated section header");
            section = std::string(trim(view.substr(1, view.size() - 2)));
            if (section != "scenario" && section != "params") fail("unknown section [" + section + "]");
            continue;
        }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) fail("expected 'key = value'");
        const std::string_view key = trim(view.substr(0, eq));
        const std::string_view value = trim(view.substr(eq + 1));
        if (key.empty()) fail("empty key");
        if (section == "params" && !is_param_key(key)) fail("unknown parameter '" + std::string(key) + "'");
        if (section == "scenario" && !is_scenario_key(key) && key != "preset") {
            fail("unknown scenario key '" + std::string(key) + "'");
        }
        if (key == "preset" && seen_other_key) fail("'preset' must precede every other key");
        seen_other_key = seen_other_key || key != "preset";
        try {
            set_scenario_key(sc, key, value);
        } catch (const ConfigError& e) {
            fail(e.what());
        }
    }
    return sc;
}

Scenario load_scenario(const std::string& path_or_preset) {
    if (std::filesystem::is_regular_file(path_or_preset)) {
        std::ifstream in(path_or_preset);
        if (!in) throw ConfigError("cannot open '" + path_or_preset + "'");
        return parse_scenario(in, path_or_preset);
    }
    for (std::string_view name : kPresets) {
        if (name == path_or_preset) return preset(name);
    }
    throw ConfigError("'" + path_or_preset + "' is neither a readable file nor a preset name");
}

void apply_environment(Scenario& sc, std::span<const std::string> environment) {
    constexpr std::string_view prefix = "ACLINK_";
    for (const std::string& entry : environment) {
        const std::string_view view = entry;
        if (view.substr(0, prefix.size()) != prefix) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) continue;
        const std::string_view key = view.substr(prefix.size(), eq - prefix.size());
        if (key == "preset") throw ConfigError("ACLINK_preset is not supported; name the preset on the command line");
        try {
            set_scenario_key(sc, key, view.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("environment " + std::string(view.substr(0, eq)) + ": " + e.what());
        }
    }
}

std::vector<std::string> process_environment() {
    std::vector<std::string> out;
    for (char** e = environ; e && *e; ++e) out.emplace_back(*e);
    return out;
}

std::string to_config(const Scenario& sc) {
    std::ostringstream os;
    os << "[scenario]\n"
       << "name = " << sc.name << '\n'
       << "kind = "
       << (sc.kind == ScenarioKind::simulation   ? "simulation"
           : sc.kind == ScenarioKind::bode_filter ? "bode_filter"
                                                  : "bode_loop")
       << '\n'
       << "fidelity = " << (sc.fidelity == Fidelity::switch_level ? "switch" : "averaged") << '\n'
       << "damping = " << (sc.damping ? "on" : "off") << '\n'
       << "reference = " << (sc.reference == ReferenceKind::current ? "current" : "voltage") << '\n'
       << "duration = " << format_double(sc.duration) << '\n'
       << "decimation = " << sc.decimation << '\n'
       << "thd_cycles = " << format_double(sc.thd_cycles) << '\n'
       << "pf_cycles = " << format_double(sc.pf_cycles) << '\n'
       << "thd_harmonics = " << sc.thd_harmonics << '\n'
       << "schedule = ";
    for (std::size_t i = 0; i < sc.schedule.size(); ++i) {
        const ScheduleEntry& e = sc.schedule[i];
        if (i > 0) os << "; ";
        if (sc.reference == ReferenceKind::voltage) {
            os << format_double(e.t) << ' ' << format_double(e.v_out);
        } else {
            os << format_double(e.t) << ' ' << format_double(e.i_d) << ' ' << format_double(e.i_q);
        }
    }
    os << "\n\n[params]\n";
    for (std::string_view name : numeric_param_names()) {
        const double v = get_param(sc.params, name);
        os << name << " = " << (v == 0.0 && (name == "v_link_peak" || name == "eps_zvs" || name == "eps_energy" ||
                                             name == "i_cmd_limit")
                                    ? std::string("auto")
                                    : format_double(v))
           << '\n';
    }
    os << "output_model = " << to_string(sc.params.output_model) << '\n'
       << "damping_frame = " << to_string(sc.params.damping_frame) << '\n';
    return os.str();
}

}  // namespace aclink
