#include "aclink/params.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <utility>

#include "aclink/errors.hpp"

namespace aclink {

namespace {

using Field = std::pair<std::string_view, double ConverterParams::*>;

constexpr std::array kNumericFields{
    Field{"v_grid_ll_rms", &ConverterParams::v_grid_ll_rms},
    Field{"f_grid", &ConverterParams::f_grid},
    Field{"i_rated", &ConverterParams::i_rated},
    Field{"v_out_min", &ConverterParams::v_out_min},
    Field{"v_out_max", &ConverterParams::v_out_max},
    Field{"L_m", &ConverterParams::L_m},
    Field{"C_link", &ConverterParams::C_link},
    Field{"L_f", &ConverterParams::L_f},
    Field{"C_f", &ConverterParams::C_f},
    Field{"r_s", &ConverterParams::r_s},
    Field{"v_link_peak", &ConverterParams::v_link_peak},
    Field{"k_damp", &ConverterParams::k_damp},
    Field{"f_hpf", &ConverterParams::f_hpf},
    Field{"K_p", &ConverterParams::K_p},
    Field{"K_i", &ConverterParams::K_i},
    Field{"K_p_v", &ConverterParams::K_p_v},
    Field{"K_i_v", &ConverterParams::K_i_v},
    Field{"f_control", &ConverterParams::f_control},
    Field{"pll_bandwidth", &ConverterParams::pll_bandwidth},
    Field{"pll_damping", &ConverterParams::pll_damping},
    Field{"i_cmd_limit", &ConverterParams::i_cmd_limit},
    Field{"v_out_dc", &ConverterParams::v_out_dc},
    Field{"C_out", &ConverterParams::C_out},
    Field{"R_load", &ConverterParams::R_load},
    Field{"v_out_init", &ConverterParams::v_out_init},
    Field{"dt", &ConverterParams::dt},
    Field{"eps_zvs", &ConverterParams::eps_zvs},
    Field{"eps_energy", &ConverterParams::eps_energy},
    Field{"max_cycle_duration", &ConverterParams::max_cycle_duration},
    Field{"degenerate_ratio", &ConverterParams::degenerate_ratio},
    Field{"min_pair_voltage", &ConverterParams::min_pair_voltage},
};

constexpr auto kNames = [] {
    std::array<std::string_view, kNumericFields.size()> names{};
    for (std::size_t i = 0; i < kNumericFields.size(); ++i) names[i] = kNumericFields[i].first;
    return names;
}();

double ConverterParams::*find_field(std::string_view key) {
    for (const auto& [name, member] : kNumericFields) {
        if (name == key) return member;
    }
    return nullptr;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view text) {
    text = trim(text);
    if (text == "auto") return 0.0;
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError("invalid numeric value '" + std::string(text) + "' for key '" + std::string(key) + "'");
    }
    return value;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

double ConverterParams::grid_phase_amplitude() const { return std::sqrt(2.0) * v_grid_ll_rms / std::sqrt(3.0); }

double ConverterParams::grid_omega() const { return 2.0 * std::numbers::pi * f_grid; }

double ConverterParams::filter_resonance() const { return 1.0 / (2.0 * std::numbers::pi * std::sqrt(L_f * C_f)); }

double ConverterParams::omega_hpf() const { return 2.0 * std::numbers::pi * f_hpf; }

double ConverterParams::output_voltage_nominal() const {
    return output_model == OutputModel::source ? v_out_dc : v_out_max;
}

double ConverterParams::peak_link_energy() const { return 0.5 * C_link * v_link_peak * v_link_peak; }

int ConverterParams::control_divider() const {
    return std::max(1, static_cast<int>(std::lround(1.0 / (f_control * dt))));
}

ConverterParams table_one() { return resolve_defaults(ConverterParams{}); }

ConverterParams resolve_defaults(ConverterParams p) {
    if (p.v_link_peak <= 0.0) {
        p.v_link_peak = 1.3 * std::max(std::sqrt(2.0) * p.v_grid_ll_rms, p.output_voltage_nominal());
    }
    if (p.eps_zvs <= 0.0) p.eps_zvs = 0.01 * p.v_link_peak;
    if (p.eps_energy <= 0.0) p.eps_energy = 0.001 * p.peak_link_energy();
    if (p.i_cmd_limit <= 0.0) p.i_cmd_limit = 2.0 * std::sqrt(2.0) * p.i_rated;
    return p;
}

void validate(const ConverterParams& p) {
    for (const auto& [name, member] : kNumericFields) {
        require(std::isfinite(p.*member), "parameter '" + std::string(name) + "' is not finite");
    }
    const std::array<std::pair<std::string_view, double>, 18> positive{{
        {"v_grid_ll_rms", p.v_grid_ll_rms},
        {"f_grid", p.f_grid},
        {"i_rated", p.i_rated},
        {"v_out_min", p.v_out_min},
        {"v_out_max", p.v_out_max},
        {"L_m", p.L_m},
        {"C_link", p.C_link},
        {"L_f", p.L_f},
        {"C_f", p.C_f},
        {"v_link_peak", p.v_link_peak},
        {"f_hpf", p.f_hpf},
        {"f_control", p.f_control},
        {"dt", p.dt},
        {"eps_zvs", p.eps_zvs},
        {"eps_energy", p.eps_energy},
        {"max_cycle_duration", p.max_cycle_duration},
        {"pll_bandwidth", p.pll_bandwidth},
        {"i_cmd_limit", p.i_cmd_limit},
    }};
    for (const auto& [name, value] : positive) {
        require(value > 0.0, "parameter '" + std::string(name) + "' must be strictly positive");
    }
    require(p.r_s >= 0.0, "parameter 'r_s' must be non-negative");
    require(p.k_damp >= 0.0, "parameter 'k_damp' must be non-negative");
    require(p.K_p >= 0.0 && p.K_i >= 0.0, "current-loop gains must be non-negative");
    require(p.v_out_min <= p.v_out_max, "v_out_min must not exceed v_out_max");
    require(p.v_link_peak > std::sqrt(2.0) * p.v_grid_ll_rms,
            "v_link_peak must exceed the peak line-line grid voltage");
    require(p.f_hpf >= 2.0 * p.filter_resonance(), "f_hpf must be at least twice the filter resonance frequency");
    if (p.output_model == OutputModel::source) {
        require(p.v_out_dc > 0.0 && p.v_out_dc < p.v_link_peak, "v_out_dc must lie in (0, v_link_peak)");
    } else {
        require(p.C_out > 0.0 && p.R_load > 0.0, "C_out and R_load must be strictly positive");
        require(p.v_out_init > 0.0, "v_out_init must be strictly positive");
        require(p.v_out_max < p.v_link_peak, "v_out_max must stay below v_link_peak");
    }
    require(p.control_divider() >= 1, "f_control too high for dt");
}

std::span<const std::string_view> numeric_param_names() { return kNames; }

bool is_param_key(std::string_view key) {
    return find_field(key) != nullptr || key == "output_model" || key == "damping_frame";
}

void set_param(ConverterParams& p, std::string_view key, std::string_view value) {
    if (auto member = find_field(key)) {
        p.*member = parse_double(key, value);
        return;
    }
    const auto v = trim(value);
    if (key == "output_model") {
        if (v == "source") {
            p.output_model = OutputModel::source;
        } else if (v == "capacitor") {
            p.output_model = OutputModel::capacitor;
        } else {
            throw ConfigError("output_model must be 'source' or 'capacitor'");
        }
        return;
    }
    if (key == "damping_frame") {
        if (v == "synchronous") {
            p.damping_frame = DampingFrame::synchronous;
        } else if (v == "stationary") {
            p.damping_frame = DampingFrame::stationary;
        } else {
            throw ConfigError("damping_frame must be 'synchronous' or 'stationary'");
        }
        return;
    }
    throw ConfigError("unknown parameter '" + std::string(key) + "'");
}

double get_param(const ConverterParams& p, std::string_view key) {
    if (auto member = find_field(key)) return p.*member;
    throw ConfigError("unknown numeric parameter '" + std::string(key) + "'");
}

std::string to_string(OutputModel m) { return m == OutputModel::source ? "source" : "capacitor"; }

std::string to_string(DampingFrame f) { return f == DampingFrame::synchronous ? "synchronous" : "stationary"; }

}  // namespace aclink
