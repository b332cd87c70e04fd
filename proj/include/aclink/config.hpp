#pragma once

// Scenario files: UTF-8 text, `key = value` lines under `[scenario]` and
// `[params]` headers, `#` comments. Parameter keys are ConverterParams field
// names in SI units. Example:
//
//   [scenario]
//   preset = fig10          # optional base, applied before the other keys
//   duration = 0.3
//   schedule = 0 0 2; 0.1 0 4   # "t i_d i_q" entries, or "t v_out"
//
//   [params]
//   k_damp = 2e-4

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aclink/simulation.hpp"

namespace aclink {

std::span<const std::string_view> preset_names();

/// Built-in scenario (fig6 .. fig14, fig10_averaged, zero). Throws
/// ConfigError for unknown names.
Scenario preset(std::string_view name);

/// Set one scenario-level key ("duration", "schedule", ...) or parameter key.
void set_scenario_key(Scenario& sc, std::string_view key, std::string_view value);

/// Throws ConfigError with the line number on malformed input.
Scenario parse_scenario(std::istream& is, std::string_view origin = "<input>");

/// A file path, or a preset name when no such file exists.
Scenario load_scenario(const std::string& path_or_preset);

/// Apply `ACLINK_<key>=<value>` entries; other entries are ignored.
void apply_environment(Scenario& sc, std::span<const std::string> environment);

/// The process environment as `NAME=value` strings.
std::vector<std::string> process_environment();

/// Round-trippable text form.
std::string to_config(const Scenario& sc);

}  // namespace aclink
