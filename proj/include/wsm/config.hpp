#pragma once

// Flat key=value run configuration. Keys carry a section prefix
// ("design.kind", "mc.replications"); a "[design]" header line prefixes the
// keys that follow it.

#include <cstddef>
#include <map>
#include <string>
#include <iosfwd>
#include <string_view>
#include <utility>
#include <vector>

#include "wsm/montecarlo.hpp"

namespace wsm {

struct RunConfig {
  StudyConfig study;
  std::size_t sample_n = 100;  // simulate / estimate
  TableFormat format = TableFormat::csv;
};

RunConfig default_run_config();

const std::vector<std::string>& valid_config_keys();

/// Throws ConfigError naming the valid keys when `key` is unknown.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

void apply_config_text(RunConfig& config, std::string_view text);

/// Reads a key=value file, or the "config" object of a run manifest (JSON).
void apply_config_file(RunConfig& config, const std::string& path);

/// Every key with its resolved value; feeding it back reproduces the config.
std::map<std::string, std::string> config_echo(const RunConfig& config);

/// Built-in table reproduction: fixed settings plus one swept design parameter.
struct TablePreset {
  std::string name;
  std::vector<std::pair<std::string, std::string>> settings;
  std::string sweep_key;
  std::vector<std::string> sweep_values;
};

const std::vector<TablePreset>& table_presets();

/// Throws ConfigError for names other than table1 .. table6.
const TablePreset& find_table_preset(std::string_view name);

/// default_run_config() with the preset's settings applied.
RunConfig preset_config(const TablePreset& preset);

/// One study per swept value, rows concatenated in sweep order.
StudyResult run_preset(const TablePreset& preset, const RunConfig& config, std::ostream* log = nullptr);

}  // namespace wsm
