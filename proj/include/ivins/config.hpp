#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ivins/sim.hpp"

namespace ivins {

/// Config problem; the message is prefixed with "<source>:<line>: " when the
/// error can be pinned to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

/// Parses `key = value` lines (dotted keys, '#' comments) on top of the
/// defaults. Unknown keys, duplicates and malformed values are errors.
ScenarioConfig parse_config(std::string_view text, const std::string& source = "<config>");

/// Reads a key-value file, or the "config" object of a manifest.json.
ScenarioConfig load_config(const std::filesystem::path& path);

/// Every recognised key with its value, in a fixed order; doubles are printed
/// with enough digits to round-trip.
std::vector<std::pair<std::string, std::string>> config_entries(const ScenarioConfig& cfg);

/// config_entries rendered as a key-value file that parse_config accepts.
std::string format_config(const ScenarioConfig& cfg);

}  // namespace ivins
