#pragma once

// Reading and writing system configurations.
//
// The configuration is a YAML document; docs/config.md lists every key. Two
// forms are accepted: an explicit description (dimension, linear, nonlinear,
// forcing sections) or a `preset` section naming the benchmark oscillator.

#include <filesystem>
#include <string>

#include <yaml-cpp/yaml.h>

#include "nlbound/system_model.hpp"

namespace nlbound {

SystemSpec parse_config(const std::string& text);
SystemSpec spec_from_node(const YAML::Node& root);

/// Throws ConfigError with key "<path>" and message "config not found" when missing.
SystemSpec load_config_file(const std::filesystem::path& path);

YAML::Node spec_to_node(const SystemSpec& spec);
std::string to_config_text(const SystemSpec& spec);

/// Reads a real from a scalar node. Accepts plain numbers and multiples of pi
/// written as "3.2pi", "pi", "-0.5*pi".
double parse_real(const YAML::Node& node, const std::string& key);

}  // namespace nlbound
