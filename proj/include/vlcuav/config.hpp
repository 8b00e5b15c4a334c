// config.hpp
//
// Plain-text experiment configuration: one `key = value` per line, `#`
// starts a comment, blank lines are ignored. List values are separated by
// commas or spaces. Unknown keys are rejected.

#ifndef VLCUAV_CONFIG_HPP
#define VLCUAV_CONFIG_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vlcuav/harness.hpp"

namespace vlcuav::config {

struct KeyInfo {
    std::string key;
    std::string help;
};

/// Every accepted key with a one-line description, in documentation order.
const std::vector<KeyInfo>& keys();

/// Apply one setting; throws ConfigError on an unknown key or a bad value.
void apply(harness::ExperimentConfig& config, const std::string& key, const std::string& value);

/// Parse a whole file on top of `base`. Errors carry the line number.
harness::ExperimentConfig parse(std::istream& in, harness::ExperimentConfig base = {});
harness::ExperimentConfig load(const std::filesystem::path& path, harness::ExperimentConfig base = {});

/// Current value of `key` in canonical text form.
std::string value_of(const harness::ExperimentConfig& config, const std::string& key);

/// Every key with its current value and description; parse() accepts the output.
void dump(const harness::ExperimentConfig& config, std::ostream& out);

} // namespace vlcuav::config

#endif // VLCUAV_CONFIG_HPP
