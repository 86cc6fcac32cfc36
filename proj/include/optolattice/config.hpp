#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "optolattice/params.hpp"

namespace optolattice {

// Flat "section.key = value" text format. '#' starts a comment. Keys carry
// their unit as a suffix; frequencies are given in Hz and stored as rad/s.
// Optional quantities accept "auto".

struct ConfigKey {
    std::string name;
    std::string unit;
    std::string help;
};

const std::vector<ConfigKey>& config_keys();

// Applies key = value pairs onto config (no validation).
void apply_overrides(SystemConfig& config, const std::map<std::string, std::string>& values);

// Splits text into key/value pairs. Throws on malformed lines and duplicate keys.
std::map<std::string, std::string> parse_pairs(const std::string& text);

// Defaults, then the text, then validation.
SystemConfig parse_config(const std::string& text);
SystemConfig parse_config(const std::string& text, const SystemConfig& base);

// Every key, one per line, 17 significant digits.
std::string serialize(const SystemConfig& config);

// FNV-1a 64 of serialize(config).
std::uint64_t config_hash(const SystemConfig& config);
std::string hash_hex(std::uint64_t hash);

// Values for known keys found in the environment, either under the dotted name
// itself or as OPTOLATTICE_<SECTION>__<KEY> in upper case.
std::map<std::string, std::string> environment_overrides(
    const std::function<const char*(const char*)>& getenv_fn);

// Named scenario profiles: "fig2" (defaults) and "backaction".
std::vector<std::string> profile_names();
SystemConfig profile(const std::string& name);

std::string format_double(double v);

}  // namespace optolattice
