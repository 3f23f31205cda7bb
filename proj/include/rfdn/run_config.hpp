#pragma once

#include <map>
#include <string>

namespace rfdn {

/// Parses a plain key=value run-configuration file. Blank lines and lines
/// starting with '#' are ignored; keys and values are whitespace-trimmed.
/// Duplicate keys and lines without '=' raise FormatError. Key validation
/// (unknown keys are fatal) happens at the consumer, which knows the flag
/// set.
std::map<std::string, std::string> parse_run_config(const std::string& path);

}  // namespace rfdn
