#pragma once

// Run metadata shared by the CLI outputs: a stable configuration hash and
// file helpers that report IO failures as igs::Error.

#include <cstdint>
#include <string>

namespace igs {

// 64-bit FNV-1a of a canonical configuration string, as 16 hex digits.
std::string config_hash(const std::string& canonical);

// Writes `content` to `path`, creating parent directories; Io on failure.
void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

// Shortest decimal form that round-trips through strtod.
std::string format_double(double x);

}  // namespace igs
