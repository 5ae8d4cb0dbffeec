#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lsg::cli {

inline constexpr std::string_view kToolName = "lsg";
inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Fully populated default configuration as pretty-printed JSON.
std::string default_config_json();

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t fnv1a64(std::string_view text);
/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

}  // namespace lsg::cli
