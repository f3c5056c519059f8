#pragma once

#include "config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace unlearn_lab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Resolves the configuration in this order: preset, --config file,
/// UNLEARN_LAB_SEED, convenience flags, then `--section.key value` overrides.
ExperimentConfig resolve_config(const std::string& preset, const std::string& config_path,
                                const std::vector<std::pair<std::string, std::string>>& overrides);

/// Runs one command line (without the program name) and returns the exit
/// code: 0 success, 2 configuration or usage error, 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace unlearn_lab::cli
