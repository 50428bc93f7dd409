#pragma once

// Subcommand implementations shared by the command-line tool and the
// integration tests. Each runner builds its operators from the config,
// executes one experiment, and emits result files plus a manifest into
// the output directory.

#include <filesystem>
#include <string>
#include <vector>

#include "sks/config.hpp"

namespace sks {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitProperty = 3;

std::vector<std::string> subcommand_names();

// Returns a process exit code; diagnostics go to stderr. Unknown names
// and precondition violations count as config errors.
int run_subcommand(const std::string& name, const RunConfig& cfg,
                   const std::filesystem::path& out_dir, int threads);

}  // namespace sks
