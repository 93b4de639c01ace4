#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vdwalk/cli/config.hpp"

namespace vdwalk::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitAssertion = 2 };

inline constexpr const char* kToolVersion = "0.1.0";

struct RunResult {
    int exit_code = kExitOk;
    std::vector<std::string> warnings;
    std::vector<std::string> failures;  // invariant checks that did not hold
    std::string error;                  // set when exit_code == kExitUsage
};

/// Runs one subcommand into `out_dir`: resolved config, CSV/JSON outputs and
/// manifest.json. On a usage or runtime error everything written is removed.
RunResult run_command(const std::string& subcommand, const RunConfig& cfg, const std::filesystem::path& out_dir,
                      std::ostream& log);

/// Re-executes the run recorded in a manifest. `threads` > 0 overrides the
/// recorded worker cap.
RunResult replay_manifest(const std::filesystem::path& manifest, const std::filesystem::path& out_dir, int threads,
                          std::ostream& log);

/// Command-line entry point; returns the process exit status.
int cli_main(int argc, char** argv);

}  // namespace vdwalk::cli
