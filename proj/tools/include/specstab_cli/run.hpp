#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "specstab_cli/config.hpp"

namespace specstab::cli {

enum ExitCode : int { ok = 0, validation_failure = 1, io_failure = 2 };

const std::vector<std::string>& subcommands();

struct Overrides {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
};

/// Reads an INI file, or the config echoed inside a run manifest (JSON).
RunConfig load_run_config(const std::string& path);

/// Runs one subcommand; outputs go under [output] dir (default "out").
/// Returns 0 on success, 1 on validation failure, 2 on I/O failure.
int run(const std::string& subcommand, RunConfig config, const Overrides& overrides, std::ostream& out,
        std::ostream& err);

}  // namespace specstab::cli
