#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lcausal::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    ok = 0,
    internal_error = 1,
    config_error = 2,
    estimation_error = 3,
    bootstrap_abort = 4,
};

/// Runs one command. Results go to the configured output file or to `out`;
/// human-readable errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lower-case hex SHA-256 of `bytes`.
std::string sha256_hex(const std::string& bytes);

}  // namespace lcausal::cli
