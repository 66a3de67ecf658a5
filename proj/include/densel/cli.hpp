#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace densel::cli {

enum ExitCode : int { kOk = 0, kInvalid = 1, kIo = 2, kInternal = 3 };

/*
 * Runs one subcommand. args excludes the program name, e.g.
 * {"sweep", "--config", "run.cfg", "--out", "results"}.
 * Summaries go to `out`, diagnostics to `err`.
 */
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/* Lowercase hex SHA-256 of a byte string. */
std::string sha256Hex(std::string_view bytes);

} // namespace densel::cli
