#pragma once

namespace planefield::cli {

/// Entry point for the `planefield` command-line tool. Returns the process
/// exit code: 0 on success, 1 on validation failures (bad flags, domain or
/// shape errors), 2 on I/O and file-format errors.
int run(int argc, char** argv);

}  // namespace planefield::cli
