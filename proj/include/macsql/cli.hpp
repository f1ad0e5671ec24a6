#pragma once

#include <atomic>
#include <ostream>

#include "macsql/config.hpp"

namespace macsql {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point behind the `macsql` binary: subcommands ask, bench, eval and export-sft.
/// Data goes to `out`, progress and diagnostics to `err`. Settings come from `env` and flags.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_environment(), const std::atomic<bool>* cancel = nullptr);

}  // namespace macsql
