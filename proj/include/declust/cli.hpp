#pragma once

#include <iosfwd>
#include <string>

#include "declust/config.hpp"

namespace declust::cli {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

// `validate`: parse + validate, report every issue, optionally print the
// normalized config.
int validate_command(const std::string& config_path, const Overrides& overrides,
                     bool emit, std::ostream& out, std::ostream& err);

// `run`: validate, simulate, write trace and summary artifacts.
int run_command(const std::string& config_path, const Overrides& overrides,
                int workers, std::ostream& out, std::ostream& err);

// `compare`: structured diff of two JSONL traces.
int compare_command(const std::string& trace_a, const std::string& trace_b,
                    std::ostream& out, std::ostream& err);

// `selftest`: built-in invariant suites on built-in instances.
int selftest_command(std::ostream& out, std::ostream& err);

}  // namespace declust::cli
