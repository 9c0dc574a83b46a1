#pragma once

#include <memory>
#include <optional>
#include <string>

#include "declust/netsim.hpp"
#include "declust/scenario.hpp"
#include "declust/toml_lite.hpp"

namespace declust {

struct OutputConfig {
    std::string trace_path = "trace.jsonl";
    std::string summary_path = "summary.json";
    std::string format = "jsonl";  // trace format: jsonl | csv
};

// Command-line overrides applied before validation.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<long> rounds;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;
};

struct LoadedScenario {
    SimConfig sim;
    std::unique_ptr<Scenario> scenario;
    OutputConfig output;
    std::string kind;  // abstract | microgrid-loss | ves
    bool step_was_auto = false;
    toml::Table normalized;  // canonical config, for emit and round-trips
};

// Parses and fully validates a scenario file. Structural and numerical
// problems are collected and reported together in one ConfigError.
LoadedScenario load_scenario_text(const std::string& text,
                                  const Overrides& overrides = {});
LoadedScenario load_scenario_file(const std::string& path,
                                  const Overrides& overrides = {});

std::string emit_normalized(const LoadedScenario& loaded);

}  // namespace declust
