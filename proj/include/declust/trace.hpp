#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "declust/errors.hpp"

namespace declust {

inline constexpr const char* kTraceSchema = "declust-trace-v1";

// One agent's observable state in one round.
struct AgentRound {
    int id = 0;
    std::vector<double> feature;
    std::vector<double> aux;
    int cluster = 1;
    long switch_count = 0;
    std::vector<std::vector<double>> feature_estimates;  // [M][n]
    std::vector<std::vector<double>> aux_estimates;      // [M][m]
    bool clamped = false;                 // raw value left the declared bounds
    std::optional<double> power;          // microgrid: dispatched kW this round
};

// One simulation round, including the simulator-omniscient oracle columns
// (true per-cluster means) used for error reporting and regression tests.
struct RoundRecord {
    long round = 0;
    std::vector<AgentRound> agents;
    std::vector<int> cluster_sizes;  // [M]
    std::vector<std::optional<std::vector<double>>> cluster_feature_mean;  // [M]
    std::vector<std::optional<std::vector<double>>> cluster_aux_mean;      // [M]
    // max over agents and non-empty clusters of the per-entry deviation
    // between an estimate and the true member mean
    double est_error_feature = 0.0;
    double est_error_aux = 0.0;
    std::optional<double> loss;  // microgrid: instantaneous loss proxy
};

struct Trace {
    std::vector<RoundRecord> records;

    long rounds() const { return static_cast<long>(records.size()) - 1; }
    int agent_count() const;
    int cluster_count() const;
};

nlohmann::json to_json(const RoundRecord& record);
RoundRecord round_record_from_json(const nlohmann::json& j);

// JSON Lines: one object per round, stable key order, self-describing schema.
void write_trace_jsonl(const Trace& trace, std::ostream& out);
Trace read_trace_jsonl(std::istream& in);
void write_trace_jsonl_file(const Trace& trace, const std::string& path);
Trace read_trace_jsonl_file(const std::string& path);

// Flat projection with stable column ordering:
// round, agent_id, k, switches, clamped, power, x_*, z_*, xest_<j>_*, zest_<j>_*
void write_trace_csv(const Trace& trace, std::ostream& out);
void write_trace_csv_file(const Trace& trace, const std::string& path);

struct SummarizeOptions {
    double tolerance = 1e-3;          // consensus tolerance on estimate errors
    long last_perturbation_round = 0; // time-to-consensus measured from here
};

// Deterministic aggregate metrics for a complete trace: per-cluster sizes,
// estimate-error trajectory endpoints, time-to-consensus, switch totals.
nlohmann::json summarize(const Trace& trace, const SummarizeOptions& options = {});

// Structured diff of two traces: first divergence round, membership and
// estimate deltas, scenario metric deltas. Throws TraceError on
// schema-incompatible traces.
nlohmann::json compare_traces(const Trace& a, const Trace& b);

}  // namespace declust
