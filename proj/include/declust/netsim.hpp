#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "json.hpp"

#include "declust/agent.hpp"
#include "declust/clustering.hpp"
#include "declust/graph.hpp"
#include "declust/trace.hpp"

namespace declust {

// Scripted change to one agent's raw state at a given round. For the
// abstract scenario the vector addresses the full feature/aux vector; the
// microgrid scenarios accept a single value (feature -> local load,
// aux -> state of charge).
struct PerturbationEvent {
    enum class Channel { feature, aux };

    long round = 0;
    int target = 0;
    Channel channel = Channel::feature;
    std::optional<std::vector<double>> set_value;
    std::optional<std::vector<double>> add_delta;
};

// Optional lossy/delayed link model. Messages sent from round 1 onward are
// independently dropped per directed edge; delivery of a surviving message
// sent at round t happens at round t + 1 + delay_rounds. The initial
// estimate exchange (round-0 outboxes) always goes through so every agent
// knows its neighbours' starting estimates.
struct FaultModel {
    double drop_probability = 0.0;  // in [0, 1)
    int delay_rounds = 0;
};

struct SimConfig {
    Graph graph;
    int cluster_count = 1;
    double step = 0.0;  // per-round time in scenario units
    long rounds = 0;
    HysteresisPolicy hysteresis;
    std::uint64_t seed = 0;
    std::vector<PerturbationEvent> perturbations;
    std::optional<FaultModel> fault_model;
    // Baseline harness: pin every agent to a fixed cluster for the whole
    // run (assignment never moves anyone). Used for grouping comparisons.
    std::optional<std::vector<int>> fixed_assignment;
};

// Per-component issues so a config can be rejected with every problem
// listed at once.
std::vector<ConfigIssue> validate_sim_config(const SimConfig& config);

// Physical world driven by the engine. Round order: perturbations land,
// `advance` integrates the scenario dynamics (reading the previous round's
// agent outputs), then agents measure the post-dynamics state and tick.
class Scenario {
public:
    virtual ~Scenario() = default;

    virtual int feature_dim() const = 0;
    virtual int aux_dim() const = 0;

    virtual std::vector<std::vector<double>> feature_seeds(int agent_id) const = 0;
    virtual std::vector<std::vector<double>> aux_seeds(int agent_id) const = 0;

    virtual void apply_perturbation(const PerturbationEvent& event) = 0;
    virtual void advance(long round, double step,
                         const std::vector<AgentState>& previous) = 0;

    // Measurement of the (mapped/normalized) state after `advance`.
    virtual std::vector<double> measure_feature(int agent_id) const = 0;
    virtual std::vector<double> measure_aux(int agent_id) const = 0;
    virtual bool measurement_clamped(int) const { return false; }

    // Scenario-specific extras on trace records and the summary document.
    virtual void annotate_round(RoundRecord&) const {}
    virtual void append_summary(nlohmann::json&, const Trace&) const {}
};

struct RunOptions {
    int workers = 1;  // parallel agent ticks; must not change results
};

struct RunResult {
    Trace trace;
    nlohmann::json summary;
};

inline constexpr const char* kRngName = "mt19937_64/u53-v1";

// Round-synchronous deterministic simulation: T rounds of
// perturb -> advance -> deliver -> tick -> record. Identical (config, seed)
// pairs produce identical traces for any worker count.
RunResult run(const SimConfig& config, Scenario& scenario,
              const RunOptions& options = {});

}  // namespace declust
