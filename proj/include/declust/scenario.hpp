#pragma once

#include <optional>
#include <vector>

#include "declust/netsim.hpp"

namespace declust {

// Protocol-level scenario: per-agent feature/aux vectors straight from the
// config, changed only by scripted perturbations. No physics.
class AbstractScenario : public Scenario {
public:
    AbstractScenario(std::vector<std::vector<double>> features,
                     std::vector<std::vector<double>> auxes,
                     std::vector<std::vector<double>> feature_seeds,
                     std::vector<std::vector<double>> aux_seeds);

    int feature_dim() const override;
    int aux_dim() const override;
    std::vector<std::vector<double>> feature_seeds(int agent_id) const override;
    std::vector<std::vector<double>> aux_seeds(int agent_id) const override;
    void apply_perturbation(const PerturbationEvent& event) override;
    void advance(long, double, const std::vector<AgentState>&) override {}
    std::vector<double> measure_feature(int agent_id) const override;
    std::vector<double> measure_aux(int agent_id) const override;

private:
    std::vector<std::vector<double>> features_;
    std::vector<std::vector<double>> auxes_;
    std::vector<std::vector<double>> feature_seeds_;
    std::vector<std::vector<double>> aux_seeds_;
};

// ---------------------------------------------------------------------------
// Microgrid battery scenarios
// ---------------------------------------------------------------------------

// Physical battery unit: storage, its local load, and the power it is
// currently dispatching (positive = discharging into the grid).
struct BatteryPlant {
    int id = 0;
    double capacity_kwh = 0.0;  // E_i, constant per run
    double load_kw = 0.0;       // y_i, may change via perturbations
    double soc = 0.0;           // s_i in [0, 1]
    double power_kw = 0.0;      // p_i
    double rho = 1.0;           // loss-proxy resistance weight
    double price = 0.0;         // pi_i, trading scenario only
};

// Ideal coulomb counting over one step. Power pushing the state of charge
// past a bound is zeroed for that step and the result is clipped to [0, 1].
BatteryPlant soc_step(BatteryPlant plant, double step_hours);

// Dispatch law: p_i = shared_rate * E_i + gain * E_i * (soc_i - soc_avg).
// `shared_rate` (kW per kWh) carries the scenario-specific cluster duty:
// the estimated load-to-capacity ratio for loss reduction, or the external
// charge/discharge command for virtual storage. The balancing term makes
// the state of charge contract toward the cluster-average estimate, and at
// balance every member's power is proportional to its capacity.
double balancing_dispatch(const BatteryPlant& plant, double shared_rate,
                          double soc_avg, double gain);

// Sum of rho_i * (p_i - y_i)^2: zero exactly when every battery serves its
// own local load, i.e. when no power flows between plants.
double loss_proxy(const std::vector<BatteryPlant>& plants);

// Min-max normalization against config-declared bounds. Raw values outside
// the bounds are clamped (and flagged on the trace by the scenario).
struct Bounds {
    double lo = 0.0;
    double hi = 1.0;
};
double normalize(double value, Bounds bounds);
double denormalize(double unit, Bounds bounds);

struct FeatureBounds {
    Bounds load;
    Bounds capacity;
    Bounds price;
};

// Utility-side request used to bootstrap virtual-storage formation: the
// wanted capacity and price cap, the prosumers that receive the broadcast,
// and the cluster seed estimates (raw price, raw capacity) it carries.
struct VesRequirement {
    double required_capacity_kwh = 0.0;
    double max_price = 0.0;
    std::vector<int> pinned_agents;
    std::vector<std::vector<double>> seed_estimates;  // [M][2] = (price, kWh)
};

// Initial feature estimates for one agent: pinned agents carry the
// utility's normalized seeds, everyone else the config defaults.
std::vector<std::vector<double>> pinned_feature_seeds(
    const VesRequirement& requirement, const FeatureBounds& bounds,
    const std::vector<std::vector<double>>& default_seeds, int agent_id);

struct VesClusterInfo {
    int cluster = 0;
    double avg_price = 0.0;        // from a pinned agent's converged estimates
    double avg_capacity_kwh = 0.0;
    // Simulator-omniscient: averages alone do not reveal member counts, so
    // these come from the trace, not from the protocol.
    int member_count = 0;
    double total_capacity_kwh = 0.0;
};

struct VesReport {
    std::vector<VesClusterInfo> clusters;
    double estimate_error = 0.0;  // feature-estimate error when the report was read
    double tolerance = 1e-3;
};

struct VesSelection {
    std::vector<int> accepted;          // cluster indices, ascending
    double offered_capacity_kwh = 0.0;  // total over accepted clusters
    bool feasible = false;
};

// Accepts every price-qualifying, non-empty cluster when their combined
// capacity covers the requirement; otherwise the selection is explicitly
// empty. Throws std::invalid_argument if the report has not converged.
VesSelection ves_select(const VesReport& report, const VesRequirement& requirement);

enum class MicrogridMode { loss_reduction, virtual_storage };

struct MicrogridConfig {
    MicrogridMode mode = MicrogridMode::loss_reduction;
    std::vector<BatteryPlant> plants;  // ordered, ids 1..N
    FeatureBounds bounds;
    double gain = 0.0;           // k_p, 1/h
    double external_rate = 0.0;  // u, kW per kWh (virtual storage)
    std::vector<std::vector<double>> feature_seeds;  // normalized defaults [M][2]
    std::vector<std::vector<double>> aux_seeds;      // [M][2] = (soc, soc rate)
    std::optional<VesRequirement> requirement;       // virtual storage
    double ves_tolerance = 1e-3;
};

// Features: (load, capacity) or (price, capacity), normalized. Auxiliary:
// (soc, soc rate). Each round the plants dispatch from the previous round's
// cluster estimates, then integrate their state of charge, and the agents
// measure the result.
class MicrogridScenario : public Scenario {
public:
    explicit MicrogridScenario(MicrogridConfig config);

    int feature_dim() const override { return 2; }
    int aux_dim() const override { return 2; }
    std::vector<std::vector<double>> feature_seeds(int agent_id) const override;
    std::vector<std::vector<double>> aux_seeds(int agent_id) const override;
    void apply_perturbation(const PerturbationEvent& event) override;
    void advance(long round, double step,
                 const std::vector<AgentState>& previous) override;
    std::vector<double> measure_feature(int agent_id) const override;
    std::vector<double> measure_aux(int agent_id) const override;
    bool measurement_clamped(int agent_id) const override;
    void annotate_round(RoundRecord& record) const override;
    void append_summary(nlohmann::json& summary, const Trace& trace) const override;

    const std::vector<BatteryPlant>& plants() const { return config_.plants; }

private:
    const BatteryPlant& plant(int agent_id) const;
    BatteryPlant& plant(int agent_id);

    MicrogridConfig config_;
    std::vector<double> soc_rates_;   // backward difference per plant
    double step_hours_ = 0.0;         // last advance step, for the summary
    double instantaneous_loss_ = 0.0;
    bool advanced_ = false;
};

// Final-round virtual-storage report: estimate columns from the first
// pinned agent, member counts and capacity totals from the trace.
VesReport build_ves_report(const Trace& trace, const MicrogridConfig& config);

}  // namespace declust
