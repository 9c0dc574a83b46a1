#include "declust/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace declust {

using nlohmann::json;

namespace {

void apply_vector_event(const PerturbationEvent& event, std::vector<double>& value,
                        const char* what) {
    const auto& payload = event.set_value ? *event.set_value : *event.add_delta;
    if (payload.size() != value.size()) {
        throw ConfigError({{"perturbations", "",
                            std::string(what) + " perturbation for agent " +
                                std::to_string(event.target) + " has dimension " +
                                std::to_string(payload.size()) + ", expected " +
                                std::to_string(value.size())}});
    }
    if (event.set_value) {
        value = payload;
    } else {
        for (size_t d = 0; d < value.size(); ++d) value[d] += payload[d];
    }
}

double scalar_payload(const PerturbationEvent& event, const char* what) {
    const auto& payload = event.set_value ? *event.set_value : *event.add_delta;
    if (payload.size() != 1) {
        throw ConfigError({{"perturbations", "",
                            std::string(what) + " perturbation for agent " +
                                std::to_string(event.target) +
                                " must carry exactly one value"}});
    }
    return payload[0];
}

}  // namespace

// ---------------------------------------------------------------------------
// AbstractScenario
// ---------------------------------------------------------------------------

AbstractScenario::AbstractScenario(std::vector<std::vector<double>> features,
                                   std::vector<std::vector<double>> auxes,
                                   std::vector<std::vector<double>> feature_seeds,
                                   std::vector<std::vector<double>> aux_seeds)
    : features_(std::move(features)),
      auxes_(std::move(auxes)),
      feature_seeds_(std::move(feature_seeds)),
      aux_seeds_(std::move(aux_seeds)) {}

int AbstractScenario::feature_dim() const {
    return features_.empty() ? 0 : static_cast<int>(features_.front().size());
}

int AbstractScenario::aux_dim() const {
    return auxes_.empty() ? 0 : static_cast<int>(auxes_.front().size());
}

std::vector<std::vector<double>> AbstractScenario::feature_seeds(int) const {
    return feature_seeds_;
}

std::vector<std::vector<double>> AbstractScenario::aux_seeds(int) const {
    return aux_seeds_;
}

void AbstractScenario::apply_perturbation(const PerturbationEvent& event) {
    const auto idx = static_cast<size_t>(event.target - 1);
    if (event.channel == PerturbationEvent::Channel::feature) {
        apply_vector_event(event, features_.at(idx), "feature");
    } else {
        apply_vector_event(event, auxes_.at(idx), "aux");
    }
}

std::vector<double> AbstractScenario::measure_feature(int agent_id) const {
    return features_.at(static_cast<size_t>(agent_id - 1));
}

std::vector<double> AbstractScenario::measure_aux(int agent_id) const {
    return auxes_.at(static_cast<size_t>(agent_id - 1));
}

// ---------------------------------------------------------------------------
// Battery primitives
// ---------------------------------------------------------------------------

BatteryPlant soc_step(BatteryPlant plant, double step_hours) {
    if (!(step_hours > 0.0)) {
        throw std::invalid_argument("soc_step: step must be > 0");
    }
    const bool discharging_empty = plant.soc <= 0.0 && plant.power_kw > 0.0;
    const bool charging_full = plant.soc >= 1.0 && plant.power_kw < 0.0;
    if (discharging_empty || charging_full) plant.power_kw = 0.0;
    plant.soc = std::clamp(
        plant.soc - plant.power_kw * step_hours / plant.capacity_kwh, 0.0, 1.0);
    return plant;
}

double balancing_dispatch(const BatteryPlant& plant, double shared_rate,
                          double soc_avg, double gain) {
    if (!std::isfinite(shared_rate) || !std::isfinite(soc_avg)) {
        throw NumericalFault("dispatch for battery " + std::to_string(plant.id) +
                                 ": non-finite cluster estimate",
                             plant.id);
    }
    return shared_rate * plant.capacity_kwh +
           gain * plant.capacity_kwh * (plant.soc - soc_avg);
}

double loss_proxy(const std::vector<BatteryPlant>& plants) {
    double total = 0.0;
    for (const auto& plant : plants) {
        const double mismatch = plant.power_kw - plant.load_kw;
        total += plant.rho * mismatch * mismatch;
    }
    return total;
}

double normalize(double value, Bounds bounds) {
    const double clamped = std::clamp(value, bounds.lo, bounds.hi);
    return (clamped - bounds.lo) / (bounds.hi - bounds.lo);
}

double denormalize(double unit, Bounds bounds) {
    return bounds.lo + unit * (bounds.hi - bounds.lo);
}

// ---------------------------------------------------------------------------
// Virtual energy storage
// ---------------------------------------------------------------------------

std::vector<std::vector<double>> pinned_feature_seeds(
    const VesRequirement& requirement, const FeatureBounds& bounds,
    const std::vector<std::vector<double>>& default_seeds, int agent_id) {
    const bool pinned =
        std::find(requirement.pinned_agents.begin(), requirement.pinned_agents.end(),
                  agent_id) != requirement.pinned_agents.end();
    if (!pinned) return default_seeds;

    std::vector<std::vector<double>> seeds;
    seeds.reserve(requirement.seed_estimates.size());
    for (const auto& seed : requirement.seed_estimates) {
        seeds.push_back({normalize(seed[0], bounds.price),
                         normalize(seed[1], bounds.capacity)});
    }
    return seeds;
}

VesSelection ves_select(const VesReport& report, const VesRequirement& requirement) {
    if (report.estimate_error > report.tolerance) {
        throw std::invalid_argument(
            "ves_select: cluster report has not converged (error " +
            std::to_string(report.estimate_error) + " > tolerance " +
            std::to_string(report.tolerance) + ")");
    }

    VesSelection selection;
    double qualifying_capacity = 0.0;
    std::vector<int> qualifying;
    for (const auto& info : report.clusters) {
        if (info.member_count == 0) continue;
        if (info.avg_price <= requirement.max_price) {
            qualifying.push_back(info.cluster);
            qualifying_capacity += info.total_capacity_kwh;
        }
    }

    selection.feasible = qualifying_capacity >= requirement.required_capacity_kwh &&
                         !qualifying.empty();
    if (selection.feasible) {
        selection.accepted = std::move(qualifying);
        selection.offered_capacity_kwh = qualifying_capacity;
    }
    return selection;
}

// ---------------------------------------------------------------------------
// MicrogridScenario
// ---------------------------------------------------------------------------

MicrogridScenario::MicrogridScenario(MicrogridConfig config)
    : config_(std::move(config)), soc_rates_(config_.plants.size(), 0.0) {
    for (const auto& plant : config_.plants) {
        if (!(plant.capacity_kwh > 0.0)) {
            throw ConfigError({{"batteries", "capacity_kwh",
                                "battery " + std::to_string(plant.id) +
                                    " must have positive capacity"}});
        }
    }
    if (config_.mode == MicrogridMode::virtual_storage && !config_.requirement) {
        throw ConfigError({{"ves", "", "virtual-storage scenario needs a requirement"}});
    }
    if (config_.requirement && config_.requirement->pinned_agents.empty()) {
        throw ConfigError({{"ves", "pinned", "at least one agent must be pinned"}});
    }
}

const BatteryPlant& MicrogridScenario::plant(int agent_id) const {
    return config_.plants.at(static_cast<size_t>(agent_id - 1));
}

BatteryPlant& MicrogridScenario::plant(int agent_id) {
    return config_.plants.at(static_cast<size_t>(agent_id - 1));
}

std::vector<std::vector<double>> MicrogridScenario::feature_seeds(int agent_id) const {
    if (config_.mode == MicrogridMode::virtual_storage) {
        return pinned_feature_seeds(*config_.requirement, config_.bounds,
                                    config_.feature_seeds, agent_id);
    }
    return config_.feature_seeds;
}

std::vector<std::vector<double>> MicrogridScenario::aux_seeds(int) const {
    return config_.aux_seeds;
}

void MicrogridScenario::apply_perturbation(const PerturbationEvent& event) {
    auto& target = plant(event.target);
    if (event.channel == PerturbationEvent::Channel::feature) {
        const double value = scalar_payload(event, "load");
        target.load_kw = event.set_value ? value : target.load_kw + value;
        if (target.load_kw < 0.0) target.load_kw = 0.0;
    } else {
        const double value = scalar_payload(event, "soc");
        target.soc = std::clamp(event.set_value ? value : target.soc + value, 0.0, 1.0);
    }
}

void MicrogridScenario::advance(long round, double step,
                                const std::vector<AgentState>& previous) {
    step_hours_ = step;
    advanced_ = true;
    for (size_t i = 0; i < config_.plants.size(); ++i) {
        auto& unit = config_.plants[i];
        const auto& agent = previous[i];
        const auto results = cluster_results(agent.membership, agent.estimates);
        const auto k = static_cast<size_t>(results.own_cluster - 1);
        const auto& feature_avg = results.feature_averages[k];
        const double soc_avg = results.aux_averages[k][0];

        double shared_rate = 0.0;
        if (config_.mode == MicrogridMode::loss_reduction) {
            const double load_avg = denormalize(feature_avg[0], config_.bounds.load);
            const double capacity_avg =
                denormalize(feature_avg[1], config_.bounds.capacity);
            if (!(capacity_avg > 0.0)) {
                throw NumericalFault("battery " + std::to_string(unit.id) +
                                         ": estimated cluster capacity " +
                                         std::to_string(capacity_avg) +
                                         " kWh is not positive at round " +
                                         std::to_string(round),
                                     unit.id, round);
            }
            shared_rate = load_avg / capacity_avg;
        } else {
            shared_rate = config_.external_rate;
        }

        unit.power_kw = balancing_dispatch(unit, shared_rate, soc_avg, config_.gain);
        const double soc_before = unit.soc;
        unit = soc_step(unit, step);
        soc_rates_[i] = (unit.soc - soc_before) / step;
    }
    instantaneous_loss_ = loss_proxy(config_.plants);
}

std::vector<double> MicrogridScenario::measure_feature(int agent_id) const {
    const auto& unit = plant(agent_id);
    if (config_.mode == MicrogridMode::loss_reduction) {
        return {normalize(unit.load_kw, config_.bounds.load),
                normalize(unit.capacity_kwh, config_.bounds.capacity)};
    }
    return {normalize(unit.price, config_.bounds.price),
            normalize(unit.capacity_kwh, config_.bounds.capacity)};
}

std::vector<double> MicrogridScenario::measure_aux(int agent_id) const {
    return {plant(agent_id).soc, soc_rates_[static_cast<size_t>(agent_id - 1)]};
}

bool MicrogridScenario::measurement_clamped(int agent_id) const {
    const auto& unit = plant(agent_id);
    auto outside = [](double v, Bounds b) { return v < b.lo || v > b.hi; };
    if (outside(unit.capacity_kwh, config_.bounds.capacity)) return true;
    if (config_.mode == MicrogridMode::loss_reduction) {
        return outside(unit.load_kw, config_.bounds.load);
    }
    return outside(unit.price, config_.bounds.price);
}

void MicrogridScenario::annotate_round(RoundRecord& record) const {
    for (auto& row : record.agents) {
        row.power = advanced_ ? plant(row.id).power_kw : 0.0;
    }
    if (config_.mode == MicrogridMode::loss_reduction) {
        record.loss = advanced_ ? instantaneous_loss_ : 0.0;
    }
}

void MicrogridScenario::append_summary(json& summary, const Trace& trace) const {
    const int cluster_count = trace.cluster_count();

    // Within-cluster state-of-charge spread per round (aux[0] carries soc).
    json spread_series = json::array();
    for (const auto& record : trace.records) {
        std::vector<double> lo(static_cast<size_t>(cluster_count),
                               std::numeric_limits<double>::infinity());
        std::vector<double> hi(static_cast<size_t>(cluster_count),
                               -std::numeric_limits<double>::infinity());
        for (const auto& agent : record.agents) {
            const auto k = static_cast<size_t>(agent.cluster - 1);
            lo[k] = std::min(lo[k], agent.aux[0]);
            hi[k] = std::max(hi[k], agent.aux[0]);
        }
        json row = json::array();
        for (int j = 0; j < cluster_count; ++j) {
            const auto jj = static_cast<size_t>(j);
            if (record.cluster_sizes[jj] == 0) {
                row.push_back(nullptr);
            } else {
                row.push_back(hi[jj] - lo[jj]);
            }
        }
        spread_series.push_back(std::move(row));
    }
    summary["soc_spread_per_round"] = std::move(spread_series);

    if (config_.mode == MicrogridMode::loss_reduction) {
        double loss_sum = 0.0;
        for (const auto& record : trace.records) loss_sum += record.loss.value_or(0.0);
        summary["cumulative_loss_proxy"] = loss_sum * step_hours_;
        summary["loss_proxy_rounds"] = trace.rounds();
    } else {
        const VesReport report = build_ves_report(trace, config_);
        const VesSelection selection = ves_select(report, *config_.requirement);
        json clusters = json::array();
        for (const auto& info : report.clusters) {
            clusters.push_back({{"cluster", info.cluster},
                                {"avg_price", info.avg_price},
                                {"avg_capacity_kwh", info.avg_capacity_kwh},
                                {"member_count", info.member_count},
                                {"total_capacity_kwh", info.total_capacity_kwh}});
        }
        summary["ves"] = {
            {"report", std::move(clusters)},
            {"report_estimate_error", report.estimate_error},
            {"accepted_clusters", selection.accepted},
            {"offered_capacity_kwh", selection.offered_capacity_kwh},
            {"feasible", selection.feasible},
            {"required_capacity_kwh", config_.requirement->required_capacity_kwh},
            {"max_price", config_.requirement->max_price},
            // member counts/totals are read from the trace; cluster-average
            // estimates alone cannot provide them
            {"totals_from_trace", true},
        };
    }
}

VesReport build_ves_report(const Trace& trace, const MicrogridConfig& config) {
    if (trace.records.empty()) {
        throw TraceError("cannot build a virtual-storage report from an empty trace");
    }
    if (!config.requirement) {
        throw std::invalid_argument("build_ves_report: no requirement configured");
    }
    const auto& final_record = trace.records.back();
    const int reader_id = config.requirement->pinned_agents.front();
    const auto& reader = final_record.agents.at(static_cast<size_t>(reader_id - 1));

    VesReport report;
    report.estimate_error = final_record.est_error_feature;
    report.tolerance = config.ves_tolerance;
    for (size_t j = 0; j < reader.feature_estimates.size(); ++j) {
        VesClusterInfo info;
        info.cluster = static_cast<int>(j) + 1;
        info.avg_price = denormalize(reader.feature_estimates[j][0], config.bounds.price);
        info.avg_capacity_kwh =
            denormalize(reader.feature_estimates[j][1], config.bounds.capacity);
        info.member_count = final_record.cluster_sizes[j];
        for (const auto& agent : final_record.agents) {
            if (agent.cluster == info.cluster) {
                info.total_capacity_kwh +=
                    config.plants.at(static_cast<size_t>(agent.id - 1)).capacity_kwh;
            }
        }
        report.clusters.push_back(info);
    }
    return report;
}

}  // namespace declust
