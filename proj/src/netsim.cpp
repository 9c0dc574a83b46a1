#include "declust/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <string>
#include <thread>

#include "declust/consensus.hpp"

namespace declust {

using nlohmann::json;

namespace {

// Uniform double in [0, 1) from the top 53 bits of one engine draw. The
// engine is fully specified by the standard, so realizations are identical
// across platforms and builds.
double uniform53(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct InFlight {
    long arrival = 0;
    EstimateMessage message;
};

}  // namespace

std::vector<ConfigIssue> validate_sim_config(const SimConfig& config) {
    std::vector<ConfigIssue> issues;
    const int n = config.graph.node_count();

    if (!config.graph.is_connected()) {
        std::string parts;
        for (const auto& component : config.graph.connected_components()) {
            parts += " {";
            for (size_t i = 0; i < component.size(); ++i) {
                if (i) parts += ",";
                parts += std::to_string(component[i]);
            }
            parts += "}";
        }
        issues.push_back({"graph", "edges",
                          "graph must be connected; components:" + parts});
    }

    if (config.cluster_count < 1) {
        issues.push_back({"protocol", "clusters",
                          "cluster count must be >= 1, got " +
                              std::to_string(config.cluster_count)});
    }
    if (n == 1 && config.cluster_count > 1) {
        issues.push_back({"protocol", "clusters",
                          "a single isolated agent cannot track clusters it is not "
                          "a member of; use clusters = 1"});
    }

    const double bound = consensus::max_stable_step(config.graph);
    if (!(config.step > 0.0)) {
        issues.push_back({"protocol", "step",
                          "step must be > 0, got " + std::to_string(config.step)});
    } else if (config.step >= bound) {
        issues.push_back({"protocol", "step",
                          "step " + std::to_string(config.step) +
                              " violates the stability bound " + std::to_string(bound) +
                              " (= 2 / lambda_max of the Laplacian)"});
    }

    if (config.rounds < 0) {
        issues.push_back({"run", "rounds", "rounds must be >= 0"});
    }

    if (!(config.hysteresis.margin >= 0.0 && config.hysteresis.margin < 1.0)) {
        issues.push_back({"protocol", "margin",
                          "hysteresis margin must lie in [0, 1), got " +
                              std::to_string(config.hysteresis.margin)});
    }
    if (config.hysteresis.dwell_rounds < 0) {
        issues.push_back({"protocol", "dwell", "dwell rounds must be >= 0"});
    }

    for (size_t e = 0; e < config.perturbations.size(); ++e) {
        const auto& event = config.perturbations[e];
        const std::string key = "perturbations[" + std::to_string(e) + "]";
        if (event.round < 0 || event.round > config.rounds) {
            issues.push_back({"perturbations", key,
                              "round " + std::to_string(event.round) +
                                  " outside [0, " + std::to_string(config.rounds) + "]"});
        }
        if (event.target < 1 || event.target > n) {
            issues.push_back({"perturbations", key,
                              "target " + std::to_string(event.target) +
                                  " outside [1, " + std::to_string(n) + "]"});
        }
        if (event.set_value.has_value() == event.add_delta.has_value()) {
            issues.push_back({"perturbations", key,
                              "exactly one of `set` and `add` must be given"});
        }
    }

    if (config.fault_model) {
        if (!(config.fault_model->drop_probability >= 0.0 &&
              config.fault_model->drop_probability < 1.0)) {
            issues.push_back({"faults", "drop_probability",
                              "drop probability must lie in [0, 1)"});
        }
        if (config.fault_model->delay_rounds < 0) {
            issues.push_back({"faults", "delay_rounds", "delay must be >= 0"});
        }
    }

    if (config.fixed_assignment) {
        if (static_cast<int>(config.fixed_assignment->size()) != n) {
            issues.push_back({"scenario", "fixed_assignment",
                              "need exactly one cluster per agent (" +
                                  std::to_string(n) + " entries)"});
        } else {
            for (int k : *config.fixed_assignment) {
                if (k < 1 || k > config.cluster_count) {
                    issues.push_back({"scenario", "fixed_assignment",
                                      "cluster " + std::to_string(k) +
                                          " outside [1, " +
                                          std::to_string(config.cluster_count) + "]"});
                    break;
                }
            }
        }
    }
    return issues;
}

namespace {

RoundRecord make_record(long round, const std::vector<AgentState>& agents,
                        int cluster_count, const Scenario& scenario) {
    RoundRecord record;
    record.round = round;
    record.cluster_sizes.assign(static_cast<size_t>(cluster_count), 0);

    const size_t n = agents.front().sample.feature.size();
    const size_t m = agents.front().sample.aux.size();
    std::vector<std::vector<double>> feature_sum(
        static_cast<size_t>(cluster_count), std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> aux_sum(static_cast<size_t>(cluster_count),
                                             std::vector<double>(m, 0.0));

    for (const auto& agent : agents) {
        const auto k = static_cast<size_t>(agent.membership.current_cluster - 1);
        ++record.cluster_sizes[k];
        for (size_t d = 0; d < n; ++d) feature_sum[k][d] += agent.sample.feature[d];
        for (size_t d = 0; d < m; ++d) aux_sum[k][d] += agent.sample.aux[d];

        AgentRound row;
        row.id = agent.id;
        row.feature = agent.sample.feature;
        row.aux = agent.sample.aux;
        row.cluster = agent.membership.current_cluster;
        row.switch_count = agent.membership.switch_count;
        row.feature_estimates = agent.estimates.feature;
        row.aux_estimates = agent.estimates.aux;
        row.clamped = scenario.measurement_clamped(agent.id);
        record.agents.push_back(std::move(row));
    }

    for (int j = 0; j < cluster_count; ++j) {
        const auto jj = static_cast<size_t>(j);
        if (record.cluster_sizes[jj] == 0) {
            record.cluster_feature_mean.emplace_back(std::nullopt);
            record.cluster_aux_mean.emplace_back(std::nullopt);
            continue;
        }
        const double inv = 1.0 / record.cluster_sizes[jj];
        auto fm = feature_sum[jj];
        for (double& v : fm) v *= inv;
        auto am = aux_sum[jj];
        for (double& v : am) v *= inv;
        record.cluster_feature_mean.emplace_back(std::move(fm));
        record.cluster_aux_mean.emplace_back(std::move(am));
    }

    double err_x = 0.0;
    double err_z = 0.0;
    for (const auto& agent : agents) {
        for (int j = 0; j < cluster_count; ++j) {
            const auto jj = static_cast<size_t>(j);
            if (!record.cluster_feature_mean[jj]) continue;
            const auto& mean_x = *record.cluster_feature_mean[jj];
            const auto& mean_z = *record.cluster_aux_mean[jj];
            for (size_t d = 0; d < n; ++d) {
                err_x = std::max(err_x,
                                 std::abs(agent.estimates.feature[jj][d] - mean_x[d]));
            }
            for (size_t d = 0; d < m; ++d) {
                err_z = std::max(err_z, std::abs(agent.estimates.aux[jj][d] - mean_z[d]));
            }
        }
    }
    record.est_error_feature = err_x;
    record.est_error_aux = err_z;

    scenario.annotate_round(record);
    return record;
}

void check_partition(const RoundRecord& record, int cluster_count) {
    for (const auto& agent : record.agents) {
        if (agent.cluster < 1 || agent.cluster > cluster_count) {
            throw ProtocolError("agent " + std::to_string(agent.id) +
                                " holds cluster " + std::to_string(agent.cluster) +
                                " outside [1, " + std::to_string(cluster_count) +
                                "] at round " + std::to_string(record.round));
        }
    }
}

// Ticks agents [begin, end) into `next`, capturing the first failure.
void tick_range(size_t begin, size_t end, const std::vector<AgentState>& agents,
                const std::vector<TickInput>& inputs,
                const std::vector<std::vector<EstimateMessage>>& inboxes,
                const Graph& graph, const HysteresisPolicy& policy, double step,
                long round, bool strict, std::vector<AgentState>& next,
                std::vector<std::exception_ptr>& failures) {
    for (size_t i = begin; i < end; ++i) {
        try {
            next[i] = agent_tick(agents[i], inputs[i], inboxes[i], graph, policy, step,
                                 round, strict);
        } catch (...) {
            failures[i] = std::current_exception();
        }
    }
}

}  // namespace

RunResult run(const SimConfig& config, Scenario& scenario, const RunOptions& options) {
    if (auto issues = validate_sim_config(config); !issues.empty()) {
        throw ConfigError(std::move(issues));
    }
    if (options.workers < 1) {
        throw ConfigError("worker count must be >= 1");
    }

    const int n = config.graph.node_count();
    const int cluster_count = config.cluster_count;
    const double step = config.step;
    const bool strict = !config.fault_model.has_value();

    // Dwell large enough that assignment can never move a pinned agent.
    HysteresisPolicy policy = config.hysteresis;
    if (config.fixed_assignment) {
        policy.dwell_rounds = std::numeric_limits<int>::max();
    }

    std::mt19937_64 rng(config.seed);

    // Perturbation schedule, bucketed by round.
    std::vector<std::vector<const PerturbationEvent*>> events(
        static_cast<size_t>(config.rounds) + 1);
    long last_perturbation_round = 0;
    for (const auto& event : config.perturbations) {
        events[static_cast<size_t>(event.round)].push_back(&event);
        last_perturbation_round = std::max(last_perturbation_round, event.round);
    }

    for (const auto* event : events[0]) scenario.apply_perturbation(*event);

    std::vector<AgentState> agents;
    agents.reserve(static_cast<size_t>(n));
    for (int id = 1; id <= n; ++id) {
        agents.push_back(init_agent(id, scenario.measure_feature(id),
                                    scenario.measure_aux(id),
                                    scenario.feature_seeds(id),
                                    scenario.aux_seeds(id)));
        if (config.fixed_assignment) {
            agents.back().membership.current_cluster =
                (*config.fixed_assignment)[static_cast<size_t>(id - 1)];
        }
    }

    Trace trace;
    trace.records.push_back(make_record(0, agents, cluster_count, scenario));
    check_partition(trace.records.back(), cluster_count);

    // In-flight messages per receiver, in deterministic send order. The
    // round-0 exchange always goes through; later sends pass the fault model.
    std::vector<std::deque<InFlight>> inflight(static_cast<size_t>(n) + 1);
    auto send_outboxes = [&](long sent_round) {
        const bool faulty = config.fault_model.has_value() && sent_round >= 1;
        for (const auto& agent : agents) {
            for (int nb : config.graph.neighbors_of(agent.id)) {
                if (faulty) {
                    const double u = uniform53(rng);
                    if (u < config.fault_model->drop_probability) continue;
                }
                const long delay =
                    (config.fault_model && sent_round >= 1)
                        ? config.fault_model->delay_rounds
                        : 0;
                inflight[static_cast<size_t>(nb)].push_back(
                    InFlight{sent_round + 1 + delay, agent.outbox});
            }
        }
    };
    send_outboxes(0);

    std::vector<AgentState> next(agents.size());
    for (long round = 1; round <= config.rounds; ++round) {
        for (const auto* event : events[static_cast<size_t>(round)]) {
            scenario.apply_perturbation(*event);
        }
        scenario.advance(round, step, agents);

        std::vector<std::vector<EstimateMessage>> inboxes(agents.size());
        for (int id = 1; id <= n; ++id) {
            auto& queue = inflight[static_cast<size_t>(id)];
            while (!queue.empty() && queue.front().arrival <= round) {
                inboxes[static_cast<size_t>(id - 1)].push_back(
                    std::move(queue.front().message));
                queue.pop_front();
            }
        }

        std::vector<TickInput> inputs(agents.size());
        for (int id = 1; id <= n; ++id) {
            inputs[static_cast<size_t>(id - 1)] =
                TickInput{scenario.measure_feature(id), scenario.measure_aux(id)};
        }

        std::vector<std::exception_ptr> failures(agents.size());
        if (options.workers == 1 || agents.size() == 1) {
            tick_range(0, agents.size(), agents, inputs, inboxes, config.graph, policy,
                       step, round, strict, next, failures);
        } else {
            const size_t workers =
                std::min<size_t>(static_cast<size_t>(options.workers), agents.size());
            std::vector<std::thread> pool;
            const size_t chunk = (agents.size() + workers - 1) / workers;
            for (size_t w = 0; w < workers; ++w) {
                const size_t begin = w * chunk;
                const size_t end = std::min(agents.size(), begin + chunk);
                if (begin >= end) break;
                pool.emplace_back(tick_range, begin, end, std::cref(agents),
                                  std::cref(inputs), std::cref(inboxes),
                                  std::cref(config.graph), std::cref(policy), step,
                                  round, strict, std::ref(next), std::ref(failures));
            }
            for (auto& t : pool) t.join();
        }
        for (const auto& failure : failures) {
            if (failure) std::rethrow_exception(failure);
        }

        agents.swap(next);
        send_outboxes(round);

        trace.records.push_back(make_record(round, agents, cluster_count, scenario));
        check_partition(trace.records.back(), cluster_count);
    }

    SummarizeOptions sum_options;
    sum_options.last_perturbation_round = last_perturbation_round;
    json summary = summarize(trace, sum_options);
    summary["rng"] = kRngName;
    summary["seed"] = config.seed;
    summary["step"] = step;
    summary["coupling"] = config.graph.coupling_strength();
    summary["stability_bound"] = consensus::max_stable_step(config.graph);
    summary["last_perturbation_round"] = last_perturbation_round;
    if (config.fault_model) {
        summary["fault_model"] = {{"drop_probability", config.fault_model->drop_probability},
                                  {"delay_rounds", config.fault_model->delay_rounds}};
    } else {
        summary["fault_model"] = nullptr;
    }
    scenario.append_summary(summary, trace);
    return RunResult{std::move(trace), std::move(summary)};
}

}  // namespace declust
