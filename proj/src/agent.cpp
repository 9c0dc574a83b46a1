#include "declust/agent.hpp"

#include <algorithm>
#include <string>

namespace declust {

namespace {

void require_matrix_dims(const std::vector<std::vector<double>>& rows, int cluster_count,
                         size_t dim, const char* what) {
    if (rows.size() != static_cast<size_t>(cluster_count)) {
        throw NumericalFault(std::string(what) + ": expected " +
                             std::to_string(cluster_count) + " clusters, got " +
                             std::to_string(rows.size()));
    }
    for (const auto& row : rows) {
        if (row.size() != dim) {
            throw NumericalFault(std::string(what) + ": estimate dimension " +
                                 std::to_string(row.size()) + " != " +
                                 std::to_string(dim));
        }
        if (!consensus::all_finite(row)) {
            throw NumericalFault(std::string(what) + ": non-finite entry");
        }
    }
}

EstimateMessage make_outbox(const AgentState& state, long round) {
    return EstimateMessage{state.id,
                           round,
                           state.estimates.feature,
                           state.estimates.aux,
                           state.estimates.feature_rate,
                           state.estimates.aux_rate};
}

// Validates the inbox against the graph neighbourhood and merges it into the
// cache. Returns the cache ready for this round's updates.
std::map<int, EstimateMessage> merge_inbox(const AgentState& prev,
                                           const std::vector<EstimateMessage>& inbox,
                                           const Graph& graph, long round,
                                           bool strict) {
    const auto& neighbors = graph.neighbors_of(prev.id);
    auto cache = prev.neighbor_cache;

    std::map<int, int> seen;
    for (const auto& msg : inbox) {
        if (!std::binary_search(neighbors.begin(), neighbors.end(), msg.sender)) {
            throw ProtocolError("agent " + std::to_string(prev.id) +
                                ": message from non-neighbor " +
                                std::to_string(msg.sender) + " at round " +
                                std::to_string(round));
        }
        if (++seen[msg.sender] > 1) {
            throw ProtocolError("agent " + std::to_string(prev.id) +
                                ": duplicate message from " +
                                std::to_string(msg.sender) + " at round " +
                                std::to_string(round));
        }
        if (strict && msg.round != round - 1) {
            throw ProtocolError("agent " + std::to_string(prev.id) +
                                ": stale message from " + std::to_string(msg.sender) +
                                " stamped " + std::to_string(msg.round) +
                                ", expected " + std::to_string(round - 1));
        }
        auto it = cache.find(msg.sender);
        if (it != cache.end() && msg.round <= it->second.round) {
            throw ProtocolError("agent " + std::to_string(prev.id) +
                                ": non-increasing round stamp from " +
                                std::to_string(msg.sender));
        }
        cache[msg.sender] = msg;
    }

    if (strict) {
        for (int nb : neighbors) {
            if (!seen.count(nb)) {
                throw ProtocolError("agent " + std::to_string(prev.id) +
                                    ": missing message from neighbor " +
                                    std::to_string(nb) + " at round " +
                                    std::to_string(round));
            }
        }
    }
    for (int nb : neighbors) {
        if (!cache.count(nb)) {
            throw ProtocolError("agent " + std::to_string(prev.id) +
                                ": no estimates ever received from neighbor " +
                                std::to_string(nb));
        }
    }
    return cache;
}

}  // namespace

AgentState init_agent(int id, std::vector<double> feature, std::vector<double> aux,
                      std::vector<std::vector<double>> feature_seeds,
                      std::vector<std::vector<double>> aux_seeds) {
    const int cluster_count = static_cast<int>(feature_seeds.size());
    if (cluster_count < 1) {
        throw ConfigError({{"protocol", "feature_seeds",
                            "at least one cluster seed required"}});
    }
    if (aux_seeds.size() != feature_seeds.size()) {
        throw ConfigError({{"protocol", "aux_seeds",
                            "need one auxiliary seed per cluster (got " +
                                std::to_string(aux_seeds.size()) + ", want " +
                                std::to_string(cluster_count) + ")"}});
    }
    require_matrix_dims(feature_seeds, cluster_count, feature.size(),
                        "initial feature estimates");
    require_matrix_dims(aux_seeds, cluster_count, aux.size(),
                        "initial auxiliary estimates");

    AgentState state;
    state.id = id;
    state.round = 0;
    state.sample.feature = std::move(feature);
    state.sample.aux = std::move(aux);
    state.sample.feature_rate.assign(state.sample.feature.size(), 0.0);
    state.sample.aux_rate.assign(state.sample.aux.size(), 0.0);

    const auto clusters = static_cast<size_t>(cluster_count);
    const size_t n = state.sample.feature.size();
    const size_t m = state.sample.aux.size();

    state.estimates.owner = id;
    state.estimates.cluster_count = cluster_count;
    state.estimates.feature = std::move(feature_seeds);
    state.estimates.aux = std::move(aux_seeds);
    state.estimates.feature_rate.assign(clusters, std::vector<double>(n, 0.0));
    state.estimates.aux_rate.assign(clusters, std::vector<double>(m, 0.0));
    state.estimates.feature_integral.assign(clusters, std::vector<double>(n, 0.0));
    state.estimates.aux_integral.assign(clusters, std::vector<double>(m, 0.0));

    state.membership.owner = id;
    state.membership.current_cluster =
        nearest_cluster(state.sample.feature, state.estimates.feature);

    state.outbox = make_outbox(state, 0);
    return state;
}

AgentState agent_tick(const AgentState& previous, const TickInput& measured,
                      const std::vector<EstimateMessage>& inbox, const Graph& graph,
                      const HysteresisPolicy& policy, double step, long round,
                      bool strict_inbox) {
    const size_t n = previous.sample.feature.size();
    const size_t m = previous.sample.aux.size();
    if (measured.feature.size() != n || measured.aux.size() != m) {
        throw NumericalFault("agent " + std::to_string(previous.id) +
                                 ": measured state dimension changed mid-run",
                             previous.id, round);
    }
    if (!consensus::all_finite(measured.feature) ||
        !consensus::all_finite(measured.aux)) {
        throw NumericalFault("agent " + std::to_string(previous.id) +
                                 ": non-finite measurement at round " +
                                 std::to_string(round),
                             previous.id, round);
    }

    AgentState next = previous;
    next.round = round;

    // Measure and difference this round's sample.
    next.sample.feature = measured.feature;
    next.sample.aux = measured.aux;
    next.sample.feature_rate =
        consensus::finite_difference_rate(measured.feature, previous.sample.feature, step);
    next.sample.aux_rate =
        consensus::finite_difference_rate(measured.aux, previous.sample.aux, step);

    next.neighbor_cache = merge_inbox(previous, inbox, graph, round, strict_inbox);

    // Assignment reads the agent's own pre-update estimates.
    next.membership =
        assign_cluster(next.sample.feature, previous.estimates.feature,
                       previous.membership, policy);
    const int own = next.membership.current_cluster;

    const auto& neighbors = graph.neighbors_of(previous.id);
    const double coupling = graph.coupling_strength();
    const int cluster_count = previous.estimates.cluster_count;

    std::vector<std::span<const double>> nb_estimates(neighbors.size());

    // One estimate channel: the member law for the agent's own cluster, the
    // pass-through law for every other, plus the shared integrator.
    auto update_channel =
        [&](const std::vector<std::vector<double>>& prev_est,
            const std::vector<std::vector<double>>& prev_integral, auto channel_of,
            std::span<const double> own_state, std::span<const double> own_rate,
            int cluster, const char* channel)
        -> std::pair<std::vector<double>, std::vector<double>> {
        for (size_t l = 0; l < neighbors.size(); ++l) {
            const auto& msg = next.neighbor_cache.at(neighbors[l]);
            nb_estimates[l] = channel_of(msg, cluster);
        }
        try {
            const auto& own_est = prev_est[static_cast<size_t>(cluster)];
            const auto& integral = prev_integral[static_cast<size_t>(cluster)];
            std::vector<double> est =
                (cluster + 1 == own)
                    ? consensus::step_member_estimate(own_rate, own_state, own_est,
                                                      integral, nb_estimates, coupling,
                                                      step)
                    : consensus::step_passthrough_estimate(own_est, integral,
                                                           nb_estimates, coupling, step);
            std::vector<double> next_integral = consensus::step_integrator(
                integral, own_est, nb_estimates, coupling, step);
            return {std::move(est), std::move(next_integral)};
        } catch (const NumericalFault& fault) {
            throw NumericalFault("agent " + std::to_string(previous.id) + ", " +
                                     channel + " channel, cluster " +
                                     std::to_string(cluster + 1) + ", round " +
                                     std::to_string(round) + ": " + fault.what(),
                                 previous.id, round);
        }
    };

    for (int j = 0; j < cluster_count; ++j) {
        const auto jj = static_cast<size_t>(j);
        auto [est, integral] = update_channel(
            previous.estimates.feature, previous.estimates.feature_integral,
            [](const EstimateMessage& msg, int c) {
                return std::span<const double>(msg.feature[static_cast<size_t>(c)]);
            },
            next.sample.feature, next.sample.feature_rate, j, "feature");
        next.estimates.feature[jj] = std::move(est);
        next.estimates.feature_integral[jj] = std::move(integral);
    }
    if (m > 0) {
        for (int j = 0; j < cluster_count; ++j) {
            const auto jj = static_cast<size_t>(j);
            auto [est, integral] = update_channel(
                previous.estimates.aux, previous.estimates.aux_integral,
                [](const EstimateMessage& msg, int c) {
                    return std::span<const double>(msg.aux[static_cast<size_t>(c)]);
                },
                next.sample.aux, next.sample.aux_rate, j, "auxiliary");
            next.estimates.aux[jj] = std::move(est);
            next.estimates.aux_integral[jj] = std::move(integral);
        }
    }

    // Estimate derivatives for round t are exactly (est(t) - est(t-1)) / h;
    // they ride in the outbox alongside the estimates.
    for (int j = 0; j < cluster_count; ++j) {
        const auto jj = static_cast<size_t>(j);
        next.estimates.feature_rate[jj] = consensus::finite_difference_rate(
            next.estimates.feature[jj], previous.estimates.feature[jj], step);
        next.estimates.aux_rate[jj] = consensus::finite_difference_rate(
            next.estimates.aux[jj], previous.estimates.aux[jj], step);
    }

    next.outbox = make_outbox(next, round);
    return next;
}

}  // namespace declust
