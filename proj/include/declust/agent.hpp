#pragma once

#include <map>
#include <vector>

#include "declust/clustering.hpp"
#include "declust/consensus.hpp"
#include "declust/graph.hpp"

namespace declust {

// Wire payload exchanged between neighbours once per round: all M feature
// and auxiliary estimates plus their derivatives. Derivatives travel in the
// message so receivers never have to re-difference a neighbour's estimates;
// the one-step lag of the pass-through law is explicit in the wire format.
struct EstimateMessage {
    int sender = 0;
    long round = 0;
    std::vector<std::vector<double>> feature;       // [M][n]
    std::vector<std::vector<double>> aux;           // [M][m]
    std::vector<std::vector<double>> feature_rate;  // [M][n]
    std::vector<std::vector<double>> aux_rate;      // [M][m]
};

// Full per-agent protocol state. One logical owner per round; a tick reads
// a snapshot and returns a fresh state, so agents can tick in parallel.
struct AgentState {
    int id = 0;
    long round = 0;  // round this state reflects
    StateSample sample;
    Membership membership;
    ClusterEstimates estimates;
    EstimateMessage outbox;
    // Last message accepted from each neighbour. Under an ideal network this
    // is simply the previous round's message; under a lossy/delayed network
    // the agent keeps tracking with whatever it last heard.
    std::map<int, EstimateMessage> neighbor_cache;
};

struct TickInput {
    std::vector<double> feature;
    std::vector<double> aux;
};

// Builds the round-0 state: rates zero, membership = raw nearest-cluster
// rule over the initial estimates, outbox stamped round 0.
AgentState init_agent(int id, std::vector<double> feature, std::vector<double> aux,
                      std::vector<std::vector<double>> feature_seeds,
                      std::vector<std::vector<double>> aux_seeds);

// One protocol round for one agent: ingest the measured state and update
// rates, fold neighbour messages into the cache, re-assign the cluster from
// the agent's own pre-update estimates, apply the member law to the owned
// cluster channel and the pass-through law to all others (feature and
// auxiliary alike), then stamp the outbox.
//
// With `strict_inbox` (the ideal-network contract) the inbox must contain
// exactly one message per graph neighbour stamped `round - 1`; violations
// raise ProtocolError. Without it (lossy/delayed networks) the inbox may be
// any subset and the cache fills the gaps.
AgentState agent_tick(const AgentState& previous, const TickInput& measured,
                      const std::vector<EstimateMessage>& inbox, const Graph& graph,
                      const HysteresisPolicy& policy, double step, long round,
                      bool strict_inbox = true);

}  // namespace declust
