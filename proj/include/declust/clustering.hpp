#pragma once

#include <span>
#include <vector>

#include "declust/consensus.hpp"
#include "declust/errors.hpp"

namespace declust {

// An agent's cluster membership plus the bookkeeping the hysteresis policy
// needs: the cluster currently challenging the incumbent and for how many
// consecutive rounds it has kept its lead.
struct Membership {
    int owner = 0;
    int current_cluster = 1;    // (1..M)
    int candidate_cluster = 0;  // 0 = none
    int candidate_streak = 0;   // 0 whenever candidate_cluster is none
    long switch_count = 0;
};

// Switch suppression for the assignment rule. A challenger must beat the
// incumbent's distance by a relative margin for `dwell_rounds` consecutive
// rounds before the agent actually moves. (0, 0) disables suppression and
// the assignment is the raw per-round argmin.
struct HysteresisPolicy {
    double margin = 0.05;  // epsilon in [0, 1)
    int dwell_rounds = 10; // tau >= 0

    static HysteresisPolicy raw() { return {0.0, 0}; }
    void validate() const;
};

// Euclidean distance between an agent state and a cluster-average estimate.
double distance(std::span<const double> x, std::span<const double> estimate);

// Index (1-based) of the estimate nearest to x; ties break to the lowest
// cluster index.
int nearest_cluster(std::span<const double> x,
                    const std::vector<std::vector<double>>& estimates);

// One assignment round. Computes the nearest cluster and applies the
// hysteresis policy to decide whether membership actually changes.
Membership assign_cluster(std::span<const double> x,
                          const std::vector<std::vector<double>>& estimates,
                          Membership membership, const HysteresisPolicy& policy);

// The three per-agent protocol outputs: own cluster index, feature-average
// estimates for all clusters, auxiliary-average estimates for all clusters.
struct ClusterResults {
    int own_cluster = 1;                               // clstr_rslt_a
    std::vector<std::vector<double>> feature_averages; // clstr_rslt_b
    std::vector<std::vector<double>> aux_averages;     // clstr_rslt_c
};

ClusterResults cluster_results(const Membership& membership,
                               const ClusterEstimates& estimates);

}  // namespace declust
