#include "declust/clustering.hpp"

#include <cmath>
#include <string>

namespace declust {

void HysteresisPolicy::validate() const {
    if (!(margin >= 0.0 && margin < 1.0)) {
        throw ConfigError({{"protocol", "margin",
                            "hysteresis margin must lie in [0, 1), got " +
                                std::to_string(margin)}});
    }
    if (dwell_rounds < 0) {
        throw ConfigError({{"protocol", "dwell",
                            "dwell rounds must be >= 0, got " +
                                std::to_string(dwell_rounds)}});
    }
}

double distance(std::span<const double> x, std::span<const double> estimate) {
    if (x.size() != estimate.size()) {
        throw NumericalFault("distance: dimension mismatch, " +
                             std::to_string(x.size()) + " vs " +
                             std::to_string(estimate.size()));
    }
    double sum = 0.0;
    for (size_t d = 0; d < x.size(); ++d) {
        const double diff = x[d] - estimate[d];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

int nearest_cluster(std::span<const double> x,
                    const std::vector<std::vector<double>>& estimates) {
    if (estimates.empty()) {
        throw NumericalFault("nearest_cluster: no cluster estimates");
    }
    int best = 1;
    double best_dist = distance(x, estimates[0]);
    for (size_t j = 1; j < estimates.size(); ++j) {
        const double dist = distance(x, estimates[j]);
        if (dist < best_dist) {  // strict: ties keep the lower index
            best = static_cast<int>(j) + 1;
            best_dist = dist;
        }
    }
    return best;
}

Membership assign_cluster(std::span<const double> x,
                          const std::vector<std::vector<double>>& estimates,
                          Membership membership, const HysteresisPolicy& policy) {
    for (size_t j = 0; j < estimates.size(); ++j) {
        if (!consensus::all_finite(estimates[j])) {
            throw NumericalFault("assign_cluster: non-finite estimate for cluster " +
                                 std::to_string(j + 1) + " at agent " +
                                 std::to_string(membership.owner),
                                 membership.owner);
        }
    }

    const int best = nearest_cluster(x, estimates);
    if (best == membership.current_cluster) {
        membership.candidate_cluster = 0;
        membership.candidate_streak = 0;
        return membership;
    }

    // With a zero margin the challenger always qualifies (the argmin distance
    // never exceeds the incumbent's, ties included), which makes (0, 0)
    // reproduce the raw argmin rule exactly.
    const double best_dist = distance(x, estimates[static_cast<size_t>(best - 1)]);
    const double current_dist =
        distance(x, estimates[static_cast<size_t>(membership.current_cluster - 1)]);
    const bool qualifies =
        policy.margin == 0.0 || best_dist < (1.0 - policy.margin) * current_dist;

    if (!qualifies) {
        membership.candidate_cluster = 0;
        membership.candidate_streak = 0;
        return membership;
    }

    if (membership.candidate_cluster == best) {
        ++membership.candidate_streak;
    } else {
        membership.candidate_cluster = best;
        membership.candidate_streak = 1;
    }

    if (membership.candidate_streak >= policy.dwell_rounds) {
        membership.current_cluster = best;
        ++membership.switch_count;
        membership.candidate_cluster = 0;
        membership.candidate_streak = 0;
    }
    return membership;
}

ClusterResults cluster_results(const Membership& membership,
                               const ClusterEstimates& estimates) {
    return ClusterResults{membership.current_cluster, estimates.feature,
                          estimates.aux};
}

}  // namespace declust
