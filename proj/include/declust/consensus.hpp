#pragma once

#include <span>
#include <vector>

#include "declust/errors.hpp"
#include "declust/graph.hpp"

namespace declust {

// One agent's measured state at a round: the feature vector that drives
// cluster assignment, the auxiliary vector averaged for downstream control,
// and their backward-difference rates (zero at round 0).
struct StateSample {
    std::vector<double> feature;       // x_i
    std::vector<double> aux;           // z_i (may be empty)
    std::vector<double> feature_rate;  // (x(t) - x(t-1)) / h
    std::vector<double> aux_rate;
};

// Per-agent estimates of the average feature/auxiliary state of every
// cluster. Each channel carries the estimate itself, its backward
// difference (transported to neighbours), and a local integral state that
// accumulates the neighbourhood disagreement. The integrals sum to zero
// across the network by construction, which pins the stationary estimate of
// every occupied cluster at the exact member mean regardless of the seeds.
struct ClusterEstimates {
    int owner = 0;
    int cluster_count = 0;
    std::vector<std::vector<double>> feature;           // [M][n]
    std::vector<std::vector<double>> aux;               // [M][m]
    std::vector<std::vector<double>> feature_rate;      // [M][n]
    std::vector<std::vector<double>> aux_rate;          // [M][m]
    std::vector<std::vector<double>> feature_integral;  // [M][n], local only
    std::vector<std::vector<double>> aux_integral;      // [M][m], local only
};

namespace consensus {

// Estimator gains, tied to the coupling strength: the member tracking gain
// gamma = alpha and the integral gain beta = alpha^2. Stable together with
// the consensus coupling for any step below max_stable_step (verified over
// randomized connected graphs and membership patterns).
double tracking_gain(double coupling);
double integral_gain(double coupling);

// Backward difference (current - previous) / h. An empty `previous` means
// round 0: the rate is defined as zero.
std::vector<double> finite_difference_rate(std::span<const double> current,
                                           std::span<const double> previous,
                                           double step);

// Member update, forward-Euler step of
//   d/dt est_i = own_rate + gamma (own_state - est_i)
//              + alpha sum_l (est_l - est_i) + integral_i .
// Members inject their own state: the derivative term feeds fast tracking,
// the proportional term anchors the stationary point to member data.
std::vector<double> step_member_estimate(
    std::span<const double> own_rate, std::span<const double> own_state,
    std::span<const double> own_estimate, std::span<const double> integral,
    const std::vector<std::span<const double>>& neighbor_estimates,
    double coupling, double step);

// Pass-through update, forward-Euler step of
//   d/dt est_i = alpha sum_l (est_l - est_i) + integral_i .
// Agents outside the cluster relay agreement without injecting their own
// state, so they converge to whatever the members agree on.
std::vector<double> step_passthrough_estimate(
    std::span<const double> own_estimate, std::span<const double> integral,
    const std::vector<std::span<const double>>& neighbor_estimates,
    double coupling, double step);

// Integral-state update, forward-Euler step of
//   d/dt integral_i = beta sum_l (est_l - est_i) .
// The network-wide sum of integrals is invariant (symmetric coupling), and
// with all-zero initialization that invariant forces the stationary
// agreement value of an occupied cluster to the exact member mean.
std::vector<double> step_integrator(
    std::span<const double> integral, std::span<const double> own_estimate,
    const std::vector<std::span<const double>>& neighbor_estimates,
    double coupling, double step);

// Explicit-Euler stability bound 2 / lambda_max(L). Run steps must stay
// strictly below this.
double max_stable_step(const Graph& g);

bool all_finite(std::span<const double> v);

}  // namespace consensus

}  // namespace declust
