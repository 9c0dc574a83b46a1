#include "declust/consensus.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

namespace declust::consensus {

namespace {

void require_finite(std::span<const double> v, const char* what) {
    if (!all_finite(v)) {
        throw NumericalFault(std::string("non-finite value in ") + what);
    }
}

void require_dim(size_t got, size_t want, const char* what) {
    if (got != want) {
        throw NumericalFault(std::string("dimension mismatch in ") + what + ": " +
                             std::to_string(got) + " vs " + std::to_string(want));
    }
}

void add_consensus_term(std::vector<double>& next, std::span<const double> own,
                        const std::vector<std::span<const double>>& neighbors,
                        double gain_times_step, const char* what) {
    for (const auto& nb : neighbors) {
        require_dim(nb.size(), own.size(), what);
        require_finite(nb, what);
        for (size_t d = 0; d < own.size(); ++d) {
            next[d] += gain_times_step * (nb[d] - own[d]);
        }
    }
}

}  // namespace

double tracking_gain(double coupling) { return coupling; }
double integral_gain(double coupling) { return coupling * coupling; }

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::vector<double> finite_difference_rate(std::span<const double> current,
                                           std::span<const double> previous,
                                           double step) {
    std::vector<double> rate(current.size(), 0.0);
    if (previous.empty()) return rate;  // round 0: no prior sample
    require_dim(previous.size(), current.size(), "finite_difference_rate");
    for (size_t d = 0; d < current.size(); ++d) {
        rate[d] = (current[d] - previous[d]) / step;
    }
    return rate;
}

std::vector<double> step_member_estimate(
    std::span<const double> own_rate, std::span<const double> own_state,
    std::span<const double> own_estimate, std::span<const double> integral,
    const std::vector<std::span<const double>>& neighbor_estimates,
    double coupling, double step) {
    const size_t dim = own_estimate.size();
    require_dim(own_rate.size(), dim, "member update (rate)");
    require_dim(own_state.size(), dim, "member update (state)");
    require_dim(integral.size(), dim, "member update (integral)");
    require_finite(own_rate, "member update (own rate)");
    require_finite(own_state, "member update (own state)");
    require_finite(own_estimate, "member update (own estimate)");
    require_finite(integral, "member update (integral)");

    const double gamma = tracking_gain(coupling);
    std::vector<double> next(own_estimate.begin(), own_estimate.end());
    for (size_t d = 0; d < dim; ++d) {
        next[d] += step * (own_rate[d] + gamma * (own_state[d] - own_estimate[d]) +
                           integral[d]);
    }
    add_consensus_term(next, own_estimate, neighbor_estimates, step * coupling,
                       "member update (neighbor estimate)");
    return next;
}

std::vector<double> step_passthrough_estimate(
    std::span<const double> own_estimate, std::span<const double> integral,
    const std::vector<std::span<const double>>& neighbor_estimates,
    double coupling, double step) {
    if (neighbor_estimates.empty()) {
        throw ProtocolError("non-member with no neighbors cannot track cluster");
    }
    const size_t dim = own_estimate.size();
    require_dim(integral.size(), dim, "pass-through update (integral)");
    require_finite(own_estimate, "pass-through update (own estimate)");
    require_finite(integral, "pass-through update (integral)");

    std::vector<double> next(own_estimate.begin(), own_estimate.end());
    for (size_t d = 0; d < dim; ++d) next[d] += step * integral[d];
    add_consensus_term(next, own_estimate, neighbor_estimates, step * coupling,
                       "pass-through update (neighbor estimate)");
    return next;
}

std::vector<double> step_integrator(
    std::span<const double> integral, std::span<const double> own_estimate,
    const std::vector<std::span<const double>>& neighbor_estimates,
    double coupling, double step) {
    const size_t dim = own_estimate.size();
    require_dim(integral.size(), dim, "integrator update");
    require_finite(integral, "integrator update");
    require_finite(own_estimate, "integrator update (own estimate)");

    std::vector<double> next(integral.begin(), integral.end());
    add_consensus_term(next, own_estimate, neighbor_estimates,
                       step * integral_gain(coupling), "integrator update");
    return next;
}

double max_stable_step(const Graph& g) {
    if (g.node_count() == 1) {
        return std::numeric_limits<double>::infinity();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g.laplacian());
    const double lambda_max = solver.eigenvalues().maxCoeff();
    return 2.0 / lambda_max;
}

}  // namespace declust::consensus
