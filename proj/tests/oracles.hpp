#pragma once

// Test-only oracles, independent of the library's implementation paths:
// dense-matrix graph construction, breadth-first connectivity, brute-force
// nearest-cluster search, direct member means, and closed-form spectra.

#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracles {

// Dense adjacency built directly from the edge list, nothing shared with
// the library's storage.
inline std::vector<std::vector<double>> dense_adjacency(
    int n, const std::vector<std::pair<int, int>>& edges, double coupling) {
    std::vector<std::vector<double>> a(static_cast<size_t>(n),
                                       std::vector<double>(static_cast<size_t>(n), 0.0));
    for (const auto& [i, j] : edges) {
        a[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)] = coupling;
        a[static_cast<size_t>(j - 1)][static_cast<size_t>(i - 1)] = coupling;
    }
    return a;
}

inline bool bfs_connected(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n <= 1) return true;
    std::vector<std::vector<int>> adj(static_cast<size_t>(n) + 1);
    for (const auto& [i, j] : edges) {
        adj[static_cast<size_t>(i)].push_back(j);
        adj[static_cast<size_t>(j)].push_back(i);
    }
    std::vector<bool> seen(static_cast<size_t>(n) + 1, false);
    std::queue<int> q;
    q.push(1);
    seen[1] = true;
    int count = 0;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        ++count;
        for (int v : adj[static_cast<size_t>(u)]) {
            if (!seen[static_cast<size_t>(v)]) {
                seen[static_cast<size_t>(v)] = true;
                q.push(v);
            }
        }
    }
    return count == n;
}

// Brute-force nearest cluster, lowest index on ties.
inline int argmin_cluster(const std::vector<double>& x,
                          const std::vector<std::vector<double>>& estimates) {
    int best = 1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < estimates.size(); ++j) {
        double sum = 0.0;
        for (size_t d = 0; d < x.size(); ++d) {
            const double diff = x[d] - estimates[j][d];
            sum += diff * diff;
        }
        const double dist = std::sqrt(sum);
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(j) + 1;
        }
    }
    return best;
}

// Member mean per cluster; empty clusters give an empty optional slot.
inline std::vector<std::vector<double>> member_means(
    const std::vector<std::vector<double>>& states, const std::vector<int>& clusters,
    int cluster_count, std::vector<bool>* nonempty = nullptr) {
    const size_t dim = states.empty() ? 0 : states.front().size();
    std::vector<std::vector<double>> means(static_cast<size_t>(cluster_count),
                                           std::vector<double>(dim, 0.0));
    std::vector<int> counts(static_cast<size_t>(cluster_count), 0);
    for (size_t i = 0; i < states.size(); ++i) {
        const auto k = static_cast<size_t>(clusters[i] - 1);
        ++counts[k];
        for (size_t d = 0; d < dim; ++d) means[k][d] += states[i][d];
    }
    if (nonempty) nonempty->assign(static_cast<size_t>(cluster_count), false);
    for (size_t k = 0; k < means.size(); ++k) {
        if (counts[k] > 0) {
            for (double& v : means[k]) v /= counts[k];
            if (nonempty) (*nonempty)[k] = true;
        }
    }
    return means;
}

// Ring Laplacian spectrum in closed form: 2*alpha*(1 - cos(2*pi*k/n)).
inline double ring_lambda_max(int n, double coupling) {
    double lam = 0.0;
    for (int k = 0; k < n; ++k) {
        const double v =
            2.0 * coupling * (1.0 - std::cos(2.0 * std::numbers::pi * k / n));
        lam = std::max(lam, v);
    }
    return lam;
}

inline std::vector<std::pair<int, int>> ring_edges(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 1; i <= n; ++i) edges.emplace_back(i, i % n + 1);
    return edges;
}

// Random connected graph: spanning tree plus extra random edges.
inline std::vector<std::pair<int, int>> random_connected_edges(int n,
                                                               std::mt19937_64& rng,
                                                               double extra_edge_prob) {
    std::vector<std::pair<int, int>> edges;
    std::set<std::pair<int, int>> seen;
    for (int v = 2; v <= n; ++v) {
        const int u = 1 + static_cast<int>(rng() % static_cast<unsigned>(v - 1));
        edges.emplace_back(std::min(u, v), std::max(u, v));
        seen.insert(edges.back());
    }
    const double denom = 0x1.0p64;
    for (int i = 1; i <= n; ++i) {
        for (int j = i + 1; j <= n; ++j) {
            if (seen.count({i, j})) continue;
            if (static_cast<double>(rng()) / denom < extra_edge_prob) {
                edges.emplace_back(i, j);
                seen.insert({i, j});
            }
        }
    }
    return edges;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

}  // namespace oracles
