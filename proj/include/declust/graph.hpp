#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "declust/errors.hpp"

namespace declust {

// Neighbourhood of one node: the set of peers it exchanges messages with.
struct NeighborSet {
    int owner = 0;
    std::vector<int> members;  // sorted, 1-based node ids

    int degree() const { return static_cast<int>(members.size()); }
};

// Sparse undirected communication topology with a uniform coupling strength.
// Node ids are 1-based everywhere (configs, traces, this API). Immutable
// after construction, so concurrent reads are safe.
class Graph {
public:
    // Validates and normalizes the edge list. Throws GraphError naming the
    // offending edge/parameter on self-loops, duplicates, out-of-range
    // endpoints or a non-positive coupling strength.
    Graph(int node_count, const std::vector<std::pair<int, int>>& edges,
          double coupling_strength);

    int node_count() const { return node_count_; }
    double coupling_strength() const { return coupling_; }

    // Normalized edges: first < second, lexicographically sorted.
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }

    // Adjacency entry a_ij: coupling strength if (i,j) is an edge, else 0.
    double adjacency(int i, int j) const;

    bool has_edge(int i, int j) const;

    // Sorted neighbor ids of node i.
    const std::vector<int>& neighbors_of(int i) const;

    NeighborSet neighbors(int i) const;
    int degree(int i) const { return static_cast<int>(neighbors_of(i).size()); }

    // L = D - A with D = diag(sum_j a_ij). Row r corresponds to node r+1.
    // Every row sums to zero by construction.
    Eigen::MatrixXd laplacian() const;

    bool is_connected() const;

    // Connected components as sorted node-id lists (sorted by smallest member).
    std::vector<std::vector<int>> connected_components() const;

private:
    void check_node(int i) const;

    int node_count_ = 0;
    double coupling_ = 0.0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> adjacency_;  // index 0 unused; ids are 1-based
};

}  // namespace declust
