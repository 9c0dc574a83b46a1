#include "declust/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <string>

namespace declust {

namespace {

std::string edge_str(int a, int b) {
    return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

}  // namespace

Graph::Graph(int node_count, const std::vector<std::pair<int, int>>& edges,
             double coupling_strength)
    : node_count_(node_count), coupling_(coupling_strength) {
    if (node_count < 1) {
        throw GraphError("node count must be >= 1, got " + std::to_string(node_count));
    }
    if (!(coupling_strength > 0.0)) {
        throw GraphError("coupling strength must be > 0, got " +
                         std::to_string(coupling_strength));
    }

    adjacency_.assign(static_cast<size_t>(node_count) + 1, {});

    std::set<std::pair<int, int>> seen;
    for (const auto& [a, b] : edges) {
        if (a < 1 || a > node_count || b < 1 || b > node_count) {
            throw GraphError("edge " + edge_str(a, b) + " has endpoint outside [1, " +
                             std::to_string(node_count) + "]");
        }
        if (a == b) {
            throw GraphError("self-loop " + edge_str(a, b) + " is not allowed");
        }
        auto key = std::minmax(a, b);
        if (!seen.insert(key).second) {
            throw GraphError("duplicate edge " + edge_str(a, b));
        }
    }

    edges_.assign(seen.begin(), seen.end());
    for (const auto& [a, b] : edges_) {
        adjacency_[static_cast<size_t>(a)].push_back(b);
        adjacency_[static_cast<size_t>(b)].push_back(a);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

void Graph::check_node(int i) const {
    if (i < 1 || i > node_count_) {
        throw GraphError("node index " + std::to_string(i) + " outside [1, " +
                         std::to_string(node_count_) + "]");
    }
}

double Graph::adjacency(int i, int j) const {
    return has_edge(i, j) ? coupling_ : 0.0;
}

bool Graph::has_edge(int i, int j) const {
    check_node(i);
    check_node(j);
    const auto& nbrs = adjacency_[static_cast<size_t>(i)];
    return std::binary_search(nbrs.begin(), nbrs.end(), j);
}

const std::vector<int>& Graph::neighbors_of(int i) const {
    check_node(i);
    return adjacency_[static_cast<size_t>(i)];
}

NeighborSet Graph::neighbors(int i) const {
    return NeighborSet{i, neighbors_of(i)};
}

Eigen::MatrixXd Graph::laplacian() const {
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(node_count_, node_count_);
    for (const auto& [a, b] : edges_) {
        lap(a - 1, b - 1) -= coupling_;
        lap(b - 1, a - 1) -= coupling_;
        lap(a - 1, a - 1) += coupling_;
        lap(b - 1, b - 1) += coupling_;
    }
    return lap;
}

bool Graph::is_connected() const {
    return connected_components().size() == 1;
}

std::vector<std::vector<int>> Graph::connected_components() const {
    std::vector<bool> visited(static_cast<size_t>(node_count_) + 1, false);
    std::vector<std::vector<int>> components;

    for (int start = 1; start <= node_count_; ++start) {
        if (visited[static_cast<size_t>(start)]) continue;
        std::vector<int> component;
        std::queue<int> frontier;
        frontier.push(start);
        visited[static_cast<size_t>(start)] = true;
        while (!frontier.empty()) {
            int u = frontier.front();
            frontier.pop();
            component.push_back(u);
            for (int v : adjacency_[static_cast<size_t>(u)]) {
                if (!visited[static_cast<size_t>(v)]) {
                    visited[static_cast<size_t>(v)] = true;
                    frontier.push(v);
                }
            }
        }
        std::sort(component.begin(), component.end());
        components.push_back(std::move(component));
    }
    return components;
}

}  // namespace declust
