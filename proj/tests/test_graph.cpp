#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include <Eigen/Eigenvalues>

#include "declust/graph.hpp"
#include "oracles.hpp"

using declust::Graph;
using declust::GraphError;

TEST_CASE("single node graph is valid and empty") {
    Graph g(1, {}, 1.0);
    CHECK(g.node_count() == 1);
    CHECK(g.adjacency(1, 1) == 0.0);
    CHECK(g.laplacian()(0, 0) == 0.0);
    CHECK(g.is_connected());
    CHECK(g.neighbors(1).degree() == 0);
}

TEST_CASE("adjacency carries the coupling strength") {
    Graph g(3, {{1, 2}, {2, 3}}, 2.0);
    CHECK(g.adjacency(1, 2) == 2.0);
    CHECK(g.adjacency(2, 1) == 2.0);
    CHECK(g.adjacency(2, 3) == 2.0);
    CHECK(g.adjacency(3, 2) == 2.0);
    CHECK(g.adjacency(1, 3) == 0.0);
}

TEST_CASE("nine-node ring matches a dense brute-force construction") {
    const auto edges = oracles::ring_edges(9);
    Graph g(9, edges, 1.0);
    const auto dense = oracles::dense_adjacency(9, edges, 1.0);
    for (int i = 1; i <= 9; ++i) {
        for (int j = 1; j <= 9; ++j) {
            CHECK(g.adjacency(i, j) ==
                  dense[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)]);
        }
    }
}

TEST_CASE("construction errors name the offending item") {
    CHECK_THROWS_WITH_AS(Graph(3, {{2, 2}}, 1.0),
                         doctest::Contains("self-loop (2, 2)"), GraphError);
    CHECK_THROWS_WITH_AS(Graph(3, {{1, 2}, {2, 1}}, 1.0),
                         doctest::Contains("duplicate edge (2, 1)"), GraphError);
    CHECK_THROWS_WITH_AS(Graph(3, {{1, 4}}, 1.0), doctest::Contains("(1, 4)"),
                         GraphError);
    CHECK_THROWS_WITH_AS(Graph(3, {{1, 2}}, 0.0), doctest::Contains("coupling"),
                         GraphError);
    CHECK_THROWS_AS(Graph(0, {}, 1.0), GraphError);
}

TEST_CASE("two-node laplacian in closed form") {
    Graph g(2, {{1, 2}}, 3.0);
    const auto lap = g.laplacian();
    CHECK(lap(0, 0) == 3.0);
    CHECK(lap(0, 1) == -3.0);
    CHECK(lap(1, 0) == -3.0);
    CHECK(lap(1, 1) == 3.0);
}

TEST_CASE("ring laplacian is connected with positive fiedler value") {
    Graph g(9, oracles::ring_edges(9), 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g.laplacian());
    const auto& ev = solver.eigenvalues();
    CHECK(std::abs(ev(0)) < 1e-12);
    CHECK(ev(1) > 0.0);  // second-smallest eigenvalue positive: connected
    CHECK(g.is_connected());
}

TEST_CASE("connectivity matches a breadth-first oracle") {
    CHECK(Graph(2, {}, 1.0).is_connected() == false);
    CHECK(oracles::bfs_connected(2, {}) == false);

    std::mt19937_64 rng(20240601);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 10);
        // random subset of edges, possibly disconnected
        std::vector<std::pair<int, int>> edges;
        for (int i = 1; i <= n; ++i) {
            for (int j = i + 1; j <= n; ++j) {
                if (rng() % 4 == 0) edges.emplace_back(i, j);
            }
        }
        Graph g(n, edges, 1.0);
        CHECK(g.is_connected() == oracles::bfs_connected(n, edges));
    }
}

TEST_CASE("component count equals the laplacian null space dimension") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 10);
        std::vector<std::pair<int, int>> edges;
        for (int i = 1; i <= n; ++i) {
            for (int j = i + 1; j <= n; ++j) {
                if (rng() % 5 == 0) edges.emplace_back(i, j);
            }
        }
        Graph g(n, edges, 1.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g.laplacian());
        int zero_eigs = 0;
        for (int k = 0; k < n; ++k) {
            if (std::abs(solver.eigenvalues()(k)) < 1e-9) ++zero_eigs;
        }
        CHECK(zero_eigs == static_cast<int>(g.connected_components().size()));
    }
}

TEST_CASE("laplacian rows sum to zero") {
    // The absolute 1e-12 bound holds whenever a degree-alpha product stays
    // exactly representable; for large random couplings the achievable bound
    // scales with the rounding of the row magnitude itself.
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 30);
        const double coupling = oracles::uniform(rng, 0.1, 1000.0);
        const auto edges = oracles::random_connected_edges(n, rng, 0.3);
        Graph g(n, edges, coupling);
        const auto lap = g.laplacian();
        for (int r = 0; r < n; ++r) {
            const double scale = std::max(1.0, lap(r, r));
            CHECK(std::abs(lap.row(r).sum()) < 1e-12 * scale);
        }
    }
    // exactly-representable couplings at the spec scale stay absolute
    for (double coupling : {1.0, 10.0, 0.5, 1000.0}) {
        Graph g(12, oracles::random_connected_edges(12, rng, 0.4), coupling);
        const auto lap = g.laplacian();
        for (int r = 0; r < 12; ++r) {
            CHECK(std::abs(lap.row(r).sum()) < 1e-12);
        }
    }
}

TEST_CASE("neighbors are symmetric and match the adjacency row support") {
    std::mt19937_64 rng(9);
    const int n = 9;
    const auto edges = oracles::random_connected_edges(n, rng, 0.25);
    Graph g(n, edges, 1.0);
    for (int i = 1; i <= n; ++i) {
        const auto nbrs = g.neighbors(i);
        CHECK(nbrs.owner == i);
        CHECK(nbrs.degree() == static_cast<int>(nbrs.members.size()));
        // row-scan oracle
        std::vector<int> expected;
        for (int j = 1; j <= n; ++j) {
            if (g.adjacency(i, j) != 0.0) expected.push_back(j);
        }
        CHECK(nbrs.members == expected);
        for (int j : nbrs.members) {
            const auto& back = g.neighbors_of(j);
            CHECK(std::find(back.begin(), back.end(), i) != back.end());
        }
    }
}

TEST_CASE("neighbor lookup rejects out-of-range indices") {
    Graph g(2, {}, 1.0);
    CHECK(g.neighbors(1).members.empty());
    CHECK_THROWS_AS(g.neighbors(0), GraphError);
    CHECK_THROWS_AS(g.neighbors(3), GraphError);
}
