#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "declust/consensus.hpp"
#include "oracles.hpp"

using namespace declust;
using namespace declust::consensus;

namespace {

std::vector<std::span<const double>> spans(const std::vector<std::vector<double>>& v) {
    std::vector<std::span<const double>> out;
    out.reserve(v.size());
    for (const auto& x : v) out.emplace_back(x);
    return out;
}

const std::vector<double> kZero1{0.0};

}  // namespace

TEST_CASE("finite difference rate") {
    CHECK(finite_difference_rate(std::vector{1.0, 2.0}, std::vector{1.0, 2.0}, 0.5) ==
          std::vector{0.0, 0.0});
    CHECK(finite_difference_rate(std::vector{2.0, 4.0}, std::vector{1.0, 2.0}, 1.0) ==
          std::vector{1.0, 2.0});
    // no previous sample: rate defined as zero
    CHECK(finite_difference_rate(std::vector{3.0}, {}, 0.25) == std::vector{0.0});

    // ramp input sampled at a fixed step gives back the exact slope
    const double h = 0.125;
    const std::vector<double> v{0.75, -2.5};
    for (int t = 1; t < 20; ++t) {
        std::vector<double> cur{v[0] * h * t, v[1] * h * t};
        std::vector<double> prev{v[0] * h * (t - 1), v[1] * h * (t - 1)};
        CHECK(finite_difference_rate(cur, prev, h) == v);
    }
}

TEST_CASE("member update fixed point: estimate at own state, no neighbours") {
    // isolated member at its own state with zero integral stays put
    CHECK(step_member_estimate(kZero1, std::vector{2.5}, std::vector{2.5}, kZero1, {},
                               1.0, 0.1) == std::vector{2.5});
    // away from the own state the anchor pulls: e' = e + h*gamma*(x - e)
    const auto out = step_member_estimate(kZero1, std::vector{1.0}, std::vector{0.0},
                                          kZero1, {}, 2.0, 0.1);
    CHECK(out[0] == doctest::Approx(0.1 * 2.0 * 1.0).epsilon(1e-15));
}

TEST_CASE("member update: agreeing neighbours leave only rate and anchor terms") {
    std::vector<std::vector<double>> nbrs{{1.5, -2.0}, {1.5, -2.0}};
    const std::vector<double> zero2{0.0, 0.0};
    const auto out =
        step_member_estimate(std::vector{0.5, 1.0}, std::vector{1.5, -2.0},
                             std::vector{1.5, -2.0}, zero2, spans(nbrs), 2.0, 0.1);
    CHECK(out[0] == doctest::Approx(1.5 + 0.1 * 0.5).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(-2.0 + 0.1 * 1.0).epsilon(1e-15));
}

// Two mutually neighbouring members of one cluster with constant states.
// The full per-channel recursion on (e1, e2, w1, w2) is linear; the oracle
// iterates the explicit 4x4 matrix built from the update laws.
TEST_CASE("two members converge exactly to the pair mean from arbitrary seeds") {
    const double alpha = 1.0;
    const double h = 0.4;
    const double gamma = tracking_gain(alpha);
    const double beta = integral_gain(alpha);
    const double x1 = 0.2, x2 = 0.9;

    Eigen::Matrix4d transition;
    transition << 1 - h * (gamma + alpha), h * alpha, h, 0,
                  h * alpha, 1 - h * (gamma + alpha), 0, h,
                  -h * beta, h * beta, 1, 0,
                  h * beta, -h * beta, 0, 1;
    Eigen::Vector4d forcing;
    forcing << h * gamma * x1, h * gamma * x2, 0, 0;

    // deliberately NOT the member states: the integral action must erase
    // the seed bias entirely
    std::vector<double> e1{-3.0}, e2{5.0};
    std::vector<double> w1{0.0}, w2{0.0};
    Eigen::Vector4d oracle;
    oracle << e1[0], e2[0], w1[0], w2[0];

    for (int t = 1; t <= 600; ++t) {
        std::vector<std::vector<double>> nb1{{e2}};
        std::vector<std::vector<double>> nb2{{e1}};
        auto n1 = step_member_estimate(kZero1, std::vector{x1}, e1, w1, spans(nb1),
                                       alpha, h);
        auto n2 = step_member_estimate(kZero1, std::vector{x2}, e2, w2, spans(nb2),
                                       alpha, h);
        auto nw1 = step_integrator(w1, e1, spans(nb1), alpha, h);
        auto nw2 = step_integrator(w2, e2, spans(nb2), alpha, h);
        e1 = n1; e2 = n2; w1 = nw1; w2 = nw2;

        oracle = transition * oracle + forcing;
        CHECK(std::abs(e1[0] - oracle(0)) < 1e-12);
        CHECK(std::abs(e2[0] - oracle(1)) < 1e-12);
    }
    CHECK(std::abs(e1[0] - (x1 + x2) / 2) < 1e-6);
    CHECK(std::abs(e2[0] - (x1 + x2) / 2) < 1e-6);
    // the integrals hold the conservation: w1 + w2 = 0
    CHECK(std::abs(w1[0] + w2[0]) < 1e-12);
}

TEST_CASE("pass-through fixed point at agreement with zero integral") {
    std::vector<std::vector<double>> nbrs{{0.7}, {0.7}};
    CHECK(step_passthrough_estimate(std::vector{0.7}, kZero1, spans(nbrs), 1.3, 0.21) ==
          std::vector{0.7});
}

TEST_CASE("pass-through pure consensus step moves toward the neighbours") {
    std::vector<std::vector<double>> nbrs{{1.0}, {1.0}, {1.0}};
    const double h = 0.1, alpha = 0.5;
    const auto out =
        step_passthrough_estimate(std::vector{0.0}, kZero1, spans(nbrs), alpha, h);
    CHECK(out[0] == doctest::Approx(h * alpha * 3.0).epsilon(1e-15));
}

TEST_CASE("pass-through requires at least one neighbour") {
    CHECK_THROWS_WITH_AS(
        step_passthrough_estimate(std::vector{1.0}, kZero1, {}, 1.0, 0.1),
        doctest::Contains("no neighbors"), ProtocolError);
}

TEST_CASE("non-finite inputs raise numerical faults") {
    const double bad = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(step_member_estimate(std::vector{bad}, std::vector{1.0},
                                         std::vector{1.0}, kZero1, {}, 1.0, 0.1),
                    NumericalFault);
    std::vector<std::vector<double>> nbrs{{bad}};
    CHECK_THROWS_AS(
        step_passthrough_estimate(std::vector{1.0}, kZero1, spans(nbrs), 1.0, 0.1),
        NumericalFault);
    CHECK_THROWS_AS(step_integrator(kZero1, std::vector{bad}, spans(nbrs), 1.0, 0.1),
                    NumericalFault);
}

// Node 1 is the sole member of the cluster on a 3-node path; nodes 2 and 3
// relay. All three estimates must land on the member's state, independent
// of the seeds. The oracle iterates the explicit 6x6 recursion on
// (e1, e2, e3, w1, w2, w3).
TEST_CASE("three-node path tracks the sole member's state from any seeds") {
    const double alpha = 1.0;
    const double h = 0.2;
    const double gamma = tracking_gain(alpha);
    const double beta = integral_gain(alpha);
    const double x1 = 0.8;

    Eigen::Matrix<double, 6, 6> transition = Eigen::Matrix<double, 6, 6>::Zero();
    // path Laplacian rows: 1-(2), 2-(1,3), 3-(2)
    transition(0, 0) = 1 - h * (gamma + alpha);
    transition(0, 1) = h * alpha;
    transition(1, 0) = h * alpha;
    transition(1, 1) = 1 - 2 * h * alpha;
    transition(1, 2) = h * alpha;
    transition(2, 1) = h * alpha;
    transition(2, 2) = 1 - h * alpha;
    for (int i = 0; i < 3; ++i) transition(i, 3 + i) = h;
    transition(3, 0) = -h * beta; transition(3, 1) = h * beta;
    transition(4, 0) = h * beta;  transition(4, 1) = -2 * h * beta; transition(4, 2) = h * beta;
    transition(5, 1) = h * beta;  transition(5, 2) = -h * beta;
    for (int i = 3; i < 6; ++i) transition(i, i) = 1.0;

    Eigen::Matrix<double, 6, 1> forcing = Eigen::Matrix<double, 6, 1>::Zero();
    forcing(0) = h * gamma * x1;

    std::vector<double> e1{0.8}, e2{0.1}, e3{-0.4};
    std::vector<double> w1{0.0}, w2{0.0}, w3{0.0};
    Eigen::Matrix<double, 6, 1> oracle;
    oracle << e1[0], e2[0], e3[0], 0, 0, 0;

    for (int t = 1; t <= 800; ++t) {
        std::vector<std::vector<double>> nb1{{e2}};
        std::vector<std::vector<double>> nb2{e1, e3};
        std::vector<std::vector<double>> nb3{{e2}};
        auto n1 = step_member_estimate(kZero1, std::vector{x1}, e1, w1, spans(nb1),
                                       alpha, h);
        auto n2 = step_passthrough_estimate(e2, w2, spans(nb2), alpha, h);
        auto n3 = step_passthrough_estimate(e3, w3, spans(nb3), alpha, h);
        auto m1 = step_integrator(w1, e1, spans(nb1), alpha, h);
        auto m2 = step_integrator(w2, e2, spans(nb2), alpha, h);
        auto m3 = step_integrator(w3, e3, spans(nb3), alpha, h);
        e1 = n1; e2 = n2; e3 = n3;
        w1 = m1; w2 = m2; w3 = m3;

        oracle = transition * oracle + forcing;
        CHECK(std::abs(e1[0] - oracle(0)) < 1e-12);
        CHECK(std::abs(e2[0] - oracle(1)) < 1e-12);
        CHECK(std::abs(e3[0] - oracle(2)) < 1e-12);
    }
    CHECK(std::abs(e1[0] - x1) < 1e-6);
    CHECK(std::abs(e2[0] - x1) < 1e-6);
    CHECK(std::abs(e3[0] - x1) < 1e-6);
}

TEST_CASE("stability bound in closed form") {
    // two nodes: Laplacian eigenvalues {0, 2 alpha}
    CHECK(max_stable_step(Graph(2, {{1, 2}}, 1.0)) == doctest::Approx(1.0));
    // complete graph on three nodes: lambda_max = 3 alpha
    CHECK(max_stable_step(Graph(3, {{1, 2}, {1, 3}, {2, 3}}, 1.0)) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    // nine-ring vs. the analytic ring spectrum
    const double bound = max_stable_step(Graph(9, oracles::ring_edges(9), 1.0));
    CHECK(std::abs(bound - 2.0 / oracles::ring_lambda_max(9, 1.0)) < 1e-9);
    // isolated node: no coupling constraint
    CHECK(std::isinf(max_stable_step(Graph(1, {}, 1.0))));
}

TEST_CASE("fuzz: no step produces NaN or Inf on bounded inputs") {
    std::mt19937_64 rng(4242);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t dim = 1 + rng() % 3;
        const size_t deg = 1 + rng() % 5;
        const double alpha = oracles::uniform(rng, 0.05, 5.0);
        const double h = oracles::uniform(rng, 1e-4, 1.9 / (2.0 * alpha * deg));
        auto vec = [&](double lo, double hi) {
            std::vector<double> v(dim);
            for (auto& x : v) x = oracles::uniform(rng, lo, hi);
            return v;
        };
        std::vector<std::vector<double>> nbrs;
        for (size_t l = 0; l < deg; ++l) nbrs.push_back(vec(-1e6, 1e6));
        const auto own = vec(-1e6, 1e6);
        const auto state = vec(-1e6, 1e6);
        const auto rate = vec(-1e3, 1e3);
        const auto integral = vec(-1e3, 1e3);
        const auto member = step_member_estimate(rate, state, own, integral,
                                                 spans(nbrs), alpha, h);
        const auto relay =
            step_passthrough_estimate(own, integral, spans(nbrs), alpha, h);
        const auto w = step_integrator(integral, own, spans(nbrs), alpha, h);
        CHECK(all_finite(member));
        CHECK(all_finite(relay));
        CHECK(all_finite(w));
    }
}
