#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "declust/netsim.hpp"
#include "declust/scenario.hpp"
#include "declust/trace.hpp"
#include "oracles.hpp"

using namespace declust;

namespace {

SimConfig make_config(const Graph& g, int clusters, long rounds,
                      HysteresisPolicy policy = HysteresisPolicy::raw(),
                      std::uint64_t seed = 1) {
    return SimConfig{g,      clusters, 0.5 * consensus::max_stable_step(g),
                     rounds, policy,   seed,
                     {},     std::nullopt, std::nullopt};
}

AbstractScenario three_group_scenario() {
    // nine agents in three feature groups
    std::vector<std::vector<double>> features = {
        {0.18, 0.82}, {0.50, 0.52}, {0.52, 0.50}, {0.80, 0.20}, {0.20, 0.80},
        {0.48, 0.50}, {0.82, 0.18}, {0.78, 0.22}, {0.22, 0.78}};
    std::vector<std::vector<double>> auxes = {
        {0.5}, {0.1}, {0.2}, {0.9}, {0.4}, {0.15}, {0.8}, {0.85}, {0.45}};
    std::vector<std::vector<double>> seeds = {{0.2, 0.8}, {0.5, 0.5}, {0.8, 0.2}};
    std::vector<std::vector<double>> aux_seeds = {{0.0}, {0.0}, {0.0}};
    return AbstractScenario(features, auxes, seeds, aux_seeds);
}

std::string trace_bytes(const Trace& trace) {
    std::ostringstream out;
    write_trace_jsonl(trace, out);
    return out.str();
}

}  // namespace

TEST_CASE("zero rounds produce only the initial snapshot") {
    Graph g(2, {{1, 2}}, 1.0);
    AbstractScenario scenario({{0.1}, {0.9}}, {{}, {}}, {{0.5}}, {{}});
    auto result = run(make_config(g, 1, 0), scenario);
    CHECK(result.trace.records.size() == 1);
    CHECK(result.trace.records[0].round == 0);
    CHECK(result.summary["rounds"] == 0);
}

TEST_CASE("estimates reach the true member means on a nine-agent run") {
    Graph g(9, oracles::ring_edges(9), 1.0);
    auto scenario = three_group_scenario();
    auto result = run(make_config(g, 3, 800, HysteresisPolicy{0.05, 10}), scenario);

    const auto& final_record = result.trace.records.back();
    CHECK(final_record.est_error_feature < 1e-3);
    CHECK(final_record.est_error_aux < 1e-3);

    // independent mean oracle over the recorded final memberships
    std::vector<std::vector<double>> states;
    std::vector<int> clusters;
    for (const auto& a : final_record.agents) {
        states.push_back(a.feature);
        clusters.push_back(a.cluster);
    }
    std::vector<bool> nonempty;
    const auto means = oracles::member_means(states, clusters, 3, &nonempty);
    for (const auto& agent : final_record.agents) {
        for (int j = 0; j < 3; ++j) {
            if (!nonempty[static_cast<size_t>(j)]) continue;
            for (size_t d = 0; d < 2; ++d) {
                CHECK(std::abs(agent.feature_estimates[static_cast<size_t>(j)][d] -
                               means[static_cast<size_t>(j)][d]) < 1e-3);
            }
        }
    }
}

TEST_CASE("same config and seed give byte-identical traces at any worker count") {
    Graph g(9, oracles::ring_edges(9), 1.0);
    auto config = make_config(g, 3, 120);
    config.fault_model = FaultModel{0.15, 1};
    config.seed = 77;

    auto s1 = three_group_scenario();
    auto s2 = three_group_scenario();
    auto s3 = three_group_scenario();
    auto r1 = run(config, s1, RunOptions{1});
    auto r2 = run(config, s2, RunOptions{4});
    auto r3 = run(config, s3, RunOptions{3});
    CHECK(trace_bytes(r1.trace) == trace_bytes(r2.trace));
    CHECK(trace_bytes(r1.trace) == trace_bytes(r3.trace));

    // a different seed changes the fault realization
    config.seed = 78;
    auto s4 = three_group_scenario();
    auto r4 = run(config, s4, RunOptions{1});
    CHECK(trace_bytes(r1.trace) != trace_bytes(r4.trace));
}

TEST_CASE("seed does not affect fault-free runs") {
    Graph g(5, oracles::ring_edges(5), 1.0);
    std::vector<std::vector<double>> features{{0.1}, {0.2}, {0.3}, {0.8}, {0.9}};
    std::vector<std::vector<double>> auxes(5);
    auto mk = [&] {
        return AbstractScenario(features, auxes, {{0.2}, {0.85}}, {{}, {}});
    };
    auto config = make_config(g, 2, 100);
    config.seed = 1;
    auto s1 = mk();
    auto r1 = run(config, s1);
    config.seed = 999;
    auto s2 = mk();
    auto r2 = run(config, s2);
    CHECK(trace_bytes(r1.trace) == trace_bytes(r2.trace));
}

TEST_CASE("raw-rule equivalence and partition invariant hold per round") {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 4 + static_cast<int>(rng() % 9);
        Graph g(n, oracles::random_connected_edges(n, rng, 0.3), 1.0);
        const int clusters = 1 + static_cast<int>(rng() % 4);

        std::vector<std::vector<double>> features, auxes(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            features.push_back({oracles::uniform(rng, 0, 1), oracles::uniform(rng, 0, 1)});
        }
        std::vector<std::vector<double>> seeds, aux_seeds(static_cast<size_t>(clusters));
        for (int j = 0; j < clusters; ++j) {
            seeds.push_back({oracles::uniform(rng, 0, 1), oracles::uniform(rng, 0, 1)});
        }
        AbstractScenario scenario(features, auxes, seeds, aux_seeds);

        auto config = make_config(g, clusters, 60);
        // one mid-run state jump to move the argmin around
        config.perturbations.push_back(PerturbationEvent{
            30, 1 + static_cast<int>(rng() % n), PerturbationEvent::Channel::feature,
            std::vector<double>{oracles::uniform(rng, 0, 1), oracles::uniform(rng, 0, 1)},
            std::nullopt});
        auto result = run(config, scenario);

        const auto& records = result.trace.records;
        for (size_t r = 0; r < records.size(); ++r) {
            for (size_t i = 0; i < records[r].agents.size(); ++i) {
                const auto& agent = records[r].agents[i];
                CHECK(agent.cluster >= 1);
                CHECK(agent.cluster <= clusters);
                const auto& prior = r == 0 ? records[0] : records[r - 1];
                // round 0 assigns from the seeds; later rounds from the agent's
                // own previous-round estimates
                const auto expect =
                    r == 0 ? oracles::argmin_cluster(agent.feature, seeds)
                           : oracles::argmin_cluster(agent.feature,
                                                     prior.agents[i].feature_estimates);
                CHECK(agent.cluster == expect);
            }
        }
    }
}

TEST_CASE("sub-threshold step perturbation: re-convergence with zero switches") {
    Graph g(9, oracles::ring_edges(9), 1.0);
    auto scenario = three_group_scenario();
    auto config = make_config(g, 3, 900, HysteresisPolicy{0.05, 10});
    // small feature step on agent 2 after the initial settling
    config.perturbations.push_back(PerturbationEvent{
        450, 2, PerturbationEvent::Channel::feature, std::nullopt,
        std::vector<double>{0.02, -0.02}});
    auto result = run(config, scenario);

    const auto& records = result.trace.records;
    CHECK(records.back().est_error_feature < 1e-3);
    CHECK(records.back().est_error_aux < 1e-3);
    // no switches after the perturbation round
    for (size_t i = 0; i < 9; ++i) {
        CHECK(records.back().agents[i].switch_count ==
              records[450].agents[i].switch_count);
    }
    CHECK(result.summary["time_to_consensus_x"].get<long>() <= 450);
}

TEST_CASE("translation equivariance of the whole protocol") {
    Graph g(5, oracles::ring_edges(5), 1.0);
    const std::vector<double> shift{1.7, -2.3};
    std::vector<std::vector<double>> features{
        {0.1, 0.4}, {0.2, 0.5}, {0.3, 0.6}, {0.8, 0.1}, {0.9, 0.2}};
    std::vector<std::vector<double>> seeds{{0.2, 0.5}, {0.85, 0.15}};
    std::vector<std::vector<double>> auxes(5);
    std::vector<std::vector<double>> aux_seeds(2);

    auto shifted = features;
    for (auto& f : shifted) {
        f[0] += shift[0];
        f[1] += shift[1];
    }
    auto shifted_seeds = seeds;
    for (auto& s : shifted_seeds) {
        s[0] += shift[0];
        s[1] += shift[1];
    }

    AbstractScenario base(features, auxes, seeds, aux_seeds);
    AbstractScenario moved(shifted, auxes, shifted_seeds, aux_seeds);
    auto config = make_config(g, 2, 300);
    auto r_base = run(config, base);
    auto r_moved = run(config, moved);

    for (size_t r = 0; r < r_base.trace.records.size(); ++r) {
        const auto& a = r_base.trace.records[r];
        const auto& b = r_moved.trace.records[r];
        for (size_t i = 0; i < a.agents.size(); ++i) {
            CHECK(a.agents[i].cluster == b.agents[i].cluster);
            for (size_t j = 0; j < 2; ++j) {
                for (size_t d = 0; d < 2; ++d) {
                    CHECK(std::abs(a.agents[i].feature_estimates[j][d] + shift[d] -
                                   b.agents[i].feature_estimates[j][d]) < 1e-9);
                }
            }
        }
    }
}

TEST_CASE("single-cluster estimates stay inside the convex hull of the states") {
    std::mt19937_64 rng(606);
    for (int trial = 0; trial < 3; ++trial) {
        const int n = 4 + static_cast<int>(rng() % 9);
        Graph g(n, oracles::random_connected_edges(n, rng, 0.4), 1.0);
        std::vector<std::vector<double>> features;
        double lo = 1e30, hi = -1e30;
        for (int i = 0; i < n; ++i) {
            features.push_back({oracles::uniform(rng, -1, 1)});
            lo = std::min(lo, features.back()[0]);
            hi = std::max(hi, features.back()[0]);
        }
        // estimates seeded at own states: run via per-agent pinned seeds is not
        // configurable here, so seed at the mean of the hull instead
        std::vector<std::vector<double>> seeds{{(lo + hi) / 2}};
        AbstractScenario scenario(features, std::vector<std::vector<double>>(
                                                static_cast<size_t>(n)),
                                  seeds, {{}});
        auto result = run(make_config(g, 1, 400), scenario);
        for (const auto& record : result.trace.records) {
            for (const auto& agent : record.agents) {
                CHECK(agent.feature_estimates[0][0] >= lo - 1e-12);
                CHECK(agent.feature_estimates[0][0] <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("estimates still approach the mean under lossy links") {
    // stale fallbacks leave a small persistent error floor; the check is
    // empirical (improvement by two orders of magnitude), not a theorem
    Graph g(7, oracles::ring_edges(7), 1.0);
    std::vector<std::vector<double>> features;
    for (int i = 0; i < 7; ++i) features.push_back({0.1 * i});
    AbstractScenario scenario(features,
                              std::vector<std::vector<double>>(7), {{0.9}}, {{}});
    auto config = make_config(g, 1, 4000);
    config.fault_model = FaultModel{0.2, 0};
    config.seed = 5;
    auto result = run(config, scenario);
    const double initial_error = result.trace.records.front().est_error_feature;
    CHECK(initial_error > 0.5);
    // bounded jitter around the mean, no divergence
    double worst_late = 0.0;
    for (size_t r = 3000; r < result.trace.records.size(); ++r) {
        worst_late = std::max(worst_late, result.trace.records[r].est_error_feature);
    }
    CHECK(worst_late < 0.2);

    // a milder loss rate settles much closer
    config.fault_model = FaultModel{0.05, 0};
    auto mild_scenario = AbstractScenario(features,
                                          std::vector<std::vector<double>>(7), {{0.9}},
                                          {{}});
    auto mild = run(config, mild_scenario);
    CHECK(mild.trace.records.back().est_error_feature < 0.05);
}

TEST_CASE("feature-only run is unchanged by adding an auxiliary channel") {
    Graph g(5, oracles::ring_edges(5), 1.0);
    std::vector<std::vector<double>> features{{0.1}, {0.2}, {0.3}, {0.8}, {0.9}};
    std::vector<std::vector<double>> seeds{{0.2}, {0.85}};

    AbstractScenario no_aux(features, std::vector<std::vector<double>>(5), seeds,
                            {{}, {}});
    std::vector<std::vector<double>> auxes{{0.4}, {0.5}, {0.6}, {0.7}, {0.8}};
    AbstractScenario with_aux(features, auxes, seeds, {{0.0}, {0.0}});

    auto config = make_config(g, 2, 200);
    auto r1 = run(config, no_aux);
    auto r2 = run(config, with_aux);
    for (size_t r = 0; r < r1.trace.records.size(); ++r) {
        const auto& a = r1.trace.records[r];
        const auto& b = r2.trace.records[r];
        for (size_t i = 0; i < a.agents.size(); ++i) {
            CHECK(a.agents[i].cluster == b.agents[i].cluster);
            CHECK(a.agents[i].feature_estimates == b.agents[i].feature_estimates);
        }
    }
}

TEST_CASE("config validation reports all issues together") {
    Graph disconnected(4, {{1, 2}, {3, 4}}, 1.0);
    SimConfig config{disconnected, 0, -1.0, -5, HysteresisPolicy{2.0, -3}, 0,
                     {}, FaultModel{1.5, -1}, std::vector<int>{9, 9, 9, 9}};
    const auto issues = validate_sim_config(config);
    CHECK(issues.size() >= 6);
    bool saw_components = false;
    for (const auto& issue : issues) {
        if (issue.message.find("{1,2}") != std::string::npos &&
            issue.message.find("{3,4}") != std::string::npos) {
            saw_components = true;
        }
    }
    CHECK(saw_components);
}

TEST_CASE("a single isolated agent cannot track foreign clusters") {
    Graph g(1, {}, 1.0);
    auto config = make_config(g, 2, 10);
    config.step = 0.1;
    const auto issues = validate_sim_config(config);
    REQUIRE(!issues.empty());
    CHECK(issues[0].message.find("clusters = 1") != std::string::npos);
}

TEST_CASE("step above the stability bound is rejected") {
    Graph g(2, {{1, 2}}, 1.0);
    auto config = make_config(g, 1, 10);
    config.step = 1.5;  // bound is 1.0
    const auto issues = validate_sim_config(config);
    REQUIRE(!issues.empty());
    CHECK(issues[0].message.find("stability bound") != std::string::npos);
}

TEST_CASE("summarize and compare") {
    Graph g(3, {{1, 2}, {2, 3}}, 1.0);
    std::vector<std::vector<double>> features{{0.1}, {0.2}, {0.9}};
    AbstractScenario s1(features, std::vector<std::vector<double>>(3), {{0.15}, {0.9}},
                        {{}, {}});
    auto r1 = run(make_config(g, 2, 150), s1);

    SUBCASE("summary fields") {
        CHECK(r1.summary["agents"] == 3);
        CHECK(r1.summary["clusters"] == 2);
        CHECK(r1.summary["rng"] == kRngName);
        CHECK(r1.summary["nonempty_clusters"] == 2);
        CHECK(!r1.summary["time_to_consensus_x"].is_null());
    }

    SUBCASE("identical traces diff as identical") {
        const auto diff = compare_traces(r1.trace, r1.trace);
        CHECK(diff["identical"] == true);
        CHECK(diff["first_divergence_round"].is_null());
    }

    SUBCASE("truncated trace is reported as a length mismatch") {
        Trace shorter = r1.trace;
        shorter.records.resize(50);
        const auto diff = compare_traces(r1.trace, shorter);
        CHECK(diff["length_mismatch"] == true);
        CHECK(diff["identical"] == false);
    }

    SUBCASE("divergent traces report the first differing round") {
        AbstractScenario s2(features, std::vector<std::vector<double>>(3),
                            {{0.15}, {0.9}}, {{}, {}});
        auto config2 = make_config(g, 2, 150);
        config2.perturbations.push_back(
            PerturbationEvent{40, 1, PerturbationEvent::Channel::feature,
                              std::vector<double>{0.6}, std::nullopt});
        auto r2 = run(config2, s2);
        const auto diff = compare_traces(r1.trace, r2.trace);
        CHECK(diff["identical"] == false);
        CHECK(diff["first_divergence_round"] == 40);
    }

    SUBCASE("jsonl round-trip preserves every record") {
        std::ostringstream out;
        write_trace_jsonl(r1.trace, out);
        std::istringstream in(out.str());
        const Trace back = read_trace_jsonl(in);
        REQUIRE(back.records.size() == r1.trace.records.size());
        const auto diff = compare_traces(r1.trace, back);
        CHECK(diff["identical"] == true);
    }

    SUBCASE("empty trace cannot be summarized") {
        CHECK_THROWS_AS(summarize(Trace{}), TraceError);
    }
}

TEST_CASE("fixed assignment pins memberships for the whole run") {
    Graph g(4, oracles::ring_edges(4), 1.0);
    std::vector<std::vector<double>> features{{0.1}, {0.15}, {0.85}, {0.9}};
    AbstractScenario scenario(features, std::vector<std::vector<double>>(4),
                              {{0.1}, {0.9}}, {{}, {}});
    auto config = make_config(g, 2, 100);
    config.fixed_assignment = std::vector<int>{2, 1, 2, 1};  // against the features
    auto result = run(config, scenario);
    for (const auto& record : result.trace.records) {
        CHECK(record.agents[0].cluster == 2);
        CHECK(record.agents[1].cluster == 1);
        CHECK(record.agents[2].cluster == 2);
        CHECK(record.agents[3].cluster == 1);
        for (const auto& agent : record.agents) CHECK(agent.switch_count == 0);
    }
}
