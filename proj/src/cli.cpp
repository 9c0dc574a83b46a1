#include "declust/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "declust/netsim.hpp"
#include "declust/scenario.hpp"
#include "declust/trace.hpp"

namespace declust::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void report_issues(const ConfigError& error, std::ostream& err) {
    err << "configuration invalid (" << error.issues().size() << " issue(s)):\n";
    for (const auto& issue : error.issues()) {
        err << "  - " << issue.str() << '\n';
    }
}

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

std::string trace_path_for_format(const OutputConfig& output) {
    if (output.format == "csv") {
        return fs::path(output.trace_path).replace_extension(".csv").string();
    }
    return output.trace_path;
}

}  // namespace

int validate_command(const std::string& config_path, const Overrides& overrides,
                     bool emit, std::ostream& out, std::ostream& err) {
    try {
        LoadedScenario loaded = load_scenario_file(config_path, overrides);
        if (emit) {
            out << emit_normalized(loaded);
        } else {
            out << "configuration valid: " << loaded.kind << " scenario, "
                << loaded.sim.graph.node_count() << " agents, "
                << loaded.sim.cluster_count << " clusters, step " << loaded.sim.step
                << (loaded.step_was_auto ? " (auto)" : "") << ", " << loaded.sim.rounds
                << " rounds\n";
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        report_issues(e, err);
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInternal;
    }
}

int run_command(const std::string& config_path, const Overrides& overrides,
                int workers, std::ostream& out, std::ostream& err) {
    try {
        LoadedScenario loaded = load_scenario_file(config_path, overrides);
        RunOptions options;
        options.workers = workers;
        RunResult result = run(loaded.sim, *loaded.scenario, options);

        const std::string trace_path = trace_path_for_format(loaded.output);
        ensure_parent_dir(trace_path);
        if (loaded.output.format == "csv") {
            write_trace_csv_file(result.trace, trace_path);
        } else {
            write_trace_jsonl_file(result.trace, trace_path);
        }

        result.summary["scenario_kind"] = loaded.kind;
        result.summary["trace_path"] = trace_path;
        ensure_parent_dir(loaded.output.summary_path);
        std::ofstream summary_file(loaded.output.summary_path, std::ios::binary);
        if (!summary_file) {
            err << "error: cannot write summary to " << loaded.output.summary_path
                << '\n';
            return kExitInternal;
        }
        summary_file << result.summary.dump(2) << '\n';

        out << "rounds: " << result.trace.rounds() << '\n'
            << "final est errors: x " << result.summary["final_est_err_x"] << ", z "
            << result.summary["final_est_err_z"] << '\n'
            << "non-empty clusters: " << result.summary["nonempty_clusters"] << '\n'
            << "total switches: " << result.summary["total_switches"] << '\n'
            << "trace: " << trace_path << '\n'
            << "summary: " << loaded.output.summary_path << '\n';
        return kExitOk;
    } catch (const ConfigError& e) {
        report_issues(e, err);
        return kExitValidation;
    } catch (const NumericalFault& e) {
        err << "numerical fault: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInternal;
    }
}

int compare_command(const std::string& trace_a, const std::string& trace_b,
                    std::ostream& out, std::ostream& err) {
    try {
        const Trace a = read_trace_jsonl_file(trace_a);
        const Trace b = read_trace_jsonl_file(trace_b);
        out << compare_traces(a, b).dump(2) << '\n';
        return kExitOk;
    } catch (const TraceError& e) {
        err << "trace error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInternal;
    }
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

namespace {

struct CheckReporter {
    std::ostream& out;
    bool all_ok = true;

    void operator()(const std::string& name, bool ok, const std::string& detail = "") {
        out << (ok ? "[ ok ] " : "[FAIL] ") << name;
        if (!ok && !detail.empty()) out << " -- " << detail;
        out << '\n';
        if (!ok) all_ok = false;
    }
};

Graph ring_graph(int n, double coupling) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 1; i <= n; ++i) edges.emplace_back(i, i % n + 1);
    return Graph(n, edges, coupling);
}

int brute_force_argmin(const std::vector<double>& x,
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

SimConfig abstract_sim(const Graph& graph, int clusters, long rounds,
                       HysteresisPolicy policy) {
    return SimConfig{graph, clusters, 0.5 * consensus::max_stable_step(graph), rounds,
                     policy, 7, {}, std::nullopt, std::nullopt};
}

}  // namespace

int selftest_command(std::ostream& out, std::ostream& err) {
    CheckReporter check{out};
    try {
        // Laplacian structure on a ring with a chord.
        {
            Graph g(8, {{1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {7, 8},
                        {8, 1}, {2, 6}},
                    1.5);
            const auto lap = g.laplacian();
            double max_row_sum = 0.0;
            double max_asym = 0.0;
            for (int r = 0; r < 8; ++r) {
                max_row_sum = std::max(max_row_sum, std::abs(lap.row(r).sum()));
                for (int c = 0; c < 8; ++c) {
                    max_asym = std::max(max_asym, std::abs(lap(r, c) - lap(c, r)));
                }
            }
            check("laplacian rows sum to zero", max_row_sum < 1e-12);
            check("laplacian is symmetric", max_asym == 0.0);
        }

        // Consensus drives estimates to member means on a fixed instance.
        {
            Graph g = ring_graph(6, 1.0);
            std::vector<std::vector<double>> features = {{0.1}, {0.2}, {0.15},
                                                         {0.8}, {0.9}, {0.85}};
            AbstractScenario scenario(features, std::vector<std::vector<double>>(6),
                                      {{0.15}, {0.85}},
                                      std::vector<std::vector<double>>(2));
            SimConfig config = abstract_sim(g, 2, 2000, HysteresisPolicy{0.0, 0});
            RunResult result = run(config, scenario);
            check("consensus reaches member means",
                  result.trace.records.back().est_error_feature < 1e-3,
                  "final error " +
                      std::to_string(result.trace.records.back().est_error_feature));

            // Every round's membership equals the brute-force nearest rule.
            bool raw_ok = true;
            const auto& records = result.trace.records;
            for (size_t r = 1; r < records.size() && raw_ok; ++r) {
                for (size_t i = 0; i < records[r].agents.size(); ++i) {
                    const int expect = brute_force_argmin(
                        records[r].agents[i].feature,
                        records[r - 1].agents[i].feature_estimates);
                    if (records[r].agents[i].cluster != expect) {
                        raw_ok = false;
                        break;
                    }
                }
            }
            check("raw rule matches brute-force argmin", raw_ok);

            bool partition_ok = true;
            for (const auto& record : records) {
                for (const auto& agent : record.agents) {
                    if (agent.cluster < 1 || agent.cluster > 2) partition_ok = false;
                }
            }
            check("every agent always holds exactly one cluster", partition_ok);

            // Same config, same seed, four workers: identical bytes.
            AbstractScenario scenario2(features, std::vector<std::vector<double>>(6),
                                       {{0.15}, {0.85}},
                                       std::vector<std::vector<double>>(2));
            RunOptions options;
            options.workers = 4;
            RunResult result2 = run(config, scenario2, options);
            std::ostringstream buf1, buf2;
            write_trace_jsonl(result.trace, buf1);
            write_trace_jsonl(result2.trace, buf2);
            check("deterministic across worker counts", buf1.str() == buf2.str());
        }

        // Hysteresis suppresses chattering that the raw rule exhibits.
        {
            Membership raw{1, 1, 0, 0, 0};
            Membership damped{1, 1, 0, 0, 0};
            const std::vector<std::vector<double>> ests = {{0.0}, {1.0}};
            const HysteresisPolicy strict_policy{0.05, 10};
            for (int r = 0; r < 40; ++r) {
                const std::vector<double> x = {r % 2 == 0 ? 0.504 : 0.496};
                raw = assign_cluster(x, ests, raw, HysteresisPolicy::raw());
                damped = assign_cluster(x, ests, damped, strict_policy);
            }
            check("raw rule chatters on boundary oscillation", raw.switch_count >= 10,
                  "switches " + std::to_string(raw.switch_count));
            check("hysteresis suppresses the chatter", damped.switch_count == 0,
                  "switches " + std::to_string(damped.switch_count));
        }
    } catch (const std::exception& e) {
        err << "selftest aborted: " << e.what() << '\n';
        return kExitInternal;
    }
    return check.all_ok ? kExitOk : kExitInternal;
}

}  // namespace declust::cli
