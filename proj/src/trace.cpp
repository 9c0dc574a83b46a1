#include "declust/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace declust {

using nlohmann::json;

int Trace::agent_count() const {
    return records.empty() ? 0 : static_cast<int>(records.front().agents.size());
}

int Trace::cluster_count() const {
    return records.empty() ? 0
                           : static_cast<int>(records.front().cluster_sizes.size());
}

json to_json(const RoundRecord& record) {
    json agents = json::array();
    for (const auto& a : record.agents) {
        json ja{{"id", a.id},
                {"x", a.feature},
                {"z", a.aux},
                {"k", a.cluster},
                {"switches", a.switch_count},
                {"x_est", a.feature_estimates},
                {"z_est", a.aux_estimates},
                {"clamped", a.clamped}};
        if (a.power) ja["power"] = *a.power;
        agents.push_back(std::move(ja));
    }

    auto means_json = [](const std::vector<std::optional<std::vector<double>>>& means) {
        json out = json::array();
        for (const auto& m : means) {
            if (m) {
                out.push_back(*m);
            } else {
                out.push_back(nullptr);
            }
        }
        return out;
    };

    json j{{"schema", kTraceSchema},
           {"round", record.round},
           {"agents", std::move(agents)},
           {"cluster_sizes", record.cluster_sizes},
           {"cluster_x_mean", means_json(record.cluster_feature_mean)},
           {"cluster_z_mean", means_json(record.cluster_aux_mean)},
           {"est_err_x", record.est_error_feature},
           {"est_err_z", record.est_error_aux}};
    if (record.loss) j["loss"] = *record.loss;
    return j;
}

RoundRecord round_record_from_json(const json& j) {
    if (!j.is_object() || j.value("schema", "") != kTraceSchema) {
        throw TraceError("trace record with missing or unsupported schema stamp");
    }
    RoundRecord record;
    record.round = j.at("round").get<long>();
    for (const auto& ja : j.at("agents")) {
        AgentRound a;
        a.id = ja.at("id").get<int>();
        a.feature = ja.at("x").get<std::vector<double>>();
        a.aux = ja.at("z").get<std::vector<double>>();
        a.cluster = ja.at("k").get<int>();
        a.switch_count = ja.at("switches").get<long>();
        a.feature_estimates = ja.at("x_est").get<std::vector<std::vector<double>>>();
        a.aux_estimates = ja.at("z_est").get<std::vector<std::vector<double>>>();
        a.clamped = ja.at("clamped").get<bool>();
        if (ja.contains("power")) a.power = ja.at("power").get<double>();
        record.agents.push_back(std::move(a));
    }
    record.cluster_sizes = j.at("cluster_sizes").get<std::vector<int>>();
    for (const auto& m : j.at("cluster_x_mean")) {
        record.cluster_feature_mean.push_back(
            m.is_null() ? std::optional<std::vector<double>>{}
                        : std::optional(m.get<std::vector<double>>()));
    }
    for (const auto& m : j.at("cluster_z_mean")) {
        record.cluster_aux_mean.push_back(
            m.is_null() ? std::optional<std::vector<double>>{}
                        : std::optional(m.get<std::vector<double>>()));
    }
    record.est_error_feature = j.at("est_err_x").get<double>();
    record.est_error_aux = j.at("est_err_z").get<double>();
    if (j.contains("loss")) record.loss = j.at("loss").get<double>();
    return record;
}

void write_trace_jsonl(const Trace& trace, std::ostream& out) {
    for (const auto& record : trace.records) {
        out << to_json(record).dump() << '\n';
    }
}

Trace read_trace_jsonl(std::istream& in) {
    Trace trace;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw TraceError("trace line " + std::to_string(line_no) +
                             " is not valid JSON: " + e.what());
        }
        trace.records.push_back(round_record_from_json(j));
    }
    for (size_t r = 0; r < trace.records.size(); ++r) {
        if (trace.records[r].round != static_cast<long>(r)) {
            throw TraceError("trace rounds not contiguous at line " +
                             std::to_string(r + 1));
        }
    }
    return trace;
}

void write_trace_jsonl_file(const Trace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TraceError("cannot open trace file for writing: " + path);
    write_trace_jsonl(trace, out);
}

Trace read_trace_jsonl_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TraceError("cannot open trace file: " + path);
    return read_trace_jsonl(in);
}

namespace {

std::string fmt(double v) {
    // shortest round-trip representation, same as the JSON writer
    return json(v).dump();
}

}  // namespace

void write_trace_csv(const Trace& trace, std::ostream& out) {
    if (trace.records.empty()) return;
    const auto& first = trace.records.front().agents;
    if (first.empty()) return;
    const size_t n = first.front().feature.size();
    const size_t m = first.front().aux.size();
    const size_t clusters = first.front().feature_estimates.size();
    const bool has_power = first.front().power.has_value();

    out << "round,agent_id,k,switches,clamped";
    if (has_power) out << ",power";
    for (size_t d = 0; d < n; ++d) out << ",x_" << d;
    for (size_t d = 0; d < m; ++d) out << ",z_" << d;
    for (size_t j = 0; j < clusters; ++j)
        for (size_t d = 0; d < n; ++d) out << ",xest_" << (j + 1) << "_" << d;
    for (size_t j = 0; j < clusters; ++j)
        for (size_t d = 0; d < m; ++d) out << ",zest_" << (j + 1) << "_" << d;
    out << '\n';

    for (const auto& record : trace.records) {
        for (const auto& a : record.agents) {
            out << record.round << ',' << a.id << ',' << a.cluster << ','
                << a.switch_count << ',' << (a.clamped ? 1 : 0);
            if (has_power) out << ',' << fmt(a.power.value_or(0.0));
            for (double v : a.feature) out << ',' << fmt(v);
            for (double v : a.aux) out << ',' << fmt(v);
            for (const auto& est : a.feature_estimates)
                for (double v : est) out << ',' << fmt(v);
            for (const auto& est : a.aux_estimates)
                for (double v : est) out << ',' << fmt(v);
            out << '\n';
        }
    }
}

void write_trace_csv_file(const Trace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TraceError("cannot open trace file for writing: " + path);
    write_trace_csv(trace, out);
}

json summarize(const Trace& trace, const SummarizeOptions& options) {
    if (trace.records.empty()) {
        throw TraceError("cannot summarize an empty trace");
    }
    for (size_t r = 0; r < trace.records.size(); ++r) {
        if (trace.records[r].round != static_cast<long>(r)) {
            throw TraceError("truncated or reordered trace at round " +
                             std::to_string(r));
        }
        if (trace.records[r].agents.size() != trace.records.front().agents.size()) {
            throw TraceError("agent count changes at round " + std::to_string(r));
        }
    }

    const auto& final_record = trace.records.back();
    const long rounds = trace.rounds();

    // First round from which the error stays below tolerance for good,
    // reported relative to the last perturbation.
    auto settle_round = [&](auto error_of) -> json {
        long settled = -1;
        for (long r = static_cast<long>(trace.records.size()) - 1; r >= 0; --r) {
            if (error_of(trace.records[static_cast<size_t>(r)]) < options.tolerance) {
                settled = r;
            } else {
                break;
            }
        }
        if (settled < 0) return nullptr;
        return std::max<long>(0, settled - options.last_perturbation_round);
    };

    long total_switches = 0;
    json per_agent_switches = json::array();
    for (const auto& a : final_record.agents) {
        total_switches += a.switch_count;
        per_agent_switches.push_back(a.switch_count);
    }

    json membership = json::array();
    for (const auto& a : final_record.agents) membership.push_back(a.cluster);

    json summary{
        {"schema", "declust-summary-v1"},
        {"rounds", rounds},
        {"agents", static_cast<int>(final_record.agents.size())},
        {"clusters", static_cast<int>(final_record.cluster_sizes.size())},
        {"final_membership", membership},
        {"final_cluster_sizes", final_record.cluster_sizes},
        {"nonempty_clusters",
         static_cast<int>(std::count_if(final_record.cluster_sizes.begin(),
                                        final_record.cluster_sizes.end(),
                                        [](int s) { return s > 0; }))},
        {"final_est_err_x", final_record.est_error_feature},
        {"final_est_err_z", final_record.est_error_aux},
        {"consensus_tolerance", options.tolerance},
        {"time_to_consensus_x",
         settle_round([](const RoundRecord& r) { return r.est_error_feature; })},
        {"time_to_consensus_z",
         settle_round([](const RoundRecord& r) { return r.est_error_aux; })},
        {"total_switches", total_switches},
        {"switches_per_agent", per_agent_switches},
    };
    return summary;
}

namespace {

double max_abs_delta(const std::vector<double>& a, const std::vector<double>& b) {
    double out = 0.0;
    for (size_t i = 0; i < a.size(); ++i) out = std::max(out, std::abs(a[i] - b[i]));
    return out;
}

double cumulative_loss(const Trace& t) {
    double total = 0.0;
    for (const auto& r : t.records) total += r.loss.value_or(0.0);
    return total;
}

}  // namespace

json compare_traces(const Trace& a, const Trace& b) {
    if (a.records.empty() || b.records.empty()) {
        throw TraceError("cannot compare empty traces");
    }
    if (a.agent_count() != b.agent_count() || a.cluster_count() != b.cluster_count()) {
        throw TraceError("traces are schema-incompatible: " +
                         std::to_string(a.agent_count()) + " agents / " +
                         std::to_string(a.cluster_count()) + " clusters vs " +
                         std::to_string(b.agent_count()) + " / " +
                         std::to_string(b.cluster_count()));
    }

    const size_t common = std::min(a.records.size(), b.records.size());
    json first_divergence = nullptr;
    json first_membership_divergence = nullptr;
    double max_state_delta = 0.0;
    double max_estimate_delta = 0.0;
    long membership_diff_rounds = 0;

    for (size_t r = 0; r < common; ++r) {
        const auto& ra = a.records[r];
        const auto& rb = b.records[r];
        bool diverged = false;
        bool membership_diverged = false;
        for (size_t i = 0; i < ra.agents.size(); ++i) {
            const auto& aa = ra.agents[i];
            const auto& ab = rb.agents[i];
            if (aa.cluster != ab.cluster) membership_diverged = true;
            const double state_delta = std::max(max_abs_delta(aa.feature, ab.feature),
                                                max_abs_delta(aa.aux, ab.aux));
            double est_delta = 0.0;
            for (size_t j = 0; j < aa.feature_estimates.size(); ++j) {
                est_delta = std::max(est_delta, max_abs_delta(aa.feature_estimates[j],
                                                              ab.feature_estimates[j]));
                est_delta = std::max(est_delta, max_abs_delta(aa.aux_estimates[j],
                                                              ab.aux_estimates[j]));
            }
            max_state_delta = std::max(max_state_delta, state_delta);
            max_estimate_delta = std::max(max_estimate_delta, est_delta);
            if (membership_diverged || state_delta > 0.0 || est_delta > 0.0 ||
                aa.switch_count != ab.switch_count) {
                diverged = true;
            }
        }
        if (diverged && first_divergence.is_null()) {
            first_divergence = static_cast<long>(r);
        }
        if (membership_diverged) {
            ++membership_diff_rounds;
            if (first_membership_divergence.is_null()) {
                first_membership_divergence = static_cast<long>(r);
            }
        }
    }

    const bool length_mismatch = a.records.size() != b.records.size();
    json diff{
        {"schema", "declust-diff-v1"},
        {"rounds_a", a.rounds()},
        {"rounds_b", b.rounds()},
        {"length_mismatch", length_mismatch},
        {"identical", !length_mismatch && first_divergence.is_null()},
        {"first_divergence_round", first_divergence},
        {"first_membership_divergence_round", first_membership_divergence},
        {"membership_diff_rounds", membership_diff_rounds},
        {"max_state_delta", max_state_delta},
        {"max_estimate_delta", max_estimate_delta},
        {"final_est_err_x_delta",
         b.records[common - 1].est_error_feature - a.records[common - 1].est_error_feature},
        {"loss_sum_a", cumulative_loss(a)},
        {"loss_sum_b", cumulative_loss(b)},
        {"loss_sum_delta", cumulative_loss(b) - cumulative_loss(a)},
    };
    return diff;
}

}  // namespace declust
