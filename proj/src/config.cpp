#include "declust/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "declust/consensus.hpp"

namespace declust {

namespace {

// Typed, issue-collecting view of one table. Every key that is read gets
// marked; `finish` flags whatever remains so unknown keys are rejected with
// their location.
class SectionReader {
public:
    SectionReader(const toml::Table* table, std::string section,
                  std::vector<ConfigIssue>& issues)
        : table_(table), section_(std::move(section)), issues_(&issues) {}

    bool present() const { return table_ != nullptr; }

    const toml::Value* raw(const std::string& key, bool required) {
        if (!table_) return nullptr;
        auto it = table_->find(key);
        if (it == table_->end()) {
            if (required) issue(key, "required key missing");
            return nullptr;
        }
        used_.insert(key);
        return &it->second;
    }

    std::optional<std::int64_t> integer(const std::string& key, bool required) {
        const auto* v = raw(key, required);
        if (!v) return std::nullopt;
        if (!v->is_integer()) {
            issue(key, std::string("expected an integer, got ") + v->type_name());
            return std::nullopt;
        }
        return v->as_integer();
    }

    std::optional<double> number(const std::string& key, bool required) {
        const auto* v = raw(key, required);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            issue(key, std::string("expected a number, got ") + v->type_name());
            return std::nullopt;
        }
        return v->as_number();
    }

    std::optional<std::string> text(const std::string& key, bool required) {
        const auto* v = raw(key, required);
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            issue(key, std::string("expected a string, got ") + v->type_name());
            return std::nullopt;
        }
        return v->as_string();
    }

    std::optional<std::vector<double>> number_array(const std::string& key,
                                                    bool required) {
        const auto* v = raw(key, required);
        if (!v) return std::nullopt;
        return to_number_array(key, *v);
    }

    std::optional<std::vector<std::vector<double>>> number_matrix(
        const std::string& key, bool required) {
        const auto* v = raw(key, required);
        if (!v) return std::nullopt;
        if (!v->is_array()) {
            issue(key, "expected an array of number arrays");
            return std::nullopt;
        }
        std::vector<std::vector<double>> rows;
        for (const auto& item : v->as_array()) {
            auto row = to_number_array(key, item);
            if (!row) return std::nullopt;
            rows.push_back(std::move(*row));
        }
        return rows;
    }

    std::optional<std::vector<int>> int_array(const std::string& key, bool required) {
        const auto* v = raw(key, required);
        if (!v) return std::nullopt;
        if (!v->is_array()) {
            issue(key, "expected an array of integers");
            return std::nullopt;
        }
        std::vector<int> out;
        for (const auto& item : v->as_array()) {
            if (!item.is_integer()) {
                issue(key, "expected integer entries");
                return std::nullopt;
            }
            out.push_back(static_cast<int>(item.as_integer()));
        }
        return out;
    }

    void issue(const std::string& key, const std::string& message) {
        issues_->push_back({section_, key, message});
    }

    void finish() {
        if (!table_) return;
        for (const auto& [key, value] : *table_) {
            if (!used_.count(key)) {
                issue(key, "unknown or inapplicable key");
            }
        }
    }

private:
    std::optional<std::vector<double>> to_number_array(const std::string& key,
                                                       const toml::Value& v) {
        if (!v.is_array()) {
            issue(key, "expected a number array");
            return std::nullopt;
        }
        std::vector<double> out;
        for (const auto& item : v.as_array()) {
            if (!item.is_number()) {
                issue(key, "expected numeric entries");
                return std::nullopt;
            }
            out.push_back(item.as_number());
        }
        return out;
    }

    const toml::Table* table_;
    std::string section_;
    std::set<std::string> used_;
    std::vector<ConfigIssue>* issues_;
};

const toml::Table* sub_table(const toml::Table&, const std::string& key,
                             SectionReader& parent) {
    const auto* v = parent.raw(key, false);
    if (!v) return nullptr;
    if (!v->is_table()) {
        parent.issue(key, "expected a table section");
        return nullptr;
    }
    return &v->as_table();
}

const toml::Array* table_array(SectionReader& parent, const std::string& key,
                               bool required) {
    const auto* v = parent.raw(key, required);
    if (!v) return nullptr;
    if (!v->is_array()) {
        parent.issue(key, "expected an array of tables ([[...]])");
        return nullptr;
    }
    for (const auto& item : v->as_array()) {
        if (!item.is_table()) {
            parent.issue(key, "expected an array of tables ([[...]])");
            return nullptr;
        }
    }
    return &v->as_array();
}

toml::Array matrix_value(const std::vector<std::vector<double>>& rows) {
    toml::Array out;
    for (const auto& row : rows) {
        toml::Array r;
        for (double v : row) r.push_back(toml::Value(v));
        out.push_back(toml::Value(std::move(r)));
    }
    return out;
}

toml::Array int_array_value(const std::vector<int>& values) {
    toml::Array out;
    for (int v : values) out.push_back(toml::Value(static_cast<std::int64_t>(v)));
    return out;
}

struct ParsedProtocol {
    int clusters = 1;
    bool step_auto = false;
    double step = 0.0;
    HysteresisPolicy hysteresis;
    std::vector<std::vector<double>> feature_seeds;
    std::vector<std::vector<double>> aux_seeds;
};

bool matrix_dims_ok(const std::vector<std::vector<double>>& rows, size_t want_rows,
                    size_t want_cols) {
    if (rows.size() != want_rows) return false;
    for (const auto& r : rows) {
        if (r.size() != want_cols) return false;
    }
    return true;
}

}  // namespace

LoadedScenario load_scenario_text(const std::string& text, const Overrides& overrides) {
    std::vector<ConfigIssue> issues;
    toml::Table root = toml::parse(text);

    SectionReader top(&root, "", issues);

    if (auto version = top.integer("schema_version", true);
        version && *version != 1) {
        top.issue("schema_version", "unsupported schema version " +
                                        std::to_string(*version) + ", expected 1");
    }

    // ---- graph -----------------------------------------------------------
    SectionReader graph_reader(sub_table(root, "graph", top), "graph", issues);
    std::optional<Graph> graph;
    if (!graph_reader.present()) {
        issues.push_back({"graph", "", "required section missing"});
    } else {
        const auto nodes = graph_reader.integer("nodes", true);
        const auto coupling = graph_reader.number("coupling", true);
        const auto* edges_value = graph_reader.raw("edges", true);
        std::vector<std::pair<int, int>> edges;
        bool edges_ok = edges_value != nullptr;
        if (edges_value) {
            if (!edges_value->is_array()) {
                graph_reader.issue("edges", "expected an array of [i, j] pairs");
                edges_ok = false;
            } else {
                for (const auto& item : edges_value->as_array()) {
                    if (!item.is_array() || item.as_array().size() != 2 ||
                        !item.as_array()[0].is_integer() ||
                        !item.as_array()[1].is_integer()) {
                        graph_reader.issue("edges", "each edge must be an [i, j] pair");
                        edges_ok = false;
                        break;
                    }
                    edges.emplace_back(
                        static_cast<int>(item.as_array()[0].as_integer()),
                        static_cast<int>(item.as_array()[1].as_integer()));
                }
            }
        }
        if (nodes && coupling && edges_ok) {
            try {
                graph.emplace(static_cast<int>(*nodes), edges, *coupling);
            } catch (const GraphError& e) {
                graph_reader.issue("edges", e.what());
            }
        }
    }
    graph_reader.finish();

    // ---- protocol --------------------------------------------------------
    ParsedProtocol protocol;
    SectionReader proto_reader(sub_table(root, "protocol", top), "protocol", issues);
    if (!proto_reader.present()) {
        issues.push_back({"protocol", "", "required section missing"});
    } else {
        if (auto m = proto_reader.integer("clusters", true)) {
            protocol.clusters = static_cast<int>(*m);
            if (*m < 1) proto_reader.issue("clusters", "must be >= 1");
        }
        if (const auto* step = proto_reader.raw("step", true)) {
            if (step->is_string()) {
                if (step->as_string() == "auto") {
                    protocol.step_auto = true;
                } else {
                    proto_reader.issue("step", "expected a number or \"auto\"");
                }
            } else if (step->is_number()) {
                protocol.step = step->as_number();
            } else {
                proto_reader.issue("step", "expected a number or \"auto\"");
            }
        }
        protocol.hysteresis.margin =
            proto_reader.number("margin", false).value_or(0.05);
        protocol.hysteresis.dwell_rounds =
            static_cast<int>(proto_reader.integer("dwell", false).value_or(10));
        if (!(protocol.hysteresis.margin >= 0.0 && protocol.hysteresis.margin < 1.0)) {
            proto_reader.issue("margin", "hysteresis margin must lie in [0, 1), got " +
                                             std::to_string(protocol.hysteresis.margin));
        }
        if (protocol.hysteresis.dwell_rounds < 0) {
            proto_reader.issue("dwell", "dwell rounds must be >= 0");
        }
        if (auto seeds = proto_reader.number_matrix("feature_seeds", true)) {
            protocol.feature_seeds = std::move(*seeds);
        }
        if (auto seeds = proto_reader.number_matrix("aux_seeds", false)) {
            protocol.aux_seeds = std::move(*seeds);
        }
    }
    proto_reader.finish();

    // ---- run -------------------------------------------------------------
    long rounds = 0;
    std::uint64_t seed = 0;
    SectionReader run_reader(sub_table(root, "run", top), "run", issues);
    if (!run_reader.present()) {
        issues.push_back({"run", "", "required section missing"});
    } else {
        if (auto r = run_reader.integer("rounds", true)) {
            rounds = *r;
            if (*r < 0) run_reader.issue("rounds", "must be >= 0");
        }
        if (auto s = run_reader.integer("seed", false)) {
            if (*s < 0) {
                run_reader.issue("seed", "must be >= 0");
            } else {
                seed = static_cast<std::uint64_t>(*s);
            }
        }
    }
    run_reader.finish();
    if (overrides.rounds) rounds = *overrides.rounds;
    if (overrides.seed) seed = *overrides.seed;

    // ---- output ----------------------------------------------------------
    OutputConfig output;
    SectionReader out_reader(sub_table(root, "output", top), "output", issues);
    if (out_reader.present()) {
        output.trace_path = out_reader.text("trace", false).value_or(output.trace_path);
        output.summary_path =
            out_reader.text("summary", false).value_or(output.summary_path);
        output.format = out_reader.text("format", false).value_or(output.format);
    }
    out_reader.finish();
    if (overrides.format) output.format = *overrides.format;
    if (output.format != "jsonl" && output.format != "csv") {
        issues.push_back({"output", "format", "must be \"jsonl\" or \"csv\""});
    }
    if (overrides.out_dir) {
        namespace fs = std::filesystem;
        output.trace_path =
            (fs::path(*overrides.out_dir) / fs::path(output.trace_path).filename())
                .string();
        output.summary_path =
            (fs::path(*overrides.out_dir) / fs::path(output.summary_path).filename())
                .string();
    }

    // ---- scenario --------------------------------------------------------
    std::string kind;
    std::optional<std::vector<int>> fixed_assignment;
    SectionReader scen_reader(sub_table(root, "scenario", top), "scenario", issues);
    if (!scen_reader.present()) {
        issues.push_back({"scenario", "", "required section missing"});
    } else {
        kind = scen_reader.text("kind", true).value_or("");
        if (!kind.empty() && kind != "abstract" && kind != "microgrid-loss" &&
            kind != "ves") {
            scen_reader.issue("kind",
                              "must be \"abstract\", \"microgrid-loss\" or \"ves\"");
            kind.clear();
        }
        const std::string grouping =
            scen_reader.text("grouping", false).value_or("dynamic");
        if (grouping == "fixed") {
            if (auto fa = scen_reader.int_array("fixed_assignment", true)) {
                fixed_assignment = std::move(*fa);
            }
        } else if (grouping != "dynamic") {
            scen_reader.issue("grouping", "must be \"dynamic\" or \"fixed\"");
        }
    }
    scen_reader.finish();

    const int node_count = graph ? graph->node_count() : 0;
    const auto cluster_count = static_cast<size_t>(std::max(protocol.clusters, 1));

    // ---- scenario payload -------------------------------------------------
    std::unique_ptr<Scenario> scenario;
    size_t feature_dim = 0;
    size_t aux_dim = 0;

    std::vector<std::vector<double>> abstract_features;
    std::vector<std::vector<double>> abstract_auxes;
    MicrogridConfig mg;

    if (kind == "abstract") {
        const auto* agents = table_array(top, "agents", true);
        if (agents) {
            std::vector<std::pair<int, std::pair<std::vector<double>, std::vector<double>>>>
                rows;
            bool aux_seen = false;
            for (size_t idx = 0; idx < agents->size(); ++idx) {
                SectionReader agent_reader(&(*agents)[idx].as_table(),
                                           "agents[" + std::to_string(idx) + "]",
                                           issues);
                const auto id = agent_reader.integer("id", true);
                auto feature = agent_reader.number_array("feature", true);
                auto aux = agent_reader.number_array("aux", false);
                agent_reader.finish();
                if (!id || !feature) continue;
                if (aux) aux_seen = true;
                rows.push_back({static_cast<int>(*id),
                                {std::move(*feature), aux.value_or(std::vector<double>{})}});
            }
            std::sort(rows.begin(), rows.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            std::vector<int> ids;
            for (const auto& [id, payload] : rows) ids.push_back(id);
            bool ids_ok = static_cast<int>(ids.size()) == node_count;
            for (int i = 0; ids_ok && i < node_count; ++i) ids_ok = ids[static_cast<size_t>(i)] == i + 1;
            if (!ids_ok) {
                issues.push_back({"agents", "id",
                                  "agent ids must cover 1..nodes exactly once"});
            } else {
                feature_dim = rows.empty() ? 0 : rows.front().second.first.size();
                aux_dim = rows.empty() ? 0 : rows.front().second.second.size();
                for (const auto& [id, payload] : rows) {
                    if (payload.first.size() != feature_dim ||
                        payload.second.size() != aux_dim) {
                        issues.push_back({"agents", "feature",
                                          "all agents must share the same feature and "
                                          "aux dimensions"});
                        ids_ok = false;
                        break;
                    }
                    abstract_features.push_back(payload.first);
                    abstract_auxes.push_back(payload.second);
                }
                if (feature_dim == 0 && ids_ok) {
                    issues.push_back({"agents", "feature", "feature vectors must be non-empty"});
                }
                if (aux_seen && aux_dim == 0) {
                    issues.push_back({"agents", "aux", "aux vectors, when given, must be non-empty and uniform"});
                }
            }
        }
    } else if (kind == "microgrid-loss" || kind == "ves") {
        const bool is_ves = kind == "ves";
        mg.mode = is_ves ? MicrogridMode::virtual_storage : MicrogridMode::loss_reduction;
        feature_dim = 2;
        aux_dim = 2;

        const auto* batteries = table_array(top, "batteries", true);
        if (batteries) {
            std::vector<BatteryPlant> plants;
            for (size_t idx = 0; idx < batteries->size(); ++idx) {
                SectionReader battery_reader(&(*batteries)[idx].as_table(),
                                             "batteries[" + std::to_string(idx) + "]",
                                             issues);
                BatteryPlant plant;
                plant.id = static_cast<int>(battery_reader.integer("id", true).value_or(0));
                plant.capacity_kwh =
                    battery_reader.number("capacity_kwh", true).value_or(0.0);
                plant.load_kw = battery_reader.number("load_kw", true).value_or(0.0);
                plant.soc = battery_reader.number("soc", true).value_or(0.0);
                if (is_ves) {
                    plant.price = battery_reader.number("price", true).value_or(0.0);
                } else {
                    plant.rho = battery_reader.number("rho", false).value_or(1.0);
                }
                battery_reader.finish();

                const std::string where = "batteries[" + std::to_string(idx) + "]";
                if (!(plant.capacity_kwh > 0.0)) {
                    issues.push_back({where, "capacity_kwh", "must be > 0"});
                }
                if (plant.load_kw < 0.0) {
                    issues.push_back({where, "load_kw", "must be >= 0"});
                }
                if (plant.soc < 0.0 || plant.soc > 1.0) {
                    issues.push_back({where, "soc", "must lie in [0, 1]"});
                }
                if (!is_ves && !(plant.rho > 0.0)) {
                    issues.push_back({where, "rho", "must be > 0"});
                }
                if (is_ves && plant.price < 0.0) {
                    issues.push_back({where, "price", "must be >= 0"});
                }
                plants.push_back(plant);
            }
            std::sort(plants.begin(), plants.end(),
                      [](const auto& a, const auto& b) { return a.id < b.id; });
            bool ids_ok = static_cast<int>(plants.size()) == node_count;
            for (int i = 0; ids_ok && i < node_count; ++i) {
                ids_ok = plants[static_cast<size_t>(i)].id == i + 1;
            }
            if (!ids_ok) {
                issues.push_back({"batteries", "id",
                                  "battery ids must cover 1..nodes exactly once"});
            } else {
                mg.plants = std::move(plants);
            }
        }

        SectionReader feat_reader(sub_table(root, "features", top), "features", issues);
        auto read_bounds = [&](const char* key, bool required) -> std::optional<Bounds> {
            auto arr = feat_reader.number_array(key, required);
            if (!arr) return std::nullopt;
            if (arr->size() != 2 || !((*arr)[0] < (*arr)[1])) {
                feat_reader.issue(key, "expected [lo, hi] with lo < hi");
                return std::nullopt;
            }
            return Bounds{(*arr)[0], (*arr)[1]};
        };
        if (!feat_reader.present()) {
            issues.push_back({"features", "", "required section missing"});
        } else {
            if (is_ves) {
                mg.bounds.price = read_bounds("price_bounds", true).value_or(Bounds{0, 1});
            } else {
                mg.bounds.load = read_bounds("load_bounds", true).value_or(Bounds{0, 1});
            }
            mg.bounds.capacity =
                read_bounds("capacity_bounds", true).value_or(Bounds{0, 1});
        }
        feat_reader.finish();

        SectionReader disp_reader(sub_table(root, "dispatch", top), "dispatch", issues);
        if (!disp_reader.present()) {
            issues.push_back({"dispatch", "", "required section missing"});
        } else {
            mg.gain = disp_reader.number("gain", true).value_or(0.0);
            if (!(mg.gain > 0.0)) disp_reader.issue("gain", "must be > 0");
            if (is_ves) {
                mg.external_rate = disp_reader.number("external_rate", true).value_or(0.0);
            }
        }
        disp_reader.finish();

        if (is_ves) {
            SectionReader ves_reader(sub_table(root, "ves", top), "ves", issues);
            if (!ves_reader.present()) {
                issues.push_back({"ves", "", "required section missing"});
            } else {
                VesRequirement req;
                req.required_capacity_kwh =
                    ves_reader.number("required_capacity_kwh", true).value_or(0.0);
                if (req.required_capacity_kwh < 0.0) {
                    ves_reader.issue("required_capacity_kwh", "must be >= 0");
                }
                req.max_price = ves_reader.number("max_price", true).value_or(0.0);
                if (req.max_price < 0.0) ves_reader.issue("max_price", "must be >= 0");
                if (auto pinned = ves_reader.int_array("pinned", true)) {
                    req.pinned_agents = std::move(*pinned);
                    if (req.pinned_agents.empty()) {
                        ves_reader.issue("pinned", "at least one agent must be pinned");
                    }
                    std::set<int> seen;
                    for (int id : req.pinned_agents) {
                        if (id < 1 || id > node_count) {
                            ves_reader.issue("pinned", "agent " + std::to_string(id) +
                                                           " outside [1, " +
                                                           std::to_string(node_count) +
                                                           "]");
                        } else if (!seen.insert(id).second) {
                            ves_reader.issue("pinned",
                                             "agent " + std::to_string(id) + " repeated");
                        }
                    }
                }
                if (auto seeds = ves_reader.number_matrix("seeds", true)) {
                    req.seed_estimates = std::move(*seeds);
                    if (!matrix_dims_ok(req.seed_estimates, cluster_count, 2)) {
                        ves_reader.issue("seeds",
                                         "expected one [price, capacity_kwh] pair per "
                                         "cluster");
                    }
                }
                mg.ves_tolerance =
                    ves_reader.number("convergence_tolerance", false).value_or(1e-3);
                mg.requirement = std::move(req);
            }
            ves_reader.finish();
        }
    }

    // ---- seed dimensions ---------------------------------------------------
    if (kind == "abstract" || kind == "microgrid-loss" || kind == "ves") {
        if (!protocol.feature_seeds.empty() || feature_dim > 0) {
            if (!matrix_dims_ok(protocol.feature_seeds, cluster_count, feature_dim)) {
                issues.push_back(
                    {"protocol", "feature_seeds",
                     "expected " + std::to_string(cluster_count) + " seed vectors of "
                     "dimension " + std::to_string(feature_dim)});
            }
        }
        if (aux_dim > 0) {
            if (!matrix_dims_ok(protocol.aux_seeds, cluster_count, aux_dim)) {
                issues.push_back(
                    {"protocol", "aux_seeds",
                     "expected " + std::to_string(cluster_count) + " seed vectors of "
                     "dimension " + std::to_string(aux_dim)});
            }
        } else if (!protocol.aux_seeds.empty()) {
            issues.push_back({"protocol", "aux_seeds",
                              "scenario has no auxiliary states; remove aux_seeds"});
        }
    }

    // ---- faults ------------------------------------------------------------
    std::optional<FaultModel> fault_model;
    SectionReader fault_reader(sub_table(root, "faults", top), "faults", issues);
    if (fault_reader.present()) {
        FaultModel fm;
        fm.drop_probability =
            fault_reader.number("drop_probability", false).value_or(0.0);
        fm.delay_rounds =
            static_cast<int>(fault_reader.integer("delay_rounds", false).value_or(0));
        fault_model = fm;
    }
    fault_reader.finish();

    // ---- perturbations -----------------------------------------------------
    std::vector<PerturbationEvent> perturbations;
    if (const auto* events = table_array(top, "perturbations", false)) {
        for (size_t idx = 0; idx < events->size(); ++idx) {
            const std::string where = "perturbations[" + std::to_string(idx) + "]";
            SectionReader event_reader(&(*events)[idx].as_table(), where, issues);
            PerturbationEvent event;
            event.round = event_reader.integer("round", true).value_or(0);
            event.target =
                static_cast<int>(event_reader.integer("target", true).value_or(0));
            const std::string channel =
                event_reader.text("channel", true).value_or("feature");
            if (channel == "feature") {
                event.channel = PerturbationEvent::Channel::feature;
            } else if (channel == "aux") {
                event.channel = PerturbationEvent::Channel::aux;
            } else {
                event_reader.issue("channel", "must be \"feature\" or \"aux\"");
            }
            event.set_value = event_reader.number_array("set", false);
            event.add_delta = event_reader.number_array("add", false);
            event_reader.finish();

            const size_t want =
                kind == "abstract"
                    ? (event.channel == PerturbationEvent::Channel::feature ? feature_dim
                                                                            : aux_dim)
                    : 1;
            const auto* payload =
                event.set_value ? &*event.set_value
                                : (event.add_delta ? &*event.add_delta : nullptr);
            if (payload && want > 0 && payload->size() != want) {
                issues.push_back({where, event.set_value ? "set" : "add",
                                  "expected " + std::to_string(want) + " value(s)"});
            }
            perturbations.push_back(std::move(event));
        }
    }

    top.finish();

    // ---- assemble, resolve the step, validate ------------------------------
    if (!graph) {
        throw ConfigError(std::move(issues));
    }

    double step = protocol.step;
    const double bound = consensus::max_stable_step(*graph);
    if (protocol.step_auto) {
        if (std::isinf(bound)) {
            issues.push_back({"protocol", "step",
                              "\"auto\" is undefined for a single isolated agent; "
                              "give an explicit step"});
            step = 1.0;
        } else {
            step = 0.5 * bound;
        }
    }

    if ((kind == "microgrid-loss" || kind == "ves") && mg.gain > 0.0 && step > 0.0 &&
        step * mg.gain >= 1.0) {
        issues.push_back({"dispatch", "gain",
                          "step * gain = " + std::to_string(step * mg.gain) +
                              " must stay below 1 for monotone state-of-charge "
                              "balancing"});
    }

    SimConfig sim{*graph,
                  protocol.clusters,
                  step,
                  rounds,
                  protocol.hysteresis,
                  seed,
                  std::move(perturbations),
                  fault_model,
                  fixed_assignment};

    for (auto& issue : validate_sim_config(sim)) issues.push_back(std::move(issue));

    if (!issues.empty()) {
        // parse-time and engine-level validation can flag the same problem
        std::sort(issues.begin(), issues.end(), [](const auto& a, const auto& b) {
            return std::tie(a.section, a.key, a.message) <
                   std::tie(b.section, b.key, b.message);
        });
        issues.erase(std::unique(issues.begin(), issues.end(),
                                 [](const auto& a, const auto& b) {
                                     return a.section == b.section && a.key == b.key &&
                                            a.message == b.message;
                                 }),
                     issues.end());
        throw ConfigError(std::move(issues));
    }

    // Auxiliary seeds for m = 0 scenarios: one empty vector per cluster.
    auto aux_seeds = protocol.aux_seeds;
    if (aux_dim == 0) {
        aux_seeds.assign(cluster_count, {});
    }

    if (kind == "abstract") {
        scenario = std::make_unique<AbstractScenario>(
            std::move(abstract_features), std::move(abstract_auxes),
            protocol.feature_seeds, aux_seeds);
    } else {
        mg.feature_seeds = protocol.feature_seeds;
        mg.aux_seeds = aux_seeds;
        scenario = std::make_unique<MicrogridScenario>(mg);
    }

    // ---- canonical config for emit/round-trips -----------------------------
    toml::Table norm;
    norm["schema_version"] = toml::Value(std::int64_t{1});

    toml::Table graph_t;
    graph_t["nodes"] = toml::Value(static_cast<std::int64_t>(sim.graph.node_count()));
    graph_t["coupling"] = toml::Value(sim.graph.coupling_strength());
    toml::Array edges_t;
    for (const auto& [a, b] : sim.graph.edges()) {
        edges_t.push_back(toml::Value(toml::Array{
            toml::Value(static_cast<std::int64_t>(a)),
            toml::Value(static_cast<std::int64_t>(b))}));
    }
    graph_t["edges"] = toml::Value(std::move(edges_t));
    norm["graph"] = toml::Value(std::move(graph_t));

    toml::Table proto_t;
    proto_t["clusters"] = toml::Value(static_cast<std::int64_t>(sim.cluster_count));
    proto_t["step"] = toml::Value(sim.step);
    proto_t["margin"] = toml::Value(sim.hysteresis.margin);
    proto_t["dwell"] = toml::Value(static_cast<std::int64_t>(sim.hysteresis.dwell_rounds));
    proto_t["feature_seeds"] = toml::Value(matrix_value(protocol.feature_seeds));
    if (aux_dim > 0) {
        proto_t["aux_seeds"] = toml::Value(matrix_value(protocol.aux_seeds));
    }
    norm["protocol"] = toml::Value(std::move(proto_t));

    toml::Table run_t;
    run_t["rounds"] = toml::Value(static_cast<std::int64_t>(sim.rounds));
    run_t["seed"] = toml::Value(static_cast<std::int64_t>(sim.seed));
    norm["run"] = toml::Value(std::move(run_t));

    toml::Table out_t;
    out_t["trace"] = toml::Value(output.trace_path);
    out_t["summary"] = toml::Value(output.summary_path);
    out_t["format"] = toml::Value(output.format);
    norm["output"] = toml::Value(std::move(out_t));

    toml::Table scen_t;
    scen_t["kind"] = toml::Value(kind);
    scen_t["grouping"] = toml::Value(sim.fixed_assignment ? "fixed" : "dynamic");
    if (sim.fixed_assignment) {
        scen_t["fixed_assignment"] = toml::Value(int_array_value(*sim.fixed_assignment));
    }
    norm["scenario"] = toml::Value(std::move(scen_t));

    if (kind == "abstract") {
        const auto* abstract = dynamic_cast<const AbstractScenario*>(scenario.get());
        toml::Array agents_t;
        for (int id = 1; id <= node_count; ++id) {
            toml::Table agent_t;
            agent_t["id"] = toml::Value(static_cast<std::int64_t>(id));
            toml::Array fv;
            for (double v : abstract->measure_feature(id)) fv.push_back(toml::Value(v));
            agent_t["feature"] = toml::Value(std::move(fv));
            if (aux_dim > 0) {
                toml::Array av;
                for (double v : abstract->measure_aux(id)) av.push_back(toml::Value(v));
                agent_t["aux"] = toml::Value(std::move(av));
            }
            agents_t.push_back(toml::Value(std::move(agent_t)));
        }
        norm["agents"] = toml::Value(std::move(agents_t));
    } else {
        const auto* microgrid = dynamic_cast<const MicrogridScenario*>(scenario.get());
        const bool is_ves = kind == "ves";
        toml::Array batteries_t;
        for (const auto& plant : microgrid->plants()) {
            toml::Table battery_t;
            battery_t["id"] = toml::Value(static_cast<std::int64_t>(plant.id));
            battery_t["capacity_kwh"] = toml::Value(plant.capacity_kwh);
            battery_t["load_kw"] = toml::Value(plant.load_kw);
            battery_t["soc"] = toml::Value(plant.soc);
            if (is_ves) {
                battery_t["price"] = toml::Value(plant.price);
            } else {
                battery_t["rho"] = toml::Value(plant.rho);
            }
            batteries_t.push_back(toml::Value(std::move(battery_t)));
        }
        norm["batteries"] = toml::Value(std::move(batteries_t));

        toml::Table features_t;
        if (is_ves) {
            features_t["price_bounds"] = toml::Value(
                toml::Array{toml::Value(mg.bounds.price.lo), toml::Value(mg.bounds.price.hi)});
        } else {
            features_t["load_bounds"] = toml::Value(
                toml::Array{toml::Value(mg.bounds.load.lo), toml::Value(mg.bounds.load.hi)});
        }
        features_t["capacity_bounds"] = toml::Value(toml::Array{
            toml::Value(mg.bounds.capacity.lo), toml::Value(mg.bounds.capacity.hi)});
        norm["features"] = toml::Value(std::move(features_t));

        toml::Table dispatch_t;
        dispatch_t["gain"] = toml::Value(mg.gain);
        if (is_ves) dispatch_t["external_rate"] = toml::Value(mg.external_rate);
        norm["dispatch"] = toml::Value(std::move(dispatch_t));

        if (is_ves) {
            const auto& req = *mg.requirement;
            toml::Table ves_t;
            ves_t["required_capacity_kwh"] = toml::Value(req.required_capacity_kwh);
            ves_t["max_price"] = toml::Value(req.max_price);
            ves_t["pinned"] = toml::Value(int_array_value(req.pinned_agents));
            ves_t["seeds"] = toml::Value(matrix_value(req.seed_estimates));
            ves_t["convergence_tolerance"] = toml::Value(mg.ves_tolerance);
            norm["ves"] = toml::Value(std::move(ves_t));
        }
    }

    if (fault_model) {
        toml::Table faults_t;
        faults_t["drop_probability"] = toml::Value(fault_model->drop_probability);
        faults_t["delay_rounds"] =
            toml::Value(static_cast<std::int64_t>(fault_model->delay_rounds));
        norm["faults"] = toml::Value(std::move(faults_t));
    }

    if (!sim.perturbations.empty()) {
        toml::Array events_t;
        for (const auto& event : sim.perturbations) {
            toml::Table event_t;
            event_t["round"] = toml::Value(static_cast<std::int64_t>(event.round));
            event_t["target"] = toml::Value(static_cast<std::int64_t>(event.target));
            event_t["channel"] = toml::Value(
                event.channel == PerturbationEvent::Channel::feature ? "feature" : "aux");
            if (event.set_value) {
                toml::Array payload;
                for (double v : *event.set_value) payload.push_back(toml::Value(v));
                event_t["set"] = toml::Value(std::move(payload));
            }
            if (event.add_delta) {
                toml::Array payload;
                for (double v : *event.add_delta) payload.push_back(toml::Value(v));
                event_t["add"] = toml::Value(std::move(payload));
            }
            events_t.push_back(toml::Value(std::move(event_t)));
        }
        norm["perturbations"] = toml::Value(std::move(events_t));
    }

    return LoadedScenario{std::move(sim),  std::move(scenario),
                          std::move(output), kind,
                          protocol.step_auto, std::move(norm)};
}

LoadedScenario load_scenario_file(const std::string& path, const Overrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError({{"", path, "cannot open configuration file"}});
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return load_scenario_text(buffer.str(), overrides);
}

std::string emit_normalized(const LoadedScenario& loaded) {
    return toml::emit(loaded.normalized);
}

}  // namespace declust
