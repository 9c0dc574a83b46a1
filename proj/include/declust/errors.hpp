#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace declust {

// One validation problem, located by config section/key so a whole file's
// worth of issues can be reported in a single pass.
struct ConfigIssue {
    std::string section;
    std::string key;
    std::string message;

    std::string str() const {
        std::string s;
        if (!section.empty()) s += "[" + section + "] ";
        if (!key.empty()) s += key + ": ";
        s += message;
        return s;
    }
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<ConfigIssue> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

    explicit ConfigError(std::string message)
        : ConfigError(std::vector<ConfigIssue>{{"", "", std::move(message)}}) {}

    const std::vector<ConfigIssue>& issues() const { return issues_; }

private:
    static std::string join(const std::vector<ConfigIssue>& issues) {
        std::string s = "configuration invalid:";
        for (const auto& i : issues) s += "\n  - " + i.str();
        return s;
    }

    std::vector<ConfigIssue> issues_;
};

// Graph construction failures (self-loop, duplicate edge, bad endpoint, ...).
class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// NaN/Inf reaching an estimator input or output. Context (agent, channel,
// round) accumulates as the fault propagates out of the update stack.
class NumericalFault : public std::runtime_error {
public:
    explicit NumericalFault(std::string message, int agent = -1, long round = -1)
        : std::runtime_error(std::move(message)), agent_(agent), round_(round) {}

    int agent() const { return agent_; }
    long round() const { return round_; }

private:
    int agent_;
    long round_;
};

// Message-passing contract violations: missing, extra or stale neighbor
// messages, broken round stamps.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or truncated trace files.
class TraceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace declust
