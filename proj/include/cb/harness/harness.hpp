#pragma once

// Local execution of benchmark scenarios.
//
// Plugin protocol: every invocation gets a fresh working directory holding
//   inputs.json   {"inputs": {port: absolute file path}, "dataset": {"id", "config", "files": {name: path}}}
//   params.json   the hyperparameter setting, canonical JSON
//   outputs/      models write outputs/<port_name>.<ext>
//   result.json   metrics write {"value": <float>}
// The entrypoint runs with the working directory as cwd and as argv[1].

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cb/core/types.hpp"

namespace cb {

struct ExecutionLimits {
    double timeout_s = 600.0;
    std::int64_t max_output_bytes = 16 * 1024;
    std::filesystem::path working_dir_root;  // empty = a fresh directory under the system temp dir
};

/// Where the harness gets descriptors and payload archives from.
class ComponentSource {
public:
    virtual ~ComponentSource() = default;
    virtual Descriptor descriptor(const ComponentId& id) = 0;
    virtual std::string payload(const ComponentId& id) = 0;
};

/// Throws Error(ProbeFailure) when CPU or memory information is unavailable.
SystemProfile resolve_environment();

struct Command {
    std::filesystem::path entrypoint;
    std::vector<std::string> args;
    std::filesystem::path workdir;
};

enum class ExitKind { Exited, Signaled, TimedOut };

struct Measurement {
    ExitKind exit = ExitKind::Exited;
    int code = 0;  // exit code or signal number
    std::map<std::string, double> timing;
    std::map<std::string, std::int64_t> resources;
    std::string log_excerpt;

    bool succeeded() const { return exit == ExitKind::Exited && code == 0; }
};

/// Runs the command in its own process group, sampling the group's resident
/// memory until it exits; kills the whole group at the timeout. stdout and
/// stderr go to <workdir>/plugin.log. Throws Error(SpawnFailure) if the
/// entrypoint cannot be started.
Measurement measure_execution(const Command& command, const ExecutionLimits& limits);

/// Runs one scenario; failures become statuses. Throws
/// Error(IncompatibleScenario) if the components do not fit together.
ScenarioResult run_scenario(const BenchmarkScenario& scenario, ComponentSource& source, const SystemProfile& profile,
                            const ExecutionLimits& limits);

/// Runs every scenario sequentially in canonical order.
BenchmarkRun execute(const InstrumentedContext& instrumented, ComponentSource& source, const ExecutionLimits& limits,
                     const std::string& executed_by = "");

/// 26-character Crockford base32 id, time-ordered.
std::string new_run_id();

// Adjacency matrices: CSV with a header row of variable names, then one row of
// 0/1 entries per variable.
struct Adjacency {
    std::vector<std::string> names;
    std::vector<std::vector<int>> matrix;
};

Adjacency parse_adjacency_csv(std::string_view text);
std::string adjacency_csv(const Adjacency& a);

/// Directed structural Hamming distance over off-diagonal entries.
double reference_metric_shd(const std::vector<std::vector<int>>& predicted, const std::vector<std::vector<int>>& truth);

}  // namespace cb
