#pragma once

// Set algebra over benchmark contexts: a context expands into the Cartesian
// product of datasets x models x per-model hyperparameter settings, each
// scenario carrying the full metric set.

#include <string>
#include <vector>

#include "cb/core/types.hpp"

namespace cb {

/// Canonical hyper JSON, e.g. `{"alpha":0.5,"k":1}`; `{}` for the empty setting.
std::string canonical_hyper(const HyperparameterSetting& h);

/// `dataset@v|model@v|<first 16 hex of sha256(canonical hyper)>`.
std::string scenario_key(const BenchmarkScenario& scenario);

/// Throws Error(EmptyFamily) if any of datasets/models/metrics is empty and
/// Error(SchemaViolation) on other invariant failures.
std::vector<BenchmarkScenario> expand_context(const BenchmarkContext& context);

/// Closed-form |expand_context(context)|.
std::size_t expansion_size(const BenchmarkContext& context);

InstrumentedContext instrument(const BenchmarkContext& context, const SystemProfile& profile);

/// Fills profile_hash from the other fields.
std::string compute_profile_hash(const SystemProfile& profile);
SystemProfile with_profile_hash(SystemProfile profile);

struct Violation {
    std::string kind;  // missing-scenario, missing-metric, ...
    std::string scenario_key;
    std::string detail;

    bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

ValidationReport validate_run(const BenchmarkRun& run, const BenchmarkContext& context);

}  // namespace cb
