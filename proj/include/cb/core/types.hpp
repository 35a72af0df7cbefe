#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cb/core/time.hpp"

namespace cb {

enum class ComponentKind { Dataset, Model, Metric };
enum class TaskKind { CausalDiscovery, CausalEffectEstimation, CausalInterpretability };
enum class DataRole {
    TabularObservations,
    CausalGraph,
    TreatmentEffectEstimates,
    CounterfactualOutcomes,
    ExplanationArtifact,
    Scalar,
};
enum class Visibility { Private, Public };
enum class ScenarioStatus { Ok, ModelFailed, MetricFailed, Timeout };
enum class Direction { HigherBetter, LowerBetter };
enum class ParamType { Int, Float, String, Bool };

// Wire names ("dataset", "causal-discovery", "tabular-observations", ...).
std::string_view to_string(ComponentKind v);
std::string_view to_string(TaskKind v);
std::string_view to_string(DataRole v);
std::string_view to_string(Visibility v);
std::string_view to_string(ScenarioStatus v);
std::string_view to_string(Direction v);
std::string_view to_string(ParamType v);

ComponentKind parse_component_kind(std::string_view s);
TaskKind parse_task_kind(std::string_view s);
DataRole parse_data_role(std::string_view s);
Visibility parse_visibility(std::string_view s);
ScenarioStatus parse_scenario_status(std::string_view s);
Direction parse_direction(std::string_view s);
ParamType parse_param_type(std::string_view s);

/// A hyperparameter or dataset property value. Integers and floats are kept
/// apart so that `{"k":1}` and `{"k":1.0}` serialize differently.
using Scalar = std::variant<bool, std::int64_t, double, std::string>;

struct ComponentId {
    std::string name;  // owner/slug
    std::int64_t version = 1;

    /// "owner/slug@3"
    std::string str() const;
    static ComponentId parse(std::string_view text);

    auto operator<=>(const ComponentId&) const = default;
};

struct PortSpec {
    std::string port_name;
    DataRole data_role = DataRole::TabularObservations;
    bool required = true;

    bool operator==(const PortSpec&) const = default;
};

struct SignatureSpec {
    TaskKind task = TaskKind::CausalDiscovery;
    std::vector<PortSpec> inputs;
    std::vector<PortSpec> outputs;

    bool operator==(const SignatureSpec&) const = default;
};

struct DatasetFile {
    std::string logical_name;
    std::string content_hash;  // sha256, lowercase hex
    std::int64_t byte_size = 0;

    bool operator==(const DatasetFile&) const = default;
};

using PropertyMap = std::map<std::string, Scalar>;

struct DatasetDescriptor {
    ComponentId id;
    std::vector<DatasetFile> files;
    PropertyMap config;
    std::vector<PortSpec> provided_ports;

    bool operator==(const DatasetDescriptor&) const = default;
};

struct ParamSpec {
    ParamType type = ParamType::Float;
    Scalar default_value;
    std::optional<std::pair<double, double>> range;  // inclusive, numeric types only
    std::vector<Scalar> allowed;                     // empty = unrestricted

    bool operator==(const ParamSpec&) const = default;
};

struct ModelDescriptor {
    ComponentId id;
    SignatureSpec signature;
    std::string entrypoint;
    std::map<std::string, ParamSpec> hyperparameter_schema;

    bool operator==(const ModelDescriptor&) const = default;
};

struct MetricDescriptor {
    ComponentId id;
    SignatureSpec signature;
    Direction direction = Direction::LowerBetter;
    std::string entrypoint;

    bool operator==(const MetricDescriptor&) const = default;
};

using Descriptor = std::variant<DatasetDescriptor, ModelDescriptor, MetricDescriptor>;

ComponentKind kind_of(const Descriptor& d);
const ComponentId& id_of(const Descriptor& d);
ComponentId& id_of(Descriptor& d);

struct HyperparameterSetting {
    std::map<std::string, Scalar> values;

    bool operator==(const HyperparameterSetting&) const = default;
};

struct BenchmarkContext {
    std::string context_id;
    std::set<ComponentId> datasets;
    std::set<ComponentId> models;
    std::set<ComponentId> metrics;
    std::map<ComponentId, std::vector<HyperparameterSetting>> hyper_family;

    bool operator==(const BenchmarkContext&) const = default;
};

struct BenchmarkScenario {
    ComponentId dataset;
    ComponentId model;
    std::set<ComponentId> metrics;
    HyperparameterSetting hyper;

    bool operator==(const BenchmarkScenario&) const = default;
};

struct SystemProfile {
    std::string cpu_model;
    std::int64_t physical_cores = 1;
    std::int64_t total_memory_bytes = 0;
    std::optional<std::string> gpu_model;
    std::string os_name_version;
    std::map<std::string, std::string> runtime_versions;
    std::string profile_hash;

    bool operator==(const SystemProfile&) const = default;
};

struct InstrumentedContext {
    BenchmarkContext context;
    SystemProfile profile;
    std::vector<BenchmarkScenario> scenarios;

    bool operator==(const InstrumentedContext&) const = default;
};

// Timing and resource keys. GPU keys are absent, never zero, when no GPU was used.
inline constexpr std::string_view kWallTime = "wall_time_s";
inline constexpr std::string_view kCpuTime = "cpu_time_s";
inline constexpr std::string_view kGpuTime = "gpu_time_s";
inline constexpr std::string_view kPeakCpuMemory = "peak_cpu_memory_bytes";
inline constexpr std::string_view kPeakGpuMemory = "peak_gpu_memory_bytes";

struct ScenarioResult {
    BenchmarkScenario scenario;
    ScenarioStatus status = ScenarioStatus::Ok;
    std::map<ComponentId, double> accuracy;
    std::map<std::string, double> timing;
    std::map<std::string, std::int64_t> resources;
    std::string log_excerpt;

    bool operator==(const ScenarioResult&) const = default;
};

struct BenchmarkRun {
    std::string run_id;
    std::string context_id;
    SystemProfile profile;
    std::vector<ScenarioResult> results;
    std::string executed_by;
    UtcTime started_at;
    UtcTime finished_at;
    Visibility visibility = Visibility::Private;
    std::optional<std::string> minted_identifier;

    bool operator==(const BenchmarkRun&) const = default;
};

}  // namespace cb
