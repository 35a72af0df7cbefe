#include "cb/core/types.hpp"

#include <array>
#include <charconv>
#include <utility>

#include "cb/core/error.hpp"

namespace cb {

namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<ComponentKind, 3> kKinds{{
    {ComponentKind::Dataset, "dataset"},
    {ComponentKind::Model, "model"},
    {ComponentKind::Metric, "metric"},
}};

constexpr NameTable<TaskKind, 3> kTasks{{
    {TaskKind::CausalDiscovery, "causal-discovery"},
    {TaskKind::CausalEffectEstimation, "causal-effect-estimation"},
    {TaskKind::CausalInterpretability, "causal-interpretability"},
}};

constexpr NameTable<DataRole, 6> kRoles{{
    {DataRole::TabularObservations, "tabular-observations"},
    {DataRole::CausalGraph, "causal-graph"},
    {DataRole::TreatmentEffectEstimates, "treatment-effect-estimates"},
    {DataRole::CounterfactualOutcomes, "counterfactual-outcomes"},
    {DataRole::ExplanationArtifact, "explanation-artifact"},
    {DataRole::Scalar, "scalar"},
}};

constexpr NameTable<Visibility, 2> kVisibility{{
    {Visibility::Private, "private"},
    {Visibility::Public, "public"},
}};

constexpr NameTable<ScenarioStatus, 4> kStatus{{
    {ScenarioStatus::Ok, "ok"},
    {ScenarioStatus::ModelFailed, "model-failed"},
    {ScenarioStatus::MetricFailed, "metric-failed"},
    {ScenarioStatus::Timeout, "timeout"},
}};

constexpr NameTable<Direction, 2> kDirections{{
    {Direction::HigherBetter, "higher-better"},
    {Direction::LowerBetter, "lower-better"},
}};

constexpr NameTable<ParamType, 4> kParamTypes{{
    {ParamType::Int, "int"},
    {ParamType::Float, "float"},
    {ParamType::String, "string"},
    {ParamType::Bool, "bool"},
}};

template <typename E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value) {
    for (const auto& [v, name] : table) {
        if (v == value) return name;
    }
    return "?";
}

template <typename E, std::size_t N>
E value_of(const NameTable<E, N>& table, std::string_view text, const char* what) {
    for (const auto& [v, name] : table) {
        if (name == text) return v;
    }
    throw Error(ErrorCode::SchemaViolation,
                std::string("unknown ") + what + " '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(ComponentKind v) { return name_of(kKinds, v); }
std::string_view to_string(TaskKind v) { return name_of(kTasks, v); }
std::string_view to_string(DataRole v) { return name_of(kRoles, v); }
std::string_view to_string(Visibility v) { return name_of(kVisibility, v); }
std::string_view to_string(ScenarioStatus v) { return name_of(kStatus, v); }
std::string_view to_string(Direction v) { return name_of(kDirections, v); }
std::string_view to_string(ParamType v) { return name_of(kParamTypes, v); }

ComponentKind parse_component_kind(std::string_view s) { return value_of(kKinds, s, "component kind"); }
TaskKind parse_task_kind(std::string_view s) { return value_of(kTasks, s, "task kind"); }
DataRole parse_data_role(std::string_view s) { return value_of(kRoles, s, "data role"); }
Visibility parse_visibility(std::string_view s) { return value_of(kVisibility, s, "visibility"); }
ScenarioStatus parse_scenario_status(std::string_view s) { return value_of(kStatus, s, "status"); }
Direction parse_direction(std::string_view s) { return value_of(kDirections, s, "direction"); }
ParamType parse_param_type(std::string_view s) { return value_of(kParamTypes, s, "parameter type"); }

std::string ComponentId::str() const { return name + "@" + std::to_string(version); }

ComponentId ComponentId::parse(std::string_view text) {
    auto at = text.rfind('@');
    if (at == std::string_view::npos || at == 0 || at + 1 == text.size()) {
        throw Error(ErrorCode::SchemaViolation, "component id must be name@version: '" + std::string(text) + "'");
    }
    ComponentId id;
    id.name = std::string(text.substr(0, at));
    auto digits = text.substr(at + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id.version);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
        throw Error(ErrorCode::SchemaViolation, "bad version in '" + std::string(text) + "'");
    }
    return id;
}

ComponentKind kind_of(const Descriptor& d) {
    switch (d.index()) {
        case 0: return ComponentKind::Dataset;
        case 1: return ComponentKind::Model;
        default: return ComponentKind::Metric;
    }
}

const ComponentId& id_of(const Descriptor& d) {
    return std::visit([](const auto& x) -> const ComponentId& { return x.id; }, d);
}

ComponentId& id_of(Descriptor& d) {
    return std::visit([](auto& x) -> ComponentId& { return x.id; }, d);
}

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyFamily: return "empty_family";
        case ErrorCode::SchemaViolation: return "schema_violation";
        case ErrorCode::NameTaken: return "name_taken";
        case ErrorCode::CorruptArchive: return "corrupt_archive";
        case ErrorCode::NotOwner: return "not_owner";
        case ErrorCode::UnknownComponent: return "unknown_component";
        case ErrorCode::UnknownRun: return "unknown_run";
        case ErrorCode::UnknownContext: return "unknown_context";
        case ErrorCode::InvalidRun: return "invalid_run";
        case ErrorCode::RegistrarUnavailable: return "registrar_unavailable";
        case ErrorCode::PermanentEntity: return "permanent_entity";
        case ErrorCode::Forbidden: return "forbidden";
        case ErrorCode::IntegrityFailure: return "integrity_failure";
        case ErrorCode::Unauthenticated: return "unauthenticated";
        case ErrorCode::Conflict: return "conflict";
        case ErrorCode::ProbeFailure: return "probe_failure";
        case ErrorCode::SpawnFailure: return "spawn_failure";
        case ErrorCode::IncompatibleScenario: return "incompatible_scenario";
        case ErrorCode::ShapeMismatch: return "shape_mismatch";
        case ErrorCode::UnknownColumn: return "unknown_column";
        case ErrorCode::UnknownNode: return "unknown_node";
        case ErrorCode::NoOverlap: return "no_overlap";
        case ErrorCode::MissingObjective: return "missing_objective";
        case ErrorCode::EmptyTable: return "empty_table";
        case ErrorCode::MissingConfig: return "missing_config";
        case ErrorCode::MalformedConfig: return "malformed_config";
        case ErrorCode::Io: return "io_error";
        case ErrorCode::Transport: return "transport_error";
    }
    return "unknown";
}

}  // namespace cb
