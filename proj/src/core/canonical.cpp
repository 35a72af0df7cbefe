#include "cb/core/canonical.hpp"

#include <cmath>

namespace cb {

namespace {

const Json& req(const Json& j, const char* key) {
    if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, std::string("expected object holding '") + key + "'");
    auto it = j.find(key);
    if (it == j.end()) throw Error(ErrorCode::SchemaViolation, std::string("missing field '") + key + "'");
    return *it;
}

std::string req_string(const Json& j, const char* key) {
    const Json& v = req(j, key);
    if (!v.is_string()) throw Error(ErrorCode::SchemaViolation, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

std::int64_t req_int(const Json& j, const char* key) {
    const Json& v = req(j, key);
    if (!v.is_number_integer()) throw Error(ErrorCode::SchemaViolation, std::string("field '") + key + "' must be an integer");
    return v.get<std::int64_t>();
}

template <typename T>
std::vector<T> list_of(const Json& v, const char* key) {
    if (!v.is_array()) throw Error(ErrorCode::SchemaViolation, std::string("field '") + key + "' must be an array");
    std::vector<T> out;
    out.reserve(v.size());
    for (const auto& e : v) out.push_back(e.get<T>());
    return out;
}

Json id_list(const std::set<ComponentId>& ids) {
    Json arr = Json::array();
    for (const auto& id : ids) arr.push_back(id.str());
    return arr;
}

std::set<ComponentId> id_set(const Json& v, const char* key) {
    std::set<ComponentId> out;
    for (const auto& s : list_of<std::string>(v, key)) out.insert(ComponentId::parse(s));
    return out;
}

void check_finite(const Json& j) {
    switch (j.type()) {
        case Json::value_t::number_float:
            if (!std::isfinite(j.get<double>())) throw Error(ErrorCode::SchemaViolation, "non-finite number");
            break;
        case Json::value_t::array:
        case Json::value_t::object:
            for (const auto& e : j) check_finite(e);
            break;
        default:
            break;
    }
}

}  // namespace

}  // namespace cb

void nlohmann::adl_serializer<cb::Scalar>::to_json(json& j, const cb::Scalar& v) {
    std::visit([&](const auto& x) { j = x; }, v);
}

void nlohmann::adl_serializer<cb::Scalar>::from_json(const json& j, cb::Scalar& v) {
    using cb::Error;
    using cb::ErrorCode;
    using Json = nlohmann::json;
    switch (j.type()) {
        case Json::value_t::boolean: v = j.get<bool>(); break;
        case Json::value_t::number_integer:
        case Json::value_t::number_unsigned: v = j.get<std::int64_t>(); break;
        case Json::value_t::number_float: v = j.get<double>(); break;
        case Json::value_t::string: v = j.get<std::string>(); break;
        default: throw Error(ErrorCode::SchemaViolation, "scalar must be number, string or boolean");
    }
}

namespace cb {

void to_json(Json& j, const ComponentId& v) { j = v.str(); }

void from_json(const Json& j, ComponentId& v) {
    if (!j.is_string()) throw Error(ErrorCode::SchemaViolation, "component id must be a string");
    v = ComponentId::parse(j.get<std::string>());
}

void to_json(Json& j, const PortSpec& v) {
    j = Json{{"port_name", v.port_name}, {"data_role", to_string(v.data_role)}, {"required", v.required}};
}

void from_json(const Json& j, PortSpec& v) {
    v.port_name = req_string(j, "port_name");
    v.data_role = parse_data_role(req_string(j, "data_role"));
    v.required = j.value("required", true);
}

void to_json(Json& j, const SignatureSpec& v) {
    j = Json{{"task", to_string(v.task)}, {"inputs", v.inputs}, {"outputs", v.outputs}};
}

void from_json(const Json& j, SignatureSpec& v) {
    v.task = parse_task_kind(req_string(j, "task"));
    v.inputs = j.contains("inputs") ? list_of<PortSpec>(j["inputs"], "inputs") : std::vector<PortSpec>{};
    v.outputs = j.contains("outputs") ? list_of<PortSpec>(j["outputs"], "outputs") : std::vector<PortSpec>{};
}

void to_json(Json& j, const DatasetFile& v) {
    j = Json{{"logical_name", v.logical_name}, {"content_hash", v.content_hash}, {"byte_size", v.byte_size}};
}

void from_json(const Json& j, DatasetFile& v) {
    v.logical_name = req_string(j, "logical_name");
    v.content_hash = req_string(j, "content_hash");
    v.byte_size = req_int(j, "byte_size");
}

void to_json(Json& j, const DatasetDescriptor& v) {
    Json config = Json::object();
    for (const auto& [k, s] : v.config) config[k] = s;
    j = Json{{"id", v.id}, {"files", v.files}, {"config", config}, {"provided_ports", v.provided_ports}};
}

void from_json(const Json& j, DatasetDescriptor& v) {
    v.id = req(j, "id").get<ComponentId>();
    v.files = list_of<DatasetFile>(req(j, "files"), "files");
    v.config.clear();
    if (j.contains("config")) {
        if (!j["config"].is_object()) throw Error(ErrorCode::SchemaViolation, "config must be an object");
        for (const auto& [k, s] : j["config"].items()) v.config[k] = s.get<Scalar>();
    }
    v.provided_ports = j.contains("provided_ports") ? list_of<PortSpec>(j["provided_ports"], "provided_ports")
                                                    : std::vector<PortSpec>{};
}

void to_json(Json& j, const ParamSpec& v) {
    j = Json{{"type", to_string(v.type)}, {"default", v.default_value}};
    if (v.range) j["range"] = Json::array({v.range->first, v.range->second});
    if (!v.allowed.empty()) j["allowed"] = v.allowed;
}

void from_json(const Json& j, ParamSpec& v) {
    v.type = parse_param_type(req_string(j, "type"));
    v.default_value = req(j, "default").get<Scalar>();
    v.range.reset();
    if (j.contains("range")) {
        const Json& r = j["range"];
        if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
            throw Error(ErrorCode::SchemaViolation, "range must be [min, max]");
        }
        v.range = std::pair{r[0].get<double>(), r[1].get<double>()};
    }
    v.allowed = j.contains("allowed") ? list_of<Scalar>(j["allowed"], "allowed") : std::vector<Scalar>{};
}

void to_json(Json& j, const ModelDescriptor& v) {
    Json schema = Json::object();
    for (const auto& [k, p] : v.hyperparameter_schema) schema[k] = p;
    j = Json{{"id", v.id}, {"signature", v.signature}, {"entrypoint", v.entrypoint}, {"hyperparameter_schema", schema}};
}

void from_json(const Json& j, ModelDescriptor& v) {
    v.id = req(j, "id").get<ComponentId>();
    v.signature = req(j, "signature").get<SignatureSpec>();
    v.entrypoint = req_string(j, "entrypoint");
    v.hyperparameter_schema.clear();
    if (j.contains("hyperparameter_schema")) {
        if (!j["hyperparameter_schema"].is_object()) {
            throw Error(ErrorCode::SchemaViolation, "hyperparameter_schema must be an object");
        }
        for (const auto& [k, p] : j["hyperparameter_schema"].items()) v.hyperparameter_schema[k] = p.get<ParamSpec>();
    }
}

void to_json(Json& j, const MetricDescriptor& v) {
    j = Json{{"id", v.id}, {"signature", v.signature}, {"direction", to_string(v.direction)}, {"entrypoint", v.entrypoint}};
}

void from_json(const Json& j, MetricDescriptor& v) {
    v.id = req(j, "id").get<ComponentId>();
    v.signature = req(j, "signature").get<SignatureSpec>();
    v.direction = parse_direction(req_string(j, "direction"));
    v.entrypoint = req_string(j, "entrypoint");
}

void to_json(Json& j, const HyperparameterSetting& v) {
    j = Json::object();
    for (const auto& [k, s] : v.values) j[k] = s;
}

void from_json(const Json& j, HyperparameterSetting& v) {
    if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "hyperparameter setting must be an object");
    v.values.clear();
    for (const auto& [k, s] : j.items()) v.values[k] = s.get<Scalar>();
}

void to_json(Json& j, const BenchmarkContext& v) {
    Json family = Json::object();
    for (const auto& [id, settings] : v.hyper_family) family[id.str()] = settings;
    j = Json{{"context_id", v.context_id},
             {"datasets", id_list(v.datasets)},
             {"models", id_list(v.models)},
             {"metrics", id_list(v.metrics)},
             {"hyper_family", family}};
}

void from_json(const Json& j, BenchmarkContext& v) {
    v.context_id = req_string(j, "context_id");
    v.datasets = id_set(req(j, "datasets"), "datasets");
    v.models = id_set(req(j, "models"), "models");
    v.metrics = id_set(req(j, "metrics"), "metrics");
    v.hyper_family.clear();
    if (j.contains("hyper_family")) {
        if (!j["hyper_family"].is_object()) throw Error(ErrorCode::SchemaViolation, "hyper_family must be an object");
        for (const auto& [k, settings] : j["hyper_family"].items()) {
            v.hyper_family[ComponentId::parse(k)] = list_of<HyperparameterSetting>(settings, "hyper_family");
        }
    }
}

void to_json(Json& j, const BenchmarkScenario& v) {
    j = Json{{"dataset", v.dataset}, {"model", v.model}, {"metrics", id_list(v.metrics)}, {"hyper", v.hyper}};
}

void from_json(const Json& j, BenchmarkScenario& v) {
    v.dataset = req(j, "dataset").get<ComponentId>();
    v.model = req(j, "model").get<ComponentId>();
    v.metrics = id_set(req(j, "metrics"), "metrics");
    v.hyper = req(j, "hyper").get<HyperparameterSetting>();
}

void to_json(Json& j, const SystemProfile& v) {
    Json runtimes = Json::object();
    for (const auto& [k, s] : v.runtime_versions) runtimes[k] = s;
    j = Json{{"cpu_model", v.cpu_model},
             {"physical_cores", v.physical_cores},
             {"total_memory_bytes", v.total_memory_bytes},
             {"os_name_version", v.os_name_version},
             {"runtime_versions", runtimes},
             {"profile_hash", v.profile_hash}};
    if (v.gpu_model) j["gpu_model"] = *v.gpu_model;
}

void from_json(const Json& j, SystemProfile& v) {
    v.cpu_model = req_string(j, "cpu_model");
    v.physical_cores = req_int(j, "physical_cores");
    v.total_memory_bytes = req_int(j, "total_memory_bytes");
    v.os_name_version = req_string(j, "os_name_version");
    v.gpu_model.reset();
    if (j.contains("gpu_model")) v.gpu_model = req_string(j, "gpu_model");
    v.runtime_versions.clear();
    if (j.contains("runtime_versions")) {
        for (const auto& [k, s] : j["runtime_versions"].items()) {
            if (!s.is_string()) throw Error(ErrorCode::SchemaViolation, "runtime versions must be strings");
            v.runtime_versions[k] = s.get<std::string>();
        }
    }
    v.profile_hash = j.value("profile_hash", std::string{});
}

void to_json(Json& j, const InstrumentedContext& v) {
    j = Json{{"context", v.context}, {"profile", v.profile}, {"scenarios", v.scenarios}};
}

void from_json(const Json& j, InstrumentedContext& v) {
    v.context = req(j, "context").get<BenchmarkContext>();
    v.profile = req(j, "profile").get<SystemProfile>();
    v.scenarios = list_of<BenchmarkScenario>(req(j, "scenarios"), "scenarios");
}

void to_json(Json& j, const ScenarioResult& v) {
    Json accuracy = Json::object();
    for (const auto& [id, value] : v.accuracy) accuracy[id.str()] = value;
    Json timing = Json::object();
    for (const auto& [k, value] : v.timing) timing[k] = value;
    Json resources = Json::object();
    for (const auto& [k, value] : v.resources) resources[k] = value;
    j = Json{{"scenario", v.scenario},
             {"status", to_string(v.status)},
             {"accuracy", accuracy},
             {"timing", timing},
             {"resources", resources},
             {"log_excerpt", v.log_excerpt}};
}

void from_json(const Json& j, ScenarioResult& v) {
    v.scenario = req(j, "scenario").get<BenchmarkScenario>();
    v.status = parse_scenario_status(req_string(j, "status"));
    v.accuracy.clear();
    for (const auto& [k, value] : req(j, "accuracy").items()) {
        if (!value.is_number()) throw Error(ErrorCode::SchemaViolation, "accuracy values must be numbers");
        v.accuracy[ComponentId::parse(k)] = value.get<double>();
    }
    v.timing.clear();
    for (const auto& [k, value] : req(j, "timing").items()) {
        if (!value.is_number()) throw Error(ErrorCode::SchemaViolation, "timing values must be numbers");
        v.timing[k] = value.get<double>();
    }
    v.resources.clear();
    for (const auto& [k, value] : req(j, "resources").items()) {
        if (!value.is_number_integer()) throw Error(ErrorCode::SchemaViolation, "resource values must be integers");
        v.resources[k] = value.get<std::int64_t>();
    }
    v.log_excerpt = j.value("log_excerpt", std::string{});
}

void to_json(Json& j, const BenchmarkRun& v) {
    j = Json{{"run_id", v.run_id},
             {"context_id", v.context_id},
             {"profile", v.profile},
             {"results", v.results},
             {"executed_by", v.executed_by},
             {"started_at", format_utc(v.started_at)},
             {"finished_at", format_utc(v.finished_at)},
             {"visibility", to_string(v.visibility)}};
    if (v.minted_identifier) j["minted_identifier"] = *v.minted_identifier;
}

void from_json(const Json& j, BenchmarkRun& v) {
    v.run_id = req_string(j, "run_id");
    v.context_id = req_string(j, "context_id");
    v.profile = req(j, "profile").get<SystemProfile>();
    v.results = list_of<ScenarioResult>(req(j, "results"), "results");
    v.executed_by = req_string(j, "executed_by");
    v.started_at = parse_utc(req_string(j, "started_at"));
    v.finished_at = parse_utc(req_string(j, "finished_at"));
    v.visibility = parse_visibility(req_string(j, "visibility"));
    v.minted_identifier.reset();
    if (j.contains("minted_identifier")) v.minted_identifier = req_string(j, "minted_identifier");
}

Json descriptor_to_json(const Descriptor& d) {
    Json body;
    std::visit([&](const auto& x) { body = x; }, d);
    return Json{{"kind", to_string(kind_of(d))}, {"descriptor", body}};
}

Descriptor descriptor_from_json(const Json& j) {
    try {
        const Json& body = req(j, "descriptor");
        switch (parse_component_kind(req_string(j, "kind"))) {
            case ComponentKind::Dataset: return body.get<DatasetDescriptor>();
            case ComponentKind::Model: return body.get<ModelDescriptor>();
            case ComponentKind::Metric: return body.get<MetricDescriptor>();
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::SchemaViolation, e.what());
    }
    throw Error(ErrorCode::SchemaViolation, "unreachable descriptor kind");
}

std::string canonical_dump(const Json& j) {
    check_finite(j);
    try {
        return j.dump();
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, e.what());
    }
}

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace cb
