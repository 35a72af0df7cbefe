#include "cb/core/validate.hpp"

#include <regex>
#include <set>

#include "cb/core/context.hpp"
#include "cb/core/error.hpp"
#include "cb/core/hash.hpp"

namespace cb {

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::SchemaViolation, what); }

void unique_port_names(const std::vector<PortSpec>& ports, const char* where) {
    std::set<std::string> seen;
    for (const auto& p : ports) {
        if (p.port_name.empty()) fail(std::string("empty port name in ") + where);
        if (!seen.insert(p.port_name).second) fail("duplicate port '" + p.port_name + "' in " + where);
    }
}

void validate_entrypoint(const std::string& entry) {
    if (entry.empty()) fail("entrypoint must be non-empty");
    if (entry.front() == '/') fail("entrypoint must be a relative path");
    if (entry == ".." || entry.starts_with("../") || entry.find("/../") != std::string::npos) {
        fail("entrypoint must stay inside the payload");
    }
}

std::optional<double> as_number(const Scalar& v) {
    if (auto p = std::get_if<std::int64_t>(&v)) return static_cast<double>(*p);
    if (auto p = std::get_if<double>(&v)) return *p;
    return std::nullopt;
}

}  // namespace

bool is_valid_component_name(std::string_view name) {
    static const std::regex kPattern("[a-z0-9_-]+/[a-z0-9_-]+");
    return std::regex_match(name.begin(), name.end(), kPattern);
}

void validate(const ComponentId& id) {
    if (!is_valid_component_name(id.name)) fail("component name '" + id.name + "' must match owner/slug");
    if (id.version < 1) fail("component version must be >= 1 (" + id.str() + ")");
}

void validate(const SignatureSpec& sig, ComponentKind kind) {
    unique_port_names(sig.inputs, "inputs");
    unique_port_names(sig.outputs, "outputs");
    if (kind == ComponentKind::Model && sig.outputs.empty()) fail("model signature needs at least one output");
    if (kind == ComponentKind::Metric) {
        if (sig.inputs.empty()) fail("metric signature needs at least one input");
        if (sig.outputs.size() != 1 || sig.outputs[0].data_role != DataRole::Scalar) {
            fail("metric signature must have exactly one scalar output");
        }
    }
}

void validate(const DatasetDescriptor& d) {
    validate(d.id);
    if (d.files.empty()) fail("dataset must list at least one file");
    std::set<std::string> names;
    for (const auto& f : d.files) {
        if (f.logical_name.empty()) fail("dataset file with empty logical name");
        if (!names.insert(f.logical_name).second) fail("duplicate dataset file '" + f.logical_name + "'");
        if (!is_sha256_hex(f.content_hash)) fail("content hash of '" + f.logical_name + "' is not 64 lowercase hex");
        if (f.byte_size < 0) fail("negative byte size for '" + f.logical_name + "'");
    }
    if (auto it = d.config.find("n_rows"); it != d.config.end()) {
        auto n = std::get_if<std::int64_t>(&it->second);
        if (!n || *n < 1) fail("n_rows must be an integer >= 1");
    }
    unique_port_names(d.provided_ports, "provided_ports");
    for (const auto& p : d.provided_ports) {
        if (!names.contains(p.port_name)) fail("provided port '" + p.port_name + "' has no file of that logical name");
    }
}

bool param_accepts(const ParamSpec& spec, const Scalar& value) {
    switch (spec.type) {
        case ParamType::Int:
            if (!std::holds_alternative<std::int64_t>(value)) return false;
            break;
        case ParamType::Float:
            if (!as_number(value)) return false;
            break;
        case ParamType::String:
            if (!std::holds_alternative<std::string>(value)) return false;
            break;
        case ParamType::Bool:
            if (!std::holds_alternative<bool>(value)) return false;
            break;
    }
    if (spec.range) {
        auto n = as_number(value);
        if (!n || *n < spec.range->first || *n > spec.range->second) return false;
    }
    if (!spec.allowed.empty()) {
        bool found = false;
        for (const auto& a : spec.allowed) {
            auto x = as_number(a);
            auto y = as_number(value);
            if (a == value || (x && y && *x == *y)) {
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

void validate(const ModelDescriptor& d) {
    validate(d.id);
    validate(d.signature, ComponentKind::Model);
    validate_entrypoint(d.entrypoint);
    for (const auto& [name, spec] : d.hyperparameter_schema) {
        if (name.empty()) fail("empty hyperparameter name");
        if (spec.range && spec.range->first > spec.range->second) fail("range of '" + name + "' is inverted");
        if (!param_accepts(spec, spec.default_value)) fail("default of '" + name + "' violates its own range");
    }
}

void validate(const MetricDescriptor& d) {
    validate(d.id);
    validate(d.signature, ComponentKind::Metric);
    validate_entrypoint(d.entrypoint);
}

void validate(const Descriptor& d) {
    std::visit([](const auto& x) { validate(x); }, d);
}

void validate(const BenchmarkContext& c) {
    if (c.context_id.empty()) fail("context_id must be non-empty");
    for (const auto* group : {&c.datasets, &c.models, &c.metrics}) {
        for (const auto& id : *group) validate(id);
    }
    for (const auto& [model, settings] : c.hyper_family) {
        if (!c.models.contains(model)) fail("hyper_family names model " + model.str() + " not in models");
        if (settings.empty()) fail("hyper_family list for " + model.str() + " is empty");
    }
}

void validate(const SystemProfile& p) {
    if (p.physical_cores < 1) fail("physical_cores must be >= 1");
    if (p.total_memory_bytes < 0) fail("total_memory_bytes must be >= 0");
    if (p.profile_hash != compute_profile_hash(p)) fail("profile_hash does not match profile fields");
}

}  // namespace cb
