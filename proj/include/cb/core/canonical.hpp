#pragma once

// Canonical JSON forms of the core types: UTF-8, keys sorted, no
// insignificant whitespace, floats as shortest round-trip decimals.

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cb/core/error.hpp"
#include "cb/core/types.hpp"

namespace nlohmann {

// Scalar is a std::variant, so ADL would not find cb:: overloads.
template <>
struct adl_serializer<cb::Scalar> {
    static void to_json(json& j, const cb::Scalar& v);
    static void from_json(const json& j, cb::Scalar& v);
};

}  // namespace nlohmann

namespace cb {

using Json = nlohmann::json;

void to_json(Json& j, const ComponentId& v);
void from_json(const Json& j, ComponentId& v);
void to_json(Json& j, const PortSpec& v);
void from_json(const Json& j, PortSpec& v);
void to_json(Json& j, const SignatureSpec& v);
void from_json(const Json& j, SignatureSpec& v);
void to_json(Json& j, const DatasetFile& v);
void from_json(const Json& j, DatasetFile& v);
void to_json(Json& j, const DatasetDescriptor& v);
void from_json(const Json& j, DatasetDescriptor& v);
void to_json(Json& j, const ParamSpec& v);
void from_json(const Json& j, ParamSpec& v);
void to_json(Json& j, const ModelDescriptor& v);
void from_json(const Json& j, ModelDescriptor& v);
void to_json(Json& j, const MetricDescriptor& v);
void from_json(const Json& j, MetricDescriptor& v);
void to_json(Json& j, const HyperparameterSetting& v);
void from_json(const Json& j, HyperparameterSetting& v);
void to_json(Json& j, const BenchmarkContext& v);
void from_json(const Json& j, BenchmarkContext& v);
void to_json(Json& j, const BenchmarkScenario& v);
void from_json(const Json& j, BenchmarkScenario& v);
void to_json(Json& j, const SystemProfile& v);
void from_json(const Json& j, SystemProfile& v);
void to_json(Json& j, const InstrumentedContext& v);
void from_json(const Json& j, InstrumentedContext& v);
void to_json(Json& j, const ScenarioResult& v);
void from_json(const Json& j, ScenarioResult& v);
void to_json(Json& j, const BenchmarkRun& v);
void from_json(const Json& j, BenchmarkRun& v);

/// Descriptor as {"kind": ..., "descriptor": {...}}.
Json descriptor_to_json(const Descriptor& d);
Descriptor descriptor_from_json(const Json& j);

/// Serializes with sorted keys and no whitespace. Rejects NaN and infinities.
std::string canonical_dump(const Json& j);

/// Parses text; any parse or shape failure becomes Error(SchemaViolation).
Json parse_json(std::string_view text);

template <typename T>
std::string encode(const T& value) {
    return canonical_dump(Json(value));
}

template <typename T>
T decode(std::string_view text) {
    Json j = parse_json(text);
    try {
        return j.get<T>();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::SchemaViolation, e.what());
    }
}

}  // namespace cb
