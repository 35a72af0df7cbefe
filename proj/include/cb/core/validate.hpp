#pragma once

#include <string_view>

#include "cb/core/types.hpp"

namespace cb {

bool is_valid_component_name(std::string_view name);

// Each throws Error(SchemaViolation) naming the first broken invariant.
void validate(const ComponentId& id);
void validate(const SignatureSpec& sig, ComponentKind kind);
void validate(const DatasetDescriptor& d);
void validate(const ModelDescriptor& d);
void validate(const MetricDescriptor& d);
void validate(const Descriptor& d);
void validate(const BenchmarkContext& c);
void validate(const SystemProfile& p);

/// True if `value` fits the declared type, range and allowed set.
bool param_accepts(const ParamSpec& spec, const Scalar& value);

}  // namespace cb
