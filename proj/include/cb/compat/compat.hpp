#pragma once

// Role-based compatibility between datasets, models and metrics, and the
// suggestion filter used while a context is being assembled.
//
// Ports match by data_role, one provider port per consumer port. Metrics draw
// inputs from the model's outputs first and then from the dataset's provided
// ports (ground truth such as a true graph).

#include <string>
#include <vector>

#include "cb/core/canonical.hpp"
#include "cb/core/types.hpp"

namespace cb {

struct PortGap {
    std::string consumer;  // port name, qualified with the component in scenario checks
    std::string reason;

    bool operator==(const PortGap&) const = default;
};

struct PortMatch {
    std::string consumer;
    std::string producer;

    bool operator==(const PortMatch&) const = default;
};

struct CompatReport {
    bool compatible = true;
    std::vector<PortGap> missing;
    std::vector<PortMatch> satisfied;
};

CompatReport ports_satisfied(const std::vector<PortSpec>& provided, const std::vector<PortSpec>& required);

CompatReport check_scenario(const DatasetDescriptor& d, const ModelDescriptor& m,
                            const std::vector<MetricDescriptor>& metrics);

struct PartialContext {
    std::vector<DatasetDescriptor> datasets;
    std::vector<ModelDescriptor> models;
    std::vector<MetricDescriptor> metrics;
};

struct Rejection {
    ComponentId id;
    std::vector<std::string> reasons;

    bool operator==(const Rejection&) const = default;
};

struct KindSuggestion {
    std::vector<ComponentId> suitable;  // sorted by id
    std::vector<Rejection> incompatible;  // sorted by id

    bool operator==(const KindSuggestion&) const = default;
};

struct Suggestion {
    KindSuggestion datasets;
    KindSuggestion models;
    KindSuggestion metrics;

    bool operator==(const Suggestion&) const = default;
};

/// A candidate is suitable when every constraint between it and the chosen
/// components holds: shared task between models and metrics, dataset ports
/// feeding model inputs, and model plus dataset ports feeding metric inputs.
/// Constraints whose participants are not all present are not evaluated.
Suggestion suggest(const PartialContext& chosen, const PartialContext& candidates);

void to_json(Json& j, const CompatReport& v);
void to_json(Json& j, const Rejection& v);
void to_json(Json& j, const KindSuggestion& v);
void to_json(Json& j, const Suggestion& v);
void from_json(const Json& j, KindSuggestion& v);
void from_json(const Json& j, Suggestion& v);

}  // namespace cb
