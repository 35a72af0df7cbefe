#include "cb/compat/compat.hpp"

#include <algorithm>

namespace cb {

namespace {

std::vector<PortSpec> qualified(const std::vector<PortSpec>& ports, const ComponentId& owner) {
    std::vector<PortSpec> out = ports;
    for (auto& p : out) p.port_name = owner.str() + ":" + p.port_name;
    return out;
}

void merge(CompatReport& into, const CompatReport& part) {
    into.compatible = into.compatible && part.compatible;
    into.missing.insert(into.missing.end(), part.missing.begin(), part.missing.end());
    into.satisfied.insert(into.satisfied.end(), part.satisfied.begin(), part.satisfied.end());
}

std::vector<std::string> reasons_of(const CompatReport& r) {
    std::vector<std::string> out;
    for (const auto& g : r.missing) out.push_back(g.consumer + ": " + g.reason);
    return out;
}

std::string task_gap(const ComponentId& a, TaskKind ta, const ComponentId& b, TaskKind tb) {
    return "task mismatch: " + a.str() + " is " + std::string(to_string(ta)) + ", " + b.str() + " is " +
           std::string(to_string(tb));
}

CompatReport model_vs_metric(const ModelDescriptor& m, const MetricDescriptor& a) {
    CompatReport r;
    if (m.signature.task != a.signature.task) {
        r.compatible = false;
        r.missing.push_back({a.id.str(), task_gap(m.id, m.signature.task, a.id, a.signature.task)});
    }
    return r;
}

CompatReport metric_vs_metric(const MetricDescriptor& a, const MetricDescriptor& b) {
    CompatReport r;
    if (a.signature.task != b.signature.task) {
        r.compatible = false;
        r.missing.push_back({b.id.str(), task_gap(a.id, a.signature.task, b.id, b.signature.task)});
    }
    return r;
}

CompatReport dataset_vs_model(const DatasetDescriptor& d, const ModelDescriptor& m) {
    return ports_satisfied(qualified(d.provided_ports, d.id), qualified(m.signature.inputs, m.id));
}

CompatReport metric_inputs(const DatasetDescriptor& d, const ModelDescriptor& m, const MetricDescriptor& a) {
    auto provided = qualified(m.signature.outputs, m.id);
    auto from_data = qualified(d.provided_ports, d.id);
    provided.insert(provided.end(), from_data.begin(), from_data.end());
    return ports_satisfied(provided, qualified(a.signature.inputs, a.id));
}

template <typename T>
const T* find_id(const std::vector<T>& xs, const ComponentId& id) {
    for (const auto& x : xs) {
        if (x.id == id) return &x;
    }
    return nullptr;
}

// Every constraint between the candidate and the chosen set. A candidate that
// is itself already chosen is only checked once.
template <typename T>
std::vector<T> with_candidate(const std::vector<T>& chosen, const T& c) {
    std::vector<T> out = chosen;
    if (!find_id(chosen, c.id)) out.push_back(c);
    return out;
}

std::vector<std::string> unique_sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

void finish(KindSuggestion& k) {
    std::sort(k.suitable.begin(), k.suitable.end());
    k.suitable.erase(std::unique(k.suitable.begin(), k.suitable.end()), k.suitable.end());
    std::sort(k.incompatible.begin(), k.incompatible.end(),
              [](const Rejection& a, const Rejection& b) { return a.id < b.id; });
    k.incompatible.erase(std::unique(k.incompatible.begin(), k.incompatible.end(),
                                     [](const Rejection& a, const Rejection& b) { return a.id == b.id; }),
                         k.incompatible.end());
}

void classify(KindSuggestion& out, const ComponentId& id, std::vector<std::string> reasons) {
    if (reasons.empty()) {
        out.suitable.push_back(id);
    } else {
        out.incompatible.push_back({id, unique_sorted(std::move(reasons))});
    }
}

}  // namespace

CompatReport ports_satisfied(const std::vector<PortSpec>& provided, const std::vector<PortSpec>& required) {
    CompatReport r;
    std::vector<bool> used(provided.size(), false);
    auto take = [&](const PortSpec& want) -> const PortSpec* {
        for (std::size_t i = 0; i < provided.size(); ++i) {
            if (!used[i] && provided[i].data_role == want.data_role) {
                used[i] = true;
                return &provided[i];
            }
        }
        return nullptr;
    };
    // required ports claim providers before optional ones
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& want : required) {
            if (want.required != (pass == 0)) continue;
            if (auto p = take(want)) {
                r.satisfied.push_back({want.port_name, p->port_name});
            } else if (want.required) {
                r.compatible = false;
                r.missing.push_back({want.port_name, "missing=" + std::string(to_string(want.data_role))});
            }
        }
    }
    return r;
}

CompatReport check_scenario(const DatasetDescriptor& d, const ModelDescriptor& m,
                            const std::vector<MetricDescriptor>& metrics) {
    CompatReport r;
    for (const auto& a : metrics) merge(r, model_vs_metric(m, a));
    merge(r, dataset_vs_model(d, m));
    for (const auto& a : metrics) merge(r, metric_inputs(d, m, a));
    return r;
}

Suggestion suggest(const PartialContext& chosen, const PartialContext& candidates) {
    Suggestion out;

    for (const auto& c : candidates.datasets) {
        std::vector<std::string> reasons;
        for (const auto& m : chosen.models) {
            auto r = reasons_of(dataset_vs_model(c, m));
            reasons.insert(reasons.end(), r.begin(), r.end());
            for (const auto& a : chosen.metrics) {
                auto q = reasons_of(metric_inputs(c, m, a));
                reasons.insert(reasons.end(), q.begin(), q.end());
            }
        }
        classify(out.datasets, c.id, std::move(reasons));
    }

    for (const auto& c : candidates.models) {
        std::vector<std::string> reasons;
        for (const auto& a : chosen.metrics) {
            auto r = reasons_of(model_vs_metric(c, a));
            reasons.insert(reasons.end(), r.begin(), r.end());
        }
        for (const auto& d : chosen.datasets) {
            auto r = reasons_of(dataset_vs_model(d, c));
            reasons.insert(reasons.end(), r.begin(), r.end());
            for (const auto& a : chosen.metrics) {
                auto q = reasons_of(metric_inputs(d, c, a));
                reasons.insert(reasons.end(), q.begin(), q.end());
            }
        }
        classify(out.models, c.id, std::move(reasons));
    }

    for (const auto& c : candidates.metrics) {
        std::vector<std::string> reasons;
        for (const auto& a : with_candidate(chosen.metrics, c)) {
            if (a.id == c.id) continue;
            auto r = reasons_of(metric_vs_metric(a, c));
            reasons.insert(reasons.end(), r.begin(), r.end());
        }
        for (const auto& m : chosen.models) {
            auto r = reasons_of(model_vs_metric(m, c));
            reasons.insert(reasons.end(), r.begin(), r.end());
            for (const auto& d : chosen.datasets) {
                auto q = reasons_of(metric_inputs(d, m, c));
                reasons.insert(reasons.end(), q.begin(), q.end());
            }
        }
        classify(out.metrics, c.id, std::move(reasons));
    }

    finish(out.datasets);
    finish(out.models);
    finish(out.metrics);
    return out;
}

void to_json(Json& j, const CompatReport& v) {
    Json missing = Json::array(), satisfied = Json::array();
    for (const auto& g : v.missing) missing.push_back({{"consumer", g.consumer}, {"reason", g.reason}});
    for (const auto& s : v.satisfied) satisfied.push_back({{"consumer", s.consumer}, {"producer", s.producer}});
    j = Json{{"compatible", v.compatible}, {"missing", missing}, {"satisfied", satisfied}};
}

void to_json(Json& j, const Rejection& v) { j = Json{{"id", v.id}, {"reasons", v.reasons}}; }

void to_json(Json& j, const KindSuggestion& v) {
    j = Json{{"suitable", v.suitable}, {"incompatible", v.incompatible}};
}

void to_json(Json& j, const Suggestion& v) {
    j = Json{{"datasets", v.datasets}, {"models", v.models}, {"metrics", v.metrics}};
}

void from_json(const Json& j, KindSuggestion& v) {
    v.suitable = j.at("suitable").get<std::vector<ComponentId>>();
    v.incompatible.clear();
    for (const auto& r : j.at("incompatible")) {
        v.incompatible.push_back({r.at("id").get<ComponentId>(), r.at("reasons").get<std::vector<std::string>>()});
    }
}

void from_json(const Json& j, Suggestion& v) {
    v.datasets = j.at("datasets").get<KindSuggestion>();
    v.models = j.at("models").get<KindSuggestion>();
    v.metrics = j.at("metrics").get<KindSuggestion>();
}

}  // namespace cb
