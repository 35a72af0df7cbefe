#include "cb/core/context.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cb/core/canonical.hpp"
#include "cb/core/hash.hpp"
#include "cb/core/validate.hpp"

namespace cb {

namespace {

// Distinct settings for one model, sorted by canonical serialization. A model
// without an entry expands with the single empty setting.
std::vector<std::pair<std::string, HyperparameterSetting>> family_of(const BenchmarkContext& c, const ComponentId& model) {
    std::map<std::string, HyperparameterSetting> sorted;
    auto it = c.hyper_family.find(model);
    if (it == c.hyper_family.end()) {
        sorted.emplace("{}", HyperparameterSetting{});
    } else {
        for (const auto& h : it->second) sorted.emplace(canonical_hyper(h), h);
    }
    return {sorted.begin(), sorted.end()};
}

void require_families(const BenchmarkContext& c) {
    if (c.datasets.empty()) throw Error(ErrorCode::EmptyFamily, "context '" + c.context_id + "' has no datasets");
    if (c.models.empty()) throw Error(ErrorCode::EmptyFamily, "context '" + c.context_id + "' has no models");
    if (c.metrics.empty()) throw Error(ErrorCode::EmptyFamily, "context '" + c.context_id + "' has no metrics");
    validate(c);
}

}  // namespace

std::string canonical_hyper(const HyperparameterSetting& h) { return encode(h); }

std::string scenario_key(const BenchmarkScenario& s) {
    return s.dataset.str() + "|" + s.model.str() + "|" + sha256_hex(canonical_hyper(s.hyper)).substr(0, 16);
}

std::vector<BenchmarkScenario> expand_context(const BenchmarkContext& c) {
    require_families(c);
    std::vector<BenchmarkScenario> out;
    out.reserve(expansion_size(c));
    for (const auto& d : c.datasets) {
        for (const auto& m : c.models) {
            for (const auto& [_, h] : family_of(c, m)) {
                out.push_back(BenchmarkScenario{d, m, c.metrics, h});
            }
        }
    }
    return out;
}

std::size_t expansion_size(const BenchmarkContext& c) {
    std::size_t total = 0;
    for (const auto& m : c.models) total += c.datasets.size() * family_of(c, m).size();
    return total;
}

InstrumentedContext instrument(const BenchmarkContext& context, const SystemProfile& profile) {
    return InstrumentedContext{context, profile, expand_context(context)};
}

std::string compute_profile_hash(const SystemProfile& profile) {
    Json j = profile;
    j.erase("profile_hash");
    return sha256_hex(canonical_dump(j));
}

SystemProfile with_profile_hash(SystemProfile profile) {
    profile.profile_hash = compute_profile_hash(profile);
    return profile;
}

ValidationReport validate_run(const BenchmarkRun& run, const BenchmarkContext& context) {
    ValidationReport report;
    auto add = [&](std::string kind, std::string key, std::string detail) {
        report.push_back(Violation{std::move(kind), std::move(key), std::move(detail)});
    };

    if (run.context_id != context.context_id) {
        add("context-mismatch", "", "run names context '" + run.context_id + "', expected '" + context.context_id + "'");
    }
    if (run.finished_at < run.started_at) add("time-order", "", "finished_at precedes started_at");
    if (run.minted_identifier.has_value() != (run.visibility == Visibility::Public)) {
        add("identifier-visibility", "", "minted_identifier must be present iff the run is public");
    }
    if (run.profile.physical_cores < 1 || run.profile.profile_hash != compute_profile_hash(run.profile)) {
        add("profile", "", "system profile invariants do not hold");
    }

    std::map<std::string, const BenchmarkScenario*> expected;
    std::vector<BenchmarkScenario> scenarios;
    try {
        scenarios = expand_context(context);
    } catch (const Error& e) {
        add("invalid-context", "", e.what());
    }
    for (const auto& s : scenarios) expected.emplace(scenario_key(s), &s);

    std::set<std::string> seen;
    for (const auto& r : run.results) {
        const std::string key = scenario_key(r.scenario);
        if (!expected.contains(key)) {
            add("unexpected-scenario", key, "scenario is not part of the context expansion");
        } else if (!seen.insert(key).second) {
            add("duplicate-scenario", key, "scenario reported more than once");
        }
        if (r.scenario.metrics != context.metrics) add("metrics-mismatch", key, "scenario metric set differs from context");

        if (r.status == ScenarioStatus::Ok) {
            for (const auto& m : r.scenario.metrics) {
                if (!r.accuracy.contains(m)) add("missing-metric", key, "no value for " + m.str());
            }
        }
        for (const auto& [m, value] : r.accuracy) {
            if (!r.scenario.metrics.contains(m)) add("unexpected-metric", key, "value for " + m.str() + " not in metric set");
            if (!std::isfinite(value)) add("non-finite-metric", key, m.str());
        }
        for (auto required : {kWallTime, kCpuTime}) {
            if (!r.timing.contains(std::string(required))) add("missing-timing", key, std::string(required));
        }
        for (const auto& [k, v] : r.timing) {
            if (!std::isfinite(v) || v < 0) add("negative-timing", key, k);
        }
        for (const auto& [k, v] : r.resources) {
            if (v < 0) add("negative-resource", key, k);
        }
        if (!run.profile.gpu_model &&
            (r.timing.contains(std::string(kGpuTime)) || r.resources.contains(std::string(kPeakGpuMemory)))) {
            add("gpu-without-device", key, "GPU keys present but profile has no GPU");
        }
    }
    for (const auto& [key, _] : expected) {
        if (!seen.contains(key)) add("missing-scenario", key, "no result for scenario");
    }
    return report;
}

}  // namespace cb
