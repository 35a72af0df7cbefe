#pragma once

// Small valid components, archives and runs for registry and service tests.

#include <filesystem>
#include <random>
#include <string>

#include "cb/core/context.hpp"
#include "cb/core/hash.hpp"
#include "cb/registry/archive.hpp"

namespace cb::testing {

inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::mt19937_64 rng{std::random_device{}()};
    auto p = std::filesystem::temp_directory_path() / ("cb-" + tag + "-" + std::to_string(rng() % 1000000007));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) : path(temp_dir(tag)) {}
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

inline DatasetDescriptor make_dataset(const std::string& name, const std::string& csv = "x,y\n1,2\n3,4\n") {
    DatasetDescriptor d;
    d.id = ComponentId{name, 1};
    d.files.push_back({"observations", sha256_hex(csv), static_cast<std::int64_t>(csv.size())});
    d.config["n_rows"] = std::int64_t{2};
    d.provided_ports.push_back({"observations", DataRole::TabularObservations, true});
    return d;
}

inline ModelDescriptor make_model(const std::string& name) {
    ModelDescriptor m;
    m.id = ComponentId{name, 1};
    m.signature.task = TaskKind::CausalDiscovery;
    m.signature.inputs.push_back({"observations", DataRole::TabularObservations, true});
    m.signature.outputs.push_back({"graph", DataRole::CausalGraph, true});
    m.entrypoint = "bin/run";
    ParamSpec k;
    k.type = ParamType::Int;
    k.default_value = std::int64_t{1};
    k.range = std::pair{0.0, 10.0};
    m.hyperparameter_schema["k"] = k;
    return m;
}

inline MetricDescriptor make_metric(const std::string& name) {
    MetricDescriptor m;
    m.id = ComponentId{name, 1};
    m.signature.task = TaskKind::CausalDiscovery;
    m.signature.inputs.push_back({"graph", DataRole::CausalGraph, true});
    m.signature.outputs.push_back({"value", DataRole::Scalar, true});
    m.direction = Direction::LowerBetter;
    m.entrypoint = "bin/score";
    return m;
}

/// Archive holding the manifest plus whatever the descriptor needs.
inline std::string make_archive(const Descriptor& d, const std::string& csv = "x,y\n1,2\n3,4\n",
                                const std::string& title = "") {
    std::vector<archive::Entry> entries;
    archive::Manifest m{d, Json{{"title", title}, {"license", "MIT"}}};
    entries.push_back({std::string(archive::kManifestName), archive::write_manifest(m), 0644});
    if (std::holds_alternative<DatasetDescriptor>(d)) {
        entries.push_back({"data/observations.csv", csv, 0644});
    } else {
        const auto& ep = std::holds_alternative<ModelDescriptor>(d) ? std::get<ModelDescriptor>(d).entrypoint
                                                                   : std::get<MetricDescriptor>(d).entrypoint;
        entries.push_back({ep, "#!/bin/sh\nexit 0\n", 0755});
    }
    return archive::pack(std::move(entries));
}

inline SystemProfile make_profile() {
    SystemProfile p;
    p.cpu_model = "Test CPU";
    p.physical_cores = 4;
    p.total_memory_bytes = 8LL << 30;
    p.os_name_version = "Linux 6.0";
    p.runtime_versions["cb"] = "1.0.0";
    return with_profile_hash(p);
}

/// A run that validates cleanly against `context`.
inline BenchmarkRun make_run(const BenchmarkContext& context, const std::string& run_id, double base = 1.0) {
    BenchmarkRun run;
    run.run_id = run_id;
    run.context_id = context.context_id;
    run.profile = make_profile();
    run.started_at = UtcTime{std::chrono::milliseconds(1'700'000'000'000)};
    run.finished_at = run.started_at + std::chrono::seconds(5);
    double v = base;
    for (const auto& s : expand_context(context)) {
        ScenarioResult r;
        r.scenario = s;
        for (const auto& m : s.metrics) r.accuracy[m] = v;
        v += 1.0;
        r.timing[std::string(kWallTime)] = 0.5;
        r.timing[std::string(kCpuTime)] = 0.4;
        r.resources[std::string(kPeakCpuMemory)] = 1 << 20;
        run.results.push_back(std::move(r));
    }
    return run;
}

}  // namespace cb::testing
