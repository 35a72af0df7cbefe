#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "cb/compat/compat.hpp"
#include "cb/core/canonical.hpp"
#include "cb/core/context.hpp"
#include "cb/core/hash.hpp"
#include "cb/harness/harness.hpp"
#include "cb/registry/archive.hpp"

namespace cb {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, std::string_view text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
}

std::string path_safe(const ComponentId& id) {
    std::string s = id.str();
    for (auto& c : s) {
        if (c == '/') c = '_';
    }
    return s;
}

fs::path fresh_root() {
    std::random_device rd;
    auto p = fs::temp_directory_path() / ("cb-work-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(p);
    return p;
}

struct Materialized {
    fs::path dir;
    std::vector<archive::Entry> entries;
};

// Extracted copies of payloads, so plugins never touch the store itself.
Materialized materialize(ComponentSource& source, const ComponentId& id, const fs::path& root) {
    Materialized m;
    m.dir = root / "components" / path_safe(id);
    m.entries = archive::unpack(source.payload(id));
    if (!fs::exists(m.dir / ".complete")) {
        fs::remove_all(m.dir);
        archive::extract(m.entries, m.dir);
        spit(m.dir / ".complete", "");
    }
    return m;
}

bool has_prefix(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::string cap_tail(std::string s, std::int64_t max_bytes) {
    if (max_bytes >= 0 && static_cast<std::int64_t>(s.size()) > max_bytes) s = s.substr(s.size() - max_bytes);
    return s;
}

template <typename T>
T expect_kind(const Descriptor& d, const ComponentId& id, const char* what) {
    if (auto p = std::get_if<T>(&d)) return *p;
    throw Error(ErrorCode::IncompatibleScenario, id.str() + " is not a " + what);
}

fs::path find_output(const fs::path& outputs, const std::string& port) {
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(outputs, ec)) {
        if (e.is_regular_file() && e.path().stem().string() == port) return e.path();
    }
    return {};
}

std::string describe_exit(const Measurement& m) {
    switch (m.exit) {
        case ExitKind::TimedOut: return "timed out";
        case ExitKind::Signaled: return "killed by signal " + std::to_string(m.code);
        case ExitKind::Exited: return "exit code " + std::to_string(m.code);
    }
    return "unknown";
}

struct ScenarioParts {
    DatasetDescriptor dataset;
    ModelDescriptor model;
    std::vector<MetricDescriptor> metrics;
    CompatReport report;
};

ScenarioParts resolve_parts(const BenchmarkScenario& s, ComponentSource& source) {
    ScenarioParts p;
    p.dataset = expect_kind<DatasetDescriptor>(source.descriptor(s.dataset), s.dataset, "dataset");
    p.model = expect_kind<ModelDescriptor>(source.descriptor(s.model), s.model, "model");
    for (const auto& id : s.metrics) p.metrics.push_back(expect_kind<MetricDescriptor>(source.descriptor(id), id, "metric"));
    p.report = check_scenario(p.dataset, p.model, p.metrics);
    if (!p.report.compatible) {
        std::string detail = "scenario " + scenario_key(s) + " is incompatible:";
        for (const auto& g : p.report.missing) detail += " " + g.consumer + " (" + g.reason + ");";
        throw Error(ErrorCode::IncompatibleScenario, detail);
    }
    return p;
}

class CachingSource : public ComponentSource {
public:
    explicit CachingSource(ComponentSource& inner) : inner_(inner) {}
    Descriptor descriptor(const ComponentId& id) override {
        auto it = descriptors_.find(id);
        if (it == descriptors_.end()) it = descriptors_.emplace(id, inner_.descriptor(id)).first;
        return it->second;
    }
    std::string payload(const ComponentId& id) override {
        auto it = payloads_.find(id);
        if (it == payloads_.end()) it = payloads_.emplace(id, inner_.payload(id)).first;
        return it->second;
    }

private:
    ComponentSource& inner_;
    std::map<ComponentId, Descriptor> descriptors_;
    std::map<ComponentId, std::string> payloads_;
};

ScenarioResult run_resolved(const BenchmarkScenario& s, const ScenarioParts& parts, ComponentSource& source,
                            const ExecutionLimits& limits) {
    ScenarioResult result;
    result.scenario = s;

    const fs::path root = limits.working_dir_root;
    auto data = materialize(source, s.dataset, root);
    auto model = materialize(source, s.model, root);

    Json files = Json::object();
    for (const auto& f : parts.dataset.files) {
        const archive::Entry* e = archive::find_by_hash(data.entries, f.content_hash);
        if (!e) throw Error(ErrorCode::CorruptArchive, "dataset file '" + f.logical_name + "' missing from payload");
        files[f.logical_name] = (data.dir / e->path).string();
    }
    Json dataset_json{{"id", parts.dataset.id}, {"config", parts.dataset.config}, {"files", files}};

    const fs::path scenario_dir = root / "scenarios" / sha256_hex(scenario_key(s)).substr(0, 16);
    fs::remove_all(scenario_dir);
    const fs::path model_dir = scenario_dir / "model";
    fs::create_directories(model_dir / "outputs");

    const std::string d_prefix = parts.dataset.id.str() + ":";
    const std::string m_prefix = parts.model.id.str() + ":";
    auto port_of = [](const std::string& qualified, const std::string& prefix) { return qualified.substr(prefix.size()); };

    Json model_inputs = Json::object();
    for (const auto& match : parts.report.satisfied) {
        if (has_prefix(match.consumer, m_prefix) && has_prefix(match.producer, d_prefix)) {
            model_inputs[port_of(match.consumer, m_prefix)] = files.at(port_of(match.producer, d_prefix));
        }
    }
    spit(model_dir / "inputs.json", canonical_dump(Json{{"inputs", model_inputs}, {"dataset", dataset_json}}));
    spit(model_dir / "params.json", canonical_hyper(s.hyper));

    auto entry = model.dir / parts.model.entrypoint;
    Measurement run = measure_execution({entry, {}, model_dir}, limits);
    result.timing = run.timing;
    result.resources = run.resources;
    std::string log = run.log_excerpt;

    auto finish = [&](ScenarioStatus status, const std::string& note) {
        result.status = status;
        if (!note.empty()) log += (log.empty() || log.back() == '\n' ? "" : "\n") + note + "\n";
        result.log_excerpt = cap_tail(log, limits.max_output_bytes);
        if (status == ScenarioStatus::Ok) fs::remove_all(scenario_dir);
        return result;
    };

    if (run.exit == ExitKind::TimedOut) return finish(ScenarioStatus::Timeout, "[cb] model timed out");
    if (!run.succeeded()) return finish(ScenarioStatus::ModelFailed, "[cb] model failed: " + describe_exit(run));

    std::map<std::string, std::string> outputs;
    for (const auto& port : parts.model.signature.outputs) {
        auto p = find_output(model_dir / "outputs", port.port_name);
        if (!p.empty()) {
            outputs[port.port_name] = p.string();
        } else if (port.required) {
            return finish(ScenarioStatus::ModelFailed, "[cb] model wrote no output for port '" + port.port_name + "'");
        }
    }

    std::string notes;
    bool metric_failed = false;
    for (std::size_t i = 0; i < parts.metrics.size(); ++i) {
        const auto& a = parts.metrics[i];
        const std::string a_prefix = a.id.str() + ":";
        Json inputs = Json::object();
        for (const auto& match : parts.report.satisfied) {
            if (!has_prefix(match.consumer, a_prefix)) continue;
            const std::string port = port_of(match.consumer, a_prefix);
            if (has_prefix(match.producer, m_prefix)) {
                auto it = outputs.find(port_of(match.producer, m_prefix));
                if (it != outputs.end()) inputs[port] = it->second;
            } else if (has_prefix(match.producer, d_prefix)) {
                inputs[port] = files.at(port_of(match.producer, d_prefix));
            }
        }
        const fs::path metric_dir = scenario_dir / ("metric-" + std::to_string(i));
        fs::create_directories(metric_dir / "outputs");
        spit(metric_dir / "inputs.json", canonical_dump(Json{{"inputs", inputs}, {"dataset", dataset_json}}));
        spit(metric_dir / "params.json", "{}");

        std::string failure;
        try {
            auto metric = materialize(source, a.id, root);
            Measurement mm = measure_execution({metric.dir / a.entrypoint, {}, metric_dir}, limits);
            if (!mm.succeeded()) {
                failure = describe_exit(mm);
                if (!mm.log_excerpt.empty()) failure += ": " + mm.log_excerpt;
            } else if (!fs::exists(metric_dir / "result.json")) {
                failure = "no result.json";
            } else {
                Json value = parse_json(slurp(metric_dir / "result.json")).at("value");
                if (!value.is_number() || !std::isfinite(value.get<double>())) {
                    failure = "result value is not a finite number";
                } else {
                    result.accuracy[a.id] = value.get<double>();
                }
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Io || e.code() == ErrorCode::CorruptArchive) throw;
            failure = e.what();
        } catch (const Json::exception& e) {
            failure = std::string("malformed result.json: ") + e.what();
        }
        if (!failure.empty()) {
            metric_failed = true;
            notes += "[cb] metric " + a.id.str() + " failed: " + failure + "\n";
        }
    }
    if (metric_failed) return finish(ScenarioStatus::MetricFailed, notes);
    return finish(ScenarioStatus::Ok, "");
}

}  // namespace

std::string new_run_id() {
    static constexpr char alphabet[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
    auto ms = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch()).count());
    std::string id(26, '0');
    for (int i = 9; i >= 0; --i) {
        id[i] = alphabet[ms & 31];
        ms >>= 5;
    }
    static thread_local std::mt19937_64 rng{std::random_device{}() ^ (static_cast<std::uint64_t>(std::random_device{}()) << 32)};
    for (int i = 10; i < 26; ++i) id[i] = alphabet[rng() & 31];
    return id;
}

ScenarioResult run_scenario(const BenchmarkScenario& scenario, ComponentSource& source, const SystemProfile&,
                            const ExecutionLimits& limits) {
    auto parts = resolve_parts(scenario, source);
    ExecutionLimits local = limits;
    const bool own_root = local.working_dir_root.empty();
    if (own_root) local.working_dir_root = fresh_root();
    auto result = run_resolved(scenario, parts, source, local);
    fs::remove_all(local.working_dir_root / "components");
    if (own_root && result.status == ScenarioStatus::Ok) fs::remove_all(local.working_dir_root);
    return result;
}

BenchmarkRun execute(const InstrumentedContext& instrumented, ComponentSource& source, const ExecutionLimits& limits,
                     const std::string& executed_by) {
    CachingSource cached(source);
    std::vector<ScenarioParts> parts;
    for (const auto& s : instrumented.scenarios) parts.push_back(resolve_parts(s, cached));

    ExecutionLimits local = limits;
    const bool own_root = local.working_dir_root.empty();
    if (own_root) local.working_dir_root = fresh_root();
    fs::create_directories(local.working_dir_root);

    BenchmarkRun run;
    run.run_id = new_run_id();
    run.context_id = instrumented.context.context_id;
    run.profile = instrumented.profile;
    run.executed_by = executed_by;
    run.started_at = utc_now();
    bool all_ok = true;
    for (std::size_t i = 0; i < instrumented.scenarios.size(); ++i) {
        run.results.push_back(run_resolved(instrumented.scenarios[i], parts[i], cached, local));
        all_ok = all_ok && run.results.back().status == ScenarioStatus::Ok;
    }
    run.finished_at = utc_now();
    if (run.finished_at < run.started_at) run.finished_at = run.started_at;

    fs::remove_all(local.working_dir_root / "components");
    std::error_code ec;
    if (fs::is_empty(local.working_dir_root / "scenarios", ec)) fs::remove(local.working_dir_root / "scenarios", ec);
    if (own_root && all_ok) fs::remove_all(local.working_dir_root, ec);
    return run;
}

}  // namespace cb
