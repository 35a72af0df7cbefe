#pragma once

// Random instance generators shared by the property tests.

#include <cmath>
#include <random>
#include <string>

#include "cb/core/context.hpp"
#include "cb/core/types.hpp"

namespace cb::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::mt19937_64& rng() { return rng_; }

    int range(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin() { return range(0, 1) == 1; }

    double real() {
        switch (range(0, 3)) {
            case 0: return std::uniform_real_distribution<double>(-1e6, 1e6)(rng_);
            case 1: return std::uniform_real_distribution<double>(0, 1)(rng_);
            case 2: return static_cast<double>(range(-50, 50));
            default: return std::ldexp(std::uniform_real_distribution<double>(0.5, 1)(rng_), range(-60, 60));
        }
    }

    double nonneg() { return std::abs(real()); }

    std::string slug(int max_len = 8) {
        static constexpr char kChars[] = "abcdefghijklmnopqrstuvwxyz0123456789_-";
        std::string s;
        int n = range(1, max_len);
        for (int i = 0; i < n; ++i) s.push_back(kChars[range(0, sizeof(kChars) - 2)]);
        return s;
    }

    std::string text() {
        static const std::string kPieces[] = {"a", "Z", " ", "\"", "\\", "\n", "é", "→", "{}", "0", "\t", "ü"};
        std::string s;
        int n = range(0, 6);
        for (int i = 0; i < n; ++i) s += kPieces[range(0, 11)];
        return s;
    }

    ComponentId id() { return ComponentId{slug() + "/" + slug(), range(1, 9)}; }

    Scalar scalar() {
        switch (range(0, 3)) {
            case 0: return coin();
            case 1: return static_cast<std::int64_t>(range(-1000, 1000));
            case 2: return real();
            default: return text();
        }
    }

    PortSpec port(const std::string& name) {
        return PortSpec{name, static_cast<DataRole>(range(0, 5)), coin()};
    }

    std::vector<PortSpec> ports(int lo, int hi) {
        std::vector<PortSpec> out;
        int n = range(lo, hi);
        for (int i = 0; i < n; ++i) out.push_back(port("p" + std::to_string(i)));
        return out;
    }

    SignatureSpec signature() {
        return SignatureSpec{static_cast<TaskKind>(range(0, 2)), ports(0, 3), ports(1, 3)};
    }

    DatasetDescriptor dataset() {
        DatasetDescriptor d;
        d.id = id();
        int n = range(1, 3);
        for (int i = 0; i < n; ++i) {
            d.files.push_back(DatasetFile{"f" + std::to_string(i), std::string(64, "0123456789abcdef"[range(0, 15)]),
                                          range(0, 1 << 20)});
        }
        d.config["n_rows"] = static_cast<std::int64_t>(range(1, 5000));
        if (coin()) d.config[slug()] = scalar();
        d.provided_ports.push_back(PortSpec{"f0", static_cast<DataRole>(range(0, 5)), coin()});
        return d;
    }

    ModelDescriptor model() {
        ModelDescriptor m;
        m.id = id();
        m.signature = signature();
        m.entrypoint = "bin/" + slug();
        if (coin()) {
            ParamSpec p{ParamType::Float, real(), std::nullopt, {}};
            if (coin()) p.range = std::pair{-1e7, 1e7};
            m.hyperparameter_schema[slug()] = p;
        }
        if (coin()) {
            m.hyperparameter_schema["mode"] = ParamSpec{ParamType::String, std::string("a"), std::nullopt,
                                                        {Scalar{std::string("a")}, Scalar{std::string("b")}}};
        }
        return m;
    }

    MetricDescriptor metric() {
        MetricDescriptor m;
        m.id = id();
        m.signature = SignatureSpec{static_cast<TaskKind>(range(0, 2)), ports(1, 3),
                                    {PortSpec{"value", DataRole::Scalar, true}}};
        m.direction = coin() ? Direction::HigherBetter : Direction::LowerBetter;
        m.entrypoint = slug();
        return m;
    }

    HyperparameterSetting hyper() {
        HyperparameterSetting h;
        int n = range(0, 3);
        for (int i = 0; i < n; ++i) h.values[slug(4)] = scalar();
        return h;
    }

    /// Context with distinct hyper settings per model (k = 0..n-1 keeps them distinct).
    BenchmarkContext context(int max_each = 5) {
        BenchmarkContext c;
        c.context_id = "ctx-" + slug();
        auto fill = [&](std::set<ComponentId>& ids) {
            int n = range(1, max_each);
            while (static_cast<int>(ids.size()) < n) ids.insert(id());
        };
        fill(c.datasets);
        fill(c.models);
        fill(c.metrics);
        for (const auto& m : c.models) {
            if (range(0, 4) == 0) continue;  // absent entry: singleton empty setting
            int n = range(1, max_each);
            std::vector<HyperparameterSetting> family;
            for (int k = 0; k < n; ++k) {
                HyperparameterSetting h = hyper();
                h.values["k"] = static_cast<std::int64_t>(k);
                family.push_back(std::move(h));
            }
            c.hyper_family[m] = std::move(family);
        }
        return c;
    }

    BenchmarkScenario scenario() {
        BenchmarkScenario s{id(), id(), {}, hyper()};
        int n = range(1, 3);
        for (int i = 0; i < n; ++i) s.metrics.insert(id());
        return s;
    }

    SystemProfile profile() {
        SystemProfile p;
        p.cpu_model = text() + "cpu";
        p.physical_cores = range(1, 128);
        p.total_memory_bytes = static_cast<std::int64_t>(range(1, 1 << 30)) * 64;
        if (coin()) p.gpu_model = "gpu-" + slug();
        p.os_name_version = "Linux " + slug();
        p.runtime_versions["cb"] = "1." + std::to_string(range(0, 9));
        if (coin()) p.runtime_versions[slug()] = text();
        return with_profile_hash(p);
    }

    ScenarioResult result(const BenchmarkScenario& s, bool gpu) {
        ScenarioResult r;
        r.scenario = s;
        r.status = static_cast<ScenarioStatus>(range(0, 3));
        for (const auto& m : s.metrics) {
            if (r.status == ScenarioStatus::Ok || coin()) r.accuracy[m] = real();
        }
        r.timing[std::string(kWallTime)] = nonneg();
        r.timing[std::string(kCpuTime)] = nonneg();
        r.resources[std::string(kPeakCpuMemory)] = range(0, 1 << 30);
        if (gpu && coin()) {
            r.timing[std::string(kGpuTime)] = nonneg();
            r.resources[std::string(kPeakGpuMemory)] = range(0, 1 << 30);
        }
        r.log_excerpt = text();
        return r;
    }

    BenchmarkRun run() {
        BenchmarkRun run;
        run.run_id = "01" + slug(24);
        run.context_id = "ctx-" + slug();
        run.profile = profile();
        int n = range(0, 4);
        for (int i = 0; i < n; ++i) run.results.push_back(result(scenario(), run.profile.gpu_model.has_value()));
        run.executed_by = slug();
        run.started_at = UtcTime{std::chrono::milliseconds(static_cast<std::int64_t>(range(0, 2'000'000'000)) * 1000 + range(0, 999))};
        run.finished_at = run.started_at + std::chrono::milliseconds(range(0, 100000));
        if (coin()) {
            run.visibility = Visibility::Public;
            run.minted_identifier = "10.70000/cb." + slug(12);
        }
        return run;
    }

private:
    std::mt19937_64 rng_;
};

}  // namespace cb::testing
