#include <doctest.h>

#include <set>

#include "cb/core/canonical.hpp"
#include "cb/core/context.hpp"
#include "cb/core/validate.hpp"
#include "support/generators.hpp"

using namespace cb;

namespace {

ComponentId cid(const std::string& name, std::int64_t v = 1) { return ComponentId{name, v}; }

HyperparameterSetting hk(std::int64_t k) { return HyperparameterSetting{{{"k", Scalar{k}}}}; }

BenchmarkContext small_context() {
    BenchmarkContext c;
    c.context_id = "ctx";
    c.datasets = {cid("a/d1"), cid("a/d2")};
    c.models = {cid("a/m1")};
    c.metrics = {cid("a/shd")};
    c.hyper_family[cid("a/m1")] = {hk(2), hk(1)};
    return c;
}

SystemProfile profile(const std::string& cpu) {
    SystemProfile p;
    p.cpu_model = cpu;
    p.physical_cores = 4;
    p.total_memory_bytes = 1 << 30;
    p.os_name_version = "Linux 6";
    return with_profile_hash(p);
}

BenchmarkRun complete_run(const BenchmarkContext& c) {
    BenchmarkRun run;
    run.run_id = "r1";
    run.context_id = c.context_id;
    run.profile = profile("cpu");
    run.executed_by = "alice";
    run.started_at = parse_utc("2024-01-01T00:00:00.000Z");
    run.finished_at = parse_utc("2024-01-01T00:00:01.000Z");
    for (const auto& s : expand_context(c)) {
        ScenarioResult r;
        r.scenario = s;
        for (const auto& m : s.metrics) r.accuracy[m] = 1.0;
        r.timing = {{"wall_time_s", 0.5}, {"cpu_time_s", 0.25}};
        r.resources = {{"peak_cpu_memory_bytes", 1024}};
        run.results.push_back(r);
    }
    return run;
}

}  // namespace

TEST_CASE("expand_context: product cardinality 2x3 with two settings each") {
    BenchmarkContext c;
    c.context_id = "ctx";
    c.datasets = {cid("a/d1"), cid("a/d2")};
    c.models = {cid("a/m1"), cid("a/m2"), cid("a/m3")};
    c.metrics = {cid("a/x")};
    for (const auto& m : c.models) c.hyper_family[m] = {hk(1), hk(2)};
    CHECK(expand_context(c).size() == 12);
    CHECK(expansion_size(c) == 12);
}

TEST_CASE("expand_context: parameter-free model expands to the empty setting") {
    BenchmarkContext c;
    c.context_id = "ctx";
    c.datasets = {cid("a/d")};
    c.models = {cid("a/m")};
    c.metrics = {cid("a/x")};
    auto s = expand_context(c);
    REQUIRE(s.size() == 1);
    CHECK(s[0].hyper.values.empty());
    CHECK(s[0].metrics == c.metrics);
}

TEST_CASE("expand_context: canonical order is dataset, model, hyper serialization") {
    auto s = expand_context(small_context());
    REQUIRE(s.size() == 4);
    CHECK(s[0].dataset == cid("a/d1"));
    CHECK(s[0].hyper == hk(1));
    CHECK(s[1].dataset == cid("a/d1"));
    CHECK(s[1].hyper == hk(2));
    CHECK(s[2].dataset == cid("a/d2"));
    CHECK(s[2].hyper == hk(1));
    CHECK(s[3].dataset == cid("a/d2"));
    CHECK(s[3].hyper == hk(2));
}

TEST_CASE("expand_context: empty families are rejected") {
    auto c = small_context();
    c.datasets.clear();
    CHECK_THROWS_AS(expand_context(c), Error);
    try {
        expand_context(c);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyFamily);
    }
    c = small_context();
    c.metrics.clear();
    CHECK_THROWS_WITH_AS(expand_context(c), doctest::Contains("no metrics"), Error);
}

TEST_CASE("expand_context: hyper family for an unknown model is a schema violation") {
    auto c = small_context();
    c.hyper_family[cid("a/ghost")] = {hk(1)};
    try {
        expand_context(c);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaViolation);
    }
}

TEST_CASE("expand_context properties over random contexts") {
    testing::Gen gen(7);
    for (int i = 0; i < 300; ++i) {
        auto c = gen.context();
        std::size_t expected = 0;
        for (const auto& m : c.models) {
            auto it = c.hyper_family.find(m);
            expected += c.datasets.size() * (it == c.hyper_family.end() ? 1 : it->second.size());
        }
        auto a = expand_context(c);
        auto b = expand_context(c);
        CHECK(a.size() == expected);
        CHECK(a == b);
        std::set<std::string> keys;
        for (const auto& s : a) keys.insert(scenario_key(s));
        CHECK(keys.size() == a.size());
    }
}

TEST_CASE("scenario_key") {
    BenchmarkScenario s{cid("a/d"), cid("a/m"), {cid("a/x")}, hk(1)};
    CHECK(scenario_key(s) == scenario_key(s));
    // sha256('{"k":1}') and sha256('{"k":2}') prefixes, computed with hashlib
    CHECK(scenario_key(s) == "a/d@1|a/m@1|a0da1fce57d0e4f9");
    s.hyper = hk(2);
    CHECK(scenario_key(s) == "a/d@1|a/m@1|1ddca3d1f7a33ce8");
    s.hyper = {};
    CHECK(scenario_key(s) == "a/d@1|a/m@1|44136fa355b3678a");

    HyperparameterSetting ab;
    ab.values.emplace("b", std::int64_t{2});
    ab.values.emplace("a", std::int64_t{1});
    s.hyper = ab;
    CHECK(scenario_key(s) == "a/d@1|a/m@1|43258cff783fe703");
    CHECK(canonical_hyper(ab) == R"({"a":1,"b":2})");
}

TEST_CASE("instrument") {
    auto c = small_context();
    auto p1 = profile("cpu-a");
    auto p2 = profile("cpu-b");
    auto i1 = instrument(c, p1);
    auto i2 = instrument(c, p2);
    CHECK(i1.scenarios.size() == expansion_size(c));
    CHECK(i1.scenarios == i2.scenarios);
    CHECK(i1.context == i2.context);
    CHECK(i1.profile.profile_hash != i2.profile.profile_hash);
    CHECK(i1.profile == p1);

    c.datasets.clear();
    CHECK_THROWS_AS(instrument(c, p1), Error);
}

TEST_CASE("profile hash is recomputable") {
    auto p = profile("x");
    CHECK(p.profile_hash.size() == 64);
    CHECK_NOTHROW(validate(p));
    p.physical_cores = 8;
    CHECK_THROWS_AS(validate(p), Error);
}

TEST_CASE("validate_run") {
    auto c = small_context();
    auto run = complete_run(c);
    CHECK(validate_run(run, c).empty());

    SUBCASE("missing scenario") {
        run.results.pop_back();
        auto report = validate_run(run, c);
        REQUIRE(report.size() == 1);
        CHECK(report[0].kind == "missing-scenario");
    }
    SUBCASE("missing metric on ok result") {
        run.results[0].accuracy.clear();
        auto report = validate_run(run, c);
        REQUIRE(report.size() == 1);
        CHECK(report[0].kind == "missing-metric");
    }
    SUBCASE("failed result may lack metrics") {
        run.results[0].accuracy.clear();
        run.results[0].status = ScenarioStatus::ModelFailed;
        CHECK(validate_run(run, c).empty());
    }
    SUBCASE("negative timing, duplicate, gpu key without gpu") {
        run.results[0].timing["wall_time_s"] = -1;
        run.results[1].resources["peak_gpu_memory_bytes"] = 0;
        run.results.push_back(run.results[2]);
        std::set<std::string> kinds;
        for (const auto& v : validate_run(run, c)) kinds.insert(v.kind);
        CHECK(kinds == std::set<std::string>{"negative-timing", "gpu-without-device", "duplicate-scenario"});
    }
    SUBCASE("public run needs identifier") {
        run.visibility = Visibility::Public;
        CHECK(validate_run(run, c).size() == 1);
        run.minted_identifier = "10.70000/cb.abc";
        CHECK(validate_run(run, c).empty());
    }
    SUBCASE("wrong context") {
        run.context_id = "other";
        CHECK(validate_run(run, c).at(0).kind == "context-mismatch");
    }
}

TEST_CASE("descriptor validation") {
    SUBCASE("component ids") {
        CHECK_NOTHROW(validate(cid("alice/toy-scm")));
        CHECK_THROWS_AS(validate(cid("Alice/toy")), Error);
        CHECK_THROWS_AS(validate(cid("alice")), Error);
        CHECK_THROWS_AS(validate(cid("alice/x", 0)), Error);
    }
    SUBCASE("dataset") {
        DatasetDescriptor d;
        d.id = cid("a/d");
        CHECK_THROWS_AS(validate(d), Error);
        d.files.push_back({"obs", std::string(64, 'a'), 10});
        CHECK_NOTHROW(validate(d));
        d.config["n_rows"] = std::int64_t{0};
        CHECK_THROWS_AS(validate(d), Error);
        d.config["n_rows"] = std::int64_t{5};
        d.files[0].content_hash = std::string(64, 'A');
        CHECK_THROWS_AS(validate(d), Error);
        d.files[0].content_hash = std::string(64, 'a');
        d.provided_ports.push_back({"truth", DataRole::CausalGraph, true});
        CHECK_THROWS_AS(validate(d), Error);
    }
    SUBCASE("model") {
        ModelDescriptor m;
        m.id = cid("a/m");
        m.entrypoint = "run";
        m.signature.outputs.push_back({"graph", DataRole::CausalGraph, true});
        CHECK_NOTHROW(validate(m));
        m.hyperparameter_schema["t"] = ParamSpec{ParamType::Float, 2.0, std::pair{0.0, 1.0}, {}};
        CHECK_THROWS_AS(validate(m), Error);
        m.hyperparameter_schema["t"].default_value = 0.5;
        CHECK_NOTHROW(validate(m));
        m.entrypoint = "../escape";
        CHECK_THROWS_AS(validate(m), Error);
        m.entrypoint = "";
        CHECK_THROWS_AS(validate(m), Error);
    }
    SUBCASE("metric needs one scalar output") {
        MetricDescriptor m;
        m.id = cid("a/x");
        m.entrypoint = "run";
        m.signature.inputs.push_back({"g", DataRole::CausalGraph, true});
        CHECK_THROWS_AS(validate(m), Error);
        m.signature.outputs.push_back({"value", DataRole::Scalar, true});
        CHECK_NOTHROW(validate(m));
        m.signature.inputs.push_back({"g", DataRole::CausalGraph, true});
        CHECK_THROWS_AS(validate(m), Error);
    }
}

TEST_CASE("param_accepts") {
    ParamSpec p{ParamType::Int, std::int64_t{1}, std::pair{0.0, 10.0}, {}};
    CHECK(param_accepts(p, Scalar{std::int64_t{3}}));
    CHECK_FALSE(param_accepts(p, Scalar{3.0}));
    CHECK_FALSE(param_accepts(p, Scalar{std::int64_t{11}}));
    ParamSpec s{ParamType::String, std::string("a"), std::nullopt, {Scalar{std::string("a")}}};
    CHECK(param_accepts(s, Scalar{std::string("a")}));
    CHECK_FALSE(param_accepts(s, Scalar{std::string("b")}));
}

TEST_CASE("utc timestamps") {
    auto t = parse_utc("2026-10-18T09:08:07.006Z");
    CHECK(format_utc(t) == "2026-10-18T09:08:07.006Z");
    CHECK(format_utc(UtcTime{}) == "1970-01-01T00:00:00.000Z");
    CHECK_THROWS_AS(parse_utc("2026-02-30T00:00:00.000Z"), Error);
    CHECK_THROWS_AS(parse_utc("2026-10-18 09:08:07"), Error);
}
