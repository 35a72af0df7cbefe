#include <doctest.h>

#include <cmath>
#include <limits>

#include "cb/core/canonical.hpp"
#include "support/generators.hpp"

using namespace cb;

namespace {

template <typename T, typename Make>
void round_trip(Make make, int n = 300) {
    for (int i = 0; i < n; ++i) {
        T value = make();
        std::string text = encode(value);
        T back = decode<T>(text);
        REQUIRE(back == value);
        REQUIRE(encode(back) == text);
    }
}

}  // namespace

TEST_CASE("canonical round trip for every core type") {
    testing::Gen g(42);
    round_trip<ComponentId>([&] { return g.id(); });
    round_trip<PortSpec>([&] { return g.port(g.slug()); });
    round_trip<SignatureSpec>([&] { return g.signature(); });
    round_trip<DatasetDescriptor>([&] { return g.dataset(); });
    round_trip<ModelDescriptor>([&] { return g.model(); });
    round_trip<MetricDescriptor>([&] { return g.metric(); });
    round_trip<HyperparameterSetting>([&] { return g.hyper(); });
    round_trip<BenchmarkContext>([&] { return g.context(3); });
    round_trip<BenchmarkScenario>([&] { return g.scenario(); });
    round_trip<SystemProfile>([&] { return g.profile(); });
    round_trip<InstrumentedContext>([&] {
        auto c = g.context(2);
        return instrument(c, g.profile());
    }, 100);
    round_trip<ScenarioResult>([&] { return g.result(g.scenario(), g.coin()); });
    round_trip<BenchmarkRun>([&] { return g.run(); });
}

TEST_CASE("canonical form is sorted and compact") {
    BenchmarkScenario s;
    s.dataset = ComponentId{"a/d", 1};
    s.model = ComponentId{"a/m", 2};
    s.metrics = {ComponentId{"a/x", 1}};
    s.hyper.values["z"] = 0.5;
    s.hyper.values["a"] = std::int64_t{3};
    s.hyper.values["f"] = 2.0;
    s.hyper.values["b"] = true;
    CHECK(encode(s) ==
          R"({"dataset":"a/d@1","hyper":{"a":3,"b":true,"f":2.0,"z":0.5},"metrics":["a/x@1"],"model":"a/m@2"})");
}

TEST_CASE("float serialization is shortest round-trip") {
    HyperparameterSetting h;
    h.values["x"] = 0.1;
    h.values["y"] = 1e-300;
    h.values["z"] = 123456789.125;
    CHECK(encode(h) == R"({"x":0.1,"y":1e-300,"z":123456789.125})");
}

TEST_CASE("non-finite numbers are rejected") {
    HyperparameterSetting h;
    h.values["x"] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(encode(h), Error);
    h.values["x"] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(encode(h), Error);
}

TEST_CASE("decode errors are schema violations") {
    auto expect_schema = [](auto fn) {
        try {
            fn();
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::SchemaViolation);
        }
    };
    expect_schema([] { decode<ComponentId>("\"nover\""); });
    expect_schema([] { decode<BenchmarkScenario>("{"); });
    expect_schema([] { decode<PortSpec>(R"({"port_name":"x","data_role":"wat"})"); });
    expect_schema([] { decode<PortSpec>(R"({"port_name":"x","data_role":"scalar","required":"yes"})"); });
    expect_schema([] { decode<ScenarioResult>(R"({"scenario":1})"); });
    expect_schema([] { decode<HyperparameterSetting>(R"({"a":[1]})"); });
}

TEST_CASE("descriptor envelope") {
    testing::Gen g(3);
    for (int i = 0; i < 50; ++i) {
        Descriptor d = g.coin() ? Descriptor{g.model()} : Descriptor{g.metric()};
        CHECK(descriptor_from_json(descriptor_to_json(d)) == d);
    }
    Descriptor ds = g.dataset();
    auto j = descriptor_to_json(ds);
    CHECK(j["kind"] == "dataset");
    CHECK(descriptor_from_json(j) == ds);
}
