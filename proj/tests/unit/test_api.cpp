#include <doctest.h>
#include <httplib.h>

#include <random>
#include <thread>

#include "cb/analysis/analysis.hpp"
#include "cb/api/service.hpp"
#include "support/fixtures.hpp"

using namespace cb;
using cb::api::Request;
using cb::api::Response;
using cb::testing::make_archive;
using cb::testing::make_dataset;
using cb::testing::make_metric;
using cb::testing::make_model;
using cb::testing::make_run;
using cb::testing::TempDir;

namespace {

struct Server {
    TempDir dir{"api"};
    Registry reg{dir.path / "store", std::make_shared<LocalSimRegistrar>()};
    api::Service svc{reg};
    std::string alice = svc.issue_key("alice");
    std::string bob = svc.issue_key("bob");
    std::vector<std::string> bodies;  // every response body, for leak checks

    Response call(const std::string& method, const std::string& path, const std::string& key = "", std::string body = "",
                  std::map<std::string, std::string> query = {}) {
        Request r{method, path, std::move(query), {}, std::move(body)};
        if (!key.empty()) r.headers["authorization"] = "Bearer " + key;
        auto res = svc.handle(r);
        bodies.push_back(res.body);
        return res;
    }
    Json json(const Response& r) { return parse_json(r.body); }
};

std::string error_of(const Response& r) { return parse_json(r.body).value("error", ""); }

}  // namespace

TEST_CASE("health and authentication") {
    Server s;
    auto h = s.call("GET", "/v1/health");
    CHECK(h.status == 200);
    CHECK(s.json(h).at("status") == "ok");

    CHECK(s.json(s.call("GET", "/v1/whoami", s.alice)).at("user") == "alice");
    CHECK(s.call("GET", "/v1/whoami").status == 401);
    auto bad = s.call("GET", "/v1/whoami", "cbk_random");
    CHECK(bad.status == 401);
    CHECK(error_of(bad) == "unauthenticated");
    CHECK(s.json(bad).contains("detail"));
    CHECK_THROWS_AS(s.svc.authenticate("nope"), Error);

    s.reg.set_principal_active("bob", false);
    CHECK(s.call("GET", "/v1/whoami", s.bob).status == 401);
    s.reg.set_principal_active("bob", true);
    CHECK(s.call("GET", "/v1/whoami", s.bob).status == 200);

    CHECK(s.call("POST", "/v1/components", "", make_archive(make_model("alice/m"))).status == 401);
    CHECK(s.call("GET", "/v1/nowhere").status == 404);
}

TEST_CASE("component endpoints") {
    Server s;
    auto created = s.call("POST", "/v1/components", s.alice, make_archive(make_model("alice/m"), "", "Model M"));
    REQUIRE(created.status == 201);
    CHECK(s.json(created).at("id") == "alice/m@1");
    CHECK(s.json(created).at("metadata").at("title") == "Model M");
    CHECK(s.call("POST", "/v1/components", s.alice, make_archive(make_model("alice/m"))).status == 409);
    CHECK(s.call("POST", "/v1/components", s.alice, "garbage").status == 422);

    auto v2 = s.call("POST", "/v1/components/alice/m/versions", s.alice, make_archive(make_model("alice/m"), "", "second"));
    REQUIRE(v2.status == 201);
    CHECK(s.json(v2).at("id") == "alice/m@2");
    CHECK(s.call("POST", "/v1/components/alice/m/versions", s.bob, make_archive(make_model("alice/m"))).status == 403);
    CHECK(s.json(s.call("GET", "/v1/components/alice/m/latest", s.alice)).at("id") == "alice/m@2");

    // private until published: anonymous listing sees nothing
    auto anon = s.call("GET", "/v1/components", "", "", {{"kind", "model"}});
    CHECK(anon.status == 200);
    CHECK(s.json(anon).at("total") == 0);
    CHECK(s.call("GET", "/v1/components/alice/m/1").status == 403);
    REQUIRE(s.call("POST", "/v1/components/alice/m/1/publish", s.alice).status == 200);
    anon = s.call("GET", "/v1/components", "", "", {{"kind", "model"}});
    CHECK(s.json(anon).at("total") == 1);
    CHECK(s.json(s.call("GET", "/v1/components", s.alice, "", {{"scope", "mine"}})).at("total") == 2);
    CHECK(s.call("GET", "/v1/components", "", "", {{"scope", "mine"}}).status == 401);
    CHECK(s.call("GET", "/v1/components", "", "", {{"page_size", "500"}}).status == 422);

    auto rec = api::component_record_from_json(s.json(s.call("GET", "/v1/components/alice/m/1")));
    CHECK(rec.id() == ComponentId{"alice/m", 1});
    CHECK(rec.visibility == Visibility::Public);
    CHECK(rec == s.reg.describe({"alice/m", 1}, "alice"));

    auto payload = s.call("GET", "/v1/components/alice/m/1/payload");
    CHECK(payload.status == 200);
    CHECK(payload.content_type == "application/gzip");
    CHECK(sha256_hex(payload.body) == rec.payload_hash);
    CHECK(s.call("PUT", "/v1/components/alice/m/1/payload", s.alice, payload.body).status == 200);
    auto changed = s.call("PUT", "/v1/components/alice/m/1/payload", s.alice, payload.body + "x");
    CHECK(changed.status == 409);

    CHECK(s.call("DELETE", "/v1/components/alice/m/2", s.bob).status == 403);
    CHECK(s.call("DELETE", "/v1/components/alice/m/2", s.alice).status == 200);
    CHECK(s.call("GET", "/v1/components/alice/m/2", s.alice).status == 404);
}

TEST_CASE("contexts, runs, publication and permanence") {
    Server s;
    for (const auto& d : std::vector<Descriptor>{make_dataset("alice/d"), make_model("alice/m"), make_metric("alice/a")}) {
        REQUIRE(s.call("POST", "/v1/components", s.alice, make_archive(d)).status == 201);
    }
    BenchmarkContext c;
    c.context_id = "ctx";
    c.datasets = {{"alice/d", 1}};
    c.models = {{"alice/m", 1}};
    c.metrics = {{"alice/a", 1}};
    c.hyper_family[{"alice/m", 1}] = {HyperparameterSetting{{{"k", std::int64_t{1}}}}, HyperparameterSetting{{{"k", std::int64_t{2}}}}};
    auto stored = s.call("POST", "/v1/contexts", s.alice, encode(c));
    REQUIRE(stored.status == 201);
    CHECK(s.json(stored).at("scenarios") == 2);
    CHECK(s.json(s.call("GET", "/v1/contexts/ctx", s.alice)).get<BenchmarkContext>() == c);
    CHECK(s.call("GET", "/v1/contexts/none", s.alice).status == 404);

    auto broken = make_run(c, "run-broken");
    broken.results.pop_back();
    auto rejected = s.call("POST", "/v1/runs", s.alice, encode(broken));
    CHECK(rejected.status == 422);
    CHECK(error_of(rejected) == "invalid_run");
    CHECK(s.json(rejected).at("violations").size() == 1);
    CHECK(s.json(rejected).at("violations")[0].at("kind") == "missing-scenario");

    auto run = make_run(c, "run-1");
    REQUIRE(s.call("POST", "/v1/runs", s.alice, encode(run)).status == 201);
    CHECK(s.call("POST", "/v1/runs", s.alice, "{not json").status == 422);
    auto got = s.json(s.call("GET", "/v1/runs/run-1", s.alice)).get<BenchmarkRun>();
    CHECK(got.executed_by == "alice");
    CHECK(s.call("GET", "/v1/runs/run-1").status == 403);
    CHECK(s.json(s.call("GET", "/v1/runs", s.alice, "", {{"context_id", "ctx"}})).at("total") == 1);

    CHECK(s.call("POST", "/v1/runs/run-1/publish", s.bob).status == 403);
    auto p1 = s.call("POST", "/v1/runs/run-1/publish", s.alice);
    REQUIRE(p1.status == 200);
    auto p2 = s.call("POST", "/v1/runs/run-1/publish", s.alice);
    CHECK(s.json(p1).at("identifier") == s.json(p2).at("identifier"));
    CHECK(s.json(p1).at("identifier").get<std::string>().rfind("10.70000/cb.", 0) == 0);
    CHECK(s.call("GET", "/v1/runs/run-1").status == 200);
    CHECK(s.json(s.call("GET", "/v1/runs")).at("total") == 1);

    auto perm = s.call("DELETE", "/v1/components/alice/m/1", s.alice);
    CHECK(perm.status == 409);
    CHECK(error_of(perm) == "permanent_entity");
    CHECK(s.call("DELETE", "/v1/runs/run-1", s.alice).status == 409);

    SUBCASE("analysis over the published run") {
        auto table = s.call("POST", "/v1/analysis/table", s.bob, "{}");
        REQUIRE(table.status == 200);
        auto t = table_from_json(s.json(table).at("table"));
        CHECK(t.rows.size() == 2);
        CHECK(s.json(table).at("csv").get<std::string>().rfind("run_id,", 0) == 0);

        Json slice_req{{"group_by", {"hp.k"}}, {"aggregates", {{{"column", "acc.alice/a@1"}, {"fn", "mean"}}}}};
        auto sl = s.json(s.call("POST", "/v1/analysis/slice", s.bob, slice_req.dump()));
        CHECK(sl.at("table").at("rows").size() == 2);

        Json pareto_req{{"objectives", {{{"column", "acc.alice/a@1"}, {"direction", "lower-better"}},
                                        {{"column", "wall_time_s"}, {"direction", "lower-better"}}}}};
        auto pf = s.json(s.call("POST", "/v1/analysis/pareto", s.bob, pareto_req.dump()));
        CHECK(pf.at("front").size() == 1);

        Json virt{{"context_id", "ctx"}};
        auto v = s.json(s.call("POST", "/v1/analysis/virtual", s.bob, virt.dump()));
        CHECK(v.at("coverage").at("matched").size() == 2);

        Json pred{{"target", {{"hp.k", 2}}}, {"outcomes", {"acc.alice/a@1"}}};
        auto pr = s.json(s.call("POST", "/v1/analysis/predict", s.bob, pred.dump()));
        CHECK(pr.at("predictions")[0].at("point").get<double>() == doctest::Approx(2.0));

        Json bad{{"treatment", {{"column", "hp.k"}, {"level_a", 1}, {"level_b", 1}}}, {"outcome", "wall_time_s"}};
        CHECK(s.call("POST", "/v1/analysis/impact", s.bob, bad.dump()).status == 422);
        CHECK(s.call("POST", "/v1/analysis/unknown", s.bob, "{}").status == 404);
        CHECK(s.call("POST", "/v1/analysis/table", "", "{}").status == 401);
    }

    SUBCASE("compatibility suggestions") {
        REQUIRE(s.call("POST", "/v1/components", s.bob, make_archive(make_dataset("bob/d2"))).status == 201);
        Json req{{"chosen", {{"models", {"alice/m@1"}}}}};
        auto sug = s.json(s.call("POST", "/v1/compat/suggest", s.bob, req.dump()));
        CHECK(sug.at("datasets").at("suitable").size() == 2);
        CHECK(sug.at("metrics").at("suitable").size() == 1);
        Json check{{"chosen", {{"datasets", {"alice/d@1"}}, {"models", {"alice/m@1"}}, {"metrics", {"alice/a@1"}}}}};
        CHECK(s.json(s.call("POST", "/v1/compat/check", s.bob, check.dump())).at("compatible") == true);
    }

    for (const auto& b : s.bodies) {
        CHECK(b.find(s.alice) == std::string::npos);
        CHECK(b.find(api::hash_key(s.alice)) == std::string::npos);
    }
}

TEST_CASE("driving the service equals driving the registry") {
    for (unsigned seed = 1; seed <= 6; ++seed) {
        Server s;
        TempDir direct_dir{"direct"};
        Registry direct{direct_dir.path / "store", std::make_shared<LocalSimRegistrar>()};
        const std::map<std::string, std::string> keys{{"alice", s.alice}, {"bob", s.bob}};

        // shared setup: a public context both users can run
        BenchmarkContext c;
        c.context_id = "ctx";
        c.datasets = {{"alice/cd", 1}};
        c.models = {{"alice/cm", 1}};
        c.metrics = {{"alice/ca", 1}};
        for (const auto& d : std::vector<Descriptor>{make_dataset("alice/cd"), make_model("alice/cm"), make_metric("alice/ca")}) {
            direct.register_archive(make_archive(d), "alice");
            direct.publish(Subject::component(id_of(d)), "alice");
            s.call("POST", "/v1/components", s.alice, make_archive(d));
            s.call("POST", "/v1/components/" + std::string(id_of(d).name) + "/1/publish", s.alice);
        }
        direct.store_context(c, "alice");
        s.call("POST", "/v1/contexts", s.alice, encode(c));

        std::mt19937 g(seed);
        auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(g); };
        const std::vector<std::string> users{"alice", "bob"};
        int mismatches = 0;
        for (int step = 0; step < 120; ++step) {
            const std::string who = users[pick(2)];
            const std::string owner = users[pick(2)];
            const std::string name = owner + "/n" + std::to_string(pick(3));
            const int version = 1 + pick(3);
            const std::string run_id = "run-" + std::to_string(pick(5));
            std::string direct_outcome = "ok", api_outcome;
            auto attempt = [&](auto&& fn) {
                try {
                    fn();
                } catch (const Error& e) {
                    direct_outcome = std::string(error_code_name(e.code()));
                }
            };
            Response res;
            const std::string csv = "x,y\n" + std::to_string(step) + ",2\n";
            const std::string path = "/v1/components/" + name + "/" + std::to_string(version);
            switch (pick(7)) {
                case 0: {
                    auto a = make_archive(make_dataset(name, csv), csv);
                    attempt([&] { direct.register_archive(a, who); });
                    res = s.call("POST", "/v1/components", keys.at(who), a);
                    break;
                }
                case 1: {
                    auto a = make_archive(make_dataset(name, csv), csv);
                    attempt([&] { direct.new_version_archive(name, a, who); });
                    res = s.call("POST", "/v1/components/" + name + "/versions", keys.at(who), a);
                    break;
                }
                case 2:
                    attempt([&] { direct.publish(Subject::component({name, version}), who); });
                    res = s.call("POST", path + "/publish", keys.at(who));
                    break;
                case 3:
                    attempt([&] { direct.remove(Subject::component({name, version}), who); });
                    res = s.call("DELETE", path, keys.at(who));
                    break;
                case 4: {
                    auto run = make_run(c, run_id, step);
                    attempt([&] { direct.store_run(run, who); });
                    res = s.call("POST", "/v1/runs", keys.at(who), encode(run));
                    break;
                }
                case 5:
                    attempt([&] { direct.publish(Subject::run(run_id), who); });
                    res = s.call("POST", "/v1/runs/" + run_id + "/publish", keys.at(who));
                    break;
                default:
                    attempt([&] { direct.remove(Subject::run(run_id), who); });
                    res = s.call("DELETE", "/v1/runs/" + run_id, keys.at(who));
                    break;
            }
            api_outcome = res.status < 300 ? "ok" : error_of(res);
            mismatches += api_outcome != direct_outcome;
        }
        CHECK(mismatches == 0);

        auto snapshot = [](const Registry& r, const std::string& who) {
            Json out = Json::array();
            ComponentQuery q;
            q.page_size = 100;
            for (const auto& rec : r.query(q, who).items) {
                out.push_back({rec.id().str(), rec.payload_hash, to_string(rec.visibility), rec.permanent, rec.metadata.owner});
            }
            RunQuery rq;
            rq.page_size = 100;
            for (const auto& run : r.list_runs(rq, who).items) {
                auto pub = r.publication(Subject::run(run.run_id));
                out.push_back({run.run_id, encode(run), pub ? pub->identifier : ""});
            }
            return out;
        };
        for (const std::string who : {"alice", "bob", ""}) CHECK(snapshot(direct, who) == snapshot(s.reg, who));
        CHECK(s.reg.audit().empty());
        for (const auto& b : s.bodies) {
            for (const auto& [u, k] : keys) {
                CHECK(b.find(k) == std::string::npos);
                CHECK(b.find(api::hash_key(k)) == std::string::npos);
            }
        }
    }
}

TEST_CASE("HTTP server round trip") {
    Server s;
    api::HttpServer http(s.svc);
    int port = http.bind("127.0.0.1", 0);
    std::thread t([&] { http.listen(); });

    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(5, 0);
    auto h = client.Get("/v1/health");
    REQUIRE(h);
    CHECK(h->status == 200);
    auto up = client.Post("/v1/components", {{"Authorization", "Bearer " + s.alice}}, make_archive(make_model("alice/m")),
                          "application/gzip");
    REQUIRE(up);
    CHECK(up->status == 201);
    auto list = client.Get("/v1/components?scope=mine&kind=model", {{"Authorization", "Bearer " + s.alice}});
    REQUIRE(list);
    CHECK(parse_json(list->body).at("total") == 1);

    http.stop();
    t.join();
}
