#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "cb/analysis/analysis.hpp"
#include "cb/core/context.hpp"
#include "cb/core/error.hpp"
#include "support/fixtures.hpp"

using namespace cb;
using cb::testing::make_profile;
using cb::testing::make_run;

namespace {

ColumnKind kind_for(const std::string& name) {
    if (name == "run_id" || name == "scenario_key" || name == "status") return ColumnKind::Meta;
    if (name.rfind("acc.", 0) == 0 || name.find("_time_s") != std::string::npos || name.rfind("peak_", 0) == 0) {
        return ColumnKind::Outcome;
    }
    return ColumnKind::Factor;
}

RunTable make_table(const std::vector<std::string>& names, const std::vector<std::vector<Cell>>& rows) {
    RunTable t;
    for (const auto& n : names) t.columns.push_back({n, kind_for(n)});
    t.rows = rows;
    return t;
}

Cell s(const char* v) { return Scalar{std::string(v)}; }
Cell d(double v) { return Scalar{v}; }
Cell i(std::int64_t v) { return Scalar{v}; }

ComponentId cid(const std::string& name) { return ComponentId{name, 1}; }

BenchmarkContext two_model_context() {
    BenchmarkContext c;
    c.context_id = "ctx-1";
    c.datasets = {cid("ref/toy")};
    c.models = {cid("ref/a"), cid("ref/b")};
    c.metrics = {cid("ref/shd")};
    c.hyper_family[cid("ref/a")] = {HyperparameterSetting{{{"k", std::int64_t{1}}}}, HyperparameterSetting{{{"k", std::int64_t{2}}}}};
    return c;
}

}  // namespace

TEST_CASE("build_table flattens runs into typed columns") {
    auto ctx = two_model_context();
    DatasetDescriptor ds = cb::testing::make_dataset("ref/toy");
    ds.config["n_rows"] = std::int64_t{200};
    auto run = make_run(ctx, "01HRUN0000000000000000000A");
    auto t = build_table({run}, {{ds.id, ds}});

    REQUIRE(t.rows.size() == 3);
    CHECK(t.columns.front() == Column{"run_id", ColumnKind::Meta});
    CHECK(t.columns[t.index("dataset")].kind == ColumnKind::Factor);
    CHECK(t.columns[t.index("data.n_rows")].kind == ColumnKind::Factor);
    CHECK(t.columns[t.index("hp.k")].kind == ColumnKind::Factor);
    CHECK(t.columns[t.index("acc.ref/shd@1")].kind == ColumnKind::Outcome);
    CHECK(t.columns[t.index("gpu_time_s")].kind == ColumnKind::Outcome);
    CHECK_THROWS_AS(t.index("nope"), Error);

    // ref/a@1 k=1, ref/a@1 k=2, ref/b@1 (no hyper)
    CHECK(t.at(0, "model") == s("ref/a@1"));
    CHECK(t.at(0, "hp.k") == i(1));
    CHECK(t.at(2, "hp.k") == Cell{});
    CHECK(t.at(2, "data.n_rows") == i(200));
    CHECK(t.at(0, "hw.gpu_model") == Cell{});
    CHECK(t.at(1, "hw.physical_cores") == i(4));
    CHECK(t.at(1, "sw.cb") == s("1.0.0"));
    CHECK(t.at(1, "acc.ref/shd@1") == d(2.0));
    CHECK(t.at(1, "wall_time_s") == d(0.5));
    CHECK(t.at(1, "gpu_time_s") == Cell{});
    CHECK(t.at(0, "status") == s("ok"));

    auto csv = to_csv(t);
    CHECK(csv.rfind("run_id,context_id,executed_by,scenario_key,profile_hash,status,dataset,data.n_rows,model,hp.k,", 0) == 0);
    CHECK(csv.find(",null,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(table_from_json(table_to_json(t)) == t);
}

TEST_CASE("slice filters, groups and aggregates") {
    auto t = make_table({"dataset", "model", "acc.m"}, {
                                                          {s("d1"), s("A"), d(1)},
                                                          {s("d1"), s("A"), d(3)},
                                                          {s("d1"), s("B"), d(10)},
                                                          {s("d2"), s("A"), Cell{}},
                                                          {s("d2"), s("A"), d(4)},
                                                      });
    auto out = slice(t, {{"model", FilterOp::Eq, std::string("A")}}, {"dataset"},
                     {{"acc.m", AggFn::Mean}, {"acc.m", AggFn::Max}, {"acc.m", AggFn::Count}});
    REQUIRE(out.columns.size() == 5);
    CHECK(out.columns[1].name == "mean(acc.m)");
    CHECK(out.columns[4].name == "n(acc.m)");
    REQUIRE(out.rows.size() == 2);
    CHECK(out.rows[0] == std::vector<Cell>{s("d1"), d(2), d(3), i(2), i(2)});
    CHECK(out.rows[1] == std::vector<Cell>{s("d2"), d(4), d(4), i(1), i(1)});

    auto med = slice(t, {{"acc.m", FilterOp::NotNull, {}}}, {}, {{"acc.m", AggFn::Median}});
    REQUIRE(med.rows.size() == 1);
    CHECK(med.rows[0][0] == d(3.5));

    auto gt = slice(t, {{"acc.m", FilterOp::Gt, std::int64_t{3}}}, {"model"}, {{"acc.m", AggFn::Min}});
    REQUIRE(gt.rows.size() == 2);
    CHECK(gt.rows[0][1] == d(4));
    CHECK(gt.rows[1][1] == d(10));

    CHECK_THROWS_AS(slice(t, {}, {"nope"}, {}), Error);
}

TEST_CASE("slice agrees with a naive reference on random tables") {
    for (unsigned seed = 1; seed <= 100; ++seed) {
        std::mt19937 g(seed);
        std::uniform_int_distribution<int> lvl(0, 2), val(0, 9), coin(0, 4);
        std::vector<std::vector<Cell>> rows;
        int n = std::uniform_int_distribution<int>(0, 30)(g);
        for (int r = 0; r < n; ++r) {
            Cell y = coin(g) == 0 ? Cell{} : d(val(g));
            rows.push_back({Scalar{"g" + std::to_string(lvl(g))}, i(lvl(g)), y});
        }
        auto t = make_table({"dataset", "hp.k", "acc.m"}, rows);
        std::int64_t threshold = lvl(g);
        auto out = slice(t, {{"hp.k", FilterOp::Ge, threshold}}, {"dataset"}, {{"acc.m", AggFn::Mean}, {"acc.m", AggFn::Count}});

        std::map<std::string, std::vector<double>> ref;
        std::set<std::string> groups;
        for (const auto& row : rows) {
            if (std::get<std::int64_t>(*row[1]) < threshold) continue;
            auto key = std::get<std::string>(*row[0]);
            groups.insert(key);
            if (row[2]) ref[key].push_back(std::get<double>(*row[2]));
        }
        REQUIRE(out.rows.size() == groups.size());
        std::size_t r = 0;
        for (const auto& key : groups) {
            const auto& row = out.rows[r++];
            CHECK(row[0] == Cell{Scalar{key}});
            const auto& ys = ref[key];
            CHECK(row[2] == i(static_cast<std::int64_t>(ys.size())));
            if (ys.empty()) {
                CHECK(row[1] == Cell{});
            } else {
                double m = 0;
                for (double y : ys) m += y;
                CHECK(std::get<double>(*row[1]) == doctest::Approx(m / ys.size()));
            }
        }
    }
}

TEST_CASE("virtual run gathers matching results across profiles") {
    auto ctx = two_model_context();
    BenchmarkContext small = ctx;
    small.models = {cid("ref/a")};
    small.hyper_family.clear();
    small.hyper_family[cid("ref/a")] = {HyperparameterSetting{{{"k", std::int64_t{1}}}}};

    auto r1 = make_run(small, "01HRUN0000000000000000000A");
    BenchmarkContext other = ctx;
    other.models = {cid("ref/b")};
    other.hyper_family.clear();
    auto r2 = make_run(other, "01HRUN0000000000000000000B");
    r2.profile.cpu_model = "Other CPU";
    r2.profile = with_profile_hash(r2.profile);
    BenchmarkContext unrelated = other;
    unrelated.datasets = {cid("ref/else")};
    auto r3 = make_run(unrelated, "01HRUN0000000000000000000C");

    auto v = assemble_virtual_run({r1, r2, r3}, ctx);
    CHECK(v.table.rows.size() == 2);
    CHECK(v.coverage.matched.size() == 2);
    REQUIRE(v.coverage.unmatched.size() == 1);
    CHECK(v.coverage.unmatched[0].find("ref/a@1") != std::string::npos);
    CHECK(v.coverage.profiles.size() == 2);
    CHECK(to_json(v.coverage).at("profiles").size() == 2);
}

TEST_CASE("causal graph: default graph, validation and lookups") {
    auto g = CausalGraph::default_graph();
    std::ifstream in(std::string(CB_SOURCE_ROOT) + "/data/default_causal_graph.json");
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(CausalGraph::from_json(parse_json(buf.str())).to_json() == g.to_json());

    CHECK(g.node_of_column("hp.alpha").name == "hyperparameters");
    CHECK(g.node_of_column("data.n_rows").name == "dataset-properties");
    CHECK(g.node_of_column("wall_time_s").name == "time");
    CHECK(g.node_of_column("acc.ref/shd@1").name == "accuracy");
    CHECK_THROWS_AS(g.node_of_column("run_id"), Error);
    CHECK(g.parents("hyperparameters") == std::vector<std::string>{"model-family"});
    CHECK(g.parents("hardware-profile") == std::vector<std::string>{"dataset-properties"});
    auto anc = g.ancestors("time");
    CHECK(anc.size() == 5);
    CHECK(g.ancestors("model-family").empty());

    using Edges = std::vector<std::pair<std::string, std::string>>;
    std::vector<GraphNode> nodes{{"a", ColumnKind::Factor, {"x"}}, {"b", ColumnKind::Factor, {"y"}}, {"o", ColumnKind::Outcome, {"z"}}};
    CHECK_NOTHROW(CausalGraph(nodes, Edges{{"a", "b"}, {"b", "o"}}));
    CHECK_THROWS_AS(CausalGraph(nodes, Edges{{"a", "b"}, {"b", "a"}}), Error);
    CHECK_THROWS_AS(CausalGraph(nodes, Edges{{"o", "a"}}), Error);
    CHECK_THROWS_AS(CausalGraph(nodes, Edges{{"a", "ghost"}}), Error);
    CHECK_THROWS_AS(CausalGraph::from_json(parse_json(R"({"nodes":[{"name":"a"}],"edges":[]})")), Error);
}

TEST_CASE("impact removes confounding by the dataset") {
    // wall time = 2 on the large dataset, +1 on cpu A; A runs mostly on large
    std::vector<std::vector<Cell>> rows;
    auto add = [&](const char* ds, const char* cpu, int copies) {
        double y = (std::string(ds) == "large" ? 2.0 : 0.0) + (std::string(cpu) == "A" ? 1.0 : 0.0);
        for (int c = 0; c < copies; ++c) rows.push_back({s(ds), s(cpu), d(y)});
    };
    add("small", "A", 1);
    add("small", "B", 3);
    add("large", "A", 3);
    add("large", "B", 1);
    auto t = make_table({"dataset", "hw.cpu_model", "wall_time_s"}, rows);
    auto e = estimate_impact(t, CausalGraph::default_graph(), {"hw.cpu_model", std::string("A"), std::string("B")}, "wall_time_s");
    CHECK(e.unadjusted == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(e.estimate - 1.0) < 1e-9);
    CHECK(e.standard_error == 0.0);
    CHECK(e.adjusted_for == std::vector<std::string>{"dataset-properties"});
    CHECK(e.stratified_on == std::vector<std::string>{"dataset"});
    CHECK(e.strata.size() == 2);
    CHECK(to_json(e).at("estimate").get<double>() == doctest::Approx(1.0));

    SUBCASE("constant outcome gives zero") {
        auto flat = t;
        for (auto& r : flat.rows) r[2] = d(7);
        auto z = estimate_impact(flat, CausalGraph::default_graph(), {"hw.cpu_model", std::string("A"), std::string("B")}, "wall_time_s");
        CHECK(z.estimate == 0.0);
        CHECK(z.standard_error == 0.0);
    }
    SUBCASE("a single level has no overlap") {
        auto one = t;
        for (auto& r : one.rows) r[1] = s("A");
        CHECK_THROWS_AS(estimate_impact(one, CausalGraph::default_graph(), {"hw.cpu_model", std::string("A"), std::string("B")}, "wall_time_s"),
                        Error);
    }
    SUBCASE("strata lacking an arm are dropped") {
        auto extra = t;
        extra.rows.push_back({s("tiny"), s("A"), d(100)});
        auto x = estimate_impact(extra, CausalGraph::default_graph(), {"hw.cpu_model", std::string("A"), std::string("B")}, "wall_time_s");
        CHECK(x.dropped_strata == std::vector<std::string>{"dataset=tiny"});
        CHECK(std::abs(x.estimate - 1.0) < 1e-9);
    }
}

TEST_CASE("impact bins many-valued numeric confounders into quartiles") {
    std::vector<std::vector<Cell>> rows;
    for (int n = 1; n <= 8; ++n) {
        for (const char* cpu : {"A", "B"}) rows.push_back({s("d"), i(n * 100), s(cpu), d(n + (cpu[0] == 'A' ? 0.5 : 0.0))});
    }
    auto t = make_table({"dataset", "data.n_rows", "hw.cpu_model", "wall_time_s"}, rows);
    auto e = estimate_impact(t, CausalGraph::default_graph(), {"hw.cpu_model", std::string("A"), std::string("B")}, "wall_time_s");
    CHECK(e.strata.size() == 4);
    CHECK(e.strata[0].stratum == "dataset=d|data.n_rows=q1");
    CHECK(e.estimate == doctest::Approx(0.5));
}

TEST_CASE("impact error bars cover the planted effect under noise") {
    int covered = 0;
    double sum = 0;
    for (unsigned seed = 1; seed <= 100; ++seed) {
        std::mt19937 g(seed);
        std::normal_distribution<double> noise(0, 0.3);
        std::bernoulli_distribution pick_large(0.5);
        std::vector<std::vector<Cell>> rows;
        for (int r = 0; r < 400; ++r) {
            bool large = pick_large(g);
            bool a = std::bernoulli_distribution(large ? 0.8 : 0.2)(g);
            double y = (large ? 3.0 : 1.0) + (a ? 0.7 : 0.0) + noise(g);
            rows.push_back({s(large ? "large" : "small"), s(a ? "A" : "B"), d(y)});
        }
        auto t = make_table({"dataset", "hw.cpu_model", "wall_time_s"}, rows);
        auto e = estimate_impact(t, CausalGraph::default_graph(), {"hw.cpu_model", std::string("A"), std::string("B")}, "wall_time_s");
        covered += std::abs(e.estimate - 0.7) <= 3 * e.standard_error;
        sum += e.estimate;
    }
    CHECK(covered >= 95);
    CHECK(std::abs(sum / 100 - 0.7) < 0.02);
}

namespace {

std::vector<std::string> naive_front(const std::vector<ParetoPoint>& pts, const std::vector<Direction>& dirs) {
    auto better = [&](double a, double b, Direction dir) { return dir == Direction::LowerBetter ? a < b : a > b; };
    std::vector<std::string> out;
    for (const auto& p : pts) {
        bool dominated = false;
        for (const auto& q : pts) {
            bool all = true, strict = false;
            for (std::size_t k = 0; k < dirs.size(); ++k) {
                if (better(*p.values[k], *q.values[k], dirs[k])) all = false;
                if (better(*q.values[k], *p.values[k], dirs[k])) strict = true;
            }
            dominated = dominated || (all && strict);
        }
        if (!dominated) out.push_back(p.id);
    }
    return out;
}

}  // namespace

TEST_CASE("pareto front examples") {
    std::vector<ParetoPoint> pts{{"a", {1.0, 5.0}}, {"b", {2.0, 2.0}}, {"c", {3.0, 3.0}}, {"d", {5.0, 1.0}}, {"e", {2.0, 2.0}}};
    CHECK(pareto_front(pts, {Direction::LowerBetter, Direction::LowerBetter}) == std::vector<std::string>{"a", "b", "d", "e"});
    CHECK(pareto_front(pts, {Direction::HigherBetter, Direction::HigherBetter}) == std::vector<std::string>{"a", "c", "d"});
    CHECK(pareto_front({}, {Direction::LowerBetter}).empty());

    pts.push_back({"f", {std::nullopt, 1.0}});
    CHECK_THROWS_AS(pareto_front(pts, {Direction::LowerBetter, Direction::LowerBetter}), Error);
    pts.back().values[0] = std::nan("");
    CHECK_THROWS_AS(pareto_front(pts, {Direction::LowerBetter, Direction::LowerBetter}), Error);

    auto t = make_table({"run_id", "scenario_key", "acc.m", "wall_time_s"},
                        {{s("r1"), s("k1"), d(0.9), d(10)}, {s("r1"), s("k2"), d(0.8), d(1)}, {s("r2"), s("k1"), d(0.7), d(5)}});
    auto p = pareto_points(t, {{"acc.m", Direction::HigherBetter}, {"wall_time_s", Direction::LowerBetter}});
    CHECK(pareto_front(p, {Direction::HigherBetter, Direction::LowerBetter}) == std::vector<std::string>{"r1/k1", "r1/k2"});
}

TEST_CASE("pareto front matches the quadratic oracle and ignores monotone rescaling") {
    for (unsigned seed = 1; seed <= 300; ++seed) {
        std::mt19937 g(seed);
        std::size_t n = std::uniform_int_distribution<std::size_t>(0, 60)(g);
        std::size_t dim = std::uniform_int_distribution<std::size_t>(1, 4)(g);
        std::uniform_int_distribution<int> val(0, 6);
        std::vector<Direction> dirs;
        for (std::size_t k = 0; k < dim; ++k) dirs.push_back(val(g) % 2 ? Direction::LowerBetter : Direction::HigherBetter);
        std::vector<ParetoPoint> pts;
        for (std::size_t p = 0; p < n; ++p) {
            ParetoPoint pt{"p" + std::to_string(p), {}};
            for (std::size_t k = 0; k < dim; ++k) pt.values.push_back(static_cast<double>(val(g)));
            pts.push_back(std::move(pt));
        }
        auto front = pareto_front(pts, dirs);
        REQUIRE(front == naive_front(pts, dirs));
        auto scaled = pts;
        for (auto& pt : scaled) {
            for (auto& v : pt.values) v = std::exp(*v / 3.0) * 2.0 - 1.0;
        }
        CHECK(pareto_front(scaled, dirs) == front);
    }
}

TEST_CASE("predict transfers additive effects to an unseen cell") {
    auto t = make_table({"dataset", "model", "acc.m"},
                        {{s("small"), s("A"), d(1.0)}, {s("small"), s("B"), d(1.5)}, {s("large"), s("A"), d(3.0)}});
    auto g = CausalGraph::default_graph();
    auto p = predict(t, g, {{"dataset", std::string("large")}, {"model", std::string("B")}}, {"acc.m"});
    REQUIRE(p.size() == 1);
    CHECK(p[0].point == doctest::Approx(3.5).epsilon(1e-9));
    CHECK_FALSE(p[0].exact_cell);
    CHECK(p[0].defaulted.empty());
    CHECK(p[0].transferred.size() == 2);
    CHECK(p[0].upper - p[0].lower == doctest::Approx(0.0));
    CHECK(p[0].factors == std::vector<std::string>{"dataset", "model"});

    SUBCASE("an observed cell returns its mean") {
        auto more = t;
        more.rows.push_back({s("small"), s("A"), d(2.0)});
        auto q = predict(more, g, {{"dataset", std::string("small")}, {"model", std::string("A")}}, {"acc.m"});
        CHECK(q[0].exact_cell);
        CHECK(q[0].point == doctest::Approx(1.5));
        CHECK(q[0].upper > q[0].lower);
    }
    SUBCASE("an unseen model level is defaulted") {
        auto q = predict(t, g, {{"dataset", std::string("large")}, {"model", std::string("C")}}, {"acc.m"});
        REQUIRE(q[0].defaulted.size() == 1);
        CHECK(q[0].defaulted[0] == FactorEffect{"model", "C", 0.0});
        CHECK_FALSE(q[0].exact_cell);
        CHECK(to_json(q[0]).at("defaulted").size() == 1);
    }
    SUBCASE("all outcomes by default, errors on empty data") {
        CHECK(predict(t, g, {}).size() == 1);
        auto empty = t;
        empty.rows.clear();
        CHECK_THROWS_AS(predict(empty, g, {}), Error);
        CHECK_THROWS_AS(predict(t, g, {{"nope", std::string("x")}}), Error);
    }
}

TEST_CASE("recommend ranks uncovered configurations first") {
    auto t = make_table({"dataset", "model", "acc.m"},
                        {{s("small"), s("A"), d(1.0)}, {s("small"), s("B"), d(1.5)}, {s("large"), s("A"), d(3.0)}});
    auto g = CausalGraph::default_graph();
    std::map<std::string, std::vector<Scalar>> grid{{"dataset", {std::string("small"), std::string("large")}},
                                                    {"model", {std::string("A"), std::string("B")}}};
    auto recs = recommend(t, g, grid, 5, "acc.m");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].configuration.at("dataset") == Scalar{std::string("large")});
    CHECK(recs[0].configuration.at("model") == Scalar{std::string("B")});
    CHECK(recs[0].coverage == 0);
    CHECK(*recs[0].predicted == doctest::Approx(3.5));
    CHECK(recs[0].key == R"({"dataset":"large","model":"B"})");

    SUBCASE("partial grids are ranked by coverage then key") {
        std::map<std::string, std::vector<Scalar>> models{{"model", {std::string("B"), std::string("A"), std::string("C")}}};
        auto r = recommend(t, g, models, 10, "acc.m");
        REQUIRE(r.size() == 3);
        CHECK(r[0].configuration.at("model") == Scalar{std::string("C")});
        CHECK(r[1].configuration.at("model") == Scalar{std::string("B")});
        CHECK(r[1].coverage == 1);
        CHECK(r[2].coverage == 2);
        CHECK(recommend(t, g, models, 2, "acc.m").size() == 2);
    }
    SUBCASE("ties fall back to the canonical key") {
        auto flat = make_table({"dataset", "model", "acc.m"}, {{s("small"), s("A"), d(1.0)}});
        std::map<std::string, std::vector<Scalar>> g2{{"dataset", {std::string("z"), std::string("y")}},
                                                      {"model", {std::string("A")}}};
        auto r = recommend(flat, g, g2, 10, "acc.m");
        REQUIRE(r.size() == 2);
        CHECK(r[0].key < r[1].key);
        CHECK(to_json(r[0]).contains("interval_width"));
    }
}
