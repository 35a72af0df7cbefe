#include "cb/api/service.hpp"

#include <openssl/crypto.h>
#include <openssl/rand.h>

#include <charconv>
#include <set>

#include "cb/analysis/analysis.hpp"
#include "cb/compat/compat.hpp"
#include "cb/core/hash.hpp"
#include "cb/version.hpp"

namespace cb::api {

namespace {

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= path.size()) {
        auto end = path.find('/', start);
        if (end == std::string_view::npos) end = path.size();
        if (end > start) out.emplace_back(path.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

Response json_response(const Json& body, int status = 200) {
    return Response{status, "application/json", canonical_dump(body)};
}

Response error_response(ErrorCode code, const std::string& detail, Json extra = Json::object()) {
    extra["error"] = error_code_name(code);
    extra["detail"] = detail;
    return json_response(extra, http_status(code));
}

Json parse_body(const Request& r) {
    if (r.body.empty()) return Json::object();
    return parse_json(r.body);
}

int int_param(const Request& r, const std::string& name, int fallback) {
    auto it = r.query.find(name);
    if (it == r.query.end()) return fallback;
    int v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc{} || p != it->second.data() + it->second.size()) {
        throw Error(ErrorCode::SchemaViolation, "query parameter '" + name + "' must be an integer");
    }
    return v;
}

std::optional<std::string> str_param(const Request& r, const std::string& name) {
    auto it = r.query.find(name);
    if (it == r.query.end()) return std::nullopt;
    return it->second;
}

Scope parse_scope(const std::optional<std::string>& s) {
    if (!s || *s == "all") return Scope::All;
    if (*s == "mine") return Scope::Mine;
    if (*s == "public") return Scope::Public;
    throw Error(ErrorCode::SchemaViolation, "scope must be all, mine or public");
}

ComponentId id_from_segments(const std::string& owner, const std::string& slug, const std::string& ver) {
    return ComponentId::parse(owner + "/" + slug + "@" + ver);
}

template <typename T, typename F>
Json page_json(const Page<T>& p, F&& item) {
    Json items = Json::array();
    for (const auto& x : p.items) items.push_back(item(x));
    return Json{{"items", items}, {"total", p.total}, {"page", p.page}, {"page_size", p.page_size}};
}

}  // namespace

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::Unauthenticated: return 401;
        case ErrorCode::Forbidden:
        case ErrorCode::NotOwner: return 403;
        case ErrorCode::UnknownComponent:
        case ErrorCode::UnknownRun:
        case ErrorCode::UnknownContext: return 404;
        case ErrorCode::NameTaken:
        case ErrorCode::PermanentEntity:
        case ErrorCode::Conflict: return 409;
        case ErrorCode::RegistrarUnavailable: return 503;
        case ErrorCode::IntegrityFailure:
        case ErrorCode::Io:
        case ErrorCode::ProbeFailure:
        case ErrorCode::SpawnFailure:
        case ErrorCode::Transport: return 500;
        default: return 422;
    }
}

std::string hash_key(std::string_view key) { return sha256_hex(key); }

Json to_json(const ComponentRecord& r) {
    auto d = descriptor_to_json(r.descriptor);
    return Json{
        {"id", r.id().str()},
        {"kind", d.at("kind")},
        {"descriptor", d.at("descriptor")},
        {"payload_hash", r.payload_hash},
        {"metadata",
         {{"title", r.metadata.title},
          {"description", r.metadata.description},
          {"license", r.metadata.license},
          {"created_at", format_utc(r.metadata.created_at)},
          {"owner", r.metadata.owner}}},
        {"visibility", to_string(r.visibility)},
        {"permanent", r.permanent},
    };
}

ComponentRecord component_record_from_json(const Json& j) {
    try {
        ComponentRecord r;
        r.descriptor = descriptor_from_json(Json{{"kind", j.at("kind")}, {"descriptor", j.at("descriptor")}});
        r.payload_hash = j.at("payload_hash").get<std::string>();
        const auto& m = j.at("metadata");
        r.metadata.title = m.value("title", "");
        r.metadata.description = m.value("description", "");
        r.metadata.license = m.value("license", "");
        r.metadata.owner = m.value("owner", "");
        r.metadata.created_at = parse_utc(m.at("created_at").get<std::string>());
        r.visibility = parse_visibility(j.at("visibility").get<std::string>());
        r.permanent = j.at("permanent").get<bool>();
        return r;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("malformed component record: ") + e.what());
    }
}

Json to_json(const PublicationRecord& p) {
    return Json{
        {"subject", {{"kind", p.subject.kind == SubjectKind::Run ? "run" : "component"}, {"ref", p.subject.ref}}},
        {"identifier", p.identifier},
        {"registrar", p.registrar},
        {"minted_at", format_utc(p.minted_at)},
    };
}

std::string Service::issue_key(const std::string& user_name) {
    unsigned char raw[32];
    if (RAND_bytes(raw, sizeof raw) != 1) throw Error(ErrorCode::Io, "no randomness available for key generation");
    static constexpr char hex[] = "0123456789abcdef";
    std::string key = "cbk_";
    for (unsigned char c : raw) {
        key += hex[c >> 4];
        key += hex[c & 15];
    }
    registry_.add_principal({user_name, hash_key(key), true});
    return key;
}

std::string Service::authenticate(std::string_view presented_key) const {
    const std::string h = hash_key(presented_key);
    std::optional<std::string> found;
    // every stored hash is compared so timing does not depend on which one matches
    for (const auto& p : registry_.principals()) {
        bool same = p.api_key_hash.size() == h.size() && CRYPTO_memcmp(p.api_key_hash.data(), h.data(), h.size()) == 0;
        if (same && p.active) found = p.user_name;
    }
    if (!found) throw Error(ErrorCode::Unauthenticated, "unknown or inactive API key");
    return *found;
}

std::string Service::principal_of(const Request& request, bool required) const {
    auto it = request.headers.find("authorization");
    if (it == request.headers.end()) {
        if (required) throw Error(ErrorCode::Unauthenticated, "missing Authorization: Bearer <key>");
        return "";
    }
    constexpr std::string_view prefix = "Bearer ";
    if (it->second.rfind(prefix, 0) != 0) throw Error(ErrorCode::Unauthenticated, "Authorization must use the Bearer scheme");
    return authenticate(std::string_view(it->second).substr(prefix.size()));
}

Response Service::handle(const Request& request) const {
    try {
        return dispatch(request);
    } catch (const InvalidRunError& e) {
        Json violations = Json::array();
        for (const auto& v : e.report()) {
            violations.push_back({{"kind", v.kind}, {"scenario_key", v.scenario_key}, {"detail", v.detail}});
        }
        return error_response(e.code(), e.what(), Json{{"violations", violations}});
    } catch (const Error& e) {
        return error_response(e.code(), e.what());
    } catch (const Json::exception& e) {
        return error_response(ErrorCode::SchemaViolation, std::string("malformed request body: ") + e.what());
    } catch (const std::exception& e) {
        return Response{500, "application/json", canonical_dump(Json{{"error", "internal"}, {"detail", e.what()}})};
    }
}

namespace {

std::map<ComponentId, DatasetDescriptor> dataset_descriptors(const Registry& registry, const std::vector<BenchmarkRun>& runs,
                                                             const std::string& principal) {
    std::set<ComponentId> ids;
    for (const auto& run : runs) {
        for (const auto& r : run.results) ids.insert(r.scenario.dataset);
    }
    std::map<ComponentId, DatasetDescriptor> out;
    for (const auto& id : ids) {
        try {
            auto rec = registry.describe(id, principal);
            if (auto d = std::get_if<DatasetDescriptor>(&rec.descriptor)) out.emplace(id, *d);
        } catch (const Error&) {
            // datasets the caller cannot see contribute no data.* columns
        }
    }
    return out;
}

BenchmarkContext context_from(const Registry& registry, const Json& body) {
    if (body.contains("context")) return body.at("context").get<BenchmarkContext>();
    if (body.contains("context_id")) return registry.get_context(body.at("context_id").get<std::string>());
    throw Error(ErrorCode::SchemaViolation, "request needs 'context' or 'context_id'");
}

RunTable table_from(const Registry& registry, const Json& body, const std::string& principal) {
    if (body.contains("table")) return table_from_json(body.at("table"));
    if (body.contains("context") || body.contains("context_id")) {
        return assemble_virtual_run(registry, context_from(registry, body), principal).table;
    }
    std::vector<BenchmarkRun> runs;
    if (body.contains("runs")) {
        for (const auto& id : body.at("runs")) runs.push_back(registry.get_run(id.get<std::string>(), principal));
    } else {
        runs = registry.accessible_runs(principal);
    }
    return build_table(runs, dataset_descriptors(registry, runs, principal));
}

Json analysis(const Registry& registry, const std::string& what, const Json& body, const std::string& principal) {
    if (what == "virtual") {
        auto v = assemble_virtual_run(registry, context_from(registry, body), principal);
        return Json{{"table", table_to_json(v.table)}, {"coverage", to_json(v.coverage)}};
    }
    const RunTable table = table_from(registry, body, principal);
    const CausalGraph graph = body.contains("graph") ? CausalGraph::from_json(body.at("graph")) : CausalGraph::default_graph();
    if (what == "table") return Json{{"table", table_to_json(table)}, {"csv", to_csv(table)}};
    if (what == "slice") {
        std::vector<Filter> filters;
        for (const auto& f : body.value("filters", Json::array())) {
            filters.push_back({f.at("column").get<std::string>(), parse_filter_op(f.value("op", "eq")),
                               f.contains("value") && !f.at("value").is_null() ? f.at("value").get<Scalar>() : Scalar{false}});
        }
        std::vector<Aggregate> aggregates;
        for (const auto& a : body.value("aggregates", Json::array())) {
            aggregates.push_back({a.at("column").get<std::string>(), parse_agg_fn(a.value("fn", "mean"))});
        }
        auto group_by = body.value("group_by", std::vector<std::string>{});
        return Json{{"table", table_to_json(slice(table, filters, group_by, aggregates))}};
    }
    if (what == "impact") {
        const auto& t = body.at("treatment");
        Contrast c{t.at("column").get<std::string>(), t.at("level_a").get<Scalar>(), t.at("level_b").get<Scalar>()};
        return to_json(estimate_impact(table, graph, c, body.at("outcome").get<std::string>()));
    }
    if (what == "pareto") {
        std::vector<Objective> objectives;
        std::vector<Direction> directions;
        for (const auto& o : body.at("objectives")) {
            objectives.push_back({o.at("column").get<std::string>(), parse_direction(o.value("direction", "lower-better"))});
            directions.push_back(objectives.back().direction);
        }
        auto points = pareto_points(table, objectives);
        // rows lacking an objective are reported, not silently ranked
        std::vector<ParetoPoint> complete;
        Json skipped = Json::array();
        for (const auto& p : points) {
            bool ok = std::all_of(p.values.begin(), p.values.end(), [](const auto& v) { return v.has_value(); });
            if (ok || !body.value("skip_missing", false)) {
                complete.push_back(p);
            } else {
                skipped.push_back(p.id);
            }
        }
        Json pts = Json::array();
        for (const auto& p : complete) {
            Json values = Json::array();
            for (const auto& v : p.values) values.push_back(v ? Json(*v) : Json(nullptr));
            pts.push_back({{"id", p.id}, {"values", values}});
        }
        return Json{{"front", pareto_front(complete, directions)}, {"points", pts}, {"skipped", skipped}};
    }
    if (what == "predict") {
        auto target = body.value("target", Json::object()).get<Assignment>();
        auto outcomes = body.value("outcomes", std::vector<std::string>{});
        Json preds = Json::array();
        for (const auto& p : predict(table, graph, target, outcomes)) preds.push_back(to_json(p));
        return Json{{"predictions", preds}};
    }
    if (what == "recommend") {
        auto grid = body.at("grid").get<std::map<std::string, std::vector<Scalar>>>();
        auto k = body.value("k", std::size_t{5});
        Json recs = Json::array();
        for (const auto& r : recommend(table, graph, grid, k, body.at("outcome").get<std::string>())) recs.push_back(to_json(r));
        return Json{{"recommendations", recs}};
    }
    throw Error(ErrorCode::UnknownComponent, "no analysis '" + what + "'");
}

PartialContext resolve_partial(const Registry& registry, const Json& j, const std::string& principal) {
    PartialContext out;
    auto add = [&](const char* field) {
        for (const auto& id : j.value(field, Json::array())) {
            auto d = registry.describe(ComponentId::parse(id.get<std::string>()), principal).descriptor;
            std::visit(
                [&](auto&& x) {
                    using T = std::decay_t<decltype(x)>;
                    if constexpr (std::is_same_v<T, DatasetDescriptor>) out.datasets.push_back(x);
                    if constexpr (std::is_same_v<T, ModelDescriptor>) out.models.push_back(x);
                    if constexpr (std::is_same_v<T, MetricDescriptor>) out.metrics.push_back(x);
                },
                d);
        }
    };
    add("datasets");
    add("models");
    add("metrics");
    return out;
}

PartialContext all_visible(const Registry& registry, const std::string& principal) {
    PartialContext out;
    ComponentQuery q;
    q.page_size = 100;
    for (q.page = 1;; ++q.page) {
        auto page = registry.query(q, principal);
        for (const auto& r : page.items) {
            if (auto d = std::get_if<DatasetDescriptor>(&r.descriptor)) out.datasets.push_back(*d);
            if (auto m = std::get_if<ModelDescriptor>(&r.descriptor)) out.models.push_back(*m);
            if (auto m = std::get_if<MetricDescriptor>(&r.descriptor)) out.metrics.push_back(*m);
        }
        if (static_cast<std::int64_t>(q.page) * q.page_size >= page.total) break;
    }
    return out;
}

}  // namespace

Response Service::dispatch(const Request& r) const {
    const auto seg = split_path(r.path);
    const std::string& m = r.method;
    auto not_found = [&]() -> Response {
        return error_response(ErrorCode::UnknownComponent, "no route for " + m + " " + r.path);
    };
    if (seg.size() < 2 || seg[0] != "v1") return not_found();
    const std::string& area = seg[1];

    if (area == "health" && seg.size() == 2 && m == "GET") {
        return json_response({{"status", "ok"}, {"version", std::string(kVersion)}});
    }
    if (area == "whoami" && seg.size() == 2 && m == "GET") {
        return json_response({{"user", principal_of(r, true)}});
    }

    if (area == "components") {
        if (seg.size() == 2 && m == "GET") {
            auto who = principal_of(r, false);
            ComponentQuery q;
            if (auto k = str_param(r, "kind")) q.kind = parse_component_kind(*k);
            if (auto t = str_param(r, "task")) q.task = parse_task_kind(*t);
            q.text = str_param(r, "q").value_or("");
            q.scope = parse_scope(str_param(r, "scope"));
            if (q.scope == Scope::Mine && who.empty()) throw Error(ErrorCode::Unauthenticated, "scope=mine needs a key");
            q.page = int_param(r, "page", 1);
            q.page_size = int_param(r, "page_size", 20);
            return json_response(page_json(registry_.query(q, who), [](const auto& rec) { return to_json(rec); }));
        }
        if (seg.size() == 2 && m == "POST") {
            auto who = principal_of(r, true);
            auto id = registry_.register_archive(r.body, who);
            return json_response(to_json(registry_.describe(id, who)), 201);
        }
        if (seg.size() == 5 && seg[4] == "versions" && m == "POST") {
            auto who = principal_of(r, true);
            auto id = registry_.new_version_archive(seg[2] + "/" + seg[3], r.body, who);
            return json_response(to_json(registry_.describe(id, who)), 201);
        }
        if (seg.size() == 5 && seg[4] == "latest" && m == "GET") {
            auto who = principal_of(r, false);
            auto v = registry_.latest_version(seg[2] + "/" + seg[3]);
            if (!v) throw Error(ErrorCode::UnknownComponent, "no component '" + seg[2] + "/" + seg[3] + "'");
            return json_response(to_json(registry_.describe(ComponentId{seg[2] + "/" + seg[3], *v}, who)));
        }
        if (seg.size() >= 5) {
            const ComponentId id = id_from_segments(seg[2], seg[3], seg[4]);
            if (seg.size() == 5 && m == "GET") return json_response(to_json(registry_.describe(id, principal_of(r, false))));
            if (seg.size() == 5 && m == "DELETE") {
                registry_.remove(Subject::component(id), principal_of(r, true));
                return json_response({{"deleted", id.str()}});
            }
            if (seg.size() == 6 && seg[5] == "payload" && m == "GET") {
                auto [rec, bytes] = registry_.fetch(id, principal_of(r, false));
                return Response{200, "application/gzip", std::move(bytes)};
            }
            if (seg.size() == 6 && seg[5] == "payload" && m == "PUT") {
                auto [rec, bytes] = registry_.fetch(id, principal_of(r, true));
                if (sha256_hex(r.body) != rec.payload_hash) {
                    throw Error(ErrorCode::Conflict, id.str() + " already has different bytes; versions are immutable");
                }
                return json_response({{"id", id.str()}, {"payload_hash", rec.payload_hash}});
            }
            if (seg.size() == 6 && seg[5] == "publish" && m == "POST") {
                return json_response(to_json(registry_.publish(Subject::component(id), principal_of(r, true))));
            }
        }
        return not_found();
    }

    if (area == "contexts") {
        if (seg.size() == 2 && m == "POST") {
            auto who = principal_of(r, true);
            auto ctx = parse_body(r).get<BenchmarkContext>();
            registry_.store_context(ctx, who);
            return json_response({{"context_id", ctx.context_id}, {"scenarios", expansion_size(ctx)}}, 201);
        }
        if (seg.size() == 3 && m == "GET") {
            principal_of(r, false);
            return json_response(Json(registry_.get_context(seg[2])));
        }
        return not_found();
    }

    if (area == "runs") {
        if (seg.size() == 2 && m == "GET") {
            auto who = principal_of(r, false);
            RunQuery q;
            q.context_id = str_param(r, "context_id");
            q.executed_by = str_param(r, "executed_by");
            q.scope = parse_scope(str_param(r, "scope"));
            if (q.scope == Scope::Mine && who.empty()) throw Error(ErrorCode::Unauthenticated, "scope=mine needs a key");
            q.page = int_param(r, "page", 1);
            q.page_size = int_param(r, "page_size", 20);
            return json_response(page_json(registry_.list_runs(q, who), [](const auto& run) { return Json(run); }));
        }
        if (seg.size() == 2 && m == "POST") {
            auto who = principal_of(r, true);
            auto run = parse_body(r).get<BenchmarkRun>();
            registry_.store_run(run, who);
            return json_response({{"run_id", run.run_id}}, 201);
        }
        if (seg.size() == 3 && m == "GET") return json_response(Json(registry_.get_run(seg[2], principal_of(r, false))));
        if (seg.size() == 3 && m == "DELETE") {
            registry_.remove(Subject::run(seg[2]), principal_of(r, true));
            return json_response({{"deleted", seg[2]}});
        }
        if (seg.size() == 4 && seg[3] == "publish" && m == "POST") {
            return json_response(to_json(registry_.publish(Subject::run(seg[2]), principal_of(r, true))));
        }
        return not_found();
    }

    if (area == "compat" && seg.size() == 3 && m == "POST") {
        auto who = principal_of(r, true);
        auto body = parse_body(r);
        auto chosen = resolve_partial(registry_, body.value("chosen", Json::object()), who);
        auto candidates = body.contains("candidates") ? resolve_partial(registry_, body.at("candidates"), who) : all_visible(registry_, who);
        if (seg[2] == "suggest") return json_response(Json(suggest(chosen, candidates)));
        if (seg[2] == "check") {
            if (chosen.datasets.size() != 1 || chosen.models.size() != 1) {
                throw Error(ErrorCode::SchemaViolation, "check needs exactly one dataset and one model");
            }
            return json_response(Json(check_scenario(chosen.datasets[0], chosen.models[0], chosen.metrics)));
        }
        return not_found();
    }

    if (area == "analysis" && seg.size() == 3 && m == "POST") {
        auto who = principal_of(r, true);
        return json_response(analysis(registry_, seg[2], parse_body(r), who));
    }
    return not_found();
}

}  // namespace cb::api
