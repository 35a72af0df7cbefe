#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "cb/analysis/analysis.hpp"
#include "cb/api/service.hpp"
#include "cb/cli/cli.hpp"
#include "cb/compat/compat.hpp"
#include "cb/core/context.hpp"
#include "cb/core/validate.hpp"
#include "cb/registry/archive.hpp"

namespace cb::cli {

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& p, const std::string& data) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << data;
    if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
}

bool is_server_side(ErrorCode c) {
    switch (c) {
        case ErrorCode::Io:
        case ErrorCode::Transport:
        case ErrorCode::IntegrityFailure:
        case ErrorCode::SpawnFailure:
        case ErrorCode::ProbeFailure:
        case ErrorCode::RegistrarUnavailable: return true;
        default: return false;
    }
}

ComponentKind kind_from_plural(const std::string& s) {
    if (s == "datasets" || s == "dataset") return ComponentKind::Dataset;
    if (s == "models" || s == "model") return ComponentKind::Model;
    return ComponentKind::Metric;
}

// Lazily loaded configuration and client, shared by all commands of one invocation.
struct Session {
    std::string config_path;
    std::optional<CliConfig> config;
    std::unique_ptr<Client> client_;

    CliConfig& cfg() {
        if (!config) config = load_config(config_path);
        return *config;
    }
    Client& client(bool needs_key = true) {
        if (needs_key && cfg().api_key.empty()) {
            throw Error(ErrorCode::MissingConfig, "no api_key in " + config_path + " and CB_API_KEY is unset");
        }
        if (!client_) client_ = std::make_unique<Client>(cfg().server_url, cfg().api_key);
        return *client_;
    }
};

void print_page_components(std::ostream& out, const Json& page) {
    for (const auto& item : page.at("items")) {
        out << item.at("id").get<std::string>() << "\t" << item.at("kind").get<std::string>() << "\t"
            << item.at("visibility").get<std::string>() << (item.at("permanent").get<bool>() ? "\tpermanent" : "") << "\t"
            << item.at("metadata").at("title").get<std::string>() << "\n";
    }
    out << "(" << page.at("items").size() << " of " << page.at("total") << ")\n";
}

void print_page_runs(std::ostream& out, const Json& page) {
    for (const auto& item : page.at("items")) {
        out << item.at("run_id").get<std::string>() << "\t" << item.at("context_id").get<std::string>() << "\t"
            << item.at("executed_by").get<std::string>() << "\t" << item.at("visibility").get<std::string>() << "\t"
            << item.value("minted_identifier", "") << "\n";
    }
    out << "(" << page.at("items").size() << " of " << page.at("total") << ")\n";
}

void print_kind_suggestion(std::ostream& out, const std::string& label, const KindSuggestion& k) {
    out << label << ":\n";
    for (const auto& id : k.suitable) out << "  + " << id.str() << "\n";
    for (const auto& r : k.incompatible) {
        out << "  - " << r.id.str();
        for (const auto& why : r.reasons) out << " [" << why << "]";
        out << "\n";
    }
}

Json id_list(const std::vector<std::string>& ids) {
    Json out = Json::array();
    for (const auto& s : ids) out.push_back(ComponentId::parse(s).str());
    return out;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"cb - benchmark registry client"};
    app.require_subcommand(1);
    app.fallthrough();
    Session session;
    session.config_path = default_config_path().string();
    bool json = false;
    app.add_option("--config", session.config_path, "Config file (key=value lines)");
    app.add_flag("--json", json, "Machine-readable canonical JSON output");
    std::function<void()> action;

    auto emit = [&](const Json& j, const std::function<void()>& human) {
        if (json) {
            out << canonical_dump(j) << "\n";
        } else {
            human();
        }
    };

    // init-config
    auto* init = app.add_subcommand("init-config", "Write a config file");
    std::string init_url, init_key, init_cache;
    double init_timeout = 0;
    init->add_option("--server", init_url, "Server URL")->required();
    init->add_option("--key", init_key, "API key");
    init->add_option("--cache", init_cache, "Component cache directory");
    init->add_option("--timeout", init_timeout, "Default per-plugin timeout in seconds");
    init->callback([&] {
        action = [&] {
            std::string text = "server_url=" + init_url + "\n";
            if (!init_key.empty()) text += "api_key=" + init_key + "\n";
            if (!init_cache.empty()) text += "store_cache_dir=" + init_cache + "\n";
            if (init_timeout > 0) text += "timeout_s=" + std::to_string(init_timeout) + "\n";
            parse_config(text, std::nullopt);
            write_file(session.config_path, text);
            std::filesystem::permissions(session.config_path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
            emit(Json{{"config", session.config_path}}, [&] { out << "wrote " << session.config_path << "\n"; });
        };
    });

    // health / whoami
    app.add_subcommand("health", "Check the server")->callback([&] {
        action = [&] {
            auto j = session.client(false).call_json("GET", "/v1/health");
            emit(j, [&] { out << j.at("status").get<std::string>() << " (server " << j.at("version").get<std::string>() << ")\n"; });
        };
    });
    app.add_subcommand("whoami", "Show the authenticated user")->callback([&] {
        action = [&] {
            auto j = session.client().call_json("GET", "/v1/whoami");
            emit(j, [&] { out << j.at("user").get<std::string>() << "\n"; });
        };
    });

    // upload
    auto* upload = app.add_subcommand("upload", "Pack and upload a component directory");
    std::string up_kind, up_dir;
    upload->add_option("kind", up_kind)->required()->check(CLI::IsMember({"dataset", "model", "metric"}));
    upload->add_option("dir", up_dir)->required()->check(CLI::ExistingDirectory);
    upload->callback([&] {
        action = [&] {
            auto entries = archive::read_tree(up_dir);
            auto manifest = archive::read_manifest(entries);
            if (to_string(kind_of(manifest.descriptor)) != up_kind) {
                throw Error(ErrorCode::SchemaViolation, "manifest declares a " + std::string(to_string(kind_of(manifest.descriptor))) +
                                                            ", not a " + up_kind);
            }
            archive::check_payload(manifest.descriptor, entries);
            const auto bytes = archive::pack(std::move(entries));
            auto& c = session.client();
            Json rec;
            try {
                rec = c.call_json("POST", "/v1/components", {}, bytes, "application/gzip");
            } catch (const ApiError& e) {
                if (e.code() != ErrorCode::NameTaken) throw;
                rec = c.call_json("POST", "/v1/components/" + id_of(manifest.descriptor).name + "/versions", {}, bytes, "application/gzip");
            }
            emit(rec, [&] { out << rec.at("id").get<std::string>() << "\n"; });
        };
    });

    // download
    auto* download = app.add_subcommand("download", "Download and unpack a component");
    std::string dl_ref, dl_out;
    download->add_option("ref", dl_ref, "name@version")->required();
    download->add_option("--out", dl_out, "Target directory");
    download->callback([&] {
        action = [&] {
            auto id = ComponentId::parse(dl_ref);
            auto& c = session.client(false);
            auto bytes = c.call("GET", component_path(id) + "/payload");
            std::filesystem::path dir = dl_out.empty() ? std::filesystem::path(id.name.substr(id.name.find('/') + 1) + "@" + std::to_string(id.version))
                                                       : std::filesystem::path(dl_out);
            archive::extract(archive::unpack(bytes), dir);
            emit(Json{{"id", id.str()}, {"path", dir.string()}}, [&] { out << dir.string() << "\n"; });
        };
    });

    // list
    auto* list = app.add_subcommand("list", "List datasets, models, metrics or runs");
    std::string ls_what, ls_q, ls_scope, ls_task, ls_context, ls_by;
    int ls_page = 1, ls_size = 20;
    list->add_option("what", ls_what)->required()->check(CLI::IsMember({"datasets", "models", "metrics", "runs"}));
    list->add_option("--q", ls_q, "Text filter");
    list->add_option("--scope", ls_scope)->check(CLI::IsMember({"all", "mine", "public"}));
    list->add_option("--task", ls_task);
    list->add_option("--context", ls_context);
    list->add_option("--executed-by", ls_by);
    list->add_option("--page", ls_page);
    list->add_option("--page-size", ls_size);
    list->callback([&] {
        action = [&] {
            std::map<std::string, std::string> q{{"page", std::to_string(ls_page)}, {"page_size", std::to_string(ls_size)}};
            if (!ls_scope.empty()) q["scope"] = ls_scope;
            auto& c = session.client(false);
            if (ls_what == "runs") {
                if (!ls_context.empty()) q["context_id"] = ls_context;
                if (!ls_by.empty()) q["executed_by"] = ls_by;
                auto page = c.call_json("GET", "/v1/runs", q);
                emit(page, [&] { print_page_runs(out, page); });
                return;
            }
            q["kind"] = std::string(to_string(kind_from_plural(ls_what)));
            if (!ls_q.empty()) q["q"] = ls_q;
            if (!ls_task.empty()) q["task"] = ls_task;
            auto page = c.call_json("GET", "/v1/components", q);
            emit(page, [&] { print_page_components(out, page); });
        };
    });

    // context new / validate / submit / show
    auto* context = app.add_subcommand("context", "Declare and check benchmark contexts");
    context->require_subcommand(1);
    context->fallthrough();
    auto* ctx_new = context->add_subcommand("new", "Write a context file");
    std::string cn_id, cn_out;
    std::vector<std::string> cn_datasets, cn_models, cn_metrics, cn_hyper;
    ctx_new->add_option("--id", cn_id)->required();
    ctx_new->add_option("--dataset", cn_datasets)->required();
    ctx_new->add_option("--model", cn_models)->required();
    ctx_new->add_option("--metric", cn_metrics)->required();
    ctx_new->add_option("--hyper", cn_hyper, "model@v={\"param\":value} (repeatable)");
    ctx_new->add_option("--out", cn_out);
    ctx_new->callback([&] {
        action = [&] {
            BenchmarkContext c;
            c.context_id = cn_id;
            for (const auto& s : cn_datasets) c.datasets.insert(ComponentId::parse(s));
            for (const auto& s : cn_models) c.models.insert(ComponentId::parse(s));
            for (const auto& s : cn_metrics) c.metrics.insert(ComponentId::parse(s));
            for (const auto& h : cn_hyper) {
                auto eq = h.find('=');
                if (eq == std::string::npos) throw Error(ErrorCode::SchemaViolation, "--hyper expects model@v={...}");
                auto model = ComponentId::parse(h.substr(0, eq));
                c.hyper_family[model].push_back(HyperparameterSetting{parse_json(h.substr(eq + 1)).get<std::map<std::string, Scalar>>()});
            }
            validate(c);
            auto text = encode(c);
            if (cn_out.empty()) {
                out << text << "\n";
            } else {
                write_file(cn_out, text + "\n");
                emit(Json{{"path", cn_out}, {"scenarios", expansion_size(c)}},
                     [&] { out << "wrote " << cn_out << " (" << expansion_size(c) << " scenarios)\n"; });
            }
        };
    });
    auto* ctx_validate = context->add_subcommand("validate", "Check a context file locally and against the server");
    std::string cv_file;
    ctx_validate->add_option("file", cv_file)->required()->check(CLI::ExistingFile);
    ctx_validate->callback([&] {
        action = [&] {
            auto c = decode<BenchmarkContext>(read_file(cv_file));
            validate(c);
            auto& client = session.client();
            Json problems = Json::array();
            for (const auto& d : c.datasets) {
                for (const auto& m : c.models) {
                    Json chosen{{"datasets", {d.str()}}, {"models", {m.str()}}, {"metrics", Json::array()}};
                    for (const auto& a : c.metrics) chosen["metrics"].push_back(a.str());
                    auto report = client.call_json("POST", "/v1/compat/check", {}, Json{{"chosen", chosen}}.dump());
                    if (!report.at("compatible").get<bool>()) problems.push_back({{"dataset", d.str()}, {"model", m.str()}, {"report", report}});
                }
            }
            Json result{{"context_id", c.context_id}, {"scenarios", expansion_size(c)}, {"incompatible", problems}};
            emit(result, [&] {
                if (problems.empty()) out << "ok: " << expansion_size(c) << " scenarios\n";
                for (const auto& p : problems) {
                    out << "incompatible: " << p.at("dataset").get<std::string>() << " x " << p.at("model").get<std::string>();
                    for (const auto& gap : p.at("report").at("missing")) {
                        out << " [" << gap.at("consumer").get<std::string>() << ": " << gap.at("reason").get<std::string>() << "]";
                    }
                    out << "\n";
                }
            });
            if (!problems.empty()) throw Error(ErrorCode::IncompatibleScenario, std::to_string(problems.size()) + " incompatible pair(s)");
        };
    });
    auto* ctx_submit = context->add_subcommand("submit", "Store a context on the server");
    std::string cs_file;
    ctx_submit->add_option("file", cs_file)->required()->check(CLI::ExistingFile);
    ctx_submit->callback([&] {
        action = [&] {
            auto j = session.client().call_json("POST", "/v1/contexts", {}, encode(decode<BenchmarkContext>(read_file(cs_file))));
            emit(j, [&] { out << j.at("context_id").get<std::string>() << "\n"; });
        };
    });
    auto* ctx_show = context->add_subcommand("show", "Print a stored context");
    std::string cshow_id;
    ctx_show->add_option("id", cshow_id)->required();
    ctx_show->callback([&] {
        action = [&] {
            auto j = session.client(false).call_json("GET", "/v1/contexts/" + cshow_id);
            out << (json ? canonical_dump(j) : j.dump(2)) << "\n";
        };
    });

    // suggest
    auto* sug = app.add_subcommand("suggest", "Suitable components for a partial context");
    std::vector<std::string> sg_datasets, sg_models, sg_metrics;
    sug->add_option("--dataset", sg_datasets);
    sug->add_option("--model", sg_models);
    sug->add_option("--metric", sg_metrics);
    sug->callback([&] {
        action = [&] {
            Json chosen{{"datasets", id_list(sg_datasets)}, {"models", id_list(sg_models)}, {"metrics", id_list(sg_metrics)}};
            auto j = session.client().call_json("POST", "/v1/compat/suggest", {}, Json{{"chosen", chosen}}.dump());
            emit(j, [&] {
                auto s = j.get<Suggestion>();
                print_kind_suggestion(out, "datasets", s.datasets);
                print_kind_suggestion(out, "models", s.models);
                print_kind_suggestion(out, "metrics", s.metrics);
            });
        };
    });

    // run
    auto* run = app.add_subcommand("run", "Execute a context locally");
    std::string run_ctx, run_out, run_work;
    double run_timeout = 0;
    bool run_upload = false;
    run->add_option("--context", run_ctx, "Context file or stored context id")->required();
    run->add_option("--out", run_out, "Where to write the run JSON (default <run_id>.json)");
    run->add_option("--timeout", run_timeout, "Per-plugin timeout in seconds");
    run->add_option("--work-dir", run_work, "Working directory root");
    run->add_flag("--upload", run_upload, "Upload the run after execution");
    run->callback([&] {
        action = [&] {
            auto& client = session.client();
            BenchmarkContext c;
            if (std::filesystem::is_regular_file(run_ctx)) {
                c = decode<BenchmarkContext>(read_file(run_ctx));
                client.call("POST", "/v1/contexts", {}, encode(c));
            } else {
                c = client.call_json("GET", "/v1/contexts/" + run_ctx).get<BenchmarkContext>();
            }
            auto limits = session.cfg().default_limits;
            if (run_timeout > 0) limits.timeout_s = run_timeout;
            if (!run_work.empty()) limits.working_dir_root = run_work;
            const auto user = client.call_json("GET", "/v1/whoami").at("user").get<std::string>();
            HttpSource source(client, session.cfg().store_cache_dir);
            auto result = execute(instrument(c, resolve_environment()), source, limits, user);
            const std::filesystem::path path = run_out.empty() ? result.run_id + ".json" : run_out;
            write_file(path, encode(result) + "\n");
            if (run_upload) client.call("POST", "/v1/runs", {}, encode(result));
            Json statuses = Json::object();
            for (const auto& r : result.results) statuses[scenario_key(r.scenario)] = to_string(r.status);
            emit(Json{{"run_id", result.run_id}, {"path", path.string()}, {"uploaded", run_upload}, {"statuses", statuses}}, [&] {
                out << result.run_id << "\n";
                for (const auto& r : result.results) {
                    out << "  " << scenario_key(r.scenario) << "  " << to_string(r.status);
                    for (const auto& [m, v] : r.accuracy) out << "  " << m.str() << "=" << v;
                    out << "\n";
                }
                out << "wrote " << path.string() << (run_upload ? " (uploaded)" : "") << "\n";
            });
        };
    });

    // upload-run
    auto* up_run = app.add_subcommand("upload-run", "Upload a run JSON file");
    std::string ur_file;
    up_run->add_option("file", ur_file)->required()->check(CLI::ExistingFile);
    up_run->callback([&] {
        action = [&] {
            auto run_json = decode<BenchmarkRun>(read_file(ur_file));
            auto j = session.client().call_json("POST", "/v1/runs", {}, encode(run_json));
            emit(j, [&] { out << j.at("run_id").get<std::string>() << "\n"; });
        };
    });

    // publish / delete
    auto* publish = app.add_subcommand("publish", "Publish a run or component");
    std::string pub_what, pub_ref;
    publish->add_option("what", pub_what)->required()->check(CLI::IsMember({"run", "component"}));
    publish->add_option("ref", pub_ref, "run id or name@version")->required();
    publish->callback([&] {
        action = [&] {
            std::string path = pub_what == "run" ? "/v1/runs/" + pub_ref : component_path(ComponentId::parse(pub_ref));
            auto j = session.client().call_json("POST", path + "/publish");
            emit(j, [&] { out << j.at("identifier").get<std::string>() << "\n"; });
        };
    });
    auto* del = app.add_subcommand("delete", "Delete a private run or non-permanent component");
    std::string del_what, del_ref;
    del->add_option("what", del_what)->required()->check(CLI::IsMember({"run", "component"}));
    del->add_option("ref", del_ref, "run id or name@version")->required();
    del->callback([&] {
        action = [&] {
            std::string path = del_what == "run" ? "/v1/runs/" + del_ref : component_path(ComponentId::parse(del_ref));
            auto j = session.client().call_json("DELETE", path);
            emit(j, [&] { out << "deleted " << j.at("deleted").get<std::string>() << "\n"; });
        };
    });

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Run an analysis on the server");
    std::string an_kind, an_request, an_body, an_context;
    bool an_csv = false;
    analyze->add_option("kind", an_kind)
        ->required()
        ->check(CLI::IsMember({"slice", "impact", "pareto", "predict", "recommend", "virtual", "table"}));
    analyze->add_option("--request", an_request, "JSON request file")->check(CLI::ExistingFile);
    analyze->add_option("--body", an_body, "Inline JSON request");
    analyze->add_option("--context-id", an_context, "Restrict to a stored context (virtual run)");
    analyze->add_flag("--csv", an_csv, "Print result tables as CSV");
    analyze->callback([&] {
        action = [&] {
            Json body = Json::object();
            if (!an_request.empty()) body = parse_json(read_file(an_request));
            if (!an_body.empty()) body.update(parse_json(an_body));
            if (!an_context.empty()) body["context_id"] = an_context;
            auto j = session.client().call_json("POST", "/v1/analysis/" + an_kind, {}, body.dump());
            if (an_csv && j.contains("table")) {
                out << to_csv(table_from_json(j.at("table")));
                return;
            }
            out << (json ? canonical_dump(j) : j.dump(2)) << "\n";
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    }

    try {
        if (action) action();
        return 0;
    } catch (const ApiError& e) {
        err << "error: " << e.what() << "\n";
        if (e.body().contains("violations")) {
            for (const auto& v : e.body().at("violations")) {
                err << "  " << v.value("kind", "") << " " << v.value("scenario_key", "") << " " << v.value("detail", "") << "\n";
            }
        }
        return e.status() >= 500 ? 2 : 1;
    } catch (const Error& e) {
        err << "error: " << error_code_name(e.code()) << ": " << e.what() << "\n";
        return is_server_side(e.code()) ? 2 : 1;
    } catch (const Json::exception& e) {
        err << "error: malformed JSON: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace cb::cli
