#include "cb/registry/registrar.hpp"

#include <httplib.h>

#include <cstdlib>

#include "cb/core/canonical.hpp"
#include "cb/core/hash.hpp"

namespace cb {

std::string LocalSimRegistrar::mint(const DepositionRequest& request) {
    if (!available_) throw Error(ErrorCode::RegistrarUnavailable, "local registrar simulator is offline");
    return "10.70000/cb." + sha256_hex(request.subject).substr(0, 12);
}

ZenodoSandboxRegistrar::ZenodoSandboxRegistrar(std::string base_url, std::string access_token)
    : base_url_(std::move(base_url)), token_(std::move(access_token)) {}

std::string ZenodoSandboxRegistrar::mint(const DepositionRequest& request) {
    Json creators = Json::array();
    for (const auto& c : request.creators) creators.push_back(Json{{"name", c}});
    Json body{{"metadata",
               {{"title", request.title},
                {"creators", creators},
                {"description", request.description},
                {"upload_type", "dataset"}}}};

    httplib::Client client(base_url_);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    httplib::Headers headers{{"Authorization", "Bearer " + token_}};
    auto res = client.Post("/api/deposit/depositions", headers, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorCode::RegistrarUnavailable, "registrar unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::RegistrarUnavailable, "registrar answered HTTP " + std::to_string(res->status));
    }
    try {
        Json j = Json::parse(res->body);
        if (j.contains("doi") && j["doi"].is_string() && !j["doi"].get<std::string>().empty()) {
            return j["doi"].get<std::string>();
        }
        return j.at("metadata").at("prereserve_doi").at("doi").get<std::string>();
    } catch (const std::exception& e) {
        throw Error(ErrorCode::RegistrarUnavailable, std::string("unexpected registrar response: ") + e.what());
    }
}

std::shared_ptr<Registrar> make_registrar(const std::string& kind) {
    if (kind.empty() || kind == "sim" || kind == "local-sim") return std::make_shared<LocalSimRegistrar>();
    if (kind == "zenodo-sandbox") {
        const char* url = std::getenv("CB_ZENODO_URL");
        const char* token = std::getenv("CB_ZENODO_TOKEN");
        return std::make_shared<ZenodoSandboxRegistrar>(url ? url : "https://sandbox.zenodo.org", token ? token : "");
    }
    throw Error(ErrorCode::SchemaViolation, "unknown registrar '" + kind + "' (expected sim or zenodo-sandbox)");
}

}  // namespace cb
