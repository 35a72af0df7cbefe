#pragma once

// HTTP/JSON facade over the registry, compatibility checks and analysis.
// `Service::handle` is a pure request -> response function; `HttpServer`
// binds it to a socket.

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "cb/core/canonical.hpp"
#include "cb/registry/registry.hpp"

namespace cb::api {

struct Request {
    std::string method;                         // GET, POST, PUT, DELETE
    std::string path;                           // decoded, without query
    std::map<std::string, std::string> query;
    std::map<std::string, std::string> headers; // lowercase names
    std::string body;
};

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

int http_status(ErrorCode code);

/// sha256 hex of an API key; the only form in which keys are stored.
std::string hash_key(std::string_view key);

// Wire forms shared with the CLI.
Json to_json(const ComponentRecord& r);
ComponentRecord component_record_from_json(const Json& j);
Json to_json(const PublicationRecord& p);

class Service {
public:
    explicit Service(Registry& registry) : registry_(registry) {}

    Response handle(const Request& request) const;

    /// Creates a principal with a fresh random key and returns the key.
    std::string issue_key(const std::string& user_name);
    /// Principal owning the key; Error(Unauthenticated) for unknown or inactive keys.
    std::string authenticate(std::string_view presented_key) const;

private:
    Response dispatch(const Request& request) const;
    std::string principal_of(const Request& request, bool required) const;

    Registry& registry_;
};

/// Minimal blocking HTTP server around a Service.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace cb::api
