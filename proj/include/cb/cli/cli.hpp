#pragma once

// Console client: configuration, a thin HTTP client for the /v1 API, a
// component source that downloads through it, and the command dispatcher.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cb/core/canonical.hpp"
#include "cb/core/error.hpp"
#include "cb/harness/harness.hpp"
#include "cb/registry/registry.hpp"

namespace cb::cli {

struct CliConfig {
    std::string server_url;
    std::string api_key;
    std::filesystem::path store_cache_dir;
    ExecutionLimits default_limits;
};

/// `$CB_CONFIG` if set, else `~/.causalbench/config`.
std::filesystem::path default_config_path();

/// Parses flat `key=value` text. `env_key`, when set, replaces the file's key.
/// Throws MalformedConfig naming the line and field.
CliConfig parse_config(std::string_view text, const std::optional<std::string>& env_key);
/// Reads the file (MissingConfig if absent) and applies CB_API_KEY.
CliConfig load_config(const std::filesystem::path& path);
std::string format_config(const CliConfig& config);

/// Error carrying the HTTP status of a failed API call.
class ApiError : public Error {
public:
    ApiError(ErrorCode code, int status, const std::string& detail, Json body)
        : Error(code, detail), status_(status), body_(std::move(body)) {}
    int status() const { return status_; }
    const Json& body() const { return body_; }

private:
    int status_;
    Json body_;
};

/// Maps a wire error name back to its code (Io for unknown names).
ErrorCode error_code_from_name(std::string_view name);

class Client {
public:
    Client(std::string server_url, std::string api_key);
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    struct Reply {
        int status = 0;
        std::string body;
        std::string content_type;
    };

    Reply request(const std::string& method, const std::string& path, const std::map<std::string, std::string>& query = {},
                  const std::string& body = "", const std::string& content_type = "application/json");

    /// Request that must succeed; throws ApiError on an error status, Error(Transport) if unreachable.
    std::string call(const std::string& method, const std::string& path, const std::map<std::string, std::string>& query = {},
                     const std::string& body = "", const std::string& content_type = "application/json");
    Json call_json(const std::string& method, const std::string& path, const std::map<std::string, std::string>& query = {},
                   const std::string& body = "", const std::string& content_type = "application/json");

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string key_;
};

/// "/v1/components/owner/slug/3"
std::string component_path(const ComponentId& id);

/// Component source that downloads through the API, caching verified archives
/// under `cache_dir` by content hash.
class HttpSource : public ComponentSource {
public:
    HttpSource(Client& client, std::filesystem::path cache_dir) : client_(client), cache_dir_(std::move(cache_dir)) {}

    Descriptor descriptor(const ComponentId& id) override;
    std::string payload(const ComponentId& id) override;
    ComponentRecord record(const ComponentId& id);

private:
    Client& client_;
    std::filesystem::path cache_dir_;
    std::map<ComponentId, ComponentRecord> records_;
};

/// Runs one command line (without the program name). Exit codes: 0 success,
/// 1 user error, 2 server or I/O error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cb::cli
