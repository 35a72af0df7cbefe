#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "cb/api/service.hpp"
#include "cb/cli/cli.hpp"
#include "cb/core/hash.hpp"

namespace cb::cli {

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::filesystem::path home() {
    const char* h = std::getenv("HOME");
    return h ? std::filesystem::path(h) : std::filesystem::current_path();
}

}  // namespace

std::filesystem::path default_config_path() {
    if (const char* p = std::getenv("CB_CONFIG"); p && *p) return p;
    return home() / ".causalbench" / "config";
}

CliConfig parse_config(std::string_view text, const std::optional<std::string>& env_key) {
    CliConfig c;
    c.store_cache_dir = home() / ".causalbench" / "cache";
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    bool have_url = false;
    auto bad = [&](const std::string& field, const std::string& why) {
        throw Error(ErrorCode::MalformedConfig, "line " + std::to_string(number) + ": field '" + field + "' " + why);
    };
    while (std::getline(in, line)) {
        ++number;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) bad(line, "is not a key=value pair");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "server_url") {
            static const std::regex url(R"(^https?://[^/\s:]+(:[0-9]{1,5})?/?$)");
            if (!std::regex_match(value, url)) bad(key, "is not an http(s) URL");
            while (value.size() > 1 && value.back() == '/') value.pop_back();
            c.server_url = value;
            have_url = true;
        } else if (key == "api_key") {
            c.api_key = value;
        } else if (key == "store_cache_dir") {
            if (value.empty()) bad(key, "is empty");
            c.store_cache_dir = value;
        } else if (key == "working_dir_root") {
            c.default_limits.working_dir_root = value;
        } else if (key == "timeout_s" || key == "max_output_bytes") {
            try {
                std::size_t used = 0;
                double v = std::stod(value, &used);
                if (used != value.size() || !(v > 0)) throw std::invalid_argument(value);
                if (key == "timeout_s") {
                    c.default_limits.timeout_s = v;
                } else {
                    c.default_limits.max_output_bytes = static_cast<std::int64_t>(v);
                }
            } catch (const std::exception&) {
                bad(key, "must be a positive number");
            }
        } else {
            bad(key, "is not a known setting");
        }
    }
    if (!have_url) throw Error(ErrorCode::MalformedConfig, "field 'server_url' is required");
    if (env_key && !env_key->empty()) c.api_key = *env_key;
    return c;
}

CliConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingConfig, "no config file at " + path.string() + " (run `cb init-config`)");
    std::stringstream buf;
    buf << in.rdbuf();
    std::optional<std::string> env;
    if (const char* k = std::getenv("CB_API_KEY")) env = k;
    return parse_config(buf.str(), env);
}

std::string format_config(const CliConfig& c) {
    std::ostringstream out;
    out << "server_url=" << c.server_url << "\n";
    out << "api_key=" << c.api_key << "\n";
    out << "store_cache_dir=" << c.store_cache_dir.string() << "\n";
    out << "timeout_s=" << c.default_limits.timeout_s << "\n";
    out << "max_output_bytes=" << c.default_limits.max_output_bytes << "\n";
    if (!c.default_limits.working_dir_root.empty()) out << "working_dir_root=" << c.default_limits.working_dir_root.string() << "\n";
    return out.str();
}

ErrorCode error_code_from_name(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(ErrorCode::Transport); ++i) {
        auto code = static_cast<ErrorCode>(i);
        if (error_code_name(code) == name) return code;
    }
    return ErrorCode::Io;
}

struct Client::Impl {
    httplib::Client http;
    explicit Impl(const std::string& url) : http(url) {
        http.set_connection_timeout(5, 0);
        http.set_read_timeout(300, 0);
        http.set_write_timeout(300, 0);
    }
};

Client::Client(std::string server_url, std::string api_key)
    : impl_(std::make_unique<Impl>(server_url)), key_(std::move(api_key)) {}

Client::~Client() = default;

Client::Reply Client::request(const std::string& method, const std::string& path, const std::map<std::string, std::string>& query,
                              const std::string& body, const std::string& content_type) {
    httplib::Headers headers;
    if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);
    httplib::Params params(query.begin(), query.end());
    std::string target = query.empty() ? path : httplib::append_query_params(path, params);

    httplib::Result res;
    if (method == "GET") {
        res = impl_->http.Get(target, headers);
    } else if (method == "POST") {
        res = impl_->http.Post(target, headers, body, content_type);
    } else if (method == "PUT") {
        res = impl_->http.Put(target, headers, body, content_type);
    } else if (method == "DELETE") {
        res = impl_->http.Delete(target, headers);
    } else {
        throw Error(ErrorCode::Transport, "unsupported method " + method);
    }
    if (!res) throw Error(ErrorCode::Transport, "cannot reach server: " + httplib::to_string(res.error()));
    return Reply{res->status, res->body, res->get_header_value("Content-Type")};
}

std::string Client::call(const std::string& method, const std::string& path, const std::map<std::string, std::string>& query,
                         const std::string& body, const std::string& content_type) {
    auto reply = request(method, path, query, body, content_type);
    if (reply.status < 300) return std::move(reply.body);
    Json j;
    try {
        j = parse_json(reply.body);
    } catch (const Error&) {
        j = Json{{"error", "transport_error"}, {"detail", reply.body}};
    }
    auto name = j.value("error", "transport_error");
    throw ApiError(error_code_from_name(name), reply.status, name + ": " + j.value("detail", ""), j);
}

Json Client::call_json(const std::string& method, const std::string& path, const std::map<std::string, std::string>& query,
                       const std::string& body, const std::string& content_type) {
    return parse_json(call(method, path, query, body, content_type));
}

std::string component_path(const ComponentId& id) {
    return "/v1/components/" + id.name + "/" + std::to_string(id.version);
}

ComponentRecord HttpSource::record(const ComponentId& id) {
    if (auto it = records_.find(id); it != records_.end()) return it->second;
    auto rec = api::component_record_from_json(client_.call_json("GET", component_path(id)));
    records_.emplace(id, rec);
    return rec;
}

Descriptor HttpSource::descriptor(const ComponentId& id) { return record(id).descriptor; }

std::string HttpSource::payload(const ComponentId& id) {
    const auto rec = record(id);
    const auto cached = cache_dir_ / (rec.payload_hash + ".tgz");
    if (std::ifstream in{cached, std::ios::binary}) {
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (sha256_hex(bytes) == rec.payload_hash) return bytes;
    }
    auto bytes = client_.call("GET", component_path(id) + "/payload");
    if (sha256_hex(bytes) != rec.payload_hash) {
        throw Error(ErrorCode::IntegrityFailure, "downloaded payload of " + id.str() + " does not match its hash");
    }
    std::error_code ec;
    std::filesystem::create_directories(cache_dir_, ec);
    const auto tmp = cached.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, cached, ec);
    return bytes;
}

}  // namespace cb::cli
