#include <httplib.h>

#include <algorithm>
#include <cctype>

#include "cb/api/service.hpp"

namespace cb::api {

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;

    explicit Impl(Service& s) : service(s) {
        server.set_payload_max_length(512ull << 20);
        auto handler = [this](const httplib::Request& in, httplib::Response& out) {
            Request req;
            req.method = in.method;
            req.path = in.path;
            for (const auto& [k, v] : in.params) req.query[k] = v;
            for (const auto& [k, v] : in.headers) {
                std::string name = k;
                std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
                req.headers[name] = v;
            }
            req.body = in.body;
            auto res = service.handle(req);
            out.status = res.status;
            out.set_content(res.body, res.content_type);
        };
        const std::string any = R"(/.*)";
        server.Get(any, handler);
        server.Post(any, handler);
        server.Put(any, handler);
        server.Delete(any, handler);
    }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace cb::api
