#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "cb/api/service.hpp"
#include "cb/version.hpp"

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cb-server - benchmark registry service"};
    app.require_subcommand(1);
    std::string store = env_or("CB_STORE_DIR", "cb-store");
    std::string registrar = env_or("CB_REGISTRAR", "sim");
    app.add_option("--store", store, "Store directory (CB_STORE_DIR)");
    app.add_option("--registrar", registrar, "sim or zenodo-sandbox (CB_REGISTRAR)")->check(CLI::IsMember({"sim", "zenodo-sandbox"}));
    app.fallthrough();

    auto* serve = app.add_subcommand("serve", "Serve the /v1 API");
    std::string bind = env_or("CB_BIND_ADDR", "127.0.0.1:8080");
    serve->add_option("--bind", bind, "host:port, port 0 picks a free one (CB_BIND_ADDR)");

    auto* add_user = app.add_subcommand("add-user", "Create a user and print a fresh API key");
    std::string user;
    add_user->add_option("name", user)->required();
    auto* deactivate = app.add_subcommand("deactivate", "Disable a user's key");
    deactivate->add_option("name", user)->required();
    auto* activate = app.add_subcommand("activate", "Re-enable a user's key");
    activate->add_option("name", user)->required();
    auto* users = app.add_subcommand("list-users", "List users and whether they are active");

    CLI11_PARSE(app, argc, argv);

    try {
        cb::Registry registry(store, cb::make_registrar(registrar));
        cb::api::Service service(registry);
        if (add_user->parsed()) {
            std::cout << service.issue_key(user) << std::endl;
        } else if (deactivate->parsed() || activate->parsed()) {
            registry.set_principal_active(user, activate->parsed());
        } else if (users->parsed()) {
            for (const auto& p : registry.principals()) std::cout << p.user_name << (p.active ? "\tactive" : "\tinactive") << "\n";
        } else if (serve->parsed()) {
            auto colon = bind.rfind(':');
            if (colon == std::string::npos) throw cb::Error(cb::ErrorCode::MalformedConfig, "bind address must be host:port");
            cb::api::HttpServer http(service);
            int port = http.bind(bind.substr(0, colon), std::stoi(bind.substr(colon + 1)));

            sigset_t stop_signals;
            sigemptyset(&stop_signals);
            sigaddset(&stop_signals, SIGINT);
            sigaddset(&stop_signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
            std::thread waiter([&] {
                int sig = 0;
                sigwait(&stop_signals, &sig);
                http.stop();
            });
            waiter.detach();

            std::cout << "cb-server " << cb::kVersion << " listening on " << bind.substr(0, colon) << ":" << port << std::endl;
            http.listen();
        }
        return 0;
    } catch (const cb::Error& e) {
        std::cerr << "error: " << cb::error_code_name(e.code()) << ": " << e.what() << "\n";
        return e.code() == cb::ErrorCode::MalformedConfig || e.code() == cb::ErrorCode::Unauthenticated ? 1 : 2;
    }
}
