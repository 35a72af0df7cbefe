#include <gnu/libc-version.h>
#include <sys/utsname.h>

#include <fstream>
#include <set>
#include <thread>

#include "cb/core/context.hpp"
#include "cb/core/error.hpp"
#include "cb/harness/harness.hpp"
#include "cb/version.hpp"

namespace cb {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::pair<std::string, std::string> split_field(const std::string& line) {
    auto colon = line.find(':');
    if (colon == std::string::npos) return {trim(line), ""};
    return {trim(line.substr(0, colon)), trim(line.substr(colon + 1))};
}

std::optional<std::string> probe_gpu() {
    std::error_code ec;
    const fs::path root = "/proc/driver/nvidia/gpus";
    if (!fs::is_directory(root, ec)) return std::nullopt;
    std::set<std::string> models;
    for (const auto& dir : fs::directory_iterator(root, ec)) {
        std::ifstream in(dir.path() / "information");
        std::string line;
        while (std::getline(in, line)) {
            auto [k, v] = split_field(line);
            if (k == "Model" && !v.empty()) models.insert(v);
        }
    }
    if (models.empty()) return std::nullopt;
    return *models.begin();
}

}  // namespace

SystemProfile resolve_environment() {
    SystemProfile p;
    std::vector<std::string> failures;

    std::ifstream cpuinfo("/proc/cpuinfo");
    if (cpuinfo) {
        std::set<std::pair<std::string, std::string>> cores;
        std::string line, physical_id = "0";
        int processors = 0;
        while (std::getline(cpuinfo, line)) {
            auto [k, v] = split_field(line);
            if (k == "processor") ++processors;
            if ((k == "model name" || k == "Hardware" || k == "cpu model") && p.cpu_model.empty()) p.cpu_model = v;
            if (k == "physical id") physical_id = v;
            if (k == "core id") cores.insert({physical_id, v});
        }
        p.physical_cores = !cores.empty() ? static_cast<std::int64_t>(cores.size()) : processors;
    } else {
        failures.push_back("/proc/cpuinfo unreadable");
    }
    if (p.physical_cores < 1) p.physical_cores = std::max(1u, std::thread::hardware_concurrency());

    utsname un{};
    if (::uname(&un) == 0) {
        p.os_name_version = std::string(un.sysname) + " " + un.release;
        if (p.cpu_model.empty()) p.cpu_model = un.machine;
    } else {
        failures.push_back("uname failed");
    }

    std::ifstream meminfo("/proc/meminfo");
    std::string line;
    while (std::getline(meminfo, line)) {
        auto [k, v] = split_field(line);
        if (k == "MemTotal") {
            p.total_memory_bytes = std::stoll(v) * 1024;
            break;
        }
    }
    if (p.total_memory_bytes <= 0) failures.push_back("MemTotal not found in /proc/meminfo");
    if (p.cpu_model.empty()) failures.push_back("cpu model unknown");

    if (!failures.empty()) {
        std::string detail = "environment probe failed:";
        for (const auto& f : failures) detail += " " + f + ";";
        throw Error(ErrorCode::ProbeFailure, detail);
    }

    p.gpu_model = probe_gpu();
    p.runtime_versions["cb"] = std::string(kVersion);
    p.runtime_versions["libc"] = std::string("glibc ") + gnu_get_libc_version();
#if defined(__clang__)
    p.runtime_versions["compiler"] = "clang " __clang_version__;
#elif defined(__GNUC__)
    p.runtime_versions["compiler"] = "gcc " __VERSION__;
#endif
    return with_profile_hash(p);
}

}  // namespace cb
