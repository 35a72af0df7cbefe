#include <fcntl.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "cb/core/error.hpp"
#include "cb/harness/harness.hpp"

namespace cb {

namespace fs = std::filesystem;

namespace {

// Sum of resident set sizes of every process in the group.
std::int64_t group_rss_bytes(pid_t pgid) {
    static const long page = sysconf(_SC_PAGESIZE);
    std::int64_t total = 0;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator("/proc", ec)) {
        const std::string name = entry.path().filename().string();
        if (name.empty() || name.find_first_not_of("0123456789") != std::string::npos) continue;
        std::ifstream in(entry.path() / "stat");
        std::string stat;
        if (!std::getline(in, stat)) continue;
        auto close = stat.rfind(')');
        if (close == std::string::npos) continue;
        std::istringstream fields(stat.substr(close + 2));
        std::string state;
        long ppid = 0, pgrp = 0;
        fields >> state >> ppid >> pgrp;
        if (pgrp != pgid) continue;
        std::string skip;
        for (int i = 0; i < 18; ++i) fields >> skip;  // session .. vsize
        long long rss = 0;
        if (fields >> rss) total += rss * page;
    }
    return total;
}

std::string tail_of(const fs::path& file, std::int64_t max_bytes) {
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) return {};
    std::int64_t size = in.tellg();
    std::int64_t start = std::max<std::int64_t>(0, size - max_bytes);
    in.seekg(start);
    std::string out(static_cast<std::size_t>(size - start), '\0');
    in.read(out.data(), static_cast<std::streamsize>(out.size()));
    return out;
}

double seconds(const timeval& tv) { return static_cast<double>(tv.tv_sec) + tv.tv_usec / 1e6; }

}  // namespace

Measurement measure_execution(const Command& command, const ExecutionLimits& limits) {
    if (!(limits.timeout_s > 0)) throw Error(ErrorCode::SchemaViolation, "timeout_s must be positive");
    if (::access(command.entrypoint.c_str(), X_OK) != 0) {
        throw Error(ErrorCode::SpawnFailure, "entrypoint not executable: " + command.entrypoint.string());
    }
    fs::create_directories(command.workdir);
    const fs::path log = command.workdir / "plugin.log";

    std::vector<std::string> argv_storage{command.entrypoint.string(), command.workdir.string()};
    argv_storage.insert(argv_storage.end(), command.args.begin(), command.args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());
    argv.push_back(nullptr);

    int report[2];
    if (::pipe2(report, O_CLOEXEC) != 0) throw Error(ErrorCode::SpawnFailure, std::strerror(errno));

    const auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) {
        ::close(report[0]);
        ::close(report[1]);
        throw Error(ErrorCode::SpawnFailure, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        int null = ::open("/dev/null", O_RDONLY);
        if (fd >= 0) {
            ::dup2(fd, STDOUT_FILENO);
            ::dup2(fd, STDERR_FILENO);
        }
        if (null >= 0) ::dup2(null, STDIN_FILENO);
        if (::chdir(command.workdir.c_str()) == 0) {
            ::setenv("CB_WORKDIR", command.workdir.c_str(), 1);
            ::execv(argv[0], argv.data());
        }
        int err = errno;
        ssize_t ignored = ::write(report[1], &err, sizeof err);
        (void)ignored;
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(report[1]);
    int child_errno = 0;
    ssize_t got = ::read(report[0], &child_errno, sizeof child_errno);
    ::close(report[0]);
    if (got == static_cast<ssize_t>(sizeof child_errno)) {
        ::waitpid(pid, nullptr, 0);
        throw Error(ErrorCode::SpawnFailure, "exec " + command.entrypoint.string() + ": " + std::strerror(child_errno));
    }

    Measurement m;
    std::int64_t peak = 0;
    int status = 0;
    rusage usage{};
    bool timed_out = false;
    const auto deadline = start + std::chrono::duration<double>(limits.timeout_s);
    auto interval = std::chrono::milliseconds(2);
    while (true) {
        pid_t r = ::wait4(pid, &status, WNOHANG, &usage);
        if (r == pid) break;
        if (r < 0 && errno != EINTR) throw Error(ErrorCode::Io, std::string("wait4: ") + std::strerror(errno));
        peak = std::max(peak, group_rss_bytes(pid));
        if (std::chrono::steady_clock::now() >= deadline) {
            timed_out = true;
            ::kill(-pid, SIGKILL);
            while (::wait4(pid, &status, 0, &usage) < 0 && errno == EINTR) {
            }
            break;
        }
        std::this_thread::sleep_for(interval);
        interval = std::min(interval * 2, std::chrono::milliseconds(20));
    }
    const auto end = std::chrono::steady_clock::now();
    ::kill(-pid, SIGKILL);  // stray descendants

    peak = std::max<std::int64_t>(peak, static_cast<std::int64_t>(usage.ru_maxrss) * 1024);
    m.timing[std::string(kWallTime)] = std::chrono::duration<double>(end - start).count();
    m.timing[std::string(kCpuTime)] = seconds(usage.ru_utime) + seconds(usage.ru_stime);
    m.resources[std::string(kPeakCpuMemory)] = peak;
    if (timed_out) {
        m.exit = ExitKind::TimedOut;
        m.code = SIGKILL;
    } else if (WIFSIGNALED(status)) {
        m.exit = ExitKind::Signaled;
        m.code = WTERMSIG(status);
    } else {
        m.exit = ExitKind::Exited;
        m.code = WEXITSTATUS(status);
    }
    m.log_excerpt = tail_of(log, limits.max_output_bytes);
    return m;
}

}  // namespace cb
