#include "rtlforge/process.hpp"

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "rtlforge/error.hpp"

namespace fs = std::filesystem;

namespace rtlforge {

namespace {

constexpr std::size_t kMaxCapturedBytes = 64u << 20;

class ProcessSemaphore {
public:
    void set_limit(std::size_t limit) {
        std::lock_guard lock(mutex_);
        limit_ = std::max<std::size_t>(1, limit);
        cv_.notify_all();
    }
    std::size_t limit() const {
        std::lock_guard lock(mutex_);
        return limit_;
    }
    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return in_use_ < limit_; });
        ++in_use_;
    }
    void release() {
        std::lock_guard lock(mutex_);
        --in_use_;
        cv_.notify_one();
    }

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t limit_ = std::max(1u, std::thread::hardware_concurrency());
    std::size_t in_use_ = 0;
};

ProcessSemaphore& semaphore() {
    static ProcessSemaphore instance;
    return instance;
}

struct SemaphoreSlot {
    SemaphoreSlot() { semaphore().acquire(); }
    ~SemaphoreSlot() { semaphore().release(); }
    SemaphoreSlot(const SemaphoreSlot&) = delete;
    SemaphoreSlot& operator=(const SemaphoreSlot&) = delete;
};

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

bool is_executable_file(const fs::path& p) {
    struct stat st {};
    return ::stat(p.c_str(), &st) == 0 && S_ISREG(st.st_mode) && ::access(p.c_str(), X_OK) == 0;
}

}  // namespace

void set_process_limit(std::size_t limit) { semaphore().set_limit(limit); }
std::size_t process_limit() { return semaphore().limit(); }

std::optional<fs::path> find_executable(const std::string& name) {
    if (name.empty()) return std::nullopt;
    if (name.find('/') != std::string::npos) {
        fs::path p = fs::absolute(name);
        if (is_executable_file(p)) return p;
        return std::nullopt;
    }
    const char* path_env = std::getenv("PATH");
    std::string_view dirs = path_env ? path_env : "/usr/bin:/bin";
    while (!dirs.empty()) {
        const auto colon = dirs.find(':');
        auto dir = dirs.substr(0, colon);
        dirs = colon == std::string_view::npos ? std::string_view{} : dirs.substr(colon + 1);
        if (dir.empty()) continue;
        fs::path candidate = fs::path(dir) / name;
        if (is_executable_file(candidate)) return candidate;
    }
    return std::nullopt;
}

ProcessResult run_process(const ProcessRequest& request) {
    if (request.argv.empty()) fail(ErrorKind::PreconditionViolation, "empty command");
    const auto program = find_executable(request.argv.front());
    if (!program) {
        fail(ErrorKind::ToolNotFound,
             fmt::format("tool '{}' not found on PATH", request.argv.front()));
    }

    // Everything the child needs is prepared before fork.
    std::vector<std::string> env_strings;
    if (const char* path = std::getenv("PATH")) env_strings.push_back(fmt::format("PATH={}", path));
    for (const auto& name : request.env_passthrough) {
        if (name == "PATH" || request.extra_env.contains(name)) continue;
        if (const char* value = std::getenv(name.c_str())) {
            env_strings.push_back(fmt::format("{}={}", name, value));
        }
    }
    for (const auto& [name, value] : request.extra_env) {
        env_strings.push_back(fmt::format("{}={}", name, value));
    }
    std::vector<char*> envp;
    for (auto& s : env_strings) envp.push_back(s.data());
    envp.push_back(nullptr);

    std::vector<std::string> argv_strings = request.argv;
    std::vector<char*> argv;
    for (auto& s : argv_strings) argv.push_back(s.data());
    argv.push_back(nullptr);

    const std::string program_path = program->string();
    const std::string workdir = request.workdir.empty() ? "." : request.workdir.string();

    SemaphoreSlot slot;

    int out_pipe[2];
    int err_pipe[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0) {
        fail(ErrorKind::IoError, fmt::format("pipe: {}", std::strerror(errno)));
    }
    Fd out_read(out_pipe[0]), out_write(out_pipe[1]);
    Fd err_read(err_pipe[0]), err_write(err_pipe[1]);

    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) fail(ErrorKind::IoError, fmt::format("fork: {}", std::strerror(errno)));
    if (pid == 0) {
        ::setpgid(0, 0);
        int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(out_pipe[1], STDERR_FILENO);
        int code = 0;
        if (::chdir(workdir.c_str()) != 0) {
            code = errno;
        } else {
            ::execve(program_path.c_str(), argv.data(), envp.data());
            code = errno;
        }
        [[maybe_unused]] auto written = ::write(err_pipe[1], &code, sizeof code);
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    out_write.reset();
    err_write.reset();

    int exec_errno = 0;
    if (::read(err_read.fd, &exec_errno, sizeof exec_errno) == sizeof exec_errno) {
        ::waitpid(pid, nullptr, 0);
        fail(ErrorKind::ToolNotFound, fmt::format("cannot execute '{}': {}", program_path,
                                                  std::strerror(exec_errno)));
    }

    ProcessResult result;
    const auto deadline = start + request.timeout;
    bool eof = false;
    bool exited = false;
    int status = 0;
    char buffer[8192];
    bool truncated = false;

    auto remaining_ms = [&] {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        return std::max<long long>(0, left.count());
    };

    while (!exited) {
        if (!eof) {
            pollfd pfd{out_read.fd, POLLIN, 0};
            const int timeout_ms = static_cast<int>(std::min<long long>(remaining_ms(), 50));
            const int ready = ::poll(&pfd, 1, timeout_ms);
            if (ready > 0) {
                const ssize_t n = ::read(out_read.fd, buffer, sizeof buffer);
                if (n > 0) {
                    if (result.output.size() < kMaxCapturedBytes) {
                        result.output.append(buffer, static_cast<std::size_t>(n));
                    } else {
                        truncated = true;
                    }
                } else if (n == 0 || (n < 0 && errno != EINTR && errno != EAGAIN)) {
                    eof = true;
                }
            }
        } else {
            std::this_thread::sleep_for(std::chrono::milliseconds(
                std::min<long long>(remaining_ms(), 10)));
        }
        const pid_t done = ::waitpid(pid, &status, WNOHANG);
        if (done == pid) {
            exited = true;
            break;
        }
        if (remaining_ms() == 0) {
            result.timed_out = true;
            ::kill(-pid, SIGKILL);
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            exited = true;
        }
    }
    // leftover children in the group must not outlive the tool
    ::kill(-pid, SIGKILL);

    // drain whatever is already buffered without blocking
    if (!eof) {
        ::fcntl(out_read.fd, F_SETFL, O_NONBLOCK);
        for (;;) {
            const ssize_t n = ::read(out_read.fd, buffer, sizeof buffer);
            if (n <= 0) break;
            if (result.output.size() < kMaxCapturedBytes) {
                result.output.append(buffer, static_cast<std::size_t>(n));
            } else {
                truncated = true;
            }
        }
    }
    if (truncated) result.output += "\n[output truncated]\n";

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!result.timed_out && WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else {
        result.exit_code = -1;
    }
    return result;
}

}  // namespace rtlforge
