#include "vocalnote/process.h"

#include "vocalnote/error.h"

#include <fmt/format.h>

#include <atomic>
#include <exception>
#include <fcntl.h>
#include <mutex>
#include <spawn.h>
#include <sys/wait.h>
#include <thread>
#include <vector>

extern char** environ;

namespace vocalnote {

std::string shell_quote(std::string_view value) {
    std::string out = "'";
    for (char c : value) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('\'');
    return out;
}

std::size_t count_placeholder(std::string_view command_template, std::string_view name) {
    const std::string needle = fmt::format("{{{}}}", name);
    std::size_t count = 0;
    for (auto pos = command_template.find(needle); pos != std::string_view::npos;
         pos = command_template.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

std::string expand_template(std::string_view command_template,
                            const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t pos = 0;
    while (pos < command_template.size()) {
        const auto open = command_template.find('{', pos);
        if (open == std::string_view::npos) break;
        const auto close = command_template.find('}', open);
        if (close == std::string_view::npos) break;
        out.append(command_template.substr(pos, open - pos));
        const std::string key(command_template.substr(open + 1, close - open - 1));
        if (auto it = values.find(key); it != values.end()) {
            out += shell_quote(it->second);
        } else {
            out.append(command_template.substr(open, close - open + 1));
        }
        pos = close + 1;
    }
    out.append(command_template.substr(std::min(pos, command_template.size())));
    return out;
}

int run_shell(const std::string& command, const std::filesystem::path& log_path) {
    std::error_code ec;
    if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path(), ec);

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    const std::string log = log_path.string();
    posix_spawn_file_actions_addopen(&actions, 1, log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    posix_spawn_file_actions_adddup2(&actions, 1, 2);
    posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);

    const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
    pid_t pid = 0;
    const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) {
        throw Error(ErrorKind::CommandFailed, fmt::format("cannot spawn /bin/sh: error {}", rc));
    }
    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw Error(ErrorKind::CommandFailed, "waitpid failed");
    }
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return 255;
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        while (true) {
            const auto i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        threads.reserve(jobs);
        for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

} // namespace vocalnote
