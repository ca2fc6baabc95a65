#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>

namespace vocalnote {

/// POSIX single-quote escaping for substitution into `sh -c` command lines.
std::string shell_quote(std::string_view value);

/// Number of times `{name}` occurs in `command_template`.
std::size_t count_placeholder(std::string_view command_template, std::string_view name);

/// Replaces every `{key}` with the shell-quoted value. Unknown placeholders
/// are left untouched.
std::string expand_template(std::string_view command_template,
                            const std::map<std::string, std::string>& values);

/// Runs `command` through /bin/sh, with stdout and stderr appended to `log_path`.
/// Returns the exit status (128 + signal when killed).
int run_shell(const std::string& command, const std::filesystem::path& log_path);

/// Calls `body(i)` for i in [0, count) on up to `jobs` threads. The first
/// exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

} // namespace vocalnote
