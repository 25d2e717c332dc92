#include "safedit/verifier.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <thread>

#include "safedit/fal.hpp"
#include "safedit/text.hpp"

namespace safedit::verifier {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

class UniqueFd {
 public:
  UniqueFd() = default;
  explicit UniqueFd(int fd) : fd_(fd) {}
  UniqueFd(const UniqueFd&) = delete;
  UniqueFd& operator=(const UniqueFd&) = delete;
  UniqueFd(UniqueFd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  ~UniqueFd() { reset(); }

  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) {
      ::close(fd_);
    }
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

struct Pipe {
  UniqueFd read;
  UniqueFd write;
};

Pipe make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw EnvironmentError(std::string("pipe2 failed: ") + std::strerror(errno));
  }
  return {UniqueFd(fds[0]), UniqueFd(fds[1])};
}

/// Fresh mkdtemp directory, removed on destruction.
class SandboxDir {
 public:
  explicit SandboxDir(const fs::path& root) {
    std::error_code ec;
    const auto base = root.empty() ? fs::temp_directory_path(ec) : root;
    if (ec) {
      throw EnvironmentError("no temporary directory: " + ec.message());
    }
    std::string pattern = (base / "safedit-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) {
      throw EnvironmentError("mkdtemp failed under " + base.string() + ": " + std::strerror(errno));
    }
    path_ = fs::canonical(pattern);
  }
  SandboxDir(const SandboxDir&) = delete;
  SandboxDir& operator=(const SandboxDir&) = delete;
  ~SandboxDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw EnvironmentError("cannot write " + path.string());
  }
}

std::string find_program(const std::string& name, const std::string& path_var) {
  if (name.find('/') != std::string::npos) {
    return ::access(name.c_str(), X_OK) == 0 ? name : std::string{};
  }
  for (const auto dir : text::split_lines(text::replace_all(path_var, ":", "\n"))) {
    if (dir.empty()) {
      continue;
    }
    const auto candidate = (fs::path(std::string(dir)) / name).string();
    struct stat st {};
    if (::stat(candidate.c_str(), &st) == 0 && S_ISREG(st.st_mode) &&
        ::access(candidate.c_str(), X_OK) == 0) {
      return candidate;
    }
  }
  return {};
}

std::vector<std::string> sandbox_environment(const SandboxOptions& options, const fs::path& dir) {
  std::vector<std::string> env;
  for (const auto& name : options.inherited_env) {
    if (const char* value = std::getenv(name.c_str())) {
      env.push_back(name + "=" + value);
    }
  }
  const auto d = dir.string();
  env.push_back("HOME=" + d);
  env.push_back("TMPDIR=" + d);
  env.push_back("PYTHONDONTWRITEBYTECODE=1");
  env.push_back("PYTHONHASHSEED=0");
  env.push_back("COLUMNS=80");
  env.push_back("NO_COLOR=1");
  env.push_back("PY_COLORS=0");
  return env;
}

std::vector<char*> c_strings(std::vector<std::string>& items) {
  std::vector<char*> out;
  out.reserve(items.size() + 1);
  for (auto& s : items) {
    out.push_back(s.data());
  }
  out.push_back(nullptr);
  return out;
}

void kill_group(pid_t pgid) {
  if (pgid > 0) {
    ::killpg(pgid, SIGKILL);
  }
}

// Reads whatever is immediately available; returns false on EOF.
bool drain(int fd, std::string& log, std::size_t cap, bool& truncated) {
  char buffer[8192];
  while (true) {
    const auto n = ::read(fd, buffer, sizeof buffer);
    if (n > 0) {
      const auto room = cap > log.size() ? cap - log.size() : 0;
      const auto take = std::min<std::size_t>(room, static_cast<std::size_t>(n));
      log.append(buffer, take);
      truncated = truncated || take < static_cast<std::size_t>(n);
      continue;
    }
    if (n == 0) {
      return false;
    }
    if (errno == EINTR) {
      continue;
    }
    return errno == EAGAIN || errno == EWOULDBLOCK;
  }
}

// `python -m <module>` whose module is absent is an environment problem.
void check_module_runner(const std::vector<std::string>& argv, const std::string& log) {
  for (std::size_t i = 1; i + 1 < argv.size(); ++i) {
    if (argv[i] == "-m") {
      const auto& module = argv[i + 1];
      if (log.find("No module named " + module) != std::string::npos ||
          log.find("No module named '" + module + "'") != std::string::npos) {
        throw EnvironmentError("test runner module '" + module + "' is not installed for " +
                               argv[0]);
      }
      return;
    }
  }
}

std::string test_name_from_nodeid(std::string_view nodeid) {
  nodeid = text::trim(nodeid);
  const auto sep = nodeid.find("::");
  if (sep == std::string_view::npos) {
    return std::string(fal::kCollectionTest);
  }
  return text::replace_all(std::string(nodeid.substr(sep + 2)), "::", ".");
}

}  // namespace

std::vector<std::string> expand_command(const std::vector<std::string>& argv_template,
                                        std::string_view code_file, std::string_view test_file) {
  std::vector<std::string> out;
  out.reserve(argv_template.size());
  for (const auto& arg : argv_template) {
    auto expanded = text::replace_all(arg, "{code_file}", code_file);
    out.push_back(text::replace_all(std::move(expanded), "{test_file}", test_file));
  }
  return out;
}

std::vector<CaseOutcome> parse_case_outcomes(std::string_view log) {
  std::vector<CaseOutcome> out;
  for (auto line : text::split_lines(log)) {
    line = text::trim(line);
    auto rest_after = [&](std::string_view prefix) -> std::optional<std::string_view> {
      if (line.substr(0, prefix.size()) == prefix) {
        return line.substr(prefix.size());
      }
      return std::nullopt;
    };
    if (auto rest = rest_after("PASSED ")) {
      out.push_back({test_name_from_nodeid(*rest), CaseStatus::Pass});
    } else if (auto rest = rest_after("FAILED ")) {
      const auto node = rest->substr(0, rest->find(" - "));
      out.push_back({test_name_from_nodeid(node), CaseStatus::Fail});
    } else if (auto rest = rest_after("ERROR ")) {
      const auto node = rest->substr(0, rest->find(" - "));
      out.push_back({test_name_from_nodeid(node), CaseStatus::Error});
    } else if (auto rest = rest_after("PASS ")) {
      out.push_back({std::string(text::trim(*rest)), CaseStatus::Pass});
    } else if (auto rest = rest_after("FAIL ")) {
      out.push_back({std::string(text::trim(rest->substr(0, rest->find(':')))), CaseStatus::Fail});
    }
  }
  if (out.empty()) {
    for (const auto& failure : fal::parse_log(log)) {
      if (failure.test_name != fal::kUnparsedTest) {
        out.push_back({failure.test_name, CaseStatus::Fail});
      }
    }
  }
  return out;
}

TestRunResult run_tests(std::string_view code, const corpus::EditTask& task, Seconds limit) {
  SandboxOptions options;
  options.limit = limit;
  return run_tests(code, task, options);
}

TestRunResult run_tests(std::string_view code, const corpus::EditTask& task,
                        const SandboxOptions& options) {
  if (options.limit <= Seconds::zero()) {
    throw std::invalid_argument("test time limit must be positive");
  }
  SandboxDir sandbox(options.temp_root);
  write_file(sandbox.path() / task.code_filename, code);
  write_file(sandbox.path() / task.test_filename, task.test_suite);

  auto argv = expand_command(task.test_command, task.code_filename, task.test_filename);
  auto env = sandbox_environment(options, sandbox.path());
  const char* parent_path = std::getenv("PATH");
  const auto program = find_program(argv.front(), parent_path ? parent_path : "/usr/bin:/bin");
  if (program.empty()) {
    throw EnvironmentError("test runner '" + argv.front() + "' not found on PATH");
  }

  auto output = make_pipe();
  auto exec_status = make_pipe();
  auto c_argv = c_strings(argv);
  auto c_env = c_strings(env);
  const auto dir = sandbox.path().string();

  const auto started = Clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) {
    throw EnvironmentError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    // Child: only async-signal-safe calls from here on.
    ::setpgid(0, 0);
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) {
      ::dup2(devnull, STDIN_FILENO);
    }
    ::dup2(output.write.get(), STDOUT_FILENO);
    ::dup2(output.write.get(), STDERR_FILENO);
    if (::chdir(dir.c_str()) == 0) {
      ::execve(program.c_str(), c_argv.data(), c_env.data());
    }
    const int err = errno;
    [[maybe_unused]] auto ignored = ::write(exec_status.write.get(), &err, sizeof err);
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  output.write.reset();
  exec_status.write.reset();

  int exec_errno = 0;
  if (::read(exec_status.read.get(), &exec_errno, sizeof exec_errno) ==
      static_cast<ssize_t>(sizeof exec_errno)) {
    ::waitpid(pid, nullptr, 0);
    throw EnvironmentError("cannot execute '" + program + "': " + std::strerror(exec_errno));
  }

  ::fcntl(output.read.get(), F_SETFL, ::fcntl(output.read.get(), F_GETFL) | O_NONBLOCK);
  const auto deadline =
      started + std::chrono::duration_cast<Clock::duration>(options.limit);
  std::string log;
  bool truncated = false;
  bool timed_out = false;
  bool exited = false;
  int status = 0;
  bool open = true;

  while (true) {
    if (!exited) {
      const auto r = ::waitpid(pid, &status, WNOHANG);
      exited = r == pid;
    }
    if (exited) {
      // Direct child is gone; stragglers may still hold the pipe.
      kill_group(pid);
      if (open) {
        pollfd pfd{output.read.get(), POLLIN, 0};
        while (::poll(&pfd, 1, 20) > 0 && drain(output.read.get(), log, options.max_log_bytes, truncated)) {
        }
      }
      break;
    }
    const auto now = Clock::now();
    if (now >= deadline) {
      timed_out = true;
      kill_group(pid);
      ::waitpid(pid, &status, 0);
      if (open) {
        drain(output.read.get(), log, options.max_log_bytes, truncated);
      }
      break;
    }
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    const int wait_ms = static_cast<int>(std::clamp<long long>(remaining, 1, 50));
    if (open) {
      pollfd pfd{output.read.get(), POLLIN, 0};
      if (::poll(&pfd, 1, wait_ms) > 0) {
        open = drain(output.read.get(), log, options.max_log_bytes, truncated);
      }
    } else {
      std::this_thread::sleep_for(std::chrono::milliseconds(wait_ms));
    }
  }
  const auto finished = Clock::now();

  if (truncated) {
    log += "\n[safedit: output truncated]\n";
  }
  log = text::replace_all(std::move(log), dir, kSandboxToken);

  TestRunResult result;
  result.duration_seconds = Seconds(finished - started).count();
  if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  } else if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  }
  if (!timed_out) {
    check_module_runner(argv, log);
  }
  result.case_outcomes = parse_case_outcomes(log);
  if (timed_out) {
    result.overall = Overall::Timeout;
  } else if (WIFSIGNALED(status)) {
    result.overall = Overall::Crash;
  } else {
    const bool any_bad = std::any_of(result.case_outcomes.begin(), result.case_outcomes.end(),
                                     [](const CaseOutcome& c) { return c.status != CaseStatus::Pass; });
    result.overall = (result.exit_code == 0 && !any_bad) ? Overall::Pass : Overall::Fail;
  }
  result.raw_log = std::move(log);
  return result;
}

}  // namespace safedit::verifier
