#include "sloppy/external_model.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "sloppy/error.hpp"

extern char** environ;

namespace sloppy {

namespace fs = std::filesystem;

void ExternalModelSpec::validate() const {
  if (executable.empty()) throw Error(ErrorKind::InvalidArgument, "external model executable is empty");
  if (!(timeout_seconds > 0.0)) throw Error(ErrorKind::InvalidArgument, "external model timeout must be > 0");
}

ExternalModel::ExternalModel(ExternalModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (!spec_.variables.empty()) discovered_ = spec_.variables;
}

std::vector<std::string> ExternalModel::variable_names() const {
  std::lock_guard lock(names_mutex_);
  if (!discovered_) throw Error(ErrorKind::ProtocolError, "variable names not yet discovered from any run");
  return *discovered_;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tail(const std::string& text, std::size_t n = 400) {
  return text.size() <= n ? text : "..." + text.substr(text.size() - n);
}

// Unique scratch directory per call.
fs::path make_scratch_dir() {
  std::string templ = (fs::temp_directory_path() / "sloppy-ext-XXXXXX").string();
  if (::mkdtemp(templ.data()) == nullptr) {
    throw Error(ErrorKind::LaunchFailure, "cannot create scratch directory under " +
                                              fs::temp_directory_path().string());
  }
  return fs::path(templ);
}

}  // namespace

Series parse_protocol_csv(const std::string& text, std::size_t steps, const std::vector<std::string>& expected,
                          std::vector<std::string>* header_out) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty()) throw Error(ErrorKind::ProtocolError, "output file is empty");

  const auto header = split_fields(lines[0]);
  if (!expected.empty() && header != expected) {
    std::string want;
    for (const auto& v : expected) want += (want.empty() ? "" : ",") + v;
    throw Error(ErrorKind::ProtocolError, "header mismatch: expected '" + want + "', got '" + lines[0] + "'");
  }
  const std::size_t rows = lines.size() - 1;
  if (rows != steps) {
    throw Error(ErrorKind::ProtocolError,
                "row count: expected " + std::to_string(steps) + " data rows, got " + std::to_string(rows));
  }
  const std::size_t k_count = header.size();
  Series out(k_count, steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto fields = split_fields(lines[t + 1]);
    if (fields.size() != k_count) {
      throw Error(ErrorKind::ProtocolError, "row " + std::to_string(t + 1) + " has " + std::to_string(fields.size()) +
                                                " fields, expected " + std::to_string(k_count));
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto& f = fields[k];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw Error(ErrorKind::ProtocolError,
                    "row " + std::to_string(t + 1) + ", column '" + header[k] + "': invalid value '" + f + "'");
      }
      out(k, t) = v;
    }
  }
  if (header_out) *header_out = header;
  return out;
}

Series ExternalModel::simulate(const ParameterPoint& params, std::uint64_t seed, std::size_t steps) const {
  const fs::path dir = make_scratch_dir();
  const fs::path params_path = dir / "params.json";
  const fs::path out_path = dir / "out.csv";
  const fs::path stdout_path = dir / "stdout.log";
  const fs::path stderr_path = dir / "stderr.log";
  bool ok = false;
  auto cleanup = [&] {
    std::error_code ec;
    if (ok || !spec_.keep_failed_runs) fs::remove_all(dir, ec);
  };

  try {
    {
      std::ofstream pj(params_path, std::ios::binary);
      pj << point_to_json(params).dump() << '\n';
    }

    std::vector<std::string> args{spec_.executable};
    args.insert(args.end(), spec_.extra_args.begin(), spec_.extra_args.end());
    args.insert(args.end(), {"--params", params_path.string(), "--seed", std::to_string(seed), "--steps",
                             std::to_string(steps), "--out", out_path.string()});
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC,
                                     0644);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC,
                                     0644);
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    // Own process group so a timeout can take down any children too.
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);

    pid_t pid = 0;
    const int rc = ::posix_spawnp(&pid, spec_.executable.c_str(), &actions, &attr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    if (rc != 0) {
      throw Error(ErrorKind::LaunchFailure, "cannot start '" + spec_.executable + "': " + std::strerror(rc));
    }

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(spec_.timeout_seconds);
    int status = 0;
    auto pause = std::chrono::microseconds(200);
    while (true) {
      const pid_t w = ::waitpid(pid, &status, WNOHANG);
      if (w == pid) break;
      if (w < 0) throw Error(ErrorKind::LaunchFailure, std::string("waitpid failed: ") + std::strerror(errno));
      if (std::chrono::steady_clock::now() >= deadline) {
        ::kill(-pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        throw Error(ErrorKind::Timeout, "'" + spec_.executable + "' exceeded " +
                                            std::to_string(spec_.timeout_seconds) + " s (scratch " + dir.string() +
                                            ")");
      }
      std::this_thread::sleep_for(pause);
      pause = std::min(pause * 2, std::chrono::microseconds(20000));
    }
    if (WIFEXITED(status) && WEXITSTATUS(status) == 127 && !fs::exists(out_path)) {
      throw Error(ErrorKind::LaunchFailure,
                  "'" + spec_.executable + "' could not be executed: " + tail(read_file(stderr_path)));
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      const std::string how = WIFEXITED(status) ? "exit status " + std::to_string(WEXITSTATUS(status))
                                                : "signal " + std::to_string(WTERMSIG(status));
      throw Error(ErrorKind::ModelFailure, "'" + spec_.executable + "' failed with " + how + ": " +
                                               tail(read_file(stderr_path)) + " (scratch " + dir.string() + ")");
    }
    if (!fs::exists(out_path)) {
      throw Error(ErrorKind::ProtocolError, "missing output file " + out_path.string());
    }

    std::vector<std::string> expected;
    {
      std::lock_guard lock(names_mutex_);
      if (discovered_) expected = *discovered_;
    }
    std::vector<std::string> header;
    Series out = parse_protocol_csv(read_file(out_path), steps, expected, &header);
    {
      std::lock_guard lock(names_mutex_);
      if (!discovered_) {
        discovered_ = header;
      } else if (*discovered_ != header) {
        throw Error(ErrorKind::ProtocolError, "header changed between runs");
      }
    }
    ok = true;
    cleanup();
    return out;
  } catch (...) {
    cleanup();
    throw;
  }
}

}  // namespace sloppy
